"""Stable matchings in unbalanced random markets."""
from .engine import UNMATCHED, Matching, RankPair, Side, is_stable, propose, ranks
from .errors import CapExceeded, DomainError, InternalError, OracleRefusal
from .lattice import (Rotation, StableSet, brute_force_all, eliminate, enumerate_all,
                      exposed_rotations, multiplicity)
from .prefgen import Instance, LatentMatrices, gen_instance, gen_latents, instance_from_latents

__version__ = "0.1.0"
