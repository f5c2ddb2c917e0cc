import itertools
from fractions import Fraction

import numpy as np
import pytest

from stablelab.engine import Matching
from stablelab.prefgen import Instance


def all_instances(n1, n2):
    """Every preference system of the given shape; each is equally likely."""
    men_rows = list(itertools.permutations(range(n2)))
    women_rows = list(itertools.permutations(range(n1)))
    for mp in itertools.product(men_rows, repeat=n1):
        for wp in itertools.product(women_rows, repeat=n2):
            yield Instance(np.array(mp), np.array(wp))


def identity(n1, n2):
    return Matching.from_wives(range(n1), n2)


def make(men, women):
    return Instance(np.array(men), np.array(women))


@pytest.fixture
def inst_2x3():
    # men m0:[w0,w1,w2], m1:[w0,w2,w1]; women w0:[m1,m0], w1:[m0,m1], w2:[m0,m1]
    return make([[0, 1, 2], [0, 2, 1]], [[1, 0], [0, 1], [0, 1]])


@pytest.fixture
def inst_2x2_two():
    # the classic instance with two stable matchings
    return make([[0, 1], [1, 0]], [[1, 0], [0, 1]])


@pytest.fixture(scope="session")
def exhaustive_2x2():
    return list(all_instances(2, 2))


@pytest.fixture(scope="session")
def exhaustive_2x3():
    return list(all_instances(2, 3))


def frac(num, den):
    return Fraction(num, den)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
