"""Batch experiments over random instances and theory-vs-observation checks."""
from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

from . import lattice, theory
from . import rng as _rng
from .engine import Side, propose
from .errors import CapExceeded, DomainError
from .prefgen import gen_instance

log = logging.getLogger(__name__)

ENUMERATE_LIMIT = 2000
Q_TOL = 0.15
R_TOL = 0.15
ES_TOL = 0.30
CONC_FAIL_FRAC = 0.05
MULT_THRESHOLD = 0.10
COUPON_SLACK = 1.02


class Mode(str, enum.Enum):
    ENUMERATE = "enumerate"
    EXTREMES_ONLY = "extremes"


def default_mode(n1: int) -> Mode:
    return Mode.ENUMERATE if n1 < ENUMERATE_LIMIT else Mode.EXTREMES_ONLY


@dataclass
class TrialRecord:
    seed: int
    n1: int
    n2: int
    S: Optional[int]
    q_min: int
    q_max: int
    r_min: int
    r_max: int
    proposals_men: int
    m_frac: float
    w_frac: float
    total_rotation_length: Optional[int]
    wall_time: float
    censored: bool = False
    violations: list[str] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def run_trial(n1: int, n2: int, seed: int, mode: Mode = Mode.ENUMERATE,
              cap: int = lattice.DEFAULT_CAP) -> TrialRecord:
    """One random instance: extremes always, the full stable set in ENUMERATE mode."""
    t0 = time.perf_counter()
    inst = gen_instance(n1, n2, seed)
    M1, rp1 = propose(inst, Side.MEN)
    Mw, rpw = propose(inst, Side.WOMEN)
    violations = []
    if rp1.proposals != rp1.Q:
        violations.append("proposals != Q(men-optimal)")
    if M1.matched_women != Mw.matched_women:
        violations.append("matched women differ between extremes")

    mr = inst.mr
    S: Optional[int] = 1 if M1 == Mw else None
    m_frac = sum(a != b for a, b in zip(M1.wife_of, Mw.wife_of)) / n1
    w_frac = sum(a != b for a, b in zip(M1.husband_of, Mw.husband_of)) / n2
    rot_len: Optional[int] = 0 if M1 == Mw else None
    q = (rp1.Q, rpw.Q)
    r = (rpw.R, rp1.R)
    censored = False

    if Mode(mode) is Mode.ENUMERATE:
        try:
            ss = lattice.enumerate_all(inst, cap=cap)
        except CapExceeded:
            censored = True
            S = None
        else:
            S = len(ss)
            m_frac, w_frac, rot_len = lattice.multiplicity(ss)
            rps = [lattice._ranks(inst, M) for M in ss.matchings]
            qs = [p.Q for p in rps]
            rs = [p.R for p in rps]
            q = (min(qs), max(qs))
            r = (min(rs), max(rs))
            if not lattice.matched_women_invariant(ss.matchings):
                violations.append("matched women vary across the stable set")
            if q[0] != rp1.Q or r[1] != rp1.R:
                violations.append("men-optimal matching is not the Q-min/R-max extreme")
            if q[1] != rpw.Q or r[0] != rpw.R:
                violations.append("women-optimal matching is not the Q-max/R-min extreme")
            for M in ss.matchings:
                if any(not mr[m][M1.wife_of[m]] <= mr[m][w] <= mr[m][Mw.wife_of[m]]
                       for m, w in enumerate(M.wife_of)):
                    violations.append("a man's stable partner lies outside his extremes")
                    break
    for v in violations:
        log.error("trial seed=%d (%d, %d): %s", seed, n1, n2, v)
    return TrialRecord(seed, n1, n2, S, q[0], q[1], r[0], r[1], rp1.proposals,
                       m_frac, w_frac, rot_len, time.perf_counter() - t0, censored, violations)


def _trial_args(n1, n2, trials, seed, mode, cap):
    return [(n1, n2, _rng.mix(seed, t), mode, cap) for t in range(trials)]


def _run_star(args):
    return run_trial(*args)


@dataclass
class Verdict:
    name: str
    passed: Optional[bool]      # None: not applicable to this report
    observed: Optional[float]
    predicted: Optional[float]
    tolerance: Optional[float]
    gating: bool = True
    note: str = ""

    def to_json(self) -> dict[str, Any]:
        return asdict(self)

    def line(self) -> str:
        status = {True: "PASS", False: "FAIL", None: "N/A "}[self.passed]
        if not self.gating and self.passed is not None:
            status = "INFO"
        fmt = lambda v: "-" if v is None else f"{v:.6g}"
        return (f"{status} {self.name:<10} observed={fmt(self.observed)} "
                f"predicted={fmt(self.predicted)} tol={fmt(self.tolerance)} {self.note}").rstrip()


AGG_FIELDS = ("S", "q_min", "q_max", "r_min", "r_max", "proposals_men",
              "m_frac", "w_frac", "total_rotation_length", "wall_time")


def aggregate(records: list[TrialRecord]) -> dict[str, dict[str, float]]:
    out = {}
    for name in AGG_FIELDS:
        vals = np.array([getattr(t, name) for t in records if getattr(t, name) is not None], dtype=float)
        if len(vals) == 0:
            out[name] = {"count": 0}
            continue
        q05, q50, q95 = np.quantile(vals, [0.05, 0.5, 0.95])
        out[name] = {"count": int(len(vals)), "mean": float(vals.mean()),
                     "std": float(vals.std(ddof=1)) if len(vals) > 1 else 0.0,
                     "min": float(vals.min()), "max": float(vals.max()),
                     "q05": float(q05), "q50": float(q50), "q95": float(q95)}
    return out


@dataclass
class ExperimentReport:
    config: dict[str, Any]
    trials: list[TrialRecord]
    aggregates: dict[str, dict[str, float]]
    prediction: Optional[theory.Prediction]
    verdicts: list[Verdict] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return self.config["n1"], self.config["n2"]

    @property
    def censored(self) -> int:
        return sum(t.censored for t in self.trials)

    @property
    def passed(self) -> bool:
        return all(v.passed is not False for v in self.verdicts if v.gating)

    def mean(self, name: str) -> float:
        return self.aggregates[name].get("mean", math.nan)

    def to_json(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "trials": [t.to_json() for t in self.trials],
            "aggregates": self.aggregates,
            "prediction": None if self.prediction is None else self.prediction.to_json(),
            "verdicts": [v.to_json() for v in self.verdicts],
            "censored": self.censored,
        }

    @classmethod
    def from_json(cls, obj: dict[str, Any]) -> "ExperimentReport":
        pred = obj.get("prediction")
        return cls(
            config=obj["config"],
            trials=[TrialRecord(**t) for t in obj["trials"]],
            aggregates=obj["aggregates"],
            prediction=None if pred is None else theory.Prediction(**pred),
            verdicts=[Verdict(**v) for v in obj.get("verdicts", [])],
        )


def run_experiment(n1: int, n2: int, trials: int, seed: int, mode: Mode | str | None = None,
                   cap: int = lattice.DEFAULT_CAP, workers: int = 1,
                   tolerances: Optional[dict[str, float]] = None) -> ExperimentReport:
    """Run ``trials`` independent instances of shape (n1, n2) and check them against theory.

    Trial t uses the instance seed ``mix(seed, t)``, so records do not depend
    on ``workers``.
    """
    if trials < 1:
        raise DomainError("trials must be positive")
    if n1 < 1 or n2 < n1:
        raise DomainError(f"need 1 <= n1 <= n2, got n1={n1}, n2={n2}")
    mode = default_mode(n1) if mode is None else Mode(mode)
    args = _trial_args(n1, n2, trials, seed, mode, cap)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_run_star, args, chunksize=max(1, trials // (4 * workers))))
    else:
        records = [run_trial(*a) for a in args]
    config = {"n1": n1, "n2": n2, "trials": trials, "seed": seed, "mode": mode.value, "cap": cap}
    if tolerances:
        config["tolerances"] = dict(tolerances)
    pred = theory.predict((n1, n2)) if n2 > n1 else None
    report = ExperimentReport(config, records, aggregate(records), pred)
    report.verdicts = verify(report, **(tolerances or {}))
    return report


def _max_rel_dev(lo: float, hi: float, center: float) -> float:
    return max(abs(lo / center - 1), abs(hi / center - 1))


def verify(report: ExperimentReport, q_tol: float = Q_TOL, r_tol: float = R_TOL,
           es_tol: float = ES_TOL, fail_frac: float = CONC_FAIL_FRAC,
           mult_threshold: float = MULT_THRESHOLD, coupon_slack: float = COUPON_SLACK) -> list[Verdict]:
    """Named checks of a report against the theory predictions."""
    n1, n2 = report.shape
    pred = report.prediction
    done = [t for t in report.trials if not t.censored]
    out = []

    sizes = [t.S for t in done]
    if pred is None or not done or any(s is None for s in sizes):
        out.append(Verdict("ES_RATIO", None, None, None, es_tol,
                           note="needs n2 > n1 and full enumeration"))
    else:
        mean_s = float(np.mean(sizes))
        out.append(Verdict("ES_RATIO", abs(mean_s / pred.ES - 1) <= es_tol, mean_s, pred.ES, es_tol))

    if pred is None or not done:
        out.append(Verdict("Q_CONC", None, None, None, q_tol))
        out.append(Verdict("R_CONC", None, None, None, r_tol))
    else:
        frac = float(np.mean([_max_rel_dev(t.q_min, t.q_max, pred.q_center) > q_tol for t in done]))
        out.append(Verdict("Q_CONC", frac <= fail_frac, frac, pred.q_center, q_tol,
                           note=f"fraction of trials outside +-{q_tol:g} of n2*s"))
        rt = r_tol * max(1.0, pred.delta_star)
        frac = float(np.mean([_max_rel_dev(t.r_min, t.r_max, pred.r_center) > rt for t in done]))
        gating = n2 <= n1 ** 1.5
        out.append(Verdict("R_CONC", frac <= fail_frac, frac, pred.r_center, rt, gating=gating,
                           note="fraction of trials outside tolerance of n1^2*f(s)"
                           + ("" if gating else "; n2 > n1^1.5, informational")))

    if done:
        mm = float(np.mean([t.m_frac for t in done]))
        ww = float(np.mean([t.w_frac for t in done]))
        out.append(Verdict("MULT_FRAC", mm <= mult_threshold and ww <= mult_threshold,
                           max(mm, ww), 0.0, mult_threshold, note=f"m_frac={mm:.4g} w_frac={ww:.4g}"))
        cm = theory.coupon_mean(n1, n2)
        mp = float(np.mean([t.proposals_men for t in report.trials]))
        out.append(Verdict("COUPON", mp <= coupon_slack * cm, mp, cm, coupon_slack))
    else:
        out.append(Verdict("MULT_FRAC", None, None, None, mult_threshold))
        out.append(Verdict("COUPON", None, None, None, coupon_slack))

    women_bad = sum(any("matched women" in v for v in t.violations) for t in report.trials)
    out.append(Verdict("WOMEN_SET", women_bad == 0, float(women_bad), 0.0, 0.0))
    bad = sum(bool(t.violations) for t in report.trials)
    out.append(Verdict("STRUCTURE", bad == 0, float(bad), 0.0, 0.0,
                       note="trials with any structural violation"))
    return out


CSV_COLUMNS = ("n1", "n2", "trials", "mean_S", "pred_S", "mean_qmin", "mean_qmax", "q_center",
               "mean_rmin", "mean_rmax", "r_center", "m_frac", "w_frac", "coupon_mean",
               "mean_proposals")


def summary_row(report: ExperimentReport) -> dict[str, Any]:
    n1, n2 = report.shape
    pred = report.prediction
    nan = math.nan
    return {
        "n1": n1, "n2": n2, "trials": len(report.trials),
        "mean_S": report.mean("S"), "pred_S": pred.ES if pred else nan,
        "mean_qmin": report.mean("q_min"), "mean_qmax": report.mean("q_max"),
        "q_center": pred.q_center if pred else nan,
        "mean_rmin": report.mean("r_min"), "mean_rmax": report.mean("r_max"),
        "r_center": pred.r_center if pred else nan,
        "m_frac": report.mean("m_frac"), "w_frac": report.mean("w_frac"),
        "coupon_mean": theory.coupon_mean(n1, n2),
        "mean_proposals": report.mean("proposals_men"),
    }


def summary_csv(reports: Iterable[ExperimentReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        w.writerow(summary_row(rep))
    return buf.getvalue()


def write_trial_log(report: ExperimentReport, path: str | Path) -> None:
    with open(path, "w") as fh:
        for t in report.trials:
            fh.write(json.dumps(t.to_json()) + "\n")


def load_reports(path: str | Path) -> list[ExperimentReport]:
    p = Path(path)
    if not p.exists():
        return []
    out = []
    with open(p) as fh:
        for line in fh:
            if line.strip():
                out.append(ExperimentReport.from_json(json.loads(line)))
    return out


def sweep(grid: Iterable[tuple[int, int]], trials: int, seed: int, out_path: str | Path,
          mode: Mode | str | None = None, cap: int = lattice.DEFAULT_CAP,
          workers: int = 1) -> list[ExperimentReport]:
    """Run each shape in ``grid`` and append its report to a JSON-lines file.

    Shapes already present in the file are skipped, so an interrupted
    sweep resumes where it stopped.  Returns the reports for every grid
    shape, loaded or freshly run, in grid order.
    """
    Path(out_path).touch()
    existing = {rep.shape: rep for rep in load_reports(out_path)}
    results = []
    for n1, n2 in grid:
        key = (int(n1), int(n2))
        if key in existing:
            log.info("sweep: skipping %s, already in %s", key, out_path)
            results.append(existing[key])
            continue
        rep = run_experiment(key[0], key[1], trials, seed, mode=mode, cap=cap, workers=workers)
        with open(out_path, "a") as fh:
            fh.write(json.dumps(rep.to_json()) + "\n")
        existing[key] = rep
        results.append(rep)
    return results
