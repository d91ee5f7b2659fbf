"""Tail-bound evaluators and their Monte Carlo verification.

Three closed-form bounds are covered, each paired with an empirical tail
estimator and a consistency verdict:

* norm-sub-Gaussian: P(||v - E v|| >= t) <= 2 exp(-t^2 / (2 xi^2)) for a
  layer output bounded by ||v|| <= xi;
* bounded-range (Hoeffding): P(|s - E s| >= t) <= 2 exp(-2 t^2 / (b-a)^2);
* bounded-increment martingale: P(||v_l|| >= M a) < 2 exp(1 - (Ma-1)^2 / (2l)).

xi comes from the interval certificate in :mod:`tropnet.networks`, so the
analytic side never peeks at the samples it is checked against.  A report
is "violated" only when the empirical tail exceeds the analytic value by
more than three standard errors, which turns the probabilistic statement
into a deterministic seed-pinned test.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .networks import NetworkSpec, propagate_intervals, simulate_layer_outputs
from .seeding import stream

#: Slack multiplier converting a probabilistic bound into a pinned verdict.
SE_SLACK = 3.0


# ---------------------------------------------------------------------------
# Closed-form bounds
# ---------------------------------------------------------------------------

def nsg_bound(t: float, xi: float) -> float:
    """Norm-sub-Gaussian tail bound 2 exp(-t^2 / (2 xi^2))."""
    if xi <= 0:
        raise ValueError(f"need xi > 0, got {xi}")
    return 2.0 * math.exp(-(t * t) / (2.0 * xi * xi))


def hoeffding_bound(t: float, a: float, b: float) -> float:
    """Bounded-range tail bound 2 exp(-2 t^2 / (b-a)^2)."""
    if a >= b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    return 2.0 * math.exp(-2.0 * t * t / ((b - a) ** 2))


def mgale_bound(a: float, m: float, l: int) -> float:
    """Bounded-increment martingale tail bound 2 exp(1 - (Ma-1)^2 / (2l)).

    Valid for P(||v_l|| >= M a) when increments have norm at most M; the
    value exceeds 1 (vacuous) for small Ma and loosens as l grows.
    """
    if a <= 0 or m <= 0 or l < 1:
        raise ValueError("need a > 0, M > 0, l >= 1")
    return 2.0 * math.exp(1.0 - (m * a - 1.0) ** 2 / (2.0 * l))


def region_count_bound(t: float, b1: int) -> float:
    """Tail bound 2 exp(-2 t^2 / (b1-1)^2) for region counts in [1, b1]."""
    if b1 <= 1:
        raise ValueError(f"need b1 > 1, got {b1}")
    return hoeffding_bound(t, 1.0, float(b1))


# ---------------------------------------------------------------------------
# Empirical estimation
# ---------------------------------------------------------------------------

def estimate_tail(samples: np.ndarray, center: np.ndarray, t: float):
    """Fraction of samples with ||sample - center||_2 >= t, with its SE."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    n = samples.shape[0]
    if n < 1000:
        raise ValueError(f"tail estimation needs n >= 1000 samples, got {n}")
    center = np.asarray(center, dtype=float).reshape(-1)
    if center.shape[0] != samples.shape[1]:
        raise ValueError("sample and center dimensions disagree")
    dist = np.linalg.norm(samples - center, axis=1)
    p_hat = float(np.mean(dist >= t))
    se = math.sqrt(p_hat * (1.0 - p_hat) / n)
    return p_hat, se


@dataclass(frozen=True)
class BoundReport:
    """One analytic-vs-empirical tail comparison.

    The stored analytic value is clamped at 2 (any probability bound above
    2 is equally vacuous), keeping reports on a common scale; the verdict
    uses the same clamped value.
    """

    kind: str          # "nSG" | "hoeffding" | "martingale" | "region-count"
    layer: int
    t: float
    analytic: float
    empirical: float
    se: float
    n: int
    params: tuple = ()

    @property
    def verdict(self) -> str:
        return "violated" if self.empirical - SE_SLACK * self.se > self.analytic \
            else "consistent"

    def __post_init__(self):
        object.__setattr__(self, "analytic", min(float(self.analytic), 2.0))
        if not 0.0 <= self.empirical <= 1.0:
            raise ValueError("empirical tail estimate must lie in [0, 1]")


def reports_to_rows(reports: Sequence[BoundReport]) -> list[list]:
    rows = [["kind", "l", "t", "analytic", "empirical", "se", "n", "verdict"]]
    for r in reports:
        rows.append([r.kind, r.layer, repr(float(r.t)), repr(float(r.analytic)),
                     repr(float(r.empirical)), repr(float(r.se)), r.n, r.verdict])
    return rows


def reports_to_csv(reports: Sequence[BoundReport], path):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(reports_to_rows(reports))


def reports_to_json(reports: Sequence[BoundReport]) -> str:
    return json.dumps([
        {"kind": r.kind, "l": r.layer, "t": r.t, "analytic": r.analytic,
         "empirical": r.empirical, "se": r.se, "n": r.n, "verdict": r.verdict}
        for r in reports
    ], sort_keys=True)


# ---------------------------------------------------------------------------
# xi certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class XiCertificate:
    """Interval-propagated norm bound for one layer's output."""

    layer: int
    xi: float
    empirical_max: float = float("nan")

    def __post_init__(self):
        if np.isfinite(self.empirical_max) and self.empirical_max > self.xi + 1e-9:
            raise ValueError(
                f"certificate violated: empirical max {self.empirical_max} "
                f"exceeds xi={self.xi} at layer {self.layer}")


def xi_certificate(spec: NetworkSpec, layer: int,
                   nu_samples: np.ndarray | None = None) -> XiCertificate:
    """Certified bound xi with ||nu^(layer)|| <= xi for every draw.

    The bound propagates the elementwise intervals of the initialization
    and parameter distributions through the pair recursion.  When samples
    are supplied, the largest observed norm is recorded alongside (and
    checked against) the certificate.
    """
    if not 1 <= layer <= spec.depth:
        raise ValueError(f"layer {layer} outside 1..{spec.depth}")
    intervals = propagate_intervals(spec)
    xi = intervals[layer].xi
    emp = float("nan")
    if nu_samples is not None:
        emp = float(np.max(np.linalg.norm(np.atleast_2d(nu_samples), axis=1)))
    return XiCertificate(layer=layer, xi=xi, empirical_max=emp)


# ---------------------------------------------------------------------------
# Layer concentration verification
# ---------------------------------------------------------------------------

def verify_layer_concentration(spec: NetworkSpec, t_grid: Sequence[float],
                               n: int = 100_000, seed: int = 0,
                               layers: Sequence[int] | None = None,
                               x=None, pilot_n: int | None = None,
                               simulate=simulate_layer_outputs) -> list[BoundReport]:
    """Monte Carlo check of the norm-sub-Gaussian layer bound.

    The layer mean is estimated on an independent pilot set to avoid reuse
    bias; tails on the evaluation set are then compared against
    2 exp(-t^2 / (2 xi_l^2)) with xi_l from the interval certificate.  A
    batch-producing ``simulate`` callable may be injected (the harness
    passes its worker-pool variant; results are identical by the stream
    discipline).
    """
    layers = list(layers) if layers is not None else list(range(1, spec.depth + 1))
    pilot_n = pilot_n or n
    pilot = simulate(spec, pilot_n, seed, x=x, tag="pilot")
    sample = simulate(spec, n, seed, x=x, tag="eval")
    intervals = propagate_intervals(spec)
    reports = []
    for l in layers:
        center = pilot[l - 1].mean(axis=0)
        xi = intervals[l].xi
        for t in t_grid:
            p_hat, se = estimate_tail(sample[l - 1], center, float(t))
            reports.append(BoundReport(kind="nSG", layer=l, t=float(t),
                                       analytic=nsg_bound(float(t), xi),
                                       empirical=p_hat, se=se, n=n,
                                       params=(xi,)))
    return reports


def region_count_concentration(counts: Sequence[int], b1: int,
                               t_grid: Sequence[float]) -> list[BoundReport]:
    """Check the bounded-range tail bound for sampled region counts."""
    counts = np.asarray(counts, dtype=float)
    if b1 <= 1:
        raise ValueError(f"need b1 > 1, got {b1}")
    if np.any(counts < 1) or np.any(counts > b1):
        raise ValueError(f"region counts must lie in [1, {b1}]")
    center = np.array([counts.mean()])
    reports = []
    for t in t_grid:
        p_hat, se = estimate_tail(counts[:, None], center, float(t)) \
            if len(counts) >= 1000 else _small_tail(counts, center[0], float(t))
        reports.append(BoundReport(kind="region-count", layer=0, t=float(t),
                                   analytic=region_count_bound(float(t), b1),
                                   empirical=p_hat, se=se,
                                   n=len(counts), params=(b1,)))
    return reports


def _small_tail(values: np.ndarray, center: float, t: float):
    p_hat = float(np.mean(np.abs(values - center) >= t))
    return p_hat, math.sqrt(p_hat * (1.0 - p_hat) / len(values))


# ---------------------------------------------------------------------------
# Convex order and martingale grades
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvexOrderReport:
    """Falsification outcome for the hypothesis  X1 <=_cx X2."""

    falsified: bool
    worst_function: str
    worst_z: float
    threshold: float
    n_functions: int


def _test_family(dim: int, k: int, pooled: np.ndarray, rng: np.random.Generator):
    """Finite family of convex test functions phi: R^dim -> R."""
    family = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        family.append((f"linear[+e{i}]", lambda s, u=e: s @ u))
        family.append((f"linear[-e{i}]", lambda s, u=e: -(s @ u)))
    family.append(("coordinate-max", lambda s: s.max(axis=1)))
    lo, hi = pooled.min(axis=0), pooled.max(axis=0)
    scale = float(np.max(np.abs(pooled))) or 1.0
    for i in range(k):
        v = rng.uniform(lo, hi)
        family.append((f"norm-anchor#{i}", lambda s, v=v: np.linalg.norm(s - v, axis=1)))
        u = rng.standard_normal(dim)
        u /= np.linalg.norm(u)
        theta = rng.uniform(-scale, scale)
        family.append((f"hinge#{i}", lambda s, u=u, th=theta: np.maximum(s @ u - th, 0.0)))
        w = rng.standard_normal(dim)
        w /= np.linalg.norm(w)
        family.append((f"exp#{i}", lambda s, w=w, sc=scale: np.exp((s @ w) / sc)))
    return family


def convex_order_check(samples1: np.ndarray, samples2: np.ndarray,
                       k: int = 16, alpha: float = 0.01,
                       seed: int = 0) -> ConvexOrderReport:
    """Falsification test of  X1 <=_cx X2  over a finite convex family.

    For each phi, the one-sided hypothesis E[phi(X1)] <= E[phi(X2)] is
    tested at level alpha split across the family (Bonferroni), so the
    familywise false-alarm rate stays at alpha.  A "not-falsified" verdict
    is evidence, not proof: the convex order quantifies over all convex
    functions and cannot be certified from samples.
    """
    s1 = np.atleast_2d(np.asarray(samples1, dtype=float))
    s2 = np.atleast_2d(np.asarray(samples2, dtype=float))
    if s1.shape[1] != s2.shape[1]:
        raise ValueError("sample dimensions disagree")
    rng = stream(seed, "convex-order")
    family = _test_family(s1.shape[1], k, np.vstack([s1, s2]), rng)
    threshold = float(norm.ppf(1.0 - alpha / len(family)))
    worst_name, worst_z = "", -math.inf
    for name, phi in family:
        v1, v2 = phi(s1), phi(s2)
        diff = float(v1.mean() - v2.mean())
        se = math.sqrt(v1.var(ddof=1) / len(v1) + v2.var(ddof=1) / len(v2))
        if se == 0.0:
            z = math.inf if diff > 0 else (0.0 if diff == 0 else -math.inf)
        else:
            z = diff / se
        if z > worst_z:
            worst_name, worst_z = name, z
    return ConvexOrderReport(falsified=worst_z > threshold,
                             worst_function=worst_name, worst_z=worst_z,
                             threshold=threshold, n_functions=len(family))


@dataclass(frozen=True)
class MartingaleSpec:
    """A claimed martingale structure for a constant-width sequence.

    ``kind`` says whether the raw layer outputs or their centered versions
    are meant; ``increment_bound`` is the constant M entering the tail
    bound and must dominate every observed increment norm.
    """

    kind: str = "raw"          # "raw" | "centered"
    increment_bound: float = 1.0
    width: int = 1
    grade: str = "very-weak"   # "strong" | "weak" | "very-weak"

    def __post_init__(self):
        if self.kind not in ("raw", "centered"):
            raise ValueError(f"unknown sequence kind {self.kind!r}")
        if self.grade not in ("strong", "weak", "very-weak"):
            raise ValueError(f"unknown martingale grade {self.grade!r}")
        if self.increment_bound <= 0 or self.width < 1:
            raise ValueError("need a positive increment bound and width")

    def validate_against(self, trajectories: np.ndarray):
        """Check width constancy and increment domination on realized runs."""
        traj = np.asarray(trajectories, dtype=float)
        if traj.ndim != 3 or traj.shape[2] != self.width:
            raise ValueError(f"trajectories must have constant width {self.width}")
        observed = float(np.linalg.norm(np.diff(traj, axis=1), axis=2).max())
        if observed > self.increment_bound + 1e-9:
            raise ValueError(f"observed increment norm {observed} exceeds the "
                             f"claimed bound {self.increment_bound}")


@dataclass(frozen=True)
class MartingaleGradeReport:
    """Convex-order falsification of the martingale grades of a sequence."""

    very_weak_falsified: bool
    weak_falsified: bool
    worst_pair: tuple[int, int]
    worst_function: str
    increment_bound: float
    pair_reports: tuple


def martingale_grade_check(trajectories: np.ndarray, k: int = 16,
                           alpha: float = 0.01, seed: int = 0) -> MartingaleGradeReport:
    """Grade a constant-width vector sequence as a (very-)weak martingale.

    ``trajectories`` has shape (n_runs, steps+1, p) with the step-0 state
    included.  Consecutive pairs probe the very-weak grade; all ordered
    pairs j < l probe the weak grade.  Also estimates the largest observed
    increment norm M, the constant entering the martingale tail bound.
    """
    traj = np.asarray(trajectories, dtype=float)
    if traj.ndim != 3:
        raise ValueError("expected trajectories of shape (runs, steps+1, width)")
    steps = traj.shape[1] - 1
    increments = np.linalg.norm(np.diff(traj, axis=1), axis=2)
    m_bound = float(increments.max())

    pair_reports = []
    worst = ("", -math.inf, (0, 0))
    weak_falsified = False
    vw_falsified = False
    for l in range(1, steps + 1):
        for j in range(l):
            rep = convex_order_check(traj[:, j], traj[:, l], k=k, alpha=alpha,
                                     seed=seed + 7919 * j + l)
            pair_reports.append(((j, l), rep))
            if rep.worst_z > worst[1]:
                worst = (rep.worst_function, rep.worst_z, (j, l))
            if rep.falsified:
                weak_falsified = True
                if j == l - 1:
                    vw_falsified = True
    return MartingaleGradeReport(
        very_weak_falsified=vw_falsified,
        weak_falsified=weak_falsified,
        worst_pair=worst[2],
        worst_function=worst[0],
        increment_bound=m_bound,
        pair_reports=tuple(pair_reports),
    )


# ---------------------------------------------------------------------------
# Martingale testbeds
# ---------------------------------------------------------------------------

def simulate_random_walk(steps: int, n: int, seed: int = 0, dim: int = 1) -> np.ndarray:
    """n trajectories of the +-1 coordinate walk, shape (n, steps+1, dim).

    Each step adds +-1 (fair) to one uniformly chosen coordinate, so every
    increment has Euclidean norm exactly 1 and the sequence is a strong
    martingale started at the origin.
    """
    rng = stream(seed, "random-walk")
    traj = np.zeros((n, steps + 1, dim))
    for s in range(1, steps + 1):
        signs = rng.choice([-1.0, 1.0], size=n)
        coords = rng.integers(0, dim, size=n) if dim > 1 else np.zeros(n, dtype=int)
        traj[:, s] = traj[:, s - 1]
        traj[np.arange(n), s, coords] += signs
    return traj


def walk_tail_reports(traj: np.ndarray, a_grid: Sequence[float],
                      m: float = 1.0) -> list[BoundReport]:
    """Martingale bound reports for each step of a walk against its tails."""
    n, steps_plus, _ = traj.shape
    reports = []
    center = np.zeros(traj.shape[2])
    for l in range(1, steps_plus):
        for a in a_grid:
            p_hat, se = estimate_tail(traj[:, l], center, m * float(a))
            reports.append(BoundReport(kind="martingale", layer=l, t=m * float(a),
                                       analytic=mgale_bound(float(a), m, l),
                                       empirical=p_hat, se=se, n=n,
                                       params=(m, l)))
    return reports
