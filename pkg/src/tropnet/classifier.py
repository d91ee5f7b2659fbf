"""Score functions and the expected classifier with its error bounds.

The expected classifier thresholds the Monte Carlo estimate of
E[s(nu(x))] at a decision level c; the expectation here is over the
network's own randomness at a fixed input.  Whenever the estimate sits a
distance t from c, the probability that a fresh stochastic draw lands on
the other side of c is at most exp(-2 t^2 / (b-a)^2) for a score bounded
in [a, b], and the audit routine checks that bound empirically.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bounds import SE_SLACK
from .networks import NetworkSpec, simulate_layer_outputs


class ScoreSpecError(ValueError):
    pass


class DecisionBoundaryError(ValueError):
    """The estimate sits exactly on the decision boundary; no class applies."""


@dataclass(frozen=True)
class ScoreSpec:
    """Bounded scoring rule with a decision threshold strictly inside its range."""

    kind: str = "sigmoid"  # "sigmoid" | "clamped-identity" | "table"
    a: float = 0.0
    b: float = 1.0
    c: float = 0.5
    table: tuple = ()      # ((v, s), ...) strictly increasing in both coordinates
    injective: bool = True

    def __post_init__(self):
        if self.kind not in ("sigmoid", "clamped-identity", "table"):
            raise ScoreSpecError(f"unknown score kind {self.kind!r}")
        if not self.a < self.c < self.b:
            raise ScoreSpecError(f"need a < c < b, got a={self.a}, c={self.c}, b={self.b}")
        if self.kind == "sigmoid" and (self.a, self.b) != (0.0, 1.0):
            raise ScoreSpecError("sigmoid scores have range closure [0, 1]")
        if self.kind == "table":
            if len(self.table) < 2:
                raise ScoreSpecError("table scores need at least two knots")
            vs = [v for v, _ in self.table]
            ss = [s for _, s in self.table]
            if any(v2 <= v1 for v1, v2 in zip(vs, vs[1:])):
                raise ScoreSpecError("table knots must be strictly increasing in v")
            if self.injective and any(s2 <= s1 for s1, s2 in zip(ss, ss[1:])):
                raise ScoreSpecError("an injective table must be strictly increasing")
            if min(ss) < self.a or max(ss) > self.b:
                raise ScoreSpecError("table values leave the declared range [a, b]")


def score(spec: ScoreSpec, v) -> np.ndarray | float:
    """Apply the scoring rule elementwise; output lies in [a, b]."""
    v = np.asarray(v, dtype=float)
    if spec.kind == "sigmoid":
        out = 1.0 / (1.0 + np.exp(-v))
    elif spec.kind == "clamped-identity":
        out = np.clip(v, spec.a, spec.b)
    else:
        vs = np.array([p[0] for p in spec.table])
        ss = np.array([p[1] for p in spec.table])
        out = np.interp(v, vs, ss)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ExpectedDecision:
    """Label of one input under the expected classifier.

    ``label`` is "C1" when the estimate clears c from above, "C2" from
    below, and "abstain" when the estimate is within the statistical
    resolution band (3 SE) of the boundary.  ``error_bound`` is the
    probability that a single stochastic draw disagrees with the label.
    """

    estimate: float
    se: float
    label: str
    t: float
    error_bound: float
    x: tuple | None = None


def expected_score(spec: NetworkSpec, score_spec: ScoreSpec, x,
                   n: int = 10_000, seed: int = 0):
    """Monte Carlo estimate of E[s(nu(x))] over n network draws at fixed x."""
    if spec.p != 1:
        raise ScoreSpecError(f"the expected classifier needs a scalar output, "
                             f"got width {spec.p}")
    if n < 1000:
        raise ValueError(f"need n >= 1000 draws, got {n}")
    nu = simulate_layer_outputs(spec, n, seed, x=x, tag="score")[-1][:, 0]
    s = np.asarray(score(score_spec, nu))
    est = float(s.mean())
    se = float(s.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return est, se


def expected_classify(estimate: float, score_spec: ScoreSpec,
                      se: float = 0.0, x=None) -> ExpectedDecision:
    """Label an input from its estimated expected score.

    An estimate exactly on the boundary has no class (the expected
    decision boundary itself) and raises; estimates within 3 SE of the
    boundary abstain, since their side of c is not statistically resolved.
    """
    a, b, c = score_spec.a, score_spec.b, score_spec.c
    xt = None if x is None else tuple(float(v) for v in np.atleast_1d(x))
    if not a <= estimate <= b:
        raise ScoreSpecError(f"estimate {estimate} outside score range [{a}, {b}]")
    if estimate == c:
        raise DecisionBoundaryError(
            "estimate equals the decision threshold; the input lies on the "
            "expected decision boundary")
    t = abs(estimate - c)
    if t <= SE_SLACK * se:
        return ExpectedDecision(estimate=estimate, se=se, label="abstain",
                                t=t, error_bound=1.0, x=xt)
    p = min(math.exp(-2.0 * t * t / ((b - a) ** 2)), 1.0)
    label = "C1" if estimate > c else "C2"
    return ExpectedDecision(estimate=estimate, se=se, label=label, t=t,
                            error_bound=p, x=xt)


@dataclass(frozen=True)
class AuditRow:
    """Per-input comparison of observed disagreement with its bound."""

    input_id: int
    estimate: float
    se: float
    label: str
    t: float
    bound: float
    empirical: float
    empirical_se: float
    verdict: str  # "consistent" | "violated" | "unresolved"


def disagreement_audit(spec: NetworkSpec, score_spec: ScoreSpec,
                       inputs: np.ndarray, n: int = 10_000,
                       seed: int = 0) -> list[AuditRow]:
    """Audit how often stochastic decisions disagree with the expected one.

    For each input the expected score is estimated on a pilot set; inputs
    whose estimate is not resolved away from c (within 3 SE) are flagged
    and not judged.  For resolved inputs an independent evaluation set
    measures the frequency of draws falling on the wrong side of c, which
    must not exceed exp(-2 t^2 / (b-a)^2) beyond statistical slack.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    rows = []
    for i, x in enumerate(inputs):
        est, se = expected_score(spec, score_spec, x, n=n, seed=seed * 1_000_003 + 2 * i)
        t = abs(est - score_spec.c)
        if t <= SE_SLACK * se:
            rows.append(AuditRow(input_id=i, estimate=est, se=se, label="abstain",
                                 t=t, bound=1.0, empirical=float("nan"),
                                 empirical_se=float("nan"), verdict="unresolved"))
            continue
        label = "C1" if est > score_spec.c else "C2"
        nu = simulate_layer_outputs(spec, n, seed * 1_000_003 + 2 * i + 1,
                                    x=x, tag="audit")[-1][:, 0]
        s = np.asarray(score(score_spec, nu))
        if label == "C1":
            disagree = float(np.mean(s <= score_spec.c))
        else:
            disagree = float(np.mean(s >= score_spec.c))
        emp_se = math.sqrt(disagree * (1.0 - disagree) / n)
        bound = min(math.exp(-2.0 * t * t / ((score_spec.b - score_spec.a) ** 2)), 1.0)
        verdict = "consistent" if disagree <= bound + SE_SLACK * emp_se else "violated"
        rows.append(AuditRow(input_id=i, estimate=est, se=se, label=label, t=t,
                             bound=bound, empirical=disagree,
                             empirical_se=emp_se, verdict=verdict))
    return rows


def audit_to_csv(rows: Sequence[AuditRow], path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["input_id", "estimate", "se", "label", "t", "bound",
                    "empirical", "verdict"])
        for r in rows:
            w.writerow([r.input_id, repr(float(r.estimate)), repr(float(r.se)),
                        r.label, repr(float(r.t)), repr(float(r.bound)),
                        repr(float(r.empirical)), r.verdict])
