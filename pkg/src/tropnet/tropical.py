"""Max-plus (tropical) arithmetic, polynomials, and linear-region counting.

The semiring is (R ∪ {bottom}, ⊕, ⊙) with a ⊕ b = max(a, b) and
a ⊙ b = a + b.  The additive identity ("bottom") is kept as a distinct
algebraic element rather than an IEEE -inf so that undefined operations
(negative tropical powers of bottom) raise instead of propagating NaNs.

A tropical polynomial is a finite max of affine monomials
c + alpha · x with nonnegative integer slope vectors alpha; distinct
monomials always carry distinct slope vectors.  Tropical rational
functions are differences f - g of two polynomials and are exactly the
piecewise-linear functions this package cares about.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linprog


class TropicalError(ValueError):
    """Base class for tropical-algebra contract violations."""


class UndefinedPowerError(TropicalError):
    """Raised for bottom raised to a negative tropical power."""


class BottomValueError(TropicalError):
    """Raised when an operation requires a finite value but got bottom."""


class MonomialCapError(TropicalError):
    """Symbolic composition exceeded the monomial cap even after pruning."""


class RegionCountError(TropicalError):
    """LP-based region counting failed numerically."""

    def __init__(self, monomial_index: int, message: str):
        super().__init__(f"monomial {monomial_index}: {message}")
        self.monomial_index = monomial_index


@dataclass(frozen=True)
class TropicalValue:
    """Element of the max-plus semiring; ``value=None`` encodes bottom."""

    value: float | None = None

    def __post_init__(self):
        if self.value is not None:
            v = float(self.value)
            if not np.isfinite(v):
                raise TropicalError("finite tropical values must be finite reals; "
                                    "use BOTTOM for the additive identity")
            object.__setattr__(self, "value", v)

    @property
    def is_bottom(self) -> bool:
        return self.value is None

    def __repr__(self):
        return "BOTTOM" if self.is_bottom else f"TropicalValue({self.value!r})"


#: Additive identity of ⊕ (the "-inf" of max-plus).
BOTTOM = TropicalValue(None)
#: Multiplicative identity of ⊙.
ZERO = TropicalValue(0.0)


def as_tropical(a) -> TropicalValue:
    """Coerce a float or TropicalValue to a TropicalValue."""
    if isinstance(a, TropicalValue):
        return a
    return TropicalValue(float(a))


def trop_add(a, b) -> TropicalValue:
    """a ⊕ b = max(a, b); bottom is the identity."""
    a, b = as_tropical(a), as_tropical(b)
    if a.is_bottom:
        return b
    if b.is_bottom:
        return a
    return TropicalValue(max(a.value, b.value))


def trop_mul(a, b) -> TropicalValue:
    """a ⊙ b = a + b; bottom is absorbing."""
    a, b = as_tropical(a), as_tropical(b)
    if a.is_bottom or b.is_bottom:
        return BOTTOM
    return TropicalValue(a.value + b.value)


def trop_div(a, b) -> TropicalValue:
    """a ⊘ b = a - b.  The denominator must be finite."""
    a, b = as_tropical(a), as_tropical(b)
    if b.is_bottom:
        raise BottomValueError("tropical division by bottom is undefined")
    if a.is_bottom:
        return BOTTOM
    return TropicalValue(a.value - b.value)


def trop_pow(a, b: int) -> TropicalValue:
    """Tropical exponentiation a^{⊙b} for integer b.

    For finite a this is the ordinary product a*b (the two integer-sign
    cases collapse to it); bottom^{⊙b} is bottom for b > 0, the
    multiplicative identity 0 for b = 0, and undefined for b < 0.
    """
    a = as_tropical(a)
    b = int(b)
    if a.is_bottom:
        if b > 0:
            return BOTTOM
        if b == 0:
            return ZERO
        raise UndefinedPowerError("bottom to a negative tropical power is undefined")
    return TropicalValue(a.value * b)


@dataclass(frozen=True)
class TropicalMonomial:
    """One affine piece c ⊙ x^{⊙alpha}, i.e. x ↦ c + alpha · x."""

    coeff: TropicalValue
    exponent: tuple[int, ...]

    def __post_init__(self):
        exps = tuple(int(e) for e in self.exponent)
        if any(e < 0 for e in exps):
            raise TropicalError(f"monomial exponents must be nonnegative, got {exps}")
        object.__setattr__(self, "exponent", exps)
        object.__setattr__(self, "coeff", as_tropical(self.coeff))

    @property
    def dim(self) -> int:
        return len(self.exponent)

    def evaluate(self, x) -> TropicalValue:
        if self.coeff.is_bottom:
            return BOTTOM
        x = np.asarray(x, dtype=float)
        return TropicalValue(self.coeff.value + float(np.dot(self.exponent, x)))


class TropicalPolynomial:
    """Finite tropical sum (max) of tropical monomials over a common dimension.

    Duplicate slope vectors are merged on construction, keeping the ⊕ of
    their coefficients: the max of identical affine parts is governed by
    the larger constant.
    """

    __slots__ = ("_monomials", "_dim", "_alpha", "_coeff")

    def __init__(self, monomials: Iterable[TropicalMonomial]):
        monos = list(monomials)
        if not monos:
            raise TropicalError("a tropical polynomial needs at least one monomial")
        dim = monos[0].dim
        if any(m.dim != dim for m in monos):
            raise TropicalError("monomials must share one ambient dimension")

        merged: dict[tuple[int, ...], TropicalValue] = {}
        for m in monos:
            prev = merged.get(m.exponent)
            merged[m.exponent] = m.coeff if prev is None else trop_add(prev, m.coeff)
        # Drop bottom monomials unless nothing finite remains.
        finite = {e: c for e, c in merged.items() if not c.is_bottom}
        if finite:
            merged = finite
        else:
            merged = {tuple([0] * dim): BOTTOM}

        items = sorted(merged.items())
        self._monomials = tuple(TropicalMonomial(c, e) for e, c in items)
        self._dim = dim
        self._alpha = np.array([m.exponent for m in self._monomials], dtype=float)
        self._coeff = np.array(
            [-np.inf if m.coeff.is_bottom else m.coeff.value for m in self._monomials]
        )

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def monomials(self) -> tuple[TropicalMonomial, ...]:
        return self._monomials

    @property
    def num_monomials(self) -> int:
        return len(self._monomials)

    @property
    def is_bottom(self) -> bool:
        return bool(np.all(np.isneginf(self._coeff)))

    def __call__(self, x) -> float:
        return eval_polynomial(self, x)

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at each row of ``points`` (shape (n, d))."""
        if self.is_bottom:
            raise BottomValueError("cannot evaluate an all-bottom polynomial")
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self._dim:
            raise TropicalError(f"points have dimension {points.shape[1]}, expected {self._dim}")
        return np.max(points @ self._alpha.T + self._coeff, axis=1)

    def scale(self, w: int) -> "TropicalPolynomial":
        """Tropical power f^{⊙w} for integer w >= 0; scales every monomial."""
        w = int(w)
        if w < 0:
            raise TropicalError("tropical powers of polynomials need nonnegative weights")
        if w == 0:
            return constant_polynomial(self._dim, ZERO)
        return TropicalPolynomial(
            TropicalMonomial(trop_pow(m.coeff, w) if m.coeff.is_bottom else
                             TropicalValue(m.coeff.value * w),
                             tuple(e * w for e in m.exponent))
            for m in self._monomials
        )

    def shift(self, c: TropicalValue) -> "TropicalPolynomial":
        """Multiply by the scalar c (add c to every coefficient)."""
        c = as_tropical(c)
        return TropicalPolynomial(
            TropicalMonomial(trop_mul(m.coeff, c), m.exponent) for m in self._monomials
        )

    def __eq__(self, other):
        return (isinstance(other, TropicalPolynomial)
                and self._monomials == other._monomials)

    def __hash__(self):
        return hash(self._monomials)

    def __repr__(self):
        terms = ", ".join(
            f"{'bottom' if m.coeff.is_bottom else m.coeff.value}+{m.exponent}·x"
            for m in self._monomials[:4]
        )
        more = "" if self.num_monomials <= 4 else f", ... ({self.num_monomials} terms)"
        return f"TropicalPolynomial[{terms}{more}]"


def constant_polynomial(dim: int, c) -> TropicalPolynomial:
    return TropicalPolynomial([TropicalMonomial(as_tropical(c), tuple([0] * dim))])


@dataclass(frozen=True)
class TropicalRational:
    """Tropical quotient f ⊘ g; evaluates to f(x) - g(x)."""

    numerator: TropicalPolynomial
    denominator: TropicalPolynomial

    def __post_init__(self):
        if self.numerator.dim != self.denominator.dim:
            raise TropicalError("numerator and denominator dimensions differ")

    @property
    def dim(self) -> int:
        return self.numerator.dim

    def __call__(self, x) -> float:
        return eval_polynomial(self.numerator, x) - eval_polynomial(self.denominator, x)

    def evaluate_batch(self, points: np.ndarray) -> np.ndarray:
        return (self.numerator.evaluate_batch(points)
                - self.denominator.evaluate_batch(points))


def eval_polynomial(f: TropicalPolynomial, x) -> float:
    """max over monomials of c + alpha · x; errors on an all-bottom polynomial."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != f.dim:
        raise TropicalError(f"point has dimension {x.shape[0]}, expected {f.dim}")
    if f.is_bottom:
        raise BottomValueError("cannot evaluate an all-bottom polynomial")
    return float(f.evaluate_batch(x[None, :])[0])


def poly_add(f: TropicalPolynomial, g: TropicalPolynomial) -> TropicalPolynomial:
    """Tropical sum f ⊕ g: union of monomials with coefficient merging."""
    if f.dim != g.dim:
        raise TropicalError("cannot add polynomials of different dimension")
    return TropicalPolynomial(list(f.monomials) + list(g.monomials))


def poly_mul(f: TropicalPolynomial, g: TropicalPolynomial,
             cap: int | None = None) -> TropicalPolynomial:
    """Tropical product f ⊙ g: Minkowski sum of monomial sets.

    Coefficients add and exponents add across the full cross product;
    duplicate exponents keep the larger coefficient.
    """
    if f.dim != g.dim:
        raise TropicalError("cannot multiply polynomials of different dimension")
    fa, fc = f._alpha.astype(int), f._coeff
    ga, gc = g._alpha.astype(int), g._coeff

    alpha = (fa[:, None, :] + ga[None, :, :]).reshape(-1, f.dim)
    coeff = (fc[:, None] + gc[None, :]).reshape(-1)
    merged: dict[tuple[int, ...], float] = {}
    for a, c in zip(map(tuple, alpha.tolist()), coeff):
        if c == -np.inf:
            continue
        prev = merged.get(a)
        if prev is None or c > prev:
            merged[a] = c
    if not merged:
        return constant_polynomial(f.dim, BOTTOM)
    out = TropicalPolynomial(
        TropicalMonomial(TropicalValue(c), a) for a, c in merged.items()
    )
    if cap is not None and out.num_monomials > cap:
        out = prune_redundant_monomials(out)
        if out.num_monomials > cap:
            raise MonomialCapError(
                f"symbolic composition produced {out.num_monomials} monomials "
                f"(cap {cap}); use the numeric forward recursion instead"
            )
    return out


def poly_weighted_combine(polys: Sequence[TropicalPolynomial],
                          weights: Sequence[int],
                          bias: TropicalValue = ZERO,
                          cap: int | None = None) -> TropicalPolynomial:
    """Symbolic ⊙-product of tropical powers plus a scalar bias.

    Returns the polynomial whose evaluation equals
    sum_j weights[j] * polys[j](x) + bias at every x.  Weights must be
    nonnegative integers; a zero weight contributes the multiplicative
    identity.
    """
    polys = list(polys)
    if not polys:
        raise TropicalError("poly_weighted_combine needs at least one polynomial")
    weights = [int(w) for w in weights]
    if len(weights) != len(polys):
        raise TropicalError("weights and polynomials must align")
    if any(w < 0 for w in weights):
        raise TropicalError(f"weights must be nonnegative, got {weights}")
    dim = polys[0].dim
    if any(p.dim != dim for p in polys):
        raise TropicalError("polynomials must share one ambient dimension")

    out = constant_polynomial(dim, bias)
    for p, w in zip(polys, weights):
        if w == 0:
            continue
        out = poly_mul(out, p.scale(w), cap=cap)
    return out


# ---------------------------------------------------------------------------
# Linear regions
# ---------------------------------------------------------------------------

#: A strict-dominance slack above this declares a full-dimensional cell.
DELTA_TOL = 1e-7
#: The dominance LP maximizes the slack delta capped at this value.
DELTA_CAP = 1.0
#: Default grid-oracle box and step (sound for d <= 2 at this resolution).
GRID_BOX = (-10.0, 10.0)
GRID_STEP = 0.05


@dataclass(frozen=True)
class RegionCount:
    """Number of linear regions of a tropical polynomial."""

    count: int
    method: str  # "exact-lp" | "grid-oracle"
    dim: int

    def __post_init__(self):
        if self.count < 1:
            raise TropicalError("a piecewise-linear function has at least one region")


def _finite_parts(f: TropicalPolynomial):
    mask = np.isfinite(f._coeff)
    if not mask.any():
        raise BottomValueError("polynomial has no finite monomials to count")
    return f._alpha[mask], f._coeff[mask]


def _dominance_slack(alpha: np.ndarray, coeff: np.ndarray, i: int) -> float:
    """Max slack delta with  affine_i(x) >= affine_j(x) + delta  for all j != i.

    Returns min(delta*, DELTA_CAP); the cell of monomial i is
    full-dimensional iff the returned slack exceeds DELTA_TOL.
    """
    r, d = alpha.shape
    if r == 1:
        return DELTA_CAP
    others = [j for j in range(r) if j != i]
    # Variables (x, delta); maximize delta.
    a_ub = np.column_stack([alpha[others] - alpha[i], np.ones(len(others))])
    b_ub = coeff[i] - coeff[others]
    c = np.zeros(d + 1)
    c[-1] = -1.0
    bounds = [(None, None)] * d + [(None, DELTA_CAP)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        raise RegionCountError(i, f"dominance LP failed: {res.message}")
    return -res.fun


def prune_redundant_monomials(f: TropicalPolynomial) -> TropicalPolynomial:
    """Drop monomials that are nowhere strictly maximal.

    A monomial whose dominance cell is not full-dimensional is attained,
    where attained at all, only on ties with other monomials, so deleting
    it leaves the function unchanged.
    """
    alpha, coeff = _finite_parts(f)
    keep = [i for i in range(len(coeff))
            if _dominance_slack(alpha, coeff, i) > DELTA_TOL]
    if not keep:
        # All cells tie away; keep the largest-coefficient monomial.
        keep = [int(np.argmax(coeff))]
    return TropicalPolynomial(
        TropicalMonomial(TropicalValue(coeff[i]), tuple(int(a) for a in alpha[i]))
        for i in keep
    )


def _grid_points(dim: int, box: tuple[float, float], step: float) -> np.ndarray:
    lo, hi = box
    axis = np.arange(lo, hi + step / 2, step)
    if dim == 1:
        return axis[:, None]
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.column_stack([g.ravel() for g in grids])


def count_linear_regions(f: TropicalPolynomial, method: str = "exact-lp",
                         box: tuple[float, float] = GRID_BOX,
                         step: float = GRID_STEP) -> RegionCount:
    """Count maximal connected subsets of R^d on which ``f`` is affine.

    "exact-lp" counts monomials whose strict-dominance cell is
    full-dimensional (slack LP per monomial).  "grid-oracle" counts
    distinct argmax indices over a dense grid on ``box``; it is a sound
    lower bound on the true count and serves as a cross-check.
    """
    alpha, coeff = _finite_parts(f)
    if method == "exact-lp":
        n = sum(1 for i in range(len(coeff))
                if _dominance_slack(alpha, coeff, i) > DELTA_TOL)
        return RegionCount(count=max(n, 1), method="exact-lp", dim=f.dim)
    if method == "grid-oracle":
        points = _grid_points(f.dim, box, step)
        winners: set[int] = set()
        for start in range(0, len(points), 65536):
            chunk = points[start:start + 65536]
            vals = chunk @ alpha.T + coeff
            winners.update(np.unique(np.argmax(vals, axis=1)).tolist())
        return RegionCount(count=len(winners), method="grid-oracle", dim=f.dim)
    raise TropicalError(f"unknown region-count method {method!r}")


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def polynomial_to_dict(f: TropicalPolynomial) -> dict:
    return {
        "d": f.dim,
        "monomials": [
            {"c": "bottom" if m.coeff.is_bottom else m.coeff.value,
             "alpha": list(m.exponent)}
            for m in f.monomials
        ],
    }


def polynomial_from_dict(data: dict) -> TropicalPolynomial:
    d = int(data["d"])
    monos = []
    for entry in data["monomials"]:
        c = entry["c"]
        coeff = BOTTOM if c == "bottom" else TropicalValue(float(c))
        alpha = tuple(int(a) for a in entry["alpha"])
        if len(alpha) != d:
            raise TropicalError(f"monomial exponent length {len(alpha)} != d={d}")
        monos.append(TropicalMonomial(coeff, alpha))
    return TropicalPolynomial(monos)


def polynomial_to_json(f: TropicalPolynomial) -> str:
    return json.dumps(polynomial_to_dict(f), sort_keys=True)


def polynomial_from_json(text: str) -> TropicalPolynomial:
    return polynomial_from_dict(json.loads(text))
