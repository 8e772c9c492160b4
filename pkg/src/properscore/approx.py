"""Near-optimal polynomial rules from Bernstein approximation of phi_l.

The optimal rule's R'' (``phi_opt``) blows up or vanishes at the endpoints,
so it is clamped to its values at eps and 1 - eps, replaced by a Bernstein
polynomial p, and turned back into a rule via f'(x) = (1 - x) p(x) / Z with
Z = int_{1/2}^1 (1 - x)^2 p(x) dx.  Because p is a polynomial bounded below by
its smallest Bernstein coefficient, the result is respectful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.stats import binom

from .errors import ApproximationError, DomainError, ParameterError
from .index import IndexReport, incentivization_index, optimal_index
from .optimal import phi_opt
from .rules import PolynomialEvenSeries, RespectfulOptimal, Rule

DEFAULT_MAX_DEGREE = 4096
START_DEGREE = 16
UNIFORM_GRID = 2049
INDEX_RTOL = 1e-4
DE_CASTELJAU_MAX = 64


@dataclass(frozen=True)
class PhiClamp:
    ell: float
    eps: float

    def __post_init__(self):
        if not self.ell >= 1:
            raise ParameterError(f"ell must be >= 1, got {self.ell}")
        upper = min(0.5, phi_opt(self.ell, 0.5))
        if not 0 < self.eps < upper:
            raise ParameterError(f"eps must lie in (0, {upper:.6g}), got {self.eps}")


def clamped_phi(clamp: PhiClamp, x):
    """phi_l on [eps, 1-eps], held constant outside; defined on [0, 1]."""
    arr = np.asarray(x, dtype=float)
    if not np.all((arr >= 0) & (arr <= 1)):
        raise DomainError("x must lie in [0, 1]")
    y = np.clip(np.minimum(arr, 1 - arr), clamp.eps, 0.5)
    out = phi_opt(clamp.ell, y)
    return float(out) if np.ndim(out) == 0 else out


class BernsteinPoly:
    """sum_i coeffs[i] * C(n, i) x^i (1-x)^(n-i) on [0, 1]."""

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.ndim != 1 or len(self.coeffs) < 2:
            raise ParameterError("need at least two Bernstein coefficients (degree >= 1)")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        if self.degree <= DE_CASTELJAU_MAX:
            out = _de_casteljau(self.coeffs, flat)
        else:
            out = _pmf_eval(self.coeffs, flat)
        out = out.reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def de_casteljau(self, x):
        return _de_casteljau(self.coeffs, np.atleast_1d(np.asarray(x, dtype=float)))

    def derivative(self) -> "BernsteinPoly":
        n = self.degree
        if n == 1:
            return BernsteinPoly([n * (self.coeffs[1] - self.coeffs[0])] * 2)
        return BernsteinPoly(n * np.diff(self.coeffs))

    def times_one_minus_x(self) -> "BernsteinPoly":
        """(1-x) p as a degree n+1 Bernstein polynomial."""
        n = self.degree
        i = np.arange(n + 1)
        return BernsteinPoly(np.append(self.coeffs * (n + 1 - i) / (n + 1), 0.0))

    def antiderivative(self) -> "BernsteinPoly":
        """Integral from 0, as a degree n+1 Bernstein polynomial."""
        n = self.degree
        return BernsteinPoly(np.concatenate([[0.0], np.cumsum(self.coeffs)]) / (n + 1))

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.coeffs, self.coeffs[::-1]))


def _de_casteljau(coeffs, x):
    b = np.repeat(coeffs[None, :], len(x), axis=0)
    xs = x[:, None]
    for r in range(len(coeffs) - 1, 0, -1):
        b = (1 - xs) * b[:, :r] + xs * b[:, 1:r + 1]
    return b[:, 0]


def _pmf_eval(coeffs, x, chunk: int = 512):
    n = len(coeffs) - 1
    i = np.arange(n + 1)
    out = np.empty(len(x))
    for s in range(0, len(x), chunk):
        xs = x[s:s + chunk]
        out[s:s + chunk] = binom.pmf(i[None, :], n, xs[:, None]) @ coeffs
    return out


def bernstein_fit(fn: Callable[[np.ndarray], np.ndarray], n: int) -> BernsteinPoly:
    """B_n(fn) with coefficients fn(i/n).

    When fn(i/n) and fn(1 - i/n) agree to rounding, the coefficients are
    mirrored from the left half so B_n is exactly symmetric about 1/2.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ParameterError(f"degree must be an integer >= 1, got {n!r}")
    nodes = np.arange(n + 1) / n
    vals = np.asarray(fn(nodes), dtype=float) * np.ones(n + 1)
    if not np.all(np.isfinite(vals)):
        raise ParameterError("function must be finite at the Bernstein nodes")
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.max(np.abs(vals - vals[::-1])) <= 1e-12 * scale:
        half = n // 2
        vals[n - half:] = vals[:half + 1][::-1]
    return BernsteinPoly(vals)


class BernsteinRule(Rule):
    """Normalized proper rule with R'' = p / Z for a symmetric Bernstein p."""
    has_closed_r3 = True

    def __init__(self, p: BernsteinPoly, spec=None):
        if not p.is_symmetric():
            raise ParameterError("Bernstein polynomial must be symmetric about 1/2")
        super().__init__(spec, label=str(spec) if spec is not None else f"bernstein[{p.degree}]")
        self.poly = p
        self._dp = p.derivative()
        q = p.times_one_minus_x()
        self._F = q.antiderivative()
        self._F_half = float(self._F(0.5))
        G = q.times_one_minus_x().antiderivative()
        # int_{1/2}^1 (1-x)^2 p; the value at 1 is the last coefficient
        self.Z = float(G.coeffs[-1]) - float(G(0.5))
        self.lower_bound = float(np.min(p.coeffs)) / self.Z
        self.normalized = True

    def _R2(self, x):
        y = np.maximum(x, 1 - x)
        return self.poly(y) / self.Z

    def _R3(self, x):
        return self._dp(x) / self.Z

    def _fp(self, x):
        return (1 - x) * self._R2(x)

    def _f(self, x):
        return (self._F(x) - self._F_half) / self.Z

    def to_poly_spec(self) -> PolynomialEvenSeries:
        """Exact even-series coefficients of R'' about 1/2 (``poly:`` spec)."""
        d = bernstein_even_series(self.poly.coeffs)
        z = Fraction(self.Z)
        return PolynomialEvenSeries(tuple(c / z for c in d))


def bernstein_even_series(coeffs) -> list[Fraction]:
    """Exact coefficients of (x - 1/2)^(2k) for a symmetric Bernstein polynomial.

    Floats are exact dyadic rationals, so the whole conversion runs in
    integers: forward differences give the power basis in x, a Taylor shift
    moves it to 1/2.  Odd powers vanish exactly for mirrored coefficients.
    """
    fr = [Fraction(float(c)) for c in coeffs]
    n = len(fr) - 1
    den = max(c.denominator for c in fr)
    ints = [c.numerator * (den // c.denominator) for c in fr]
    # power basis in x: a_j = C(n, j) * (forward difference)^j at 0
    a = []
    diffs = ints[:]
    for j in range(n + 1):
        a.append(math.comb(n, j) * diffs[0])
        diffs = [diffs[i + 1] - diffs[i] for i in range(len(diffs) - 1)]
    # x = (1 + s)/2 with s = 2t: 2^n p = sum_j a_j 2^(n-j) (1 + s)^j
    b = [aj << (n - j) for j, aj in enumerate(a)]
    for i in range(n):  # Taylor shift by 1 (synthetic division)
        for j in range(n - 1, i - 1, -1):
            b[j] += b[j + 1]
    odd = [b[j] for j in range(1, n + 1, 2) if b[j] != 0]
    if odd:
        raise ApproximationError("Bernstein coefficients are not symmetric", n, math.nan)
    # coefficient of t^j is b_j 2^j / (2^n den)
    return [Fraction(b[j] << j, den << n) for j in range(0, n + 1, 2)]


def odd_chebyshev_content(rule: Rule, degree: int) -> float:
    """Largest odd Chebyshev coefficient of R''(1/2 + u/2) over u in [-1, 1].

    The monomial expansion about 1/2 has odd terms iff the Chebyshev
    expansion in u does; interpolating at Chebyshev nodes keeps this
    diagnostic well conditioned at high degree.
    """
    cheb = C.chebinterpolate(lambda u: rule.R_second(np.clip(0.5 + 0.5 * u, 1e-300, 1 - 1e-16)),
                             max(degree, 1))
    return float(np.max(np.abs(cheb[1::2]))) if len(cheb) > 1 else 0.0


@dataclass
class ApproxResult:
    rule: BernsteinRule
    report: IndexReport
    degree: int
    uniform_gap: float
    lower_bound: float
    optimal_ind: float
    criterion: str
    history: list = field(default_factory=list)

    @property
    def index_gap(self) -> float:
        return self.report.ind - self.optimal_ind


def uniform_gap(p: BernsteinPoly, clamp: PhiClamp, grid: int = UNIFORM_GRID) -> float:
    x = np.linspace(0.0, 1.0, grid)
    return float(np.max(np.abs(p(x) - clamped_phi(clamp, x))))


def build_polynomial_rule(ell: float, eps: float, n: int | str = "auto", *,
                          criterion: str = "index", max_degree: int = DEFAULT_MAX_DEGREE,
                          index_rtol: float = INDEX_RTOL) -> ApproxResult:
    """Respectful polynomial rule whose index is near Ind^l(g_{l,Opt}).

    With ``n='auto'`` the degree doubles from 16.  Under the default
    ``criterion='index'`` it stops once Ind^l is within eps of optimal and
    changed by at most ``index_rtol`` (relative) over the last doubling.
    ``criterion='uniform'`` instead requires max|B_n - phi_{l,eps}| <= eps on
    a 2049-point grid, raising ApproximationError at ``max_degree``.
    """
    clamp = PhiClamp(float(ell), float(eps))
    if criterion not in ("index", "uniform"):
        raise ParameterError(f"criterion must be 'index' or 'uniform', got {criterion!r}")
    spec = RespectfulOptimal(clamp.ell, clamp.eps)
    opt = optimal_index(clamp.ell).ind
    fn = lambda x: clamped_phi(clamp, x)  # noqa: E731

    def attempt(deg):
        p = bernstein_fit(fn, deg)
        rule = BernsteinRule(p, spec)
        rep = incentivization_index(rule, clamp.ell)
        return p, rule, rep

    history = []
    if n != "auto":
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ParameterError(f"degree must be a positive integer or 'auto', got {n!r}")
        p, rule, rep = attempt(int(n))
        gap = uniform_gap(p, clamp)
        history.append((int(n), rep.ind, gap))
        return ApproxResult(rule, rep, int(n), gap, rule.lower_bound, opt, "fixed", history)

    deg, prev = START_DEGREE, None
    while True:
        p, rule, rep = attempt(deg)
        gap = uniform_gap(p, clamp)
        history.append((deg, rep.ind, gap))
        if criterion == "uniform":
            done = gap <= clamp.eps
        else:
            done = (rep.ind <= opt + clamp.eps and prev is not None
                    and abs(rep.ind - prev) <= index_rtol * rep.ind)
        if done:
            return ApproxResult(rule, rep, deg, gap, rule.lower_bound, opt, criterion, history)
        if deg * 2 > max_degree:
            achieved = gap if criterion == "uniform" else abs(rep.ind - prev)
            raise ApproximationError(
                f"degree cap {max_degree} reached before the {criterion} criterion was met "
                f"(achieved gap {achieved:.3g})", deg, achieved)
        prev = rep.ind
        deg *= 2
