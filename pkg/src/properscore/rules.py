"""Binary scoring rules, their reward functions, and properness diagnostics.

A rule is a function f on (0, 1): a forecaster reporting x is paid f(x) on
heads and f(1 - x) on tails.  Its reward function is
R(p) = p f(p) + (1 - p) f(1 - p), and for proper rules

    R'(x) = f(x) - f(1 - x),    R''(x) = f'(x) / (1 - x).

Rules are immutable.  ``Rule.affine`` returns a rescaled copy a*f + b.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.interpolate import PchipInterpolator

from .calculus import HalfAntiderivative, mean_reward
from .errors import (
    DomainError,
    NotProperError,
    ParameterError,
    RuleSpecError,
    ScoringError,
)

BUILTIN_KINDS = ("log", "quad", "sph", "hs")
PROPER_TOL = 1e-8
PROPER_GRID = 4097
RESPECT_EXPONENT = 0.16


# ---------------------------------------------------------------------------
# Rule specs and the mini-grammar
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def format_coefficient(c: Fraction) -> str:
    """Shortest exact token for a rational coefficient."""
    c = Fraction(c)
    if c.denominator == 1:
        return str(c.numerator)
    try:
        fl = float(c)
    except OverflowError:
        fl = math.inf
    if math.isfinite(fl) and Fraction(repr(fl)) == c:
        return repr(fl)
    return f"{c.numerator}/{c.denominator}"


@dataclass(frozen=True)
class Builtin:
    kind: str

    def __post_init__(self):
        if self.kind not in BUILTIN_KINDS:
            raise RuleSpecError(f"unknown builtin rule {self.kind!r}; "
                                f"expected one of {BUILTIN_KINDS}")

    def __str__(self):
        return self.kind


@dataclass(frozen=True)
class Tsallis:
    gamma: float

    def __post_init__(self):
        if not self.gamma > 1:
            raise RuleSpecError(f"Tsallis requires gamma > 1, got {self.gamma}")

    def __str__(self):
        return f"tsallis:{_fmt(self.gamma)}"


@dataclass(frozen=True)
class Optimal:
    ell: float

    def __post_init__(self):
        if not self.ell >= 1 or math.isinf(self.ell):
            raise RuleSpecError(f"Optimal requires finite ell >= 1, got {self.ell}")

    def __str__(self):
        return f"opt:{_fmt(self.ell)}"


@dataclass(frozen=True)
class OptimalLimit:
    def __str__(self):
        return "opt:inf"


@dataclass(frozen=True)
class RespectfulOptimal:
    """Near-optimal respectful polynomial rule built by the Bernstein route."""
    ell: float
    eps: float

    def __post_init__(self):
        if not self.ell >= 1:
            raise RuleSpecError(f"ell must be >= 1, got {self.ell}")
        if not self.eps > 0:
            raise RuleSpecError(f"eps must be > 0, got {self.eps}")

    def __str__(self):
        return f"opt:{_fmt(self.ell)}:respectful:{_fmt(self.eps)}"


@dataclass(frozen=True)
class PolynomialEvenSeries:
    """R''(x) = sum_k d[k] * (x - 1/2)**(2k); ``d`` holds d_0, d_2, d_4, ..."""
    d: tuple

    def __post_init__(self):
        if len(self.d) == 0:
            raise RuleSpecError("poly: needs at least one coefficient")
        object.__setattr__(self, "d", tuple(Fraction(c) for c in self.d))
        if all(c == 0 for c in self.d):
            raise RuleSpecError("poly: R'' must not be identically zero")

    def __str__(self):
        return "poly:" + ",".join(format_coefficient(c) for c in self.d)


@dataclass(frozen=True)
class HalfDerivativeTable:
    """Tabulated g' = h on [1/2, 1); the left half follows by properness."""
    grid: tuple
    values: tuple
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or g.shape != v.shape or len(g) < 2:
            raise RuleSpecError("table: need matching grid/value columns with >= 2 rows")
        if np.any(np.diff(g) <= 0) or g[0] < 0.5 or g[-1] >= 1.0:
            raise RuleSpecError("table: abscissae must be strictly increasing in [1/2, 1)")
        if np.any(v < 0) or not np.any(v > 0):
            raise RuleSpecError("table: values must be nonnegative and not all zero")
        object.__setattr__(self, "grid", tuple(float(x) for x in g))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    def __str__(self):
        return f"table:{self.source}" if self.source else "table:<inline>"


RuleSpec = (Builtin | Tsallis | Optimal | OptimalLimit | RespectfulOptimal
            | PolynomialEvenSeries | HalfDerivativeTable)


def _number(token: str, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise RuleSpecError(f"bad {what} {token!r}") from None


def load_table(path: str | Path) -> HalfDerivativeTable:
    """Read a two-column CSV (x, h(x)); a non-numeric first row is a header."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows:
                    raise RuleSpecError(f"bad table row {row!r} in {path}") from None
    if not rows:
        raise RuleSpecError(f"empty table {path}")
    grid, values = zip(*rows)
    return HalfDerivativeTable(grid, values, source=str(path))


def parse_rule_spec(text: str) -> RuleSpec:
    """Parse ``log | quad | sph | hs | tsallis:G | opt:L | opt:inf |
    opt:L:respectful:EPS | poly:d0,d2,... | table:PATH``."""
    text = text.strip()
    if text in BUILTIN_KINDS:
        return Builtin(text)
    head, sep, rest = text.partition(":")
    if not sep:
        raise RuleSpecError(f"unknown rule spec {text!r}")
    if head == "tsallis":
        return Tsallis(_number(rest, "tsallis gamma"))
    if head == "opt":
        if rest == "inf":
            return OptimalLimit()
        parts = rest.split(":")
        if len(parts) == 1:
            return Optimal(_number(parts[0], "ell"))
        if len(parts) == 3 and parts[1] == "respectful":
            return RespectfulOptimal(_number(parts[0], "ell"), _number(parts[2], "eps"))
        raise RuleSpecError(f"bad optimal spec {text!r}")
    if head == "poly":
        try:
            coeffs = tuple(Fraction(tok.strip()) for tok in rest.split(","))
        except (ValueError, ZeroDivisionError):
            raise RuleSpecError(f"bad poly coefficients in {text!r}") from None
        return PolynomialEvenSeries(coeffs)
    if head == "table":
        try:
            return load_table(rest)
        except OSError as exc:
            raise RuleSpecError(f"cannot read table {rest!r}: {exc}") from None
    raise RuleSpecError(f"unknown rule spec {text!r}")


# ---------------------------------------------------------------------------
# Rule objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RuleValues:
    f: float
    f_prime: float
    R: float
    R_prime: float
    R_second: float


def _open_unit(x):
    arr = np.asarray(x, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        bad = arr[~((arr > 0.0) & (arr < 1.0))].ravel()[0]
        raise DomainError(f"x must lie in (0, 1), got {bad!r}")
    return arr


def _out(arr):
    arr = np.asarray(arr, dtype=float)
    return float(arr) if arr.ndim == 0 else arr


class Rule:
    """A scoring rule a*f0 + b with reward-function derivatives.

    Subclasses supply ``_f`` and ``_fp`` for the base rule f0; closed forms
    for ``_R``, ``_R1``, ``_R2`` and ``_R3`` override the generic ones.  When
    ``_R3`` is not overridden, R''' comes from central differences of R''
    with step min(1e-4, dist(x, {0, 1}) / 8).
    """

    has_closed_r3 = False

    def __init__(self, spec, label: str | None = None):
        self.spec = spec
        if label is None:
            label = str(spec)
            if len(label) > 80 and isinstance(spec, PolynomialEvenSeries):
                label = f"poly:<{len(spec.d)} coefficients>"
        self.label = label
        self.a = 1.0
        self.b = 0.0
        self.normalized = False

    # base-rule hooks -----------------------------------------------------
    def _f(self, x):
        raise NotImplementedError

    def _fp(self, x):
        raise NotImplementedError

    def _R(self, x):
        return x * self._f(x) + (1 - x) * self._f(1 - x)

    def _R1(self, x):
        return self._f(x) - self._f(1 - x)

    def _R2(self, x):
        y = np.maximum(x, 1 - x)
        return self._fp(y) / (1 - y)

    def _R3(self, x):
        h = np.minimum(1e-4, np.minimum(x, 1 - x) / 8)
        return (self._R2(x + h) - self._R2(x - h)) / (2 * h)

    # public API ------------------------------------------------------------
    def f(self, x):
        x = _open_unit(x)
        return _out(self.a * self._f(x) + self.b)

    def fprime(self, x):
        x = _open_unit(x)
        return _out(self.a * self._fp(x))

    def R(self, x):
        x = _open_unit(x)
        return _out(self.a * self._R(x) + self.b)

    def R_prime(self, x):
        x = _open_unit(x)
        return _out(self.a * self._R1(x))

    def R_second(self, x):
        x = _open_unit(x)
        return _out(self.a * self._R2(x))

    def R_third(self, x):
        x = _open_unit(x)
        return _out(self.a * self._R3(x))

    def affine(self, a: float, b: float = 0.0, normalized: bool = False) -> "Rule":
        """Copy of this rule with payments a*f + b (a > 0)."""
        if not a > 0:
            raise ParameterError(f"scale must be positive, got {a}")
        new = copy.copy(self)
        new.a = a * self.a
        new.b = a * self.b + b
        new.normalized = normalized
        return new

    def __repr__(self):
        norm = ", normalized" if self.normalized else ""
        return f"<Rule {self.label} a={self.a!r} b={self.b!r}{norm}>"


class LogRule(Rule):
    has_closed_r3 = True

    def _f(self, x):
        return np.log(x)

    def _fp(self, x):
        return 1.0 / x

    def _R(self, x):
        return x * np.log(x) + (1 - x) * np.log1p(-x)

    def _R1(self, x):
        return np.log(x) - np.log1p(-x)

    def _R2(self, x):
        return 1.0 / (x * (1 - x))

    def _R3(self, x):
        return (2 * x - 1) / (x * (1 - x)) ** 2


class QuadRule(Rule):
    """f(x) = 2x - (x^2 + (1-x)^2)."""
    has_closed_r3 = True

    def _f(self, x):
        return 2 * x - (x * x + (1 - x) ** 2)

    def _fp(self, x):
        return 4 * (1 - x)

    def _R(self, x):
        return x * x + (1 - x) ** 2

    def _R1(self, x):
        return 4 * x - 2

    def _R2(self, x):
        return np.full_like(np.asarray(x, dtype=float), 4.0)

    def _R3(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


class SphRule(Rule):
    """f(x) = x / sqrt(x^2 + (1-x)^2); R is the Euclidean norm itself."""
    has_closed_r3 = True

    @staticmethod
    def _s(x):
        return np.sqrt(x * x + (1 - x) ** 2)

    def _f(self, x):
        return x / self._s(x)

    def _fp(self, x):
        return (1 - x) / self._s(x) ** 3

    def _R(self, x):
        return self._s(x)

    def _R1(self, x):
        return (2 * x - 1) / self._s(x)

    def _R2(self, x):
        return self._s(x) ** -3

    def _R3(self, x):
        return -3 * (2 * x - 1) * self._s(x) ** -5


class HsRule(Rule):
    """hs(x) = -sqrt((1-x)/x)."""
    has_closed_r3 = True

    def _f(self, x):
        return -np.sqrt((1 - x) / x)

    def _fp(self, x):
        return 0.5 * x ** -1.5 * (1 - x) ** -0.5

    def _R(self, x):
        return -2 * np.sqrt(x * (1 - x))

    def _R1(self, x):
        return (2 * x - 1) / np.sqrt(x * (1 - x))

    def _R2(self, x):
        return 0.5 * (x * (1 - x)) ** -1.5

    def _R3(self, x):
        return 0.75 * (2 * x - 1) * (x * (1 - x)) ** -2.5


class TsallisRule(Rule):
    """Rule with R(x) = x^g + (1-x)^g; f = R + (1-x) R'."""
    has_closed_r3 = True

    def __init__(self, spec: Tsallis):
        super().__init__(spec)
        self.gamma = float(spec.gamma)

    def _R(self, x):
        g = self.gamma
        return x ** g + (1 - x) ** g

    def _R1(self, x):
        g = self.gamma
        return g * (x ** (g - 1) - (1 - x) ** (g - 1))

    def _R2(self, x):
        g = self.gamma
        return g * (g - 1) * (x ** (g - 2) + (1 - x) ** (g - 2))

    def _R3(self, x):
        g = self.gamma
        return g * (g - 1) * (g - 2) * (x ** (g - 3) - (1 - x) ** (g - 3))

    def _f(self, x):
        return self._R(x) + (1 - x) * self._R1(x)

    def _fp(self, x):
        return (1 - x) * self._R2(x)


class HalfDerivativeRule(Rule):
    """Rule reconstructed from g' on [1/2, 1) and the properness identity.

    ``h_right`` gives f' on [1/2, 1).  On (0, 1/2) f'(x) = (1-x)/x * f'(1-x),
    and f is anchored at f(1/2) = ``f_half``.
    """

    def __init__(self, spec, h_right: Callable[[np.ndarray], np.ndarray],
                 f_half: float = 0.0, breakpoints: Sequence[float] = (),
                 label: str | None = None):
        super().__init__(spec, label)
        self._h = h_right
        self.f_half = float(f_half)
        self._breakpoints = tuple(breakpoints)
        self._F = None

    def _antiderivative(self):
        if self._F is None:
            self._F = HalfAntiderivative(self._fp, self._breakpoints)
        return self._F

    def _fp(self, x):
        x = np.asarray(x, dtype=float)
        y = np.maximum(x, 1 - x)
        hy = self._h(y)
        return np.where(x >= 0.5, hy, (1 - x) / x * hy)

    def _f(self, x):
        return self.f_half + self._antiderivative()(x)

    def _R2(self, x):
        y = np.maximum(x, 1 - x)
        return self._h(y) / (1 - y)


class TableRule(HalfDerivativeRule):
    """g' tabulated on [1/2, 1), interpolated by monotone piecewise cubics."""

    def __init__(self, spec: HalfDerivativeTable):
        grid = np.asarray(spec.grid)
        interp = PchipInterpolator(grid, np.asarray(spec.values), extrapolate=False)
        lo, hi = grid[0], grid[-1]

        def h(y):
            return np.maximum(interp(np.clip(y, lo, hi)), 0.0)

        super().__init__(spec, h, breakpoints=tuple(grid))


def even_series_chebyshev(d: Sequence[Fraction]) -> np.ndarray:
    """Chebyshev coefficients in v = 2(2x-1)^2 - 1 of sum_k d[k] (x - 1/2)^(2k).

    Exact: with t^2 = (v + 1)/8 everything is scaled to integers, expanded,
    and rounded to float only at the end.
    """
    d = [Fraction(c) for c in d]
    m = len(d) - 1
    den = math.lcm(*(c.denominator for c in d))
    # 8^m * den * R'' = sum_k n_k 8^(m-k) (v + 1)^k, n_k = den * d_k
    power = [0] * (m + 1)
    for k, c in enumerate(d):
        nk = c.numerator * (den // c.denominator)
        if nk == 0:
            continue
        nk <<= 3 * (m - k)
        binom = 1
        for j in range(k + 1):
            power[j] += nk * binom
            binom = binom * (k - j) // (j + 1)
    # v^j = 2^(1-j) sum_i C(j, i) T_{j-2i} (middle term halved); scale by 2^m
    cheb = [0] * (m + 1)
    for j, cj in enumerate(power):
        if cj == 0:
            continue
        if j == 0:
            cheb[0] += cj << m
            continue
        base = cj << (m - j)  # times 2^(1-j) * 2^m / 2
        binom = 1
        for i in range(j // 2 + 1):
            term = base * binom
            if 2 * i != j:
                term *= 2
            cheb[j - 2 * i] += term
            binom = binom * (j - i) // (i + 1)
    scale = den * 8 ** m * 2 ** m
    return np.array([c / scale for c in cheb])


class PolynomialRule(Rule):
    """Rule whose R'' is an even polynomial in (x - 1/2).

    The coefficients are converted exactly to a Chebyshev series in
    v = 2u^2 - 1, u = 2x - 1.  Evaluating in v keeps R''(x) and R''(1-x)
    bitwise equal and avoids cancellation among large monomial terms.
    Since T_k(T_2(u)) = T_2k(u), the same coefficients give R'' as a series
    in u, from which f and R''' follow by Chebyshev calculus.
    """
    has_closed_r3 = True

    def __init__(self, spec: PolynomialEvenSeries, validate: bool = True):
        super().__init__(spec)
        self._r2_cheb = even_series_chebyshev(spec.d)
        r2_u = np.zeros(2 * len(self._r2_cheb) - 1)
        r2_u[::2] = self._r2_cheb
        self._r3_cheb = 2 * C.chebder(r2_u) if len(r2_u) > 1 else np.zeros(1)
        # f(x) = int_0^u (1 - w) R''(w) / 4 dw with x = (1 + u)/2
        self._f_cheb = C.chebint(C.chebmul([1.0, -1.0], r2_u) / 4, lbnd=0)
        if validate:
            xs = np.linspace(0.0, 1.0, 2049)[1:-1]
            r2 = np.concatenate([self._R2(xs), self._R2(np.array([0.5]))])
            scale = np.max(np.abs(r2))
            if scale == 0 or np.min(r2) < -1e-12 * scale:
                raise RuleSpecError(
                    "poly: R'' must be nonnegative on [0, 1] and not identically zero "
                    f"(min on validation grid {np.min(r2):.3g})")

    def _R2(self, x):
        u = 2 * np.asarray(x, dtype=float) - 1
        return C.chebval(2 * u * u - 1, self._r2_cheb)

    def _R3(self, x):
        return C.chebval(2 * np.asarray(x, dtype=float) - 1, self._r3_cheb)

    def _f(self, x):
        return C.chebval(2 * np.asarray(x, dtype=float) - 1, self._f_cheb)

    def _fp(self, x):
        return (1 - x) * self._R2(x)


def build_rule(spec: RuleSpec | str) -> Rule:
    """Evaluatable raw rule (a = 1, b = 0) for a spec or spec string.

    Optimal rules are normalized by construction; everything else is raw.
    """
    if isinstance(spec, str):
        spec = parse_rule_spec(spec)
    if isinstance(spec, Builtin):
        cls = {"log": LogRule, "quad": QuadRule, "sph": SphRule, "hs": HsRule}[spec.kind]
        return cls(spec)
    if isinstance(spec, Tsallis):
        return TsallisRule(spec)
    if isinstance(spec, PolynomialEvenSeries):
        return PolynomialRule(spec)
    if isinstance(spec, HalfDerivativeTable):
        return TableRule(spec)
    if isinstance(spec, Optimal):
        from .optimal import optimal_rule
        return optimal_rule(spec.ell)
    if isinstance(spec, OptimalLimit):
        from .optimal import optimal_rule_limit
        return optimal_rule_limit()
    if isinstance(spec, RespectfulOptimal):
        from .approx import build_polynomial_rule
        return build_polynomial_rule(spec.ell, spec.eps).rule
    raise RuleSpecError(f"unsupported rule spec {spec!r}")


def evaluate(rule: Rule, x: float) -> RuleValues:
    """All derived quantities of ``rule`` at one point of (0, 1)."""
    x = float(_open_unit(x))
    return RuleValues(rule.f(x), rule.fprime(x), rule.R(x), rule.R_prime(x),
                      rule.R_second(x))


def extend_half_derivative(h: Callable[[np.ndarray], np.ndarray], side: str = "right",
                           f_half: float = 0.0, *, validate: bool = True,
                           breakpoints: Sequence[float] = (), label: str | None = None,
                           samples: int = 1025) -> HalfDerivativeRule:
    """Proper rule whose f' equals ``h`` on one half of (0, 1).

    ``side='left'`` means h is f' on (0, 1/2]; ``'right'`` means [1/2, 1).
    The other half is f'(p) = (1-p)/p * h(1-p) for the left case and the
    mirrored identity for the right case; f(1/2) = ``f_half``.
    """
    if side not in ("left", "right"):
        raise ParameterError(f"side must be 'left' or 'right', got {side!r}")

    def hv(y):
        return np.asarray(h(np.asarray(y, dtype=float)), dtype=float) * np.ones_like(y)

    if validate:
        s = np.linspace(0.5, 1.0, samples + 1)[:-1]
        s = np.concatenate([s, 1 - np.geomspace(1e-12, 0.5, 64)[:-1]])
        if side == "left":
            s = 1 - s
        vals = hv(s)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            bad = s[~(vals >= 0)][0]
            raise NotProperError(
                f"half-derivative is negative or undefined at x={bad!r}; "
                "the extension would not be weakly proper")
    if side == "right":
        h_right = hv
    else:
        def h_right(y):
            return (1 - y) / y * hv(1 - y)
    return HalfDerivativeRule(None, h_right, f_half, breakpoints,
                              label or f"extended[{side}]")


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def proper_grid(size: int = PROPER_GRID) -> np.ndarray:
    """Chebyshev-like interior grid, mirror symmetric, with 1 - x exact.

    Points are rounded to multiples of 2^-53, so x and 1 - x are both grid
    points and the properness identity compares exactly mirrored values.
    """
    if size < 3:
        raise ParameterError(f"grid_size must be >= 3, got {size}")
    j = np.arange(1, size // 2 + 1)
    left = 0.5 * (1 - np.cos(np.pi * j / (size + 1)))
    left = np.maximum(np.round(left * 2.0 ** 53), 1.0) / 2.0 ** 53
    mid = [0.5] if size % 2 else []
    return np.unique(np.concatenate([left, mid, 1 - left]))


@dataclass(frozen=True)
class RespectfulResult:
    c: float
    t: float
    passed: bool
    witness: float | None
    condition: str | None


@dataclass(frozen=True)
class DiagnosticsReport:
    proper_identity_max_violation: float
    fprime_min: float
    r2_min: float
    r2_max: float
    respectful_at: list
    normalized_residuals: tuple
    proper: bool
    grid_size: int

    def __post_init__(self):
        if not self.proper_identity_max_violation >= 0:
            raise ValueError("violation must be nonnegative")


def check_proper(rule: Rule, grid_size: int = PROPER_GRID, tol: float = PROPER_TOL,
                 respectful: Sequence[tuple[float, float]] = ()) -> DiagnosticsReport:
    """Grid test of x f'(x) = (1-x) f'(1-x) and f' >= 0.

    The rule passes when the identity holds to ``tol`` and f' is positive
    except on at most 0.1% of the grid (never negative).
    """
    x = proper_grid(grid_size)
    fp = np.asarray(rule.fprime(x))
    fp_mirror = np.asarray(rule.fprime(1 - x))
    violation = float(np.max(np.abs(x * fp - (1 - x) * fp_mirror)))
    r2 = np.asarray(rule.R_second(x))
    neg_tol = 1e-12 * max(1.0, float(np.max(np.abs(fp))))
    zero_frac = float(np.mean(fp <= 0))
    proper = (violation <= tol and float(np.min(fp)) >= -neg_tol and zero_frac <= 1e-3)
    try:
        mr = mean_reward(rule)
        residuals = (abs(float(rule.f(0.5))), abs(mr.value - 1.0))
    except ScoringError:
        residuals = (abs(float(rule.f(0.5))), math.inf)
    checks = [check_respectful(rule, c, t) for c, t in respectful]
    return DiagnosticsReport(violation, float(np.min(fp)), float(np.min(r2)),
                             float(np.max(r2)),
                             [(r.c, r.t, r.passed) for r in checks],
                             residuals, bool(proper), len(x))


def check_respectful(rule: Rule, c: float, t: float, *, exponent: float = RESPECT_EXPONENT,
                     grid_size: int = 4097, x_min: float = 1e-12,
                     convexity_floor: float = 1e-3) -> RespectfulResult:
    """Numeric check of strong convexity and the R'''/R'' ratio bound.

    (1) R'' must stay above ``convexity_floor * R''(1/2)`` on a grid that
        runs geometrically down to ``x_min`` from both ends;
    (3) |R'''(x)| <= R''(x) / (c**exponent * sqrt(x(1-x))) on [c^t, 1-c^t].
    Returns the first violating x as the witness.
    """
    if not c > 0:
        raise ParameterError(f"c must be positive, got {c}")
    if not 0.25 < t <= 0.3:
        raise ParameterError(f"t must lie in (1/4, 0.3], got {t}")
    geo = np.geomspace(x_min, 0.5, 512)
    xs = np.unique(np.concatenate([geo, 1 - geo, np.linspace(0, 1, grid_size)[1:-1]]))
    r2 = np.asarray(rule.R_second(xs))
    floor = convexity_floor * float(rule.R_second(0.5))
    low = np.flatnonzero(~(r2 > floor))
    if len(low):
        return RespectfulResult(c, t, False, float(xs[low[0]]), "strong_convexity")
    lo = c ** t
    if lo < 0.5:
        z = np.linspace(lo, 1 - lo, grid_size)
        z = z[(z > 0) & (z < 1)]
        r2z = np.asarray(rule.R_second(z))
        r3z = np.asarray(rule.R_third(z))
        bound = r2z / (c ** exponent * np.sqrt(z * (1 - z)))
        bad = np.flatnonzero(np.abs(r3z) > bound * (1 + 1e-12))
        if len(bad):
            return RespectfulResult(c, t, False, float(z[bad[0]]), "ratio_bound")
    return RespectfulResult(c, t, True, None, None)
