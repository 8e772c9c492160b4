"""Quadrature on open intervals, antiderivatives, mean reward and normalization.

The integrator is a vectorized adaptive Gauss-Kronrod (10/21) scheme.  Nodes
are strictly interior to every panel, so integrands are never evaluated at
interval endpoints; log-type scoring rules diverge there while the integrals
we need stay finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateRuleError,
    NonConvergenceError,
    NonFiniteIntegrandError,
    NonNormalizableError,
    CrossCheckError,
)

DEFAULT_REL_TOL = 1e-9
ABS_FLOOR = 1e-14
MAX_PANELS = 10**6

# QUADPACK qk21 abscissae (nonnegative half) and weights.
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208745940843,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651146,
])

# Full 21-point rule on [-1, 1].
GK21_NODES = np.concatenate([-_XGK[:-1], [0.0], _XGK[-2::-1]])
GK21_KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], [_WGK[-1]], _WGK[-2::-1]])
_gauss_full = np.zeros(21)
_gauss_full[1:10:2] = _WG
_gauss_full[11:20:2] = _WG[::-1]
GK21_GAUSS_WEIGHTS = _gauss_full


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float
    subdivisions: int

    def __post_init__(self):
        if self.error_estimate < 0 or self.subdivisions < 1:
            raise ValueError("invalid QuadResult")


def _as_vectorized(fn, vectorized: bool):
    if vectorized:
        return fn
    vf = np.vectorize(fn, otypes=[float])
    return vf


def _gk_panels(fn, a: np.ndarray, b: np.ndarray):
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = center[:, None] + half[:, None] * GK21_NODES[None, :]
    # at the resolution limit nodes can round onto a panel end; keep them inside
    x = np.clip(x, np.nextafter(a, b)[:, None], np.nextafter(b, a)[:, None])
    vals = np.asarray(fn(x.ravel()), dtype=float).reshape(x.shape)
    if not np.all(np.isfinite(vals)):
        bad = x[~np.isfinite(vals)][0]
        raise NonFiniteIntegrandError(f"integrand is not finite at x={bad!r}")
    kron = half * (vals @ GK21_KRONROD_WEIGHTS)
    gauss = half * (vals @ GK21_GAUSS_WEIGHTS)
    return kron, np.abs(kron - gauss)


def integrate_open(fn: Callable[[np.ndarray], np.ndarray], lo: float, hi: float,
                   rel_tol: float = DEFAULT_REL_TOL, *, abs_tol: float = ABS_FLOOR,
                   breakpoints: Sequence[float] = (), max_panels: int = MAX_PANELS,
                   vectorized: bool = True) -> QuadResult:
    """Adaptive Gauss-Kronrod integral of ``fn`` over the open interval (lo, hi).

    ``fn`` receives a 1-d array of abscissae.  The interval is pre-split at
    ``breakpoints`` and, when it straddles 1/2, at 1/2 (scoring-rule
    integrands are symmetric about 1/2).  Panels are bisected until the summed
    error estimate is below ``max(rel_tol*|value|, abs_tol)``.

    Raises NonConvergenceError carrying the best estimate when the panel cap
    is hit or panels shrink below floating-point resolution.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    fn = _as_vectorized(fn, vectorized)
    cuts = {float(lo), float(hi)}
    cuts.update(float(p) for p in breakpoints if lo < p < hi)
    if lo < 0.5 < hi:
        cuts.add(0.5)
    edges = np.array(sorted(cuts))
    a, b = edges[:-1].copy(), edges[1:].copy()
    val, err = _gk_panels(fn, a, b)
    frozen = np.zeros(len(a), dtype=bool)

    while True:
        order = np.argsort(a, kind="stable")
        total = math.fsum(val[order])
        err_total = float(np.sum(err[order]))
        tol = max(rel_tol * abs(total), abs_tol)
        if err_total <= tol:
            return QuadResult(total, err_total, len(a))
        if len(a) >= max_panels:
            raise NonConvergenceError(
                f"quadrature did not converge within {max_panels} panels",
                total, err_total)
        live = ~frozen
        if not np.any(live) or float(np.sum(err[frozen])) > tol:
            raise NonConvergenceError(
                "quadrature panels reached floating-point resolution "
                "(integrand likely divergent)", total, err_total)
        threshold = tol / len(a)
        pick = live & (err > threshold)
        if not np.any(pick):
            pick = live & (err == np.max(err[live]))
        idx = np.flatnonzero(pick)
        budget = max_panels - len(a)
        if len(idx) > budget:
            idx = idx[np.argsort(-err[idx], kind="stable")[:budget]]
        pa, pb = a[idx], b[idx]
        mid = 0.5 * (pa + pb)
        splittable = (mid > pa) & (mid < pb)
        frozen[idx[~splittable]] = True
        idx, pa, pb, mid = idx[splittable], pa[splittable], pb[splittable], mid[splittable]
        if len(idx) == 0:
            continue
        try:
            v1, e1 = _gk_panels(fn, pa, mid)
            v2, e2 = _gk_panels(fn, mid, pb)
        except NonFiniteIntegrandError as exc:
            raise NonFiniteIntegrandError(str(exc), total, err_total) from None
        b[idx] = mid
        val[idx], err[idx] = v1, e1
        a = np.concatenate([a, mid])
        b = np.concatenate([b, pb])
        val = np.concatenate([val, v2])
        err = np.concatenate([err, e2])
        frozen = np.concatenate([frozen, np.zeros(len(idx), dtype=bool)])


class HalfAntiderivative:
    """F(x) = integral of ``fn`` from 1/2 to x, for any x in (0, 1).

    Panels are dyadically graded toward 0 and 1 (nodes 2^-j and 1 - 2^-j), so
    each panel sits at a bounded ratio from the nearest endpoint and a fixed
    Gauss-Legendre rule resolves power-law endpoint behavior to rounding
    level.  Node values are cumulative sums; evaluation adds one partial-panel
    Gauss-Legendre integral, so no interpolation error is introduced.
    ``breakpoints`` (e.g. knots of a piecewise function) become extra nodes.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray],
                 breakpoints: Sequence[float] = (), order: int = 30):
        self._fn = fn
        self._gl_x, self._gl_w = np.polynomial.legendre.leggauss(order)
        left = [2.0 ** -j for j in range(1, 1023)]
        right = [1.0 - 2.0 ** -j for j in range(1, 54)]
        nodes = set(left) | set(right)
        nodes.update(float(p) for p in breakpoints if 0.0 < p < 1.0)
        self.nodes = np.array(sorted(nodes))
        self._half = int(np.searchsorted(self.nodes, 0.5))
        # non-integrable endpoint behavior gives infinite node values there
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            panel = self._panel_integrals(self.nodes[:-1], self.nodes[1:])
        values = np.zeros(len(self.nodes))
        h = self._half
        values[h + 1:] = np.cumsum(panel[h:])
        values[:h] = -np.cumsum(panel[:h][::-1])[::-1]
        self.node_values = values

    def _panel_integrals(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        c, r = 0.5 * (a + b), 0.5 * (b - a)
        x = c[:, None] + r[:, None] * self._gl_x[None, :]
        vals = np.asarray(self._fn(x.ravel()), dtype=float).reshape(x.shape)
        return r * (vals @ self._gl_w)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()
        out = np.empty_like(flat)
        # panel j spans nodes[j] .. nodes[j+1]
        j = np.clip(np.searchsorted(self.nodes, flat, side="right") - 1,
                    0, len(self.nodes) - 2)
        right = flat >= 0.5
        # right half: integrate from the left node; left half: from the right node
        jr = j[right]
        out[right] = self.node_values[jr] + self._panel_integrals(self.nodes[jr], flat[right])
        jl = j[~right] + 1
        out[~right] = self.node_values[jl] - self._panel_integrals(flat[~right], self.nodes[jl])
        return out.reshape(x.shape)


@dataclass(frozen=True)
class NormalizationReport:
    a: float
    b: float
    mean_reward_raw: float
    f_half_raw: float


@dataclass(frozen=True)
class MeanReward:
    """Mean reward of a rule computed three ways."""
    value: float
    direct: float
    via_derivative: float
    via_half_integral: float
    spread: float


def mean_reward(rule, rel_tol: float = 1e-11, agreement: float = 1e-8) -> MeanReward:
    """Integral of R over (0, 1), cross-checked by two integration-by-parts forms.

    The three values are the direct integral, f(1/2) + int_{1/2}^1 (1-x) f'(x),
    and f(1/2)/2 + int_{1/2}^1 f(x).  Divergence raises NonNormalizableError;
    disagreement beyond ``agreement`` raises CrossCheckError.
    """
    try:
        direct = integrate_open(rule.R, 0.0, 1.0, rel_tol).value
        f_half = float(rule.f(0.5))
        deriv = f_half + integrate_open(lambda x: (1 - x) * rule.fprime(x), 0.5, 1.0, rel_tol).value
        half = 0.5 * f_half + integrate_open(rule.f, 0.5, 1.0, rel_tol).value
    except NonConvergenceError as exc:
        raise NonNormalizableError(
            f"mean reward of {rule.label} diverges: {exc}") from exc
    vals = (direct, deriv, half)
    spread = max(vals) - min(vals)
    scale = max(1.0, max(abs(v) for v in vals))
    if spread > agreement * scale:
        raise CrossCheckError(
            f"mean reward forms disagree for {rule.label}: {vals}")
    return MeanReward(direct, direct, deriv, half, spread)


def normalize_rule(rule):
    """Affinely rescale ``rule`` so that f(1/2) = 0 and the mean reward is 1.

    Returns ``(normalized_rule, NormalizationReport)``; the report's a, b are
    relative to the input rule.
    """
    mean = mean_reward(rule).value
    f_half = float(rule.f(0.5))
    gap = mean - f_half
    if not math.isfinite(gap):
        raise NonNormalizableError(f"mean reward of {rule.label} is not finite")
    if abs(gap) <= 1e-13 * max(1.0, abs(mean), abs(f_half)):
        raise DegenerateRuleError(f"{rule.label} is constant; cannot normalize")
    a = 1.0 / gap
    b = -a * f_half
    report = NormalizationReport(a, b, mean, f_half)
    return rule.affine(a, b, normalized=True), report
