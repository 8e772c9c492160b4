"""Incentivization index, Gaussian moments and the predicted-error formula."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .calculus import integrate_open, normalize_rule
from .errors import (
    CrossCheckError,
    InfiniteIndexError,
    NonConvergenceError,
    ParameterError,
)

INDEX_REL_TOL = 1e-11
FORM_AGREEMENT = 1e-7


class NormalizationWarning(UserWarning):
    """A raw rule was normalized on the fly."""


def gaussian_moment(ell: float) -> float:
    """E|Z|^l for standard normal Z: 2^(l/2) Gamma((l+1)/2) / sqrt(pi)."""
    if not ell >= 0:
        raise ParameterError(f"ell must be >= 0, got {ell}")
    return math.exp(0.5 * ell * math.log(2.0) + math.lgamma(0.5 * (ell + 1))
                    - 0.5 * math.log(math.pi))


@dataclass(frozen=True)
class IndexReport:
    ell: float
    ind: float
    mu_ell: float
    predicted_error_coeff: float
    quad_error: float
    rule: str = ""
    via_g_prime: float = math.nan
    diagnosis: str | None = None

    def as_dict(self) -> dict:
        return {
            "rule": self.rule, "ell": self.ell, "ind": self.ind, "mu_ell": self.mu_ell,
            "predicted_error_coeff": self.predicted_error_coeff,
            "quad_error": self.quad_error, "via_g_prime": self.via_g_prime,
            "diagnosis": self.diagnosis,
        }


def _ensure_normalized(rule, auto_normalize: bool):
    if getattr(rule, "normalized", False) or not auto_normalize:
        return rule
    warnings.warn(f"rule {rule.label} is not normalized; normalizing before use",
                  NormalizationWarning, stacklevel=3)
    return normalize_rule(rule)[0]


def _report(rule, ell, ind, err, via_g, diagnosis=None):
    mu = gaussian_moment(ell)
    return IndexReport(ell, ind, mu, mu * 2.0 ** (ell / 4) * ind, err, rule.label,
                       via_g, diagnosis)


def incentivization_index(rule, ell: float, *, auto_normalize: bool = True,
                          rel_tol: float = INDEX_REL_TOL,
                          agreement: float = FORM_AGREEMENT) -> IndexReport:
    """Ind^l = int_0^1 (x(1-x)/R''(x))^(l/4) dx, cross-checked by the g' form.

    The primary value is 2 * int_{1/2}^1 (x(1-x)/R'')^(l/4); the second is
    int_0^1 (x(1-x)^2/g'(x))^(l/4).  A raw rule is normalized first (with a
    NormalizationWarning).  R'' vanishing on part of the sampled grid raises
    InfiniteIndexError; a divergent integral yields ind = inf with a diagnosis.
    """
    if not ell >= 1:
        raise ParameterError(f"ell must be >= 1, got {ell}")
    rule = _ensure_normalized(rule, auto_normalize)
    power = ell / 4.0

    grid = np.linspace(0.5, 1.0, 4097)[:-1]
    r2 = np.asarray(rule.R_second(grid))
    zero = r2 <= 0
    if np.mean(zero) > 1e-3:
        raise InfiniteIndexError(
            f"R'' of {rule.label} vanishes on {np.mean(zero):.1%} of [1/2, 1); "
            "the index is infinite")

    def via_r2(x):
        with np.errstate(divide="ignore", over="ignore"):
            return (x * (1 - x) / rule.R_second(x)) ** power

    def via_gp(x):
        with np.errstate(divide="ignore", over="ignore"):
            return (x * (1 - x) ** 2 / rule.fprime(x)) ** power

    try:
        main = integrate_open(via_r2, 0.5, 1.0, rel_tol)
        second = integrate_open(via_gp, 0.0, 1.0, rel_tol)
    except NonConvergenceError as exc:
        return _report(rule, ell, math.inf, math.inf, math.nan,
                       f"index integral diverges: {exc}")
    ind = 2.0 * main.value
    if abs(ind - second.value) > agreement * max(ind, 1e-300):
        raise CrossCheckError(
            f"index forms disagree for {rule.label} at l={ell}: "
            f"{ind!r} vs {second.value!r}")
    err = 2.0 * main.error_estimate + abs(ind - second.value)
    return _report(rule, ell, ind, err, second.value)


def predicted_error(rule, ell: float, c: float, *, report: IndexReport | None = None) -> float:
    """mu_l 2^(l/4) Ind^l(rule) c^(l/4): the small-cost limit of E|p - q|^l."""
    if not c > 0:
        raise ParameterError(f"cost must be positive, got {c}")
    if report is None:
        report = incentivization_index(rule, ell)
    return report.predicted_error_coeff * c ** (ell / 4)


def optimal_index(ell: float) -> IndexReport:
    from .optimal import optimal_rule
    return _optimal_index_cached(float(ell), optimal_rule(ell))


_OPT_CACHE: dict = {}


def _optimal_index_cached(ell, rule):
    if ell not in _OPT_CACHE:
        _OPT_CACHE[ell] = incentivization_index(rule, ell)
    return _OPT_CACHE[ell]


def precision_ratio(rule, ell: float, *, report: IndexReport | None = None) -> float:
    """(Ind^l(g_{l,Opt}) / Ind^l(rule))^(1/l); 1 means optimal."""
    if report is None:
        report = incentivization_index(rule, ell)
    return (optimal_index(ell).ind / report.ind) ** (1.0 / ell)


def load_rule(spec):
    """Build a rule from a spec (string or record) and normalize it."""
    from .rules import build_rule
    rule = build_rule(spec)
    if not rule.normalized:
        rule = normalize_rule(rule)[0]
    return rule
