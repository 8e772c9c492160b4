"""Index-minimizing scoring rules g_{l,Opt} and their normalizing constant."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import beta, betainc, hyp2f1

from .calculus import integrate_open
from .errors import DomainError, ParameterError
from .rules import HalfDerivativeRule, Optimal, OptimalLimit, Rule

KAPPA_INF = 320.0 / 3.0


def _check_ell(ell: float) -> float:
    ell = float(ell)
    if not ell >= 1:
        raise ParameterError(f"ell must be >= 1, got {ell}")
    return ell


@lru_cache(maxsize=None)
def _kappa(ell: float) -> float:
    if math.isinf(ell):
        return KAPPA_INF
    alpha = ell / (ell + 4)
    res = integrate_open(lambda x: (x * (1 - x) ** 3) ** alpha, 0.5, 1.0, 1e-14)
    return 1.0 / res.value


def kappa(ell: float) -> float:
    """kappa_l = 1 / int_{1/2}^1 (x (1-x)^3)^(l/(l+4)) dx; 320/3 at l = inf."""
    return _kappa(_check_ell(ell))


def h_tilde(ell: float, x):
    """g' of the optimal rule on [1/2, 1): kappa (x^l (1-x)^(2l-4))^(1/(l+4))."""
    ell = _check_ell(ell)
    x = np.asarray(x, dtype=float)
    if math.isinf(ell):
        return KAPPA_INF * x * (1 - x) ** 2
    e = 1.0 / (ell + 4)
    return kappa(ell) * x ** (ell * e) * (1 - x) ** ((2 * ell - 4) * e)


def phi_opt(ell: float, x):
    """R'' of the optimal rule: kappa (y^(l-8) (1-y)^l)^(1/(l+4)), y = min(x, 1-x)."""
    ell = _check_ell(ell)
    arr = np.asarray(x, dtype=float)
    if not np.all((arr > 0) & (arr < 1)):
        raise DomainError("x must lie in (0, 1)")
    y = np.minimum(arr, 1 - arr)
    if math.isinf(ell):
        out = KAPPA_INF * y * (1 - y)
    else:
        e = 1.0 / (ell + 4)
        out = kappa(ell) * y ** ((ell - 8) * e) * (1 - y) ** (ell * e)
    return float(out) if out.ndim == 0 else out


class OptimalRule(HalfDerivativeRule):
    """g_{l,Opt}: normalized by construction, with closed-form R'' and R'''."""
    has_closed_r3 = True

    def __init__(self, ell: float):
        self.ell = _check_ell(ell)
        self.kappa = kappa(self.ell)
        super().__init__(Optimal(self.ell), lambda y: h_tilde(self.ell, y))
        self.normalized = True
        e = 1.0 / (self.ell + 4)
        # on y = max(x, 1-x): R'' = kappa y^p (1-y)^q
        self._p = self.ell * e
        self._q = (self.ell - 8) * e
        self._closed = self._antiderivative_closed_form()

    def _antiderivative_closed_form(self):
        """int_{1/2}^x g' via incomplete beta / 2F1, or None near l = 2.

        Right of 1/2 the integrand is kappa t^a (1-t)^b with a > 0, b > -1.
        Left of 1/2 it is kappa t^s1 (1-t)^b2 with s1 = (l-8)/(l+4), which is
        <= -1 for l <= 2; there t^s/s 2F1(s, -b2; s+1; t) with s = s1 + 1 is
        the antiderivative.  Close to s = 0 that form cancels badly, so the
        quadrature route is kept.
        """
        e = 1.0 / (self.ell + 4)
        a, b = self.ell * e + 1, (2 * self.ell - 4) * e + 1
        s, b2 = (self.ell - 8) * e + 1, (2 * self.ell + 4) * e
        k = self.kappa
        right_scale = k * beta(a, b)
        right_half = betainc(a, b, 0.5)
        if s > 0:
            left_scale, left_half = k * beta(s, b2 + 1), betainc(s, b2 + 1, 0.5)

            def left(x):
                return left_scale * (betainc(s, b2 + 1, x) - left_half)
        elif abs(s) > 1e-3:
            def G(x):
                return x ** s / s * hyp2f1(s, -b2, s + 1, x)
            left_half = G(0.5)

            def left(x):
                return k * (G(x) - left_half)
        else:
            return None

        def F(x):
            x = np.asarray(x, dtype=float)
            out = np.empty_like(x)
            hi = x >= 0.5
            out[hi] = right_scale * (betainc(a, b, x[hi]) - right_half)
            with np.errstate(divide="ignore", over="ignore"):
                out[~hi] = left(x[~hi])
            return out
        return F

    def _f(self, x):
        if self._closed is None:
            return super()._f(x)
        return self.f_half + self._closed(x)

    def _fp(self, x):
        # closed forms on each side; avoids (1-x)/x * h(1-x) when 1-x rounds to 1
        x = np.asarray(x, dtype=float)
        e = 1.0 / (self.ell + 4)
        with np.errstate(divide="ignore", over="ignore"):
            left = self.kappa * x ** ((self.ell - 8) * e) * (1 - x) ** ((2 * self.ell + 4) * e)
            right = self.kappa * x ** (self.ell * e) * (1 - x) ** ((2 * self.ell - 4) * e)
        return np.where(x >= 0.5, right, left)

    def _R2(self, x):
        y = np.maximum(x, 1 - x)
        return self.kappa * y ** self._p * (1 - y) ** self._q

    def _R3(self, x):
        x = np.asarray(x, dtype=float)
        y = np.maximum(x, 1 - x)
        d = self._R2(y) * (self._p / y - self._q / (1 - y))
        return np.where(x >= 0.5, d, -d)


class OptimalLimitRule(Rule):
    """g_{inf,Opt}(x) = (5/9)(48x^4 - 128x^3 + 96x^2 - 11)."""
    has_closed_r3 = True

    def __init__(self):
        super().__init__(OptimalLimit())
        self.ell = math.inf
        self.kappa = KAPPA_INF
        self.normalized = True

    def _f(self, x):
        return (5.0 / 9.0) * (((48 * x - 128) * x + 96) * x * x - 11)

    def _fp(self, x):
        return KAPPA_INF * x * (1 - x) ** 2

    def _R2(self, x):
        return KAPPA_INF * x * (1 - x)

    def _R3(self, x):
        return KAPPA_INF * (1 - 2 * np.asarray(x, dtype=float))


@lru_cache(maxsize=None)
def _optimal_rule(ell: float) -> Rule:
    if math.isinf(ell):
        return OptimalLimitRule()
    return OptimalRule(ell)


def optimal_rule(ell: float) -> Rule:
    """The normalized proper rule minimizing Ind^l (cached per l)."""
    return _optimal_rule(_check_ell(ell))


def optimal_rule_limit() -> Rule:
    return _optimal_rule(math.inf)
