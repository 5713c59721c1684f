"""
Monomial exponential families ``p(x) = exp(theta x^D - F_D(theta))``.

With a single sufficient statistic ``x^D`` (``D`` even, ``theta < 0``) the
cumulant, its convex conjugate, the entropy and the Kullback-Leibler
divergence all have closed forms, which makes the family a convenient exact
test bed for the generic numerical routines. The absolute variant
``exp(theta |x|^D - F_D(theta))`` shares the same cumulant for any positive
integer ``D`` and yields the maximum-entropy bound
``h[r] <= -F*_D(E_r[|x|^D])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gammaln

from .errors import ValidationError

__all__ = [
    "MefParam",
    "itakura_saito",
    "mef_F",
    "mef_gradF",
    "mef_Fdual",
    "mef_gradFdual",
    "mef_kl",
    "mef_kl_bregman",
    "mef_kl_dual_bregman",
    "mef_kl_legendre_fenchel",
    "mef_entropy",
    "maxent_entropy_bound",
]


def _check_order(D, absolute=False):
    if not isinstance(D, int) or D < 1 or (not absolute and D % 2):
        kind = "positive" if absolute else "even positive"
        raise ValidationError(f"order must be an {kind} integer, got {D!r}")


def _check_theta(theta):
    if not (math.isfinite(theta) and theta < 0):
        raise ValidationError(f"natural parameter must be negative, got {theta!r}")


def _check_eta(eta):
    if not (math.isfinite(eta) and eta > 0):
        raise ValidationError(f"moment parameter must be positive, got {eta!r}")


@dataclass(frozen=True)
class MefParam:
    order: int
    theta: float

    def __post_init__(self):
        _check_order(self.order)
        _check_theta(self.theta)


def _log_const(D):
    # log(2 Gamma(1/D) / D)
    return math.log(2.0) + float(gammaln(1.0 / D)) - math.log(D)


def itakura_saito(p: float, q: float) -> float:
    """``p/q - log(p/q) - 1`` for ratios of like-signed scalars."""
    r = p / q
    if not r > 0:
        raise ValidationError("Itakura-Saito arguments must share a sign")
    return r - math.log(r) - 1.0


def mef_F(p: MefParam) -> float:
    """``log(2 Gamma(1/D) / D) - log(-theta) / D``."""
    return _log_const(p.order) - math.log(-p.theta) / p.order


def mef_gradF(p: MefParam) -> float:
    """Moment parameter ``E[x^D] = -1 / (D theta)``."""
    return -1.0 / (p.order * p.theta)


def mef_Fdual(eta: float, D: int) -> float:
    """Convex conjugate ``-log(2 Gamma(1/D) / D) - (1 + log(D eta)) / D``."""
    _check_order(D, absolute=True)
    _check_eta(eta)
    return -_log_const(D) - (1.0 + math.log(D * eta)) / D


def mef_gradFdual(eta: float, D: int) -> float:
    """Natural parameter ``-1 / (D eta)``."""
    _check_order(D, absolute=True)
    _check_eta(eta)
    return -1.0 / (D * eta)


def _params(theta1, theta2, D):
    return MefParam(D, theta1), MefParam(D, theta2)


def mef_kl(theta1: float, theta2: float, D: int) -> float:
    """``D_KL[p_theta1 : p_theta2] = D_IS[theta2 : theta1] / D``."""
    p1, p2 = _params(theta1, theta2, D)
    return itakura_saito(p2.theta, p1.theta) / D


def mef_kl_bregman(theta1: float, theta2: float, D: int) -> float:
    """The same divergence as the Bregman divergence ``B_F(theta2 : theta1)``."""
    p1, p2 = _params(theta1, theta2, D)
    return mef_F(p2) - mef_F(p1) - (theta2 - theta1) * mef_gradF(p1)


def mef_kl_dual_bregman(theta1: float, theta2: float, D: int) -> float:
    """The dual Bregman form ``B_F*(eta1 : eta2)``."""
    p1, p2 = _params(theta1, theta2, D)
    e1, e2 = mef_gradF(p1), mef_gradF(p2)
    return mef_Fdual(e1, D) - mef_Fdual(e2, D) - (e1 - e2) * mef_gradFdual(e2, D)


def mef_kl_legendre_fenchel(theta1: float, theta2: float, D: int) -> float:
    """Mixed-coordinate form ``F(theta2) + F*(eta1) - theta2 eta1``."""
    p1, p2 = _params(theta1, theta2, D)
    e1 = mef_gradF(p1)
    return mef_F(p2) + mef_Fdual(e1, D) - theta2 * e1


def mef_entropy(p: MefParam) -> float:
    """Differential entropy ``-F*(eta)``."""
    return -mef_Fdual(mef_gradF(p), p.order)


def maxent_entropy_bound(abs_moment: float, D: int) -> float:
    """Upper bound ``-F*_D(E_r[|x|^D])`` on the entropy of any density ``r``.

    Valid for every positive integer ``D`` through the absolute monomial
    family, which attains the bound.
    """
    return -mef_Fdual(abs_moment, D)
