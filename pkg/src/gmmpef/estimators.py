"""
Converting a Gaussian mixture into a polynomial exponential density.

Two integral estimators are provided:

* moment matching (integral MLE): ``eta_i = E_m[x^i]``, exact from the
  closed-form mixture moments;
* integral score matching (SME): ``theta = -A^{-1} b`` with
  ``A_ij = i j mu_{i+j-2}`` and ``b_j = j (j-1) mu_{j-2}``.

The SME system can equivalently be assembled from the Stein moment recurrence
``sum_i i theta_i mu_{i+j-1} = -j mu_{j-1}`` (``j = 0..D-1``), whose matrix is
the Hankel moment matrix ``[mu_{i+j}]`` acting on ``(i theta_i)``.

For ``D >= 6`` the fits run on the standardized variable ``(x - c) / s`` and
the polynomial is mapped back, which keeps the moment matrices well
conditioned.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as npoly

from .errors import NonIntegrableFitError, NotPositiveDefiniteError, ValidationError
from .gmm import Gmm, raw_moments
from .numerics import hankel_from_moments, solve
from .ped import MomentParam, PedNatural, PedPair, RealLine, integrable_on_real_line

__all__ = [
    "STANDARDIZE_FROM_ORDER",
    "mle_convert",
    "sme_theta",
    "sme_convert_direct",
    "sme_convert_hankel",
    "convert_pair",
    "standardization_for",
    "map_theta_back",
    "map_theta_forward",
]

STANDARDIZE_FROM_ORDER = 6


def _check_order(D):
    if not isinstance(D, (int, np.integer)) or D < 1:
        raise ValidationError(f"order must be a positive integer, got {D!r}")


def _check_even(D):
    _check_order(D)
    if D % 2:
        raise ValidationError(f"order {D} must be even for a real-line target")


def standardization_for(*mixtures: Gmm) -> tuple[float, float]:
    """Shift and scale of the equal-weight pool of ``mixtures``."""
    mean = np.mean([m.mean() for m in mixtures])
    second = np.mean([m.weights @ (m.mus**2 + m.sigmas**2) for m in mixtures])
    return float(mean), float(np.sqrt(max(second - mean**2, 1e-300)))


def map_theta_back(theta_std, shift: float, scale: float) -> np.ndarray:
    """Coefficients in ``x`` of ``P(y)`` with ``y = (x - shift) / scale``, constant dropped."""
    p = npoly.Polynomial(np.concatenate([[0.0], theta_std]))
    coef = p(npoly.Polynomial([-shift / scale, 1.0 / scale])).coef[1:]
    return np.pad(coef, (0, len(theta_std) - len(coef)))


def map_theta_forward(theta, shift: float, scale: float) -> np.ndarray:
    """Inverse of :func:`map_theta_back`."""
    p = npoly.Polynomial(np.concatenate([[0.0], theta]))
    coef = p(npoly.Polynomial([shift, scale])).coef[1:]
    return np.pad(coef, (0, len(theta) - len(coef)))


def _use_standardization(D, standardize):
    return D >= STANDARDIZE_FROM_ORDER if standardize is None else bool(standardize)


def mle_convert(m: Gmm, D: int) -> MomentParam:
    """Moment parameters ``(E_m[x], ..., E_m[x^D])`` of the best right-sided KLD fit."""
    _check_even(D)
    return MomentParam(raw_moments(m, D)[1:])


def _sme_system(mu, D):
    idx = np.arange(1, D + 1)
    A = np.outer(idx, idx) * mu[np.add.outer(idx, idx) - 2]
    mu_ext = np.concatenate([[0.0], mu])  # mu_ext[l + 1] = mu_l, mu_{-1} = 0
    b = idx * (idx - 1) * mu_ext[idx - 1]
    return A, b


def _solve_direct(mu, D):
    A, b = _sme_system(mu, D)
    try:
        return -scipy.linalg.solve(A, b, assume_a="sym", check_finite=True)
    except (np.linalg.LinAlgError, ValueError):
        raise NotPositiveDefiniteError("score-matching system singular") from None


def _solve_hankel(mu, D):
    H = hankel_from_moments(mu[: 2 * D - 1])
    j = np.arange(D)
    mu_ext = np.concatenate([[0.0], mu])
    rhs = -j * mu_ext[j]  # -j mu_{j-1}
    try:
        beta = solve(H, rhs).x
    except NotPositiveDefiniteError:
        raise NotPositiveDefiniteError("score-matching system singular") from None
    return beta / np.arange(1, D + 1)


def sme_theta(m: Gmm, D: int, standardize: bool | None = None, method: str = "direct") -> np.ndarray:
    """Integral score-matching coefficients ``theta_1..theta_D`` without checks.

    The result may be non-integrable on the real line (``theta_D >= 0``);
    the Jeffreys pair heuristic only needs the coefficient vector.
    """
    _check_order(D)
    shift, scale = standardization_for(m) if _use_standardization(D, standardize) else (0.0, 1.0)
    target = m if (shift, scale) == (0.0, 1.0) else m.affine(shift, scale)
    mu = raw_moments(target, 2 * D - 2 if D > 1 else 1)
    if method == "direct":
        theta = _solve_direct(mu, D)
    elif method == "hankel":
        theta = _solve_hankel(mu, D)
    else:
        raise ValidationError(f"unknown SME method {method!r}")
    if (shift, scale) != (0.0, 1.0):
        theta = map_theta_back(theta, shift, scale)
    return theta


def _snap_trailing(theta, scale, rtol=1e-10):
    """Zero trailing coefficients that are round-off relative to the others.

    Magnitudes are compared scale-free as ``|theta_i| scale^i``. A normal
    input fitted at ``D > 2`` has exact zeros above degree 2 that the solve
    returns as tiny values of either sign.
    """
    mags = np.abs(theta) * float(scale) ** np.arange(1, len(theta) + 1)
    top = mags.max()
    out = theta.copy()
    for i in range(len(out) - 1, 0, -1):
        if mags[i] > rtol * top:
            break
        out[i] = 0.0
    return out


def _as_ped(theta, D, support=None, scale=1.0):
    if support is not None and not isinstance(support, RealLine):
        return PedNatural(theta, support)
    if not theta[-1] < 0:
        theta = _snap_trailing(theta, scale)
    if not integrable_on_real_line(theta):
        err = NonIntegrableFitError(
            f"non-integrable fit: leading coefficient {theta[-1]:.6g} at order {D}; "
            "try a different order"
        )
        err.theta = theta
        raise err
    return PedNatural(theta, RealLine())


def sme_convert_direct(m: Gmm, D: int, standardize: bool | None = None, support=None) -> PedNatural:
    """Integral score-matching fit by solving ``[i j mu_{i+j-2}] theta = -[j (j-1) mu_{j-2}]``.

    The moments are those of ``m`` on the whole line. Passing an
    :class:`~gmmpef.ped.Interval` ``support`` attaches the fitted polynomial to
    that interval instead, where any order and sign of ``theta_D`` is valid.

    Raises
    ------
    NotPositiveDefiniteError
        If the moment system is singular.
    NonIntegrableFitError
        If the fitted leading coefficient is non-negative.
    """
    if support is None or isinstance(support, RealLine):
        _check_even(D)
    return _as_ped(sme_theta(m, D, standardize, "direct"), D, support, m.std())


def sme_convert_hankel(m: Gmm, D: int, standardize: bool | None = None, support=None) -> PedNatural:
    """Score-matching fit via the Stein recurrence and a Hankel moment solve."""
    if support is None or isinstance(support, RealLine):
        _check_even(D)
    return _as_ped(sme_theta(m, D, standardize, "hankel"), D, support, m.std())


def convert_pair(m: Gmm, D: int, standardize: bool | None = None) -> PedPair:
    """``(theta_SME, eta_MLE)`` pair representing ``m`` at order ``D``."""
    return PedPair(sme_convert_direct(m, D, standardize), mle_convert(m, D))
