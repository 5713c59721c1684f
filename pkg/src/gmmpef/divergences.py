"""
Divergences between Gaussian mixtures and polynomial exponential densities.

Monte Carlo estimators give the reference Jeffreys divergence. The fast
deterministic approximation converts each mixture into a
``(theta_SME, eta_MLE)`` pair and evaluates the exponential-family identity
``D_J = (theta' - theta) . (eta' - eta)``. Two slower variants replace one
half of the pair by a numerically converted dual. Order-2 Hyvarinen
divergences score the goodness of fit of an unnormalized PED to a mixture
and drive model-order selection.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

import numpy as np

from .errors import ConvergenceError, GmmPefError, NumericalError, ValidationError
from .estimators import (
    STANDARDIZE_FROM_ORDER,
    map_theta_forward,
    sme_convert_direct,
    sme_theta,
    standardization_for,
)
from .gmm import Gmm, gaussian_product_params, log_pdf, normal_raw_moments, pdf, pdf_derivative, raw_moments, sample
from .maxent import IlsmConfig, eta_to_theta, eta_to_theta_continuation
from .numerics import QuadratureSettings, integrate
from .ped import MomentParam, PedNatural, integrable_on_real_line, integration_window, log_partition, moments_numeric
from .ped import score as ped_score
from .sampling import sample_ped

__all__ = [
    "Method",
    "DivergenceEstimate",
    "kl_mc",
    "jeffreys_mc",
    "jeffreys_ef_closed",
    "default_order",
    "jeffreys_heuristic",
    "heuristic_value",
    "jeffreys_mle_variant",
    "mle_natural",
    "jeffreys_sme_variant",
    "hyvarinen2_gmm_ped",
    "hyvarinen2_gaussians",
    "hyvarinen_alpha_numeric",
    "OrderSelection",
    "select_order",
]


class Method(str, enum.Enum):
    MC = "MC"
    PAIR_HEURISTIC = "PairHeuristic"
    MLE_VARIANT = "MleVariant"
    SME_VARIANT = "SmeVariant"
    CLOSED_FORM = "ClosedForm"
    QUADRATURE = "Quadrature"


@dataclass
class DivergenceEstimate:
    value: float
    method: Method
    stderr: float | None = None
    wall_time: float = 0.0
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method.value,
            "stderr": self.stderr,
            "wall_time": self.wall_time,
            "meta": self.meta,
        }


def _mc_summary(terms, method, t0, **meta):
    s = len(terms)
    value = float(np.mean(terms))
    stderr = float(np.std(terms, ddof=1) / math.sqrt(s)) if s > 1 else float("nan")
    return DivergenceEstimate(value, method, stderr, time.perf_counter() - t0, dict(samples=s, **meta))


def kl_mc(m: Gmm, m2: Gmm, rng: np.random.Generator, s: int) -> DivergenceEstimate:
    """Monte Carlo ``D_KL[m : m2]`` averaging scalar Bregman terms.

    Each term ``log(a/b) + b/a - 1`` is non-negative, so the estimate is too.
    """
    if s < 1:
        raise ValidationError("sample count must be >= 1")
    t0 = time.perf_counter()
    x = sample(m, rng, s)
    lr = log_pdf(m, x) - log_pdf(m2, x)
    terms = lr + np.expm1(-lr)
    return _mc_summary(terms, Method.MC, t0)


def _canonical_pair(m, m2):
    key = lambda g: (g.k, g.weights.tobytes(), g.mus.tobytes(), g.sigmas.tobytes())  # noqa: E731
    return (m, m2) if key(m) <= key(m2) else (m2, m)


def jeffreys_mc(m: Gmm, m2: Gmm, rng: np.random.Generator, s: int) -> DivergenceEstimate:
    """Monte Carlo Jeffreys divergence with samples from the middle mixture.

    The integrand ``2 (m - m') log(m / m') / (m + m')`` is evaluated as
    ``2 d tanh(d / 2)`` with ``d = log m - log m'``. Arguments are ordered
    canonically before merging, so swapping them with the same seed gives
    the identical estimate.
    """
    if s < 1:
        raise ValidationError("sample count must be >= 1")
    t0 = time.perf_counter()
    a, b = _canonical_pair(m, m2)
    x = sample(a.merge(b), rng, s)
    d = log_pdf(m, x) - log_pdf(m2, x)
    terms = 2.0 * d * np.tanh(0.5 * d)
    return _mc_summary(terms, Method.MC, t0)


def _vec(v):
    if isinstance(v, PedNatural):
        return v.theta
    if isinstance(v, MomentParam):
        return v.eta
    return np.asarray(v, dtype=float)


def jeffreys_ef_closed(theta1, eta1, theta2, eta2) -> float:
    """``(theta2 - theta1) . (eta2 - eta1)``; exact for Legendre-dual pairs."""
    t1, e1, t2, e2 = map(_vec, (theta1, eta1, theta2, eta2))
    if not (len(t1) == len(e1) == len(t2) == len(e2)):
        raise ValidationError("parameter orders differ")
    return float((t2 - t1) @ (e2 - e1))


def default_order(m: Gmm, m2: Gmm) -> int:
    """``2 min(k, k', 8)``."""
    return 2 * min(m.k, m2.k, 8)


def _frame(m, m2, D, standardize):
    use = D >= STANDARDIZE_FROM_ORDER if standardize is None else bool(standardize)
    if not use:
        return m, m2, (0.0, 1.0)
    shift, scale = standardization_for(m, m2)
    return m.affine(shift, scale), m2.affine(shift, scale), (shift, scale)


def _check_order(D):
    if not isinstance(D, (int, np.integer)) or D < 2 or D % 2:
        raise ValidationError(f"order must be an even integer >= 2, got {D!r}")


def jeffreys_heuristic(m: Gmm, m2: Gmm, D: int | None = None, standardize: bool | None = None) -> DivergenceEstimate:
    """Pair heuristic ``(theta'_SME - theta_SME) . (eta'_MLE - eta_MLE)``.

    Both mixtures are mapped through one common affine standardization when
    enabled; the inner product is invariant under that map because the
    mixtures' moment differences annihilate the constant term. The value may
    be negative and is reported unclamped. Non-integrable SME fits are
    accepted because only their coefficients enter the formula.
    """
    t0 = time.perf_counter()
    D = default_order(m, m2) if D is None else D
    _check_order(D)
    a, b, frame = _frame(m, m2, D, standardize)
    t1 = sme_theta(a, D, standardize=False)
    t2 = sme_theta(b, D, standardize=False)
    e1 = raw_moments(a, D)[1:]
    e2 = raw_moments(b, D)[1:]
    value = float((t2 - t1) @ (e2 - e1))
    meta = {
        "order": D,
        "standardized": frame != (0.0, 1.0),
        "negative": value < 0,
        "non_integrable": [not integrable_on_real_line(t1), not integrable_on_real_line(t2)],
    }
    return DivergenceEstimate(value, Method.PAIR_HEURISTIC, None, time.perf_counter() - t0, meta)


def heuristic_value(m: Gmm, m2: Gmm, D: int) -> float:
    """Lean form of :func:`jeffreys_heuristic` used for timing benchmarks."""
    if D >= STANDARDIZE_FROM_ORDER:
        shift, scale = standardization_for(m, m2)
    else:
        shift, scale = 0.0, 1.0
    L = 2 * D - 2
    idx = np.arange(1, D + 1)
    outer = np.outer(idx, idx)
    hidx = np.add.outer(idx, idx) - 2
    thetas, etas = [], []
    for g in (m, m2):
        mu = g.weights @ normal_raw_moments((g.mus - shift) / scale, g.sigmas / scale, L)
        mu[0] = 1.0
        A = outer * mu[hidx]
        b = idx * (idx - 1) * np.concatenate([[0.0], mu])[idx - 1]
        thetas.append(-np.linalg.solve(A, b))
        etas.append(mu[1 : D + 1])
    return float((thetas[1] - thetas[0]) @ (etas[1] - etas[0]))


def _gaussian_init(g: Gmm, D: int) -> PedNatural:
    mean, sd = g.mean(), g.std()
    theta = np.zeros(D)
    theta[0] = mean / sd**2
    theta[1] = -0.5 / sd**2
    if D > 2:
        theta[-1] = -1e-4 / sd**D
    return PedNatural(theta)


def mle_natural(g: Gmm, D: int, cfg: IlsmConfig | None = None):
    """Natural parameters of the moment-matching PED of ``g`` at order ``D``.

    Returns ``(theta, eta, diagnostics, init_name)``. ILSM starts from the
    score-matching fit; if that fit is non-integrable or the iteration fails
    from it, a moment-matched normal start is tried, first directly and then
    by continuation along the moment path.

    Raises
    ------
    ConvergenceError
        If every start fails, which happens when no order-``D`` density on
        the real line has the moments of ``g``.
    """
    cfg = cfg or IlsmConfig()
    eta = MomentParam(raw_moments(g, D)[1:])
    attempts = []
    try:
        attempts.append(("sme", eta_to_theta, sme_convert_direct(g, D, standardize=False)))
    except NumericalError as exc:
        attempts.append(("sme", None, exc))
    gauss = _gaussian_init(g, D)
    attempts.append(("gaussian", eta_to_theta, gauss))
    attempts.append(("gaussian-continuation", eta_to_theta_continuation, gauss))
    last_exc = None
    for name, method, init in attempts:
        if isinstance(init, Exception):
            last_exc = init
            continue
        try:
            theta, diag = method(eta, init, cfg)
            return theta, eta, diag, name
        except NumericalError as exc:
            last_exc = exc
    raise ConvergenceError(f"ILSM failed from every initialization: {last_exc}") from last_exc


def jeffreys_mle_variant(
    m: Gmm,
    m2: Gmm,
    D: int | None = None,
    cfg: IlsmConfig | None = None,
    standardize: bool | None = True,
) -> DivergenceEstimate:
    """``(theta~'_MLE - theta~_MLE) . (eta'_MLE - eta_MLE)`` with ILSM duals.

    The duals come from :func:`mle_natural`.
    """
    t0 = time.perf_counter()
    D = default_order(m, m2) if D is None else D
    _check_order(D)
    cfg = cfg or IlsmConfig()
    a, b, frame = _frame(m, m2, D, standardize)
    th1, e1, d1, i1 = mle_natural(a, D, cfg)
    th2, e2, d2, i2 = mle_natural(b, D, cfg)
    value = jeffreys_ef_closed(th1, e1, th2, e2)
    meta = {
        "order": D,
        "standardized": frame != (0.0, 1.0),
        "iterations": [d1.iterations, d2.iterations],
        "residuals": [d1.residual, d2.residual],
        "init": [i1, i2],
    }
    return DivergenceEstimate(value, Method.MLE_VARIANT, None, time.perf_counter() - t0, meta)


def jeffreys_sme_variant(
    m: Gmm,
    m2: Gmm,
    D: int | None = None,
    n: int = 100_000,
    rng: np.random.Generator | None = None,
    moments: str = "mc",
    standardize: bool | None = None,
    q: QuadratureSettings | None = None,
) -> DivergenceEstimate:
    """``(theta'_SME - theta_SME) . (eta~'_SME - eta~_SME)`` with sampled duals.

    ``moments="mc"`` estimates each dual by rejection sampling (the estimate
    then carries a standard error); ``moments="quadrature"`` integrates them
    numerically instead.
    """
    t0 = time.perf_counter()
    D = default_order(m, m2) if D is None else D
    _check_order(D)
    a, b, frame = _frame(m, m2, D, standardize)
    p1 = sme_convert_direct(a, D, standardize=False)
    p2 = sme_convert_direct(b, D, standardize=False)
    dtheta = p2.theta - p1.theta
    powers = np.arange(1, D + 1)
    meta = {"order": D, "standardized": frame != (0.0, 1.0), "moments": moments}
    if moments == "quadrature":
        e1 = moments_numeric(p1, D, q)[1:]
        e2 = moments_numeric(p2, D, q)[1:]
        value = float(dtheta @ (e2 - e1))
        return DivergenceEstimate(value, Method.SME_VARIANT, None, time.perf_counter() - t0, meta)
    if moments != "mc":
        raise ValidationError(f"unknown moment method {moments!r}")
    if rng is None:
        raise ValidationError("an explicit random generator is required for Monte Carlo moments")
    proj = []
    rates = []
    for p in (p1, p2):
        res = sample_ped(p, rng, n, q=q)
        rates.append(res.acceptance_rate)
        proj.append((res.samples[:, None] ** powers) @ dtheta)
    value = float(np.mean(proj[1]) - np.mean(proj[0]))
    stderr = float(math.sqrt(np.var(proj[0], ddof=1) / n + np.var(proj[1], ddof=1) / n)) if n > 1 else None
    meta["acceptance_rates"] = rates
    meta["samples"] = n
    return DivergenceEstimate(value, Method.SME_VARIANT, stderr, time.perf_counter() - t0, meta)


def _theta_of(p) -> np.ndarray:
    return p.theta if isinstance(p, PedNatural) else np.asarray(p, dtype=float)


def hyvarinen2_gmm_ped(m: Gmm, p, standardize: bool | None = None) -> float:
    """Closed-form ``int m(x)^2 (m'(x)/m(x) - P_theta'(x))^2 dx``.

    Every term reduces to Gaussian product integrals
    ``int x^l p_a p_b = kappa_ab E[X^l]`` with ``X ~ N(mu_ab, sigma_ab)``.
    Only ``theta`` enters: the value is unchanged by rescaling ``exp(P)``.
    For high orders the computation runs on a standardized variable; the
    divergence scales by ``scale^3`` under ``x -> (x - shift) / scale``.
    """
    theta = _theta_of(p)
    D = len(theta)
    use = D >= STANDARDIZE_FROM_ORDER if standardize is None else bool(standardize)
    if use:
        shift, scale = m.mean(), m.std()
        return hyvarinen2_gmm_ped(m.affine(shift, scale), map_theta_forward(theta, shift, scale), False) / scale**3

    w, mu, sg = m.weights, m.mus, m.sigmas
    kappa, mu_ab, sg_ab = gaussian_product_params(mu[:, None], sg[:, None], mu[None, :], sg[None, :])
    L = max(2 * D - 2, D, 2)
    M = normal_raw_moments(mu_ab, sg_ab, L)  # (k, k, L+1)
    c = (w[:, None] * w[None, :] * kappa)[..., None]
    var_a = (sg**2)[:, None, None]
    mu_a = mu[:, None, None]

    sq = (c * M).sum(axis=(0, 1))  # int x^l m^2
    cross = -(c / var_a * (M[..., 1:] - mu_a * M[..., :-1])).sum(axis=(0, 1))  # int x^l m' m
    cd = c[..., 0] / (sg[:, None] ** 2 * sg[None, :] ** 2)
    deriv_sq = float(
        (cd * (M[..., 2] - (mu[:, None] + mu[None, :]) * M[..., 1] + mu[:, None] * mu[None, :] * M[..., 0])).sum()
    )

    i = np.arange(1, D + 1)
    it = i * theta
    linear = float(it @ cross[i - 1])
    quad = float(it @ sq[np.add.outer(i, i) - 2] @ it)
    return deriv_sq - 2.0 * linear + quad


def hyvarinen2_gaussians(mu1: float, sigma1: float, mu2: float, sigma2: float) -> float:
    """The published two-normal expression for the order-2 Hyvarinen divergence.

    ``((s1^2 - s2^2)^2 + 2 (mu2 - mu1)^2 s1^2) / (8 sqrt(pi) s1^3 s2^4)``.
    This is the half-scaled convention (the one with the 1/2 prefactor used
    in score matching); it equals exactly half of :func:`hyvarinen2_gmm_ped`
    on the corresponding single-normal mixture and order-2 PED.
    """
    if not (sigma1 > 0 and sigma2 > 0):
        raise ValidationError("sigmas must be positive")
    num = (sigma1**2 - sigma2**2) ** 2 + 2.0 * (mu2 - mu1) ** 2 * sigma1**2
    return num / (8.0 * math.sqrt(math.pi) * sigma1**3 * sigma2**4)


DensityLike = Union[Gmm, PedNatural, tuple, Callable]


def _density_and_score(d, q_settings):
    """Return ``(density, score, (a, b) or None)`` for a density-like object."""
    if isinstance(d, Gmm):
        lo = float(np.min(d.mus - 14 * d.sigmas))
        hi = float(np.max(d.mus + 14 * d.sigmas))
        return (lambda x: pdf(d, x)), (lambda x: pdf_derivative(d, x) / pdf(d, x)), (lo, hi)
    if isinstance(d, PedNatural):
        F = log_partition(d, q_settings)
        coeffs = np.concatenate([[0.0], d.theta])
        win = integration_window(d.theta, d.support, q_settings)
        dens = lambda x: np.exp(np.polynomial.polynomial.polyval(x, coeffs) - F)  # noqa: E731
        return dens, (lambda x: ped_score(d, x)), (win.a, win.b)
    if isinstance(d, tuple):
        return d[0], d[1], None
    if callable(d):
        return d, _numeric_score(d), None
    raise ValidationError(f"cannot interpret {d!r} as a density")


def _numeric_score(f, h=1e-3):
    # five-point stencil on log f
    def score(x):
        lf = lambda t: np.log(f(t))  # noqa: E731
        return (lf(x - 2 * h) - 8 * lf(x - h) + 8 * lf(x + h) - lf(x + 2 * h)) / (12 * h)

    return score


def hyvarinen_alpha_numeric(
    p: DensityLike,
    q: DensityLike,
    alpha: float,
    s: QuadratureSettings | None = None,
    limits: tuple | None = None,
) -> float:
    """Quadrature of ``int p(x)^alpha (score_p(x) - score_q(x))^2 dx``.

    ``p`` must be normalized; ``q`` may be unnormalized. Each argument is a
    :class:`Gmm`, a :class:`PedNatural` (``p`` is normalized numerically), a
    ``(density, score)`` pair of callables, or a bare density callable whose
    score is taken by finite differences of its logarithm.
    """
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    s = s or QuadratureSettings(rel_tol=1e-13)
    dp, sp, lim_p = _density_and_score(p, s)
    _, sq, _ = _density_and_score(q, s)
    lim = limits or lim_p
    if lim is None:
        raise ValidationError("integration limits are required for callable densities")

    def integrand(x):
        gap = sp(x) - sq(x)
        return np.power(dp(x), alpha) * gap * gap

    return float(integrate(integrand, lim[0], lim[1], s))


@dataclass
class OrderSelection:
    best_order: int
    scores: dict
    failures: dict = field(default_factory=dict)
    within_epsilon: bool | None = None


def select_order(m: Gmm, candidates: Iterable[int], epsilon: float | None = None) -> OrderSelection:
    """Pick the PED order whose score-matching fit has the smallest ``D_H,2``.

    Ties (within ``1e-12`` absolute plus ``1e-9`` relative) go to the smaller
    order. With ``epsilon``, the smallest order scoring at most ``epsilon``
    wins; if none does, the overall argmin is returned with
    ``within_epsilon=False``.
    """
    orders = sorted(set(int(D) for D in candidates))
    if not orders:
        raise ValidationError("no candidate orders")
    scores, failures = {}, {}
    for D in orders:
        try:
            scores[D] = hyvarinen2_gmm_ped(m, sme_convert_direct(m, D))
        except GmmPefError as exc:
            failures[D] = str(exc)
    if not scores:
        detail = "; ".join(f"D={D}: {msg}" for D, msg in failures.items())
        raise NumericalError(f"no candidate order could be fitted ({detail})")

    best = None
    for D in sorted(scores):
        if best is None or scores[D] < scores[best] - (1e-12 + 1e-9 * abs(scores[best])):
            best = D
    if epsilon is None:
        return OrderSelection(best, scores, failures)
    ok = [D for D in sorted(scores) if scores[D] <= epsilon]
    if ok:
        return OrderSelection(ok[0], scores, failures, True)
    return OrderSelection(best, scores, failures, False)
