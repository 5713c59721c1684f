"""Acceptance-rejection sampling from unnormalized polynomial exponential densities."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import EnvelopeError, ValidationError
from .gmm import Gmm, log_pdf, sample
from .numerics import QuadratureSettings
from .ped import Interval, MomentParam, PedNatural, integration_window, moments_numeric

__all__ = [
    "default_proposal",
    "auto_envelope",
    "log_envelope",
    "RejectionResult",
    "rejection_sample",
    "theta_to_eta_mc",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def default_proposal(target: PedNatural, inflation: float = 1.5, q: QuadratureSettings | None = None) -> Gmm:
    """Two equal-weight normals at ``mean -/+ sd`` with ``sd`` inflated by ``inflation``."""
    mu = moments_numeric(target, 2, q)
    sd = math.sqrt(max(mu[2] - mu[1] ** 2, 1e-300))
    return Gmm([0.5, 0.5], [mu[1] - sd, mu[1] + sd], [inflation * sd, inflation * sd])


def _log_ratio(target, proposal):
    coeffs = np.concatenate([[0.0], target.theta])
    return lambda x: npoly.polyval(x, coeffs) - log_pdf(proposal, x)


def _golden_max(fn, a, b, iters=100):
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fn(d)
        if b - a <= 1e-12 * (1.0 + abs(a)):
            break
    return max(fc, fd)


def log_envelope(
    target: PedNatural,
    proposal: Gmm,
    margin: float = 1e-3,
    grid: int = 4096,
    q: QuadratureSettings | None = None,
) -> float:
    """``log c`` for :func:`auto_envelope`, safe when ``c`` would overflow."""
    q = q or QuadratureSettings()
    w = integration_window(target.theta, target.support, q)
    r = _log_ratio(target, proposal)
    xs = np.linspace(w.a, w.b, grid)
    vals = r(xs)
    i = int(np.argmax(vals))
    best = float(vals[i])
    if not isinstance(target.support, Interval):
        width = w.b - w.a
        for edge, outward in ((0, w.a - 0.5 * width), (grid - 1, w.b + 0.5 * width)):
            if vals[edge] >= best - 1e-9 and r(outward) > vals[edge] + 1e-9:
                raise EnvelopeError("proposal tails too light: density ratio grows beyond the bracket")
    lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, grid - 1)]
    best = max(best, _golden_max(lambda x: float(r(x)), lo, hi))
    return best + math.log1p(margin)


def auto_envelope(
    target: PedNatural,
    proposal: Gmm,
    margin: float = 1e-3,
    grid: int = 4096,
    q: QuadratureSettings | None = None,
) -> float:
    """Constant ``c`` with ``c f(x) >= exp(P_theta(x))`` on the support.

    The ratio is maximized on a ``grid``-point mesh over the quadrature
    bracket and refined by golden-section search, then inflated by
    ``1 + margin``.

    Raises
    ------
    EnvelopeError
        If the ratio keeps increasing past the bracket edges.
    """
    return math.exp(log_envelope(target, proposal, margin, grid, q))


class RejectionResult(NamedTuple):
    samples: np.ndarray
    acceptance_rate: float
    proposals: int


def rejection_sample(
    target: PedNatural,
    proposal: Gmm,
    c: float | None,
    rng: np.random.Generator,
    n: int,
    *,
    log_c: float | None = None,
) -> RejectionResult:
    """Draw ``n`` variates from ``exp(P_theta)`` under the envelope ``c f``.

    Either ``c`` or ``log_c`` must be given. Every proposal is checked
    against the envelope; a violation raises :class:`EnvelopeError`.
    """
    if n < 1:
        raise ValidationError("sample count must be >= 1")
    if log_c is None:
        if c is None or not c > 0:
            raise ValidationError("envelope constant must be positive")
        log_c = math.log(c)
    r = _log_ratio(target, proposal)
    a, b = (target.support.a, target.support.b) if isinstance(target.support, Interval) else (-np.inf, np.inf)

    out = []
    accepted = proposals = 0
    rate_guess = 0.5
    while accepted < n:
        batch = int(min(max(1024, 1.2 * (n - accepted) / rate_guess), 1_000_000))
        x = sample(proposal, rng, batch)
        u = rng.random(batch)
        lr = r(x)
        inside = (x > a) & (x < b)
        if np.any(lr[inside] > log_c + 1e-9):
            raise EnvelopeError("envelope violated: c f(x) < q(x) at a proposed point")
        keep = inside & (np.log(u) + log_c <= lr)
        out.append(x[keep])
        accepted += int(keep.sum())
        proposals += batch
        rate_guess = max(accepted / proposals, 1e-4)
        if proposals >= 100_000 and accepted / proposals < 1e-4:
            raise EnvelopeError(f"envelope too loose: acceptance rate {accepted / proposals:.2g}")
    samples = np.concatenate(out)[:n]
    return RejectionResult(samples, accepted / proposals, proposals)


def theta_to_eta_mc(
    target: PedNatural,
    proposal: Gmm | None,
    rng: np.random.Generator,
    n: int,
    q: QuadratureSettings | None = None,
) -> MomentParam:
    """Monte Carlo moment parameters ``(1/n) sum_j x_j^i`` from rejection samples."""
    xs = sample_ped(target, rng, n, proposal, q).samples
    return MomentParam(np.mean(xs[:, None] ** np.arange(1, target.order + 1), axis=0))


def sample_ped(
    target: PedNatural,
    rng: np.random.Generator,
    n: int,
    proposal: Gmm | None = None,
    q: QuadratureSettings | None = None,
) -> RejectionResult:
    """Rejection samples with the default proposal and an automatic envelope."""
    proposal = proposal or default_proposal(target, q=q)
    return rejection_sample(target, proposal, None, rng, n, log_c=log_envelope(target, proposal, q=q))
