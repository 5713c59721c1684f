"""
Moment-to-natural parameter conversion by the iterative linear system method.

The density is written ``p_lambda(x) = exp(-sum_{i=0}^D lambda_i x^i)`` so
that ``lambda_0`` absorbs the log-normalizer and ``lambda_i = -theta_i``.
Each iteration linearizes the moment conditions ``K_i(lambda) = eta_i``
(``eta_0 = 1``) and solves with the Hankel Jacobian
``H_ij = -E[x^(i+j)]``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, NumericalError, ValidationError
from .numerics import QuadratureSettings, hankel_from_moments, solve
from .ped import MomentParam, PedNatural, RealLine, _stabilized_moments, log_partition, moments_numeric

logger = logging.getLogger(__name__)

__all__ = ["IlsmConfig", "IlsmDiagnostics", "eta_to_theta", "eta_to_theta_continuation", "theta_to_eta_quadrature"]


@dataclass(frozen=True)
class IlsmConfig:
    max_iters: int = 50
    step_tol: float = 1e-8
    residual_tol: float = 1e-6
    damping: float = 1.0
    max_halvings: int = 5
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if not (self.step_tol > 0 and self.residual_tol > 0):
            raise ValidationError("tolerances must be positive")
        if not 0 < self.damping <= 1:
            raise ValidationError("damping must lie in (0, 1]")


@dataclass
class IlsmDiagnostics:
    iterations: int
    residual: float
    step: float
    lambda0: float
    residual_history: list = field(default_factory=list)


def _moment_state(lam, support, q):
    """Return ``(K_0..K_D, mu_0..mu_2D, scale)`` where ``K = scale * mu[:D+1]``."""
    D = len(lam) - 1
    theta = -lam[1:]
    F, mu = _stabilized_moments(theta, support, 2 * D, q)
    if not (np.all(np.isfinite(mu)) and F - lam[0] < 700):
        raise NumericalError("moment state overflow")
    scale = math.exp(F - lam[0])
    return scale * mu[: D + 1], mu, scale


def eta_to_theta(
    eta: MomentParam,
    init: PedNatural,
    cfg: IlsmConfig | None = None,
) -> tuple[PedNatural, IlsmDiagnostics]:
    """Newton iteration from ``init`` to the PED whose moments are ``eta``.

    The iteration stops once both the sup-norm of the update and the sup-norm
    of the moment residual fall below their tolerances. A step that increases
    the residual or produces a non-integrable trial is halved, at most
    ``cfg.max_halvings`` times.

    Raises
    ------
    ConvergenceError
        If ``cfg.max_iters`` is reached or step halving is exhausted; carries
        the last iterate and residual.
    """
    cfg = cfg or IlsmConfig()
    if eta.order != init.order:
        raise ValidationError("eta and init orders differ")
    eta.check()
    support = init.support
    q = cfg.quadrature
    target = eta.augmented()

    lam = np.concatenate([[log_partition(init, q)], -init.theta])
    K, mu, scale = _moment_state(lam, support, q)
    resid = target - K
    rnorm = float(np.max(np.abs(resid)))
    history = [rnorm]

    for it in range(1, cfg.max_iters + 1):
        sol = solve(hankel_from_moments(mu), resid)
        step = -sol.x / scale
        snorm = float(np.max(np.abs(step)))

        if rnorm <= cfg.residual_tol and snorm <= cfg.step_tol:
            lam = lam + step
            return _finish(lam, support, it, rnorm, snorm, history)

        t = cfg.damping
        for _ in range(cfg.max_halvings + 1):
            trial = lam + t * step
            if isinstance(support, RealLine) and not trial[-1] > 0:
                t *= 0.5
                continue
            try:
                K_t, mu_t, scale_t = _moment_state(trial, support, q)
            except NumericalError:
                t *= 0.5
                continue
            r_t = target - K_t
            rn_t = float(np.max(np.abs(r_t)))
            if rn_t <= rnorm or rn_t <= cfg.residual_tol:
                break
            t *= 0.5
        else:
            raise ConvergenceError(
                f"step halving exhausted at iteration {it} (residual {rnorm:.3g})",
                last=PedNatural(-lam[1:], support) if lam[-1] > 0 or not isinstance(support, RealLine) else None,
                residual=rnorm,
                iterations=it,
            )
        lam, K, mu, scale, resid, rnorm = trial, K_t, mu_t, scale_t, r_t, rn_t
        history.append(rnorm)
        logger.debug("ILSM iteration %d: residual %.3e, step %.3e", it, rnorm, t * snorm)
        if rnorm <= cfg.residual_tol and t * snorm <= cfg.step_tol:
            return _finish(lam, support, it, rnorm, t * snorm, history)

    raise ConvergenceError(
        f"ILSM did not converge in {cfg.max_iters} iterations (residual {rnorm:.3g})",
        last=PedNatural(-lam[1:], support),
        residual=rnorm,
        iterations=cfg.max_iters,
    )


def _finish(lam, support, it, rnorm, snorm, history):
    diag = IlsmDiagnostics(
        iterations=it, residual=rnorm, step=snorm, lambda0=float(lam[0]), residual_history=history
    )
    return PedNatural(-lam[1:], support), diag


def eta_to_theta_continuation(
    eta: MomentParam,
    init: PedNatural,
    cfg: IlsmConfig | None = None,
    min_step: float = 1e-3,
) -> tuple[PedNatural, IlsmDiagnostics]:
    """ILSM along the moment path from ``init``'s own moments to ``eta``.

    Each intermediate target ``(1 - t) eta(init) + t eta`` is solved from the
    previous solution, so every Newton run starts close to its answer. The
    path increment doubles after a success and halves after a failure.

    Raises
    ------
    ConvergenceError
        If the increment drops below ``min_step``.
    """
    cfg = cfg or IlsmConfig()
    start = moments_numeric(init, init.order, cfg.quadrature)[1:]
    goal = eta.eta
    current, t, dt = init, 0.0, 0.25
    total = 0
    history = []
    while True:
        t_next = min(1.0, t + dt)
        try:
            current_next, diag = eta_to_theta(MomentParam((1 - t_next) * start + t_next * goal), current, cfg)
        except NumericalError as exc:
            dt *= 0.5
            if dt < min_step:
                raise ConvergenceError(
                    f"moment continuation stalled at t={t:.4g}: {exc}", last=current, residual=None, iterations=total
                ) from exc
            continue
        total += diag.iterations
        history.extend(diag.residual_history)
        current, t = current_next, t_next
        if t >= 1.0:
            diag.iterations = total
            diag.residual_history = history
            return current, diag
        dt *= 2.0


def theta_to_eta_quadrature(theta: PedNatural, q: QuadratureSettings | None = None) -> MomentParam:
    """Moment parameters of ``p_theta`` by quadrature."""
    return MomentParam(moments_numeric(theta, theta.order, q)[1:])
