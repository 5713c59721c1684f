"""Shared numerical kernels: adaptive quadrature and Hankel moment matrices."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefiniteError, QuadratureError, ValidationError

__all__ = [
    "FixedClamp",
    "PolynomialBracket",
    "QuadratureSettings",
    "integrate",
    "HankelMoments",
    "HankelSolution",
    "IllConditionedWarning",
    "hankel_from_moments",
    "solve",
    "is_positive_definite",
]


@dataclass(frozen=True)
class FixedClamp:
    """Integrate over a fixed window ``[a, b]`` regardless of the integrand."""

    a: float = -100.0
    b: float = 100.0


@dataclass(frozen=True)
class PolynomialBracket:
    """Integrate where the log-density is within ``drop`` of its peak."""

    drop: float = 60.0


@dataclass(frozen=True)
class QuadratureSettings:
    """Tolerances for :func:`integrate`.

    ``abs_tol`` applies to the stabilized integrand; ``rel_tol`` lets large
    integrals (high-order moments) terminate once relatively converged.
    ``initial_panels`` sets the breadth of the first partition so that narrow
    peaks are not stepped over.
    """

    abs_tol: float = 1e-10
    max_depth: int = 20
    window_policy: Union[FixedClamp, PolynomialBracket] = field(default_factory=PolynomialBracket)
    rel_tol: float = 1e-12
    initial_panels: int = 64

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ValidationError("abs_tol must be positive")
        if self.max_depth < 1:
            raise ValidationError("max_depth must be >= 1")
        if self.initial_panels < 1:
            raise ValidationError("initial_panels must be >= 1")


def _simpson(fa, fm, fb, h):
    # h is the panel width; broadcasting over trailing (vector-valued) axes
    return (h / 6.0) * (fa + 4.0 * fm + fb)


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    s: QuadratureSettings | None = None,
    breakpoints=None,
):
    """Adaptive Simpson quadrature of a vectorized integrand over ``[a, b]``.

    Panels are refined breadth-first so every level costs one vectorized call
    of ``f``. A panel is accepted once the Richardson error estimate
    ``|S_left + S_right - S_whole| / 15`` drops below its share of
    ``abs_tol`` (proportional to its width) or below ``rel_tol`` times its
    own contribution.

    Parameters
    ----------
    f : callable
        Maps an array of abscissae of shape ``(n,)`` to values of shape
        ``(n,)`` or ``(n, m)`` for vector-valued integrands.
    a, b : float
        Integration limits, ``a <= b``.
    s : QuadratureSettings, optional
        Tolerances; defaults to ``QuadratureSettings()``.
    breakpoints : array_like, optional
        Extra interior points included in the initial partition (e.g. the
        integrand's local maxima).

    Returns
    -------
    float or numpy.ndarray
        The integral estimate, scalar or of shape ``(m,)``.

    Raises
    ------
    QuadratureError
        If ``max_depth`` refinement levels do not meet the tolerance. The
        exception carries the best estimate and the achieved error.
    """
    s = s or QuadratureSettings()
    if not (np.isfinite(a) and np.isfinite(b)):
        raise ValidationError("integration limits must be finite")
    if b < a:
        raise ValidationError("integration limits must satisfy a <= b")
    if a == b:
        probe = np.asarray(f(np.array([a], dtype=float)))
        return np.zeros(probe.shape[1:]) if probe.ndim > 1 else 0.0

    nodes = np.linspace(a, b, s.initial_panels + 1)
    if breakpoints is not None:
        extra = np.asarray(breakpoints, dtype=float)
        extra = extra[(extra > a) & (extra < b)]
        nodes = np.unique(np.concatenate([nodes, extra]))
    lo, hi = nodes[:-1], nodes[1:]
    mid = 0.5 * (lo + hi)
    fx = np.asarray(f(np.concatenate([nodes, mid])), dtype=float)
    flo, fhi = fx[: len(nodes) - 1], fx[1 : len(nodes)]
    fmid = fx[len(nodes) :]
    width = b - a

    total = np.zeros(fx.shape[1:])
    total_err = np.zeros(fx.shape[1:])
    whole = _simpson(flo, fmid, fhi, _bcast(hi - lo, flo))

    for _ in range(s.max_depth):
        h = hi - lo
        q1 = 0.5 * (lo + mid)
        q3 = 0.5 * (mid + hi)
        fq = np.asarray(f(np.concatenate([q1, q3])), dtype=float)
        fq1, fq3 = fq[: len(q1)], fq[len(q1) :]
        hb = _bcast(0.5 * h, flo)
        left = _simpson(flo, fq1, fmid, hb)
        right = _simpson(fmid, fq3, fhi, hb)
        refined = left + right
        err = np.abs(refined - whole) / 15.0
        estimate = refined + (refined - whole) / 15.0

        local_tol = _bcast(s.abs_tol * h / width, flo)
        ok = (err <= local_tol) | (err <= s.rel_tol * np.abs(estimate))
        if ok.ndim > 1:
            ok = ok.all(axis=tuple(range(1, ok.ndim)))

        total = total + estimate[ok].sum(axis=0)
        total_err = total_err + err[ok].sum(axis=0)
        if ok.all():
            return _scalarize(total)

        keep = ~ok
        # split each unfinished panel into its two halves
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        new_mid = np.concatenate([q1[keep], q3[keep]])
        flo, fhi, fmid_new = (
            np.concatenate([flo[keep], fmid[keep]]),
            np.concatenate([fmid[keep], fhi[keep]]),
            np.concatenate([fq1[keep], fq3[keep]]),
        )
        whole = np.concatenate([left[keep], right[keep]])
        mid, fmid = new_mid, fmid_new
        if len(lo) > 2**20:
            break

    # exhausted: report the best available estimate
    h = hi - lo
    rest = _simpson(flo, fmid, fhi, _bcast(h, flo)).sum(axis=0)
    best = total + rest
    achieved = np.max(total_err + _rest_err(flo, fmid, fhi, h))
    raise QuadratureError(
        f"adaptive Simpson did not converge (achieved error {achieved:.3g}, "
        f"requested {s.abs_tol:.3g})",
        estimate=_scalarize(best),
        error=float(achieved),
    )


def _rest_err(flo, fmid, fhi, h):
    # crude error proxy for the unfinished panels: trapezoid vs Simpson gap
    trap = _bcast(h, flo) * 0.5 * (flo + fhi)
    simp = _simpson(flo, fmid, fhi, _bcast(h, flo))
    return np.abs(trap - simp).sum(axis=0)


def _bcast(h, like):
    h = np.asarray(h, dtype=float)
    return h.reshape(h.shape + (1,) * (np.ndim(like) - 1))


def _scalarize(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


class IllConditionedWarning(RuntimeWarning):
    """Issued when a Hankel system's condition estimate exceeds 1e14."""


@dataclass(frozen=True)
class HankelMoments:
    """Symmetric Hankel matrix stored by its ``2d+1`` anti-diagonal values.

    Entry ``(i, j)`` (0-based) equals ``coeffs[i + j]``.
    """

    half_order: int
    coeffs: np.ndarray

    @property
    def size(self) -> int:
        return self.half_order + 1

    def dense(self) -> np.ndarray:
        """Materialize the ``(d+1) x (d+1)`` matrix."""
        n = self.size
        idx = np.add.outer(np.arange(n), np.arange(n))
        return self.coeffs[idx]


def hankel_from_moments(mu) -> HankelMoments:
    """Wrap an odd-length coefficient vector ``mu_0..mu_2d`` as a Hankel matrix."""
    mu = np.array(mu, dtype=float)
    if mu.ndim != 1 or len(mu) % 2 == 0:
        raise ValidationError(
            f"Hankel coefficients must have odd length 2d+1, got {len(mu)}"
        )
    mu.setflags(write=False)
    return HankelMoments(half_order=(len(mu) - 1) // 2, coeffs=mu)


@dataclass(frozen=True)
class HankelSolution:
    x: np.ndarray
    condition: float
    method: str
    warnings: tuple = ()


def _equilibrated_cholesky(A):
    d = np.sqrt(np.diag(A))
    if not np.all(d > 0) or not np.all(np.isfinite(d)):
        raise NotPositiveDefiniteError("moment matrix not positive definite")
    As = A / np.outer(d, d)
    try:
        c = scipy.linalg.cho_factor(As, lower=True, check_finite=True)
    except (np.linalg.LinAlgError, ValueError):
        raise NotPositiveDefiniteError("moment matrix not positive definite") from None
    # reject numerically zero pivots that LAPACK lets through
    if np.min(np.abs(np.diag(c[0]))) < 1e-13:
        raise NotPositiveDefiniteError("moment matrix not positive definite")
    return c, d


def _levinson(H: HankelMoments, b):
    # reversing the rows turns a Hankel matrix into a Toeplitz one
    n = H.size
    h = H.coeffs
    col = h[n - 1 :: -1][:n]
    row = h[n - 1 : 2 * n - 1]
    return scipy.linalg.solve_toeplitz((col, row), b[::-1], check_finite=True)


def solve(H: HankelMoments, b, method: str = "dense") -> HankelSolution:
    """Solve ``H x = b`` for a positive-definite Hankel moment matrix.

    The baseline path is a Cholesky factorization of the diagonally
    equilibrated matrix. ``method="levinson"`` tries the quadratic-time
    Toeplitz recursion first and falls back to the dense path when its
    result disagrees with the dense residual bound.

    Raises
    ------
    NotPositiveDefiniteError
        If the factorization fails.
    """
    b = np.asarray(b, dtype=float)
    A = H.dense()
    if b.shape != (H.size,):
        raise ValidationError(f"right-hand side must have length {H.size}")
    c, d = _equilibrated_cholesky(A)
    cond = float(np.linalg.cond(A / np.outer(d, d), 1)) if H.size > 1 else 1.0
    notes = []
    if cond > 1e14:
        msg = f"moment matrix condition estimate {cond:.3g} exceeds 1e14"
        notes.append(msg)
        warnings.warn(msg, IllConditionedWarning, stacklevel=2)

    tol = 1e-9 * (1.0 + np.max(np.abs(b)))
    if method == "levinson":
        try:
            x = _levinson(H, b)
            if np.all(np.isfinite(x)) and np.max(np.abs(A @ x - b)) <= tol:
                return HankelSolution(x=x, condition=cond, method="levinson", warnings=tuple(notes))
        except (np.linalg.LinAlgError, ValueError):
            pass
        notes.append("levinson fast path degenerate; used dense factorization")
    elif method != "dense":
        raise ValidationError(f"unknown solve method {method!r}")

    x = scipy.linalg.cho_solve(c, b / d) / d
    return HankelSolution(x=x, condition=cond, method="dense", warnings=tuple(notes))


def is_positive_definite(H: HankelMoments) -> bool:
    """True iff the Cholesky factorization of ``H`` succeeds."""
    try:
        _equilibrated_cholesky(H.dense())
    except NotPositiveDefiniteError:
        return False
    return True
