"""
Polynomial exponential densities (PEDs).

A PED of order ``D`` has unnormalized density
``q(x) = exp(P(x))`` with ``P(x) = theta_1 x + ... + theta_D x^D``. Its
log-normalizer ``F`` has no closed form for ``D >= 4`` so it is evaluated by
adaptive quadrature over a window chosen from the shape of ``P``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DivergentPartitionError, NotPositiveDefiniteError, ValidationError
from .numerics import (
    FixedClamp,
    PolynomialBracket,
    QuadratureSettings,
    hankel_from_moments,
    integrate,
    is_positive_definite,
)

__all__ = [
    "RealLine",
    "Interval",
    "Support",
    "PedNatural",
    "MomentParam",
    "PedPair",
    "log_unnormalized",
    "score",
    "log_partition",
    "moments_numeric",
    "integration_window",
    "integrable_on_real_line",
    "load_ped",
    "dump_ped",
]


@dataclass(frozen=True)
class RealLine:
    pass


@dataclass(frozen=True)
class Interval:
    a: float
    b: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or not self.a < self.b:
            raise ValidationError(f"interval support needs finite a < b, got ({self.a}, {self.b})")


Support = Union[RealLine, Interval]


def integrable_on_real_line(theta) -> bool:
    """Whether ``exp(P_theta)`` is integrable on the whole line.

    The highest nonzero coefficient must have an even degree of at least 2
    and a negative sign; trailing zero coefficients are allowed.
    """
    theta = np.asarray(theta, dtype=float)
    nz = np.flatnonzero(theta)
    if len(nz) == 0:
        return False
    degree = nz[-1] + 1
    return bool(degree >= 2 and degree % 2 == 0 and theta[degree - 1] < 0)


@dataclass(frozen=True, eq=False)
class PedNatural:
    """Natural parameters ``theta_1..theta_D`` of a PED on a support.

    On the real line the order must be even and the highest nonzero
    coefficient must sit at an even degree with a negative sign, otherwise
    ``exp(P)`` is not integrable.
    """

    theta: np.ndarray
    support: Support = field(default_factory=RealLine)

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        if theta.ndim != 1 or len(theta) == 0:
            raise ValidationError("theta must be a nonempty vector")
        if not np.all(np.isfinite(theta)):
            raise ValidationError("theta must be finite")
        if isinstance(self.support, RealLine):
            if len(theta) % 2:
                raise ValidationError(f"odd order {len(theta)} is not integrable on the real line")
            if not integrable_on_real_line(theta):
                raise DivergentPartitionError(
                    "divergent partition function: leading coefficient must be negative"
                )
        elif not isinstance(self.support, Interval):
            raise ValidationError(f"unknown support {self.support!r}")
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def order(self) -> int:
        return len(self.theta)

    @classmethod
    def normal(cls, mu: float, sigma: float) -> "PedNatural":
        """The order-2 PED of ``N(mu, sigma^2)``."""
        return cls([mu / sigma**2, -0.5 / sigma**2])

    def __eq__(self, other):
        if not isinstance(other, PedNatural):
            return NotImplemented
        return np.array_equal(self.theta, other.theta) and self.support == other.support

    def __hash__(self):
        return hash((self.theta.tobytes(), self.support))

    def __repr__(self):
        return f"PedNatural(theta={self.theta.tolist()}, support={self.support!r})"


@dataclass(frozen=True, eq=False)
class MomentParam:
    """Moment parameters ``eta_i = E[x^i]`` for ``i = 1..D``."""

    eta: np.ndarray

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float)
        if eta.ndim != 1 or len(eta) == 0:
            raise ValidationError("eta must be a nonempty vector")
        if not np.all(np.isfinite(eta)):
            raise ValidationError("eta must be finite")
        eta.setflags(write=False)
        object.__setattr__(self, "eta", eta)

    @property
    def order(self) -> int:
        return len(self.eta)

    def augmented(self) -> np.ndarray:
        """``(1, eta_1, ..., eta_D)``."""
        return np.concatenate([[1.0], self.eta])

    def is_valid(self) -> bool:
        """Positive definiteness of the Hankel matrix of ``(1, eta_1..eta_2d)``."""
        mu = self.augmented()
        n = 2 * (self.order // 2) + 1
        return is_positive_definite(hankel_from_moments(mu[:n]))

    def check(self) -> "MomentParam":
        if not self.is_valid():
            raise NotPositiveDefiniteError("moment matrix not positive definite")
        return self

    def __eq__(self, other):
        if not isinstance(other, MomentParam):
            return NotImplemented
        return np.array_equal(self.eta, other.eta)

    def __hash__(self):
        return hash(self.eta.tobytes())

    def __repr__(self):
        return f"MomentParam(eta={self.eta.tolist()})"


@dataclass(frozen=True)
class PedPair:
    """Score-matching natural parameters paired with MLE moment parameters.

    The two halves are generally *not* Legendre duals of each other.
    """

    theta_sme: PedNatural
    eta_mle: MomentParam

    def __post_init__(self):
        if self.theta_sme.order != self.eta_mle.order:
            raise ValidationError("PED pair orders differ")

    @property
    def order(self) -> int:
        return self.theta_sme.order


def _coeffs(theta):
    return np.concatenate([[0.0], np.asarray(theta, dtype=float)])


def log_unnormalized(p: PedNatural, x):
    """``P(x) = sum_i theta_i x^i`` by Horner's scheme."""
    out = npoly.polyval(np.asarray(x, dtype=float), _coeffs(p.theta))
    return float(out) if np.ndim(out) == 0 else out


def score(p: PedNatural, x):
    """Data score ``d/dx log q(x) = sum_i i theta_i x^(i-1)``."""
    out = npoly.polyval(np.asarray(x, dtype=float), npoly.polyder(_coeffs(p.theta)))
    return float(out) if np.ndim(out) == 0 else out


def _real_critical_points(coeffs):
    d = npoly.polyder(coeffs)
    d = np.trim_zeros(d, "b")
    if len(d) <= 1:
        return np.empty(0)
    roots = npoly.polyroots(d)
    real = roots[np.abs(roots.imag) <= 1e-7 * (1.0 + np.abs(roots.real))].real
    return np.unique(real)


def _bisect(fn, lo, hi, iters=200):
    # fn(lo) < 0 <= fn(hi) or the reverse; returns a point close to the root
    flo = fn(lo)
    for _ in range(iters):
        m = 0.5 * (lo + hi)
        if m == lo or m == hi:
            break
        fm = fn(m)
        if (fm < 0) == (flo < 0):
            lo, flo = m, fm
        else:
            hi = m
    return 0.5 * (lo + hi)


def _level_edge(P, crit, level, direction):
    """Outermost point where ``P`` crosses ``level`` on one side.

    ``P`` is monotone between consecutive critical points, so the extreme
    crossing lies in the first monotone segment (scanning inward from
    ``direction``) whose endpoint values reach ``level``.
    """
    pts = crit if direction < 0 else crit[::-1]
    spread = max(1.0, float(np.ptp(crit)) if len(crit) > 1 else 1.0)
    outer = pts[0]
    step = spread
    while P(outer + direction * step) >= level:
        step *= 2.0
        if step > 1e12:
            raise DivergentPartitionError("divergent partition function: no tail decay")
    x_out = outer + direction * step
    segment_ends = [x_out] + list(pts)
    g = lambda x: P(x) - level  # noqa: E731
    for u, v in zip(segment_ends[:-1], segment_ends[1:]):
        if P(u) >= level:
            return u
        if P(v) >= level:
            return _bisect(g, u, v)
    return pts[-1]


@dataclass(frozen=True)
class _Window:
    a: float
    b: float
    peak: float
    breakpoints: np.ndarray


def integration_window(theta, support: Support, q: QuadratureSettings) -> _Window:
    """Integration limits, log-peak and breakpoints for ``exp(P_theta)``."""
    theta = np.asarray(theta, dtype=float)
    coeffs = _coeffs(theta)
    P = lambda x: float(npoly.polyval(x, coeffs))  # noqa: E731
    crit = _real_critical_points(coeffs)

    if isinstance(support, Interval):
        inside = crit[(crit > support.a) & (crit < support.b)]
        cands = np.concatenate([[support.a, support.b], inside])
        peak = max(P(x) for x in cands)
        return _Window(support.a, support.b, peak, inside)

    if not integrable_on_real_line(theta):
        raise DivergentPartitionError("divergent partition function: leading coefficient must be negative on an even order")
    if len(crit) == 0:
        raise DivergentPartitionError("divergent partition function: no maximizer")
    peak = max(P(x) for x in crit)
    if isinstance(q.window_policy, FixedClamp):
        a, b = q.window_policy.a, q.window_policy.b
        inside = crit[(crit > a) & (crit < b)]
        vals = [P(x) for x in np.concatenate([[a, b], inside])]
        return _Window(a, b, max(vals), inside)
    drop = q.window_policy.drop if isinstance(q.window_policy, PolynomialBracket) else 60.0
    level = peak - drop
    a = _level_edge(P, crit, level, -1)
    b = _level_edge(P, crit, level, +1)
    return _Window(a, b, peak, crit[(crit > a) & (crit < b)])


def _stabilized_moments(theta, support, max_order, q):
    """Return ``(F, mu_0..mu_max_order)`` with moments of the normalized density."""
    w = integration_window(theta, support, q)
    # re-expand P around the window centre: evaluating the raw polynomial far
    # from the origin cancels large terms and makes the integrand noisy
    c = 0.5 * (w.a + w.b)
    shifted = npoly.Polynomial(_coeffs(theta))(npoly.Polynomial([c, 1.0])).coef
    shifted[0] -= w.peak
    powers = np.arange(max_order + 1)

    def f(u):
        dens = np.exp(npoly.polyval(u, shifted))
        return dens[:, None] * u[:, None] ** powers

    raw = integrate(f, w.a - c, w.b - c, q, breakpoints=w.breakpoints - c)
    raw = np.atleast_1d(raw)
    Z = raw[0]
    if not (Z > 0 and np.isfinite(Z)):
        raise DivergentPartitionError(f"partition integral is not positive finite: {Z!r}")
    centred = raw / Z
    # E[x^l] = sum_j C(l, j) c^(l-j) E[u^j]
    binom = np.array([[math.comb(l, j) for j in powers] for l in powers], dtype=float)
    shift_pow = np.array([[c ** (l - j) if j <= l else 0.0 for j in powers] for l in powers])
    mu = (binom * shift_pow) @ centred
    mu[0] = 1.0
    return w.peak + math.log(Z), mu


def log_partition(p: PedNatural, q: QuadratureSettings | None = None) -> float:
    """``F(theta) = log integral exp(P_theta(x)) dx`` by stabilized quadrature.

    Raises
    ------
    DivergentPartitionError
        If ``exp(P_theta)`` is not integrable on the support.
    QuadratureError
        If quadrature does not converge.
    """
    q = q or QuadratureSettings()
    F, _ = _stabilized_moments(p.theta, p.support, 0, q)
    return F


def moments_numeric(p: PedNatural, max_order: int, q: QuadratureSettings | None = None) -> np.ndarray:
    """Raw moments ``mu_0..mu_max_order`` of the normalized PED by quadrature."""
    if max_order < 0:
        raise ValidationError("max_order must be nonnegative")
    q = q or QuadratureSettings()
    _, mu = _stabilized_moments(p.theta, p.support, max_order, q)
    return mu


def ped_to_dict(p: PedNatural) -> dict:
    if isinstance(p.support, Interval):
        support = {"type": "interval", "a": p.support.a, "b": p.support.b}
    else:
        support = {"type": "real"}
    return {"order": p.order, "theta": [float(t) for t in p.theta], "support": support}


def ped_from_dict(d: dict) -> PedNatural:
    try:
        theta = [float(t) for t in d["theta"]]
        order = int(d.get("order", len(theta)))
        sup = d.get("support", {"type": "real"})
        kind = sup.get("type", "real")
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed PED document: {exc}") from None
    if order != len(theta):
        raise ValidationError(f"PED order {order} does not match {len(theta)} coefficients")
    if kind == "real":
        support = RealLine()
    elif kind == "interval":
        support = Interval(float(sup["a"]), float(sup["b"]))
    else:
        raise ValidationError(f"unknown support type {kind!r}")
    return PedNatural(theta, support)


def load_ped(path) -> PedNatural:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    return ped_from_dict(doc)


def dump_ped(p: PedNatural, path) -> None:
    Path(path).write_text(json.dumps(ped_to_dict(p), indent=2) + "\n")
