"""
Univariate Gaussian mixture models.

A :class:`Gmm` stores its weights, means and standard deviations as parallel
read-only arrays so density evaluation and moment computation vectorize over
components. Closed-form raw moments use the double-factorial expansion

.. math::
    E[X^l] = \\sum_{j=0}^{\\lfloor l/2 \\rfloor} \\binom{l}{2j} (2j-1)!!
             \\mu^{l-2j} \\sigma^{2j}

for each component, combined linearly by the weights.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import OrderCapError, ValidationError

logger = logging.getLogger(__name__)

MAX_MOMENT_ORDER = 64
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

__all__ = [
    "GaussianComponent",
    "Gmm",
    "GaussianProduct",
    "MAX_MOMENT_ORDER",
    "pdf",
    "log_pdf",
    "gaussian_product_params",
    "gmm_to_dict",
    "gmm_from_dict",
    "pdf_derivative",
    "raw_moment",
    "raw_moments",
    "normal_raw_moments",
    "gaussian_product",
    "sample",
    "random_gmm",
    "kde_from_data",
    "load_gmm",
    "dump_gmm",
    "read_data",
]


@dataclass(frozen=True)
class GaussianComponent:
    mu: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise ValidationError("component parameters must be finite")
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Gmm:
    """Finite mixture ``sum_i w_i N(mu_i, sigma_i^2)``.

    Parameters
    ----------
    weights, mus, sigmas : array_like
        Parallel vectors of length ``k >= 1``. Weights must be positive and
        sum to one within ``1e-12``.
    """

    weights: np.ndarray
    mus: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        w, m, s = (_readonly(getattr(self, n)) for n in ("weights", "mus", "sigmas"))
        if w.ndim != 1 or w.shape != m.shape or w.shape != s.shape or len(w) == 0:
            raise ValidationError("weights, mus and sigmas must be equal-length nonempty vectors")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(s))):
            raise ValidationError("mixture parameters must be finite")
        if np.any(w <= 0):
            raise ValidationError("mixture weights must be positive")
        if np.any(s <= 0):
            raise ValidationError("component sigmas must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError(f"mixture weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mus", m)
        object.__setattr__(self, "sigmas", s)

    @classmethod
    def from_components(cls, weights: Sequence[float], components: Iterable[GaussianComponent]) -> "Gmm":
        comps = list(components)
        return cls(weights, [c.mu for c in comps], [c.sigma for c in comps])

    @classmethod
    def single(cls, mu: float = 0.0, sigma: float = 1.0) -> "Gmm":
        return cls([1.0], [mu], [sigma])

    @property
    def k(self) -> int:
        return len(self.weights)

    @property
    def components(self) -> tuple:
        return tuple(GaussianComponent(float(m), float(s)) for m, s in zip(self.mus, self.sigmas))

    def __eq__(self, other):
        if not isinstance(other, Gmm):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.mus, other.mus)
            and np.array_equal(self.sigmas, other.sigmas)
        )

    def __hash__(self):
        return hash((self.weights.tobytes(), self.mus.tobytes(), self.sigmas.tobytes()))

    def __repr__(self):
        return f"Gmm(k={self.k}, weights={self.weights.tolist()}, mus={self.mus.tolist()}, sigmas={self.sigmas.tolist()})"

    def mean(self) -> float:
        return float(self.weights @ self.mus)

    def std(self) -> float:
        m2 = self.weights @ (self.mus**2 + self.sigmas**2)
        return float(math.sqrt(max(m2 - self.mean() ** 2, 0.0)))

    def affine(self, shift: float, scale: float) -> "Gmm":
        """Mixture of ``(X - shift) / scale`` for ``X`` distributed as this mixture."""
        return Gmm(self.weights, (self.mus - shift) / scale, self.sigmas / scale)

    def merge(self, other: "Gmm") -> "Gmm":
        """The equal-weight mixture ``(self + other) / 2``."""
        w = np.concatenate([0.5 * self.weights, 0.5 * other.weights])
        return Gmm(
            w / w.sum(),
            np.concatenate([self.mus, other.mus]),
            np.concatenate([self.sigmas, other.sigmas]),
        )


def _component_densities(m: Gmm, x):
    z = (np.asarray(x, dtype=float)[..., None] - m.mus) / m.sigmas
    return np.exp(-0.5 * z * z - _LOG_SQRT_2PI) / m.sigmas, z


def pdf(m: Gmm, x):
    """Mixture density at ``x`` (scalar or array)."""
    dens, _ = _component_densities(m, x)
    out = dens @ m.weights
    return float(out) if np.ndim(out) == 0 else out


def log_pdf(m: Gmm, x):
    """Log mixture density, stable far in the tails."""
    x = np.asarray(x, dtype=float)
    z = (x[..., None] - m.mus) / m.sigmas
    terms = -0.5 * z * z - _LOG_SQRT_2PI - np.log(m.sigmas) + np.log(m.weights)
    peak = terms.max(axis=-1)
    out = peak + np.log(np.exp(terms - peak[..., None]).sum(axis=-1))
    return float(out) if np.ndim(out) == 0 else out


def pdf_derivative(m: Gmm, x):
    """Derivative ``m'(x) = -sum_i w_i (x - mu_i) / sigma_i^2 p_i(x)``."""
    dens, z = _component_densities(m, x)
    out = -(dens * z / m.sigmas) @ m.weights
    return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=None)
def _moment_table(max_order: int) -> np.ndarray:
    # T[l, i] = C(l, i) * E[Z^i] for standard normal Z, built by Pascal's rule
    n = max_order + 1
    binom = np.zeros((n, n))
    binom[:, 0] = 1.0
    for l in range(1, n):
        binom[l, 1 : l + 1] = binom[l - 1, : l] + binom[l - 1, 1 : l + 1]
    z_moments = np.zeros(n)
    z_moments[0] = 1.0
    for i in range(2, n, 2):
        z_moments[i] = z_moments[i - 2] * (i - 1)  # (i-1)!!
    table = binom * z_moments
    table.setflags(write=False)
    return table


def _check_order(max_order: int):
    if max_order < 0:
        raise ValidationError("moment order must be nonnegative")
    if max_order > MAX_MOMENT_ORDER:
        raise OrderCapError(f"moment order {max_order} exceeds supported cap {MAX_MOMENT_ORDER}")


def normal_raw_moments(mus, sigmas, max_order: int) -> np.ndarray:
    """Raw moments of normal distributions, shape ``(..., max_order + 1)``."""
    _check_order(max_order)
    mus = np.asarray(mus, dtype=float)
    sigmas = np.asarray(sigmas, dtype=float)
    n = max_order + 1
    powers = np.arange(n)
    mu_pow = mus[..., None] ** powers
    sig_pow = sigmas[..., None] ** powers
    # sum_i T[l,i] mu^(l-i) sigma^i; T vanishes above the diagonal
    shift = np.clip(powers[:, None] - powers[None, :], 0, None)
    terms = mu_pow[..., shift] * sig_pow[..., None, :]
    return np.einsum("...li,li->...l", terms, _moment_table(max_order))


def raw_moments(m: Gmm, max_order: int) -> np.ndarray:
    """Raw moments ``mu_0..mu_max_order`` of the mixture, ``mu_0 = 1`` exactly."""
    out = m.weights @ normal_raw_moments(m.mus, m.sigmas, max_order)
    out[0] = 1.0
    return out


def raw_moment(m: Gmm, l: int) -> float:
    return float(raw_moments(m, l)[l])


@dataclass(frozen=True)
class GaussianProduct:
    """``p_a(x) p_b(x) = kappa * N(x; mu_ab, sigma_ab^2)``."""

    kappa: float
    mu_ab: float
    sigma_ab: float


def _normal_log_normalizer(mu, sigma):
    return mu * mu / (2.0 * sigma * sigma) + 0.5 * np.log(2.0 * np.pi * sigma * sigma)


def gaussian_product_params(mu_a, sigma_a, mu_b, sigma_b):
    """Vectorized form of :func:`gaussian_product` returning ``(kappa, mu_ab, sigma_ab)``."""
    va, vb = sigma_a * sigma_a, sigma_b * sigma_b
    vsum = va + vb
    mu_ab = (vb * mu_a + va * mu_b) / vsum
    sigma_ab = sigma_a * sigma_b / np.sqrt(vsum)
    log_kappa = (
        _normal_log_normalizer(mu_ab, sigma_ab)
        - _normal_log_normalizer(mu_a, sigma_a)
        - _normal_log_normalizer(mu_b, sigma_b)
    )
    return np.exp(log_kappa), mu_ab, sigma_ab


def gaussian_product(a: GaussianComponent, b: GaussianComponent) -> GaussianProduct:
    """Scale and parameters of the product of two normal densities.

    The location is the precision-weighted mean; the scale factor is
    ``exp(F(mu_ab, sigma_ab) - F(mu_a, sigma_a) - F(mu_b, sigma_b))`` with
    ``F`` the normal log-normalizer in ``(mu, sigma)`` form.
    """
    kappa, mu_ab, sigma_ab = gaussian_product_params(a.mu, a.sigma, b.mu, b.sigma)
    return GaussianProduct(float(kappa), float(mu_ab), float(sigma_ab))


def sample(m: Gmm, rng: np.random.Generator, n: int) -> np.ndarray:
    """Ancestral sampling: categorical component draw, then a normal variate."""
    if n < 1:
        raise ValidationError("sample count must be >= 1")
    idx = rng.choice(m.k, size=n, p=m.weights) if m.k > 1 else np.zeros(n, dtype=int)
    return m.mus[idx] + m.sigmas[idx] * rng.standard_normal(n)


def random_gmm(k: int, rng: np.random.Generator) -> Gmm:
    """Random ``k``-GMM: ``w ~ U[0,1)`` normalized, ``mu ~ -10 + 10 U``, ``sigma ~ 1 + U``."""
    if k < 1:
        raise ValidationError("k must be >= 1")
    w = rng.random(k)
    mus = -10.0 + 10.0 * rng.random(k)
    sigmas = 1.0 + rng.random(k)
    # a zero draw from U[0,1) would give a zero weight
    w = np.where(w > 0, w, np.finfo(float).tiny)
    w = w / w.sum()
    if k == 1:
        w = np.ones(1)
    return Gmm(w, mus, sigmas)


def kde_from_data(xs, sigma: float) -> Gmm:
    """Gaussian kernel density estimate as a uniform-weight mixture."""
    xs = np.asarray(xs, dtype=float).ravel()
    if xs.size == 0:
        raise ValidationError("empty dataset")
    if not sigma > 0:
        raise ValidationError("KDE bandwidth must be positive")
    k = xs.size
    return Gmm(np.full(k, 1.0 / k), xs, np.full(k, float(sigma)))


def gmm_to_dict(m: Gmm) -> dict:
    return {
        "components": [
            {"weight": float(w), "mu": float(mu), "sigma": float(s)}
            for w, mu, s in zip(m.weights, m.mus, m.sigmas)
        ]
    }


def gmm_from_dict(d: dict) -> Gmm:
    try:
        comps = d["components"]
        w = np.array([c["weight"] for c in comps], dtype=float)
        mus = [c["mu"] for c in comps]
        sigmas = [c["sigma"] for c in comps]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed GMM document: {exc}") from None
    if len(w) == 0:
        raise ValidationError("GMM document has no components")
    if np.any(w <= 0):
        raise ValidationError("mixture weights must be positive")
    total = w.sum()
    if abs(total - 1.0) > 1e-12:
        logger.warning("GMM weights summed to %r; normalized", total)
        w = w / total
    return Gmm(w, mus, sigmas)


def load_gmm(path) -> Gmm:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON: {exc}") from None
    return gmm_from_dict(doc)


def dump_gmm(m: Gmm, path) -> None:
    Path(path).write_text(json.dumps(gmm_to_dict(m), indent=2) + "\n")


def read_data(path) -> np.ndarray:
    """Read one real per line; blank lines and ``#`` comments are skipped.

    A CSV row contributes its first field.
    """
    values = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            field = line.split(",")[0].strip()
            try:
                values.append(float(field))
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: not a number: {field!r}") from None
    return np.array(values)
