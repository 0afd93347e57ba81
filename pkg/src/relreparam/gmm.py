"""Univariate Gaussian mixture model: density, likelihood, score, sampling, moments.

All mixtures here are one-dimensional. Densities and likelihoods are computed
in log space (log-sum-exp) so they stay finite far into the tails.

Sampling uses numpy's counter-based Philox generator so that datasets and CSV
fixtures are bit-reproducible across platforms for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_2PI = float(np.log(2.0 * np.pi))

_SIMPLEX_TOL = 1e-12


class MixtureError(ValueError):
    """Invalid mixture parameters or arguments."""


@dataclass(frozen=True)
class MixtureParams:
    """Absolute parameterization of a K-component univariate GMM.

    weights: mixing proportions on the probability simplex.
    means:   component means.
    sigmas:  component standard deviations (strictly positive).
    """

    weights: tuple[float, ...]
    means: tuple[float, ...]
    sigmas: tuple[float, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        m = np.asarray(self.means, dtype=float)
        s = np.asarray(self.sigmas, dtype=float)
        if not (len(w) == len(m) == len(s)):
            raise MixtureError("weights, means, sigmas must have equal length")
        if len(w) < 1:
            raise MixtureError("need K >= 1 components")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(s))):
            raise MixtureError("parameters must be finite")
        if np.any(w < 0):
            raise MixtureError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > _SIMPLEX_TOL:
            raise MixtureError(f"weights must sum to 1 within {_SIMPLEX_TOL}, got {w.sum()!r}")
        if np.any(s <= 0):
            raise MixtureError("sigmas must be strictly positive")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))
        object.__setattr__(self, "means", tuple(float(x) for x in m))
        object.__setattr__(self, "sigmas", tuple(float(x) for x in s))

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def permuted(self, perm) -> "MixtureParams":
        """Return the mixture with components reordered by index sequence perm."""
        perm = list(perm)
        if sorted(perm) != list(range(self.n_components)):
            raise MixtureError("perm must be a permutation of component indices")
        return MixtureParams(
            weights=tuple(self.weights[i] for i in perm),
            means=tuple(self.means[i] for i in perm),
            sigmas=tuple(self.sigmas[i] for i in perm),
        )

    def to_text(self) -> str:
        """Serialize as the flat key-value record: K, pi, mu, sigma."""
        fmt = lambda xs: ",".join(repr(float(x)) for x in xs)
        return (
            f"K: {self.n_components}\n"
            f"pi: {fmt(self.weights)}\n"
            f"mu: {fmt(self.means)}\n"
            f"sigma: {fmt(self.sigmas)}\n"
        )

    @classmethod
    def from_text(cls, text: str) -> "MixtureParams":
        fields = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition(":")
            fields[key.strip()] = val.strip()
        for key in ("K", "pi", "mu", "sigma"):
            if key not in fields:
                raise MixtureError(f"missing field {key!r} in mixture record")
        k = int(fields["K"])
        parse = lambda s: tuple(float(v) for v in s.split(","))
        params = cls(weights=parse(fields["pi"]), means=parse(fields["mu"]),
                     sigmas=parse(fields["sigma"]))
        if params.n_components != k:
            raise MixtureError("K does not match vector lengths")
        return params


@dataclass(frozen=True)
class Dataset:
    """One-dimensional dataset, optionally tagged with its generation seed."""

    points: tuple[float, ...]
    seed: int | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size < 1:
            raise MixtureError("dataset must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise MixtureError("dataset entries must be finite")
        object.__setattr__(self, "points", tuple(float(x) for x in pts))

    @property
    def n(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=float)

    def to_text(self) -> str:
        return "\n".join(repr(x) for x in self.points) + "\n"

    @classmethod
    def from_text(cls, text: str, seed: int | None = None) -> "Dataset":
        vals = [float(line) for line in text.splitlines() if line.strip()]
        return cls(points=tuple(vals), seed=seed)


@dataclass(frozen=True)
class MomentTable:
    """Raw moments E[x^0..x^3] of a distribution."""

    raw: tuple[float, float, float, float]

    def __post_init__(self):
        if len(self.raw) != 4:
            raise MixtureError("MomentTable holds exactly E[x^0..x^3]")
        if abs(self.raw[0] - 1.0) > 1e-12:
            raise MixtureError("E[x^0] must equal 1")
        object.__setattr__(self, "raw", tuple(float(x) for x in self.raw))

    def __getitem__(self, m: int) -> float:
        return self.raw[m]


def _check_x(x) -> np.ndarray:
    xs = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise MixtureError("x must be finite")
    return xs


def log_component_densities(params: MixtureParams, x) -> np.ndarray:
    """ln N(x | mu_k, sigma_k^2) for each component; shape (..., K)."""
    xs = _check_x(x)[..., None]
    mu = np.asarray(params.means)
    sig = np.asarray(params.sigmas)
    z = (xs - mu) / sig
    return -0.5 * z * z - np.log(sig) - 0.5 * LOG_2PI


def log_density(params: MixtureParams, x):
    """ln sum_k pi_k N(x | mu_k, sigma_k^2) via log-sum-exp."""
    logc = log_component_densities(params, x)
    logw = np.log(np.asarray(params.weights) + np.finfo(float).tiny)
    a = logc + logw
    amax = np.max(a, axis=-1, keepdims=True)
    out = amax[..., 0] + np.log(np.sum(np.exp(a - amax), axis=-1))
    return float(out) if np.isscalar(x) or np.ndim(x) == 0 else out


def density(params: MixtureParams, x):
    """Mixture density; strictly positive for finite x."""
    return np.exp(log_density(params, x))


def log_likelihood(params: MixtureParams, data: Dataset) -> float:
    """Sum of log mixture densities over the dataset."""
    return float(np.sum(log_density(params, data.as_array())))


def responsibilities_array(params: MixtureParams, x) -> np.ndarray:
    """Posterior component probabilities gamma(z_k | x); shape (..., K)."""
    logw = np.log(np.asarray(params.weights) + np.finfo(float).tiny)
    a = log_component_densities(params, x) + logw
    amax = np.max(a, axis=-1, keepdims=True)
    e = np.exp(a - amax)
    return e / np.sum(e, axis=-1, keepdims=True)


def score(params: MixtureParams, x) -> np.ndarray:
    """Gradient of ln density at x over (pi_1..pi_{K-1} free coords, mu, sigma).

    The weight block uses the first K-1 weights as free coordinates with
    pi_K = 1 - sum of the others, so the gradient has length 3K - 1.
    """
    xs = _check_x(x)
    gam = responsibilities_array(params, xs)  # (..., K)
    mu = np.asarray(params.means)
    sig = np.asarray(params.sigmas)
    z = (xs[..., None] - mu) / sig
    # d ln p / d pi_k (free coords): (N_k - N_K) / p = gam_k/pi_k - gam_K/pi_K
    w = np.asarray(params.weights)
    d_pi = gam[..., :-1] / w[:-1] - gam[..., -1:] / w[-1]
    d_mu = gam * z / sig
    d_sigma = gam * (z * z - 1.0) / sig
    return np.concatenate([d_pi, d_mu, d_sigma], axis=-1)


def score_means(params: MixtureParams, x) -> np.ndarray:
    """Gradient of ln density with respect to the means only; shape (..., K)."""
    xs = _check_x(x)
    gam = responsibilities_array(params, xs)
    mu = np.asarray(params.means)
    sig = np.asarray(params.sigmas)
    return gam * (xs[..., None] - mu) / (sig * sig)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator; the project-wide RNG for reproducibility."""
    return np.random.Generator(np.random.Philox(int(seed)))


def sample(params: MixtureParams, n: int, seed: int) -> Dataset:
    """Draw n points: component by weights, then a Gaussian draw. Deterministic per seed."""
    if n < 1:
        raise MixtureError("need n >= 1 samples")
    rng = make_rng(seed)
    cum = np.cumsum(params.weights)
    comp = np.searchsorted(cum, rng.random(n), side="right")
    comp = np.minimum(comp, params.n_components - 1)
    mu = np.asarray(params.means)[comp]
    sig = np.asarray(params.sigmas)[comp]
    pts = mu + sig * rng.standard_normal(n)
    return Dataset(points=tuple(float(x) for x in pts), seed=int(seed))


def gaussian_raw_moments(mu: float, sigma: float) -> tuple[float, float, float, float]:
    """E[x^0..x^3] of N(mu, sigma^2)."""
    return (1.0, mu, mu * mu + sigma * sigma, mu ** 3 + 3.0 * mu * sigma * sigma)


def mixture_moments(params: MixtureParams, order: int = 3) -> MomentTable:
    """Raw moments E[x^m], m <= order <= 3, of the mixture.

    Orders above 3 are unsupported: the averaged-dynamics integrands are cubic.
    """
    if order not in (0, 1, 2, 3):
        raise MixtureError("moment order must be in {0,1,2,3}")
    raw = np.zeros(4)
    for pi, mu, sig in zip(params.weights, params.means, params.sigmas):
        raw += pi * np.asarray(gaussian_raw_moments(mu, sig))
    raw[0] = 1.0
    return MomentTable(raw=tuple(raw))
