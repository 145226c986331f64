"""I.i.d. random environment: distribution families, their log moment
generating function, and reproducible lazy sampling of disorder fields.

A disorder field ("slab") assigns one energy to every space-time site
(j, x) with 1 <= j <= horizon and x inside the reachable cone
(``|x|_1 <= j`` and matching parity).  Values are counter-based: a pure
hash of (seed, j, x) pushed through the family's inverse CDF, so a slab is
reconstructible from its seed alone and safe to read from many workers.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import DomainError, ParameterError
from . import rng

GAUSSIAN = "gaussian"
BERNOULLI = "bernoulli"
UNIFORM = "uniform"
RADEMACHER = "rademacher"

_PARAM_COUNTS = {GAUSSIAN: 2, BERNOULLI: 3, UNIFORM: 2, RADEMACHER: 0}


@dataclass(frozen=True)
class EnvironmentModel:
    """Distribution of a single site energy.

    Families and parameters:
      gaussian(mean, stddev), bernoulli(p, v0, v1), uniform(lo, hi),
      rademacher().  All have finite exponential moments for every beta.
    """

    family: str
    params: tuple = ()

    def __post_init__(self):
        fam = self.family
        if fam not in _PARAM_COUNTS:
            raise ParameterError(
                f"unknown family {fam!r}; expected one of "
                f"{sorted(_PARAM_COUNTS)}"
            )
        p = tuple(float(v) for v in self.params)
        object.__setattr__(self, "params", p)
        if len(p) != _PARAM_COUNTS[fam]:
            raise ParameterError(
                f"{fam} takes {_PARAM_COUNTS[fam]} parameters, got {len(p)}"
            )
        if not all(np.isfinite(p)):
            raise ParameterError(f"non-finite parameter in {p}")
        if fam == GAUSSIAN and p[1] <= 0:
            raise ParameterError("gaussian stddev must be > 0")
        if fam == BERNOULLI:
            prob, v0, v1 = p
            if not 0 < prob < 1:
                raise ParameterError("bernoulli p must be in (0, 1)")
            if v0 == v1:
                raise ParameterError("bernoulli values must differ")
        if fam == UNIFORM and p[0] >= p[1]:
            raise ParameterError("uniform requires lo < hi")

    @classmethod
    def gaussian(cls, mean=0.0, stddev=1.0):
        return cls(GAUSSIAN, (mean, stddev))

    @classmethod
    def bernoulli(cls, p=0.5, v0=0.0, v1=1.0):
        return cls(BERNOULLI, (p, v0, v1))

    @classmethod
    def uniform(cls, lo=0.0, hi=1.0):
        return cls(UNIFORM, (lo, hi))

    @classmethod
    def rademacher(cls):
        return cls(RADEMACHER)

    def support_width(self):
        """Width of the support for bounded families, None for gaussian."""
        if self.family == GAUSSIAN:
            return None
        if self.family == BERNOULLI:
            return abs(self.params[2] - self.params[1])
        if self.family == UNIFORM:
            return self.params[1] - self.params[0]
        return 2.0


def _log_sinhc(z: float) -> float:
    """ln(sinh(z)/z) with the removable singularity at z = 0 expanded.

    The series kicks in only for tiny |z| where the direct form would
    divide near-cancelling quantities by a tiny argument.
    """
    if z == 0.0:
        return 0.0
    az = abs(z)
    if az < 1e-2:
        z2 = z * z
        # ln(sinh z / z) = z^2/6 - z^4/180 + z^6/2835 - ...
        return z2 * (1.0 / 6 + z2 * (-1.0 / 180 + z2 * (1.0 / 2835 + z2 * (-1.0 / 37800 + z2 / 467775))))
    if az > 30.0:
        # sinh(z) ~ e^|z|/2; avoids overflow for large beta
        return az - np.log(2.0 * az) + np.log1p(-np.exp(-2.0 * az))
    return float(np.log(np.sinh(az) / az))


def log_mgf(model: EnvironmentModel, beta: float) -> float:
    """lambda(beta) = ln E[e^{beta * energy}], in closed form per family."""
    b = float(beta)
    if not np.isfinite(b):
        raise ParameterError("beta must be finite")
    if model.family == GAUSSIAN:
        mean, sd = model.params
        return mean * b + 0.5 * (sd * b) ** 2
    if model.family == BERNOULLI:
        p, v0, v1 = model.params
        return float(np.logaddexp(np.log1p(-p) + b * v0, np.log(p) + b * v1))
    if model.family == UNIFORM:
        lo, hi = model.params
        return 0.5 * (lo + hi) * b + _log_sinhc(0.5 * (hi - lo) * b)
    # rademacher: ln cosh, overflow-safe
    return float(np.logaddexp(b, -b) - np.log(2.0))


def normalized_weight(model: EnvironmentModel, beta: float, energy) -> float:
    """One-step weight e^{beta*energy - lambda(beta)}; unit mean over energy."""
    return np.exp(beta * np.asarray(energy, dtype=np.float64) - log_mgf(model, beta))


def values_from_hash(model: EnvironmentModel, h: np.ndarray) -> np.ndarray:
    """Push hashed 64-bit words through the family's sampler (inverse CDF)."""
    u = rng.uniform01(h)
    fam = model.family
    if fam == GAUSSIAN:
        mean, sd = model.params
        return mean + sd * ndtri(u)
    if fam == BERNOULLI:
        p, v0, v1 = model.params
        return np.where(u < p, v1, v0)
    if fam == UNIFORM:
        lo, hi = model.params
        return lo + (hi - lo) * u
    return np.where(u < 0.5, -1.0, 1.0)


def in_cone(j: int, x, d: int = 1) -> bool:
    """Reachability of site x at time j: |x|_1 <= j and parity match."""
    c = np.atleast_1d(np.asarray(x, dtype=np.int64))
    if c.size != d:
        return False
    norm = int(np.abs(c).sum())
    return norm <= j and (int(c.sum()) - j) % 2 == 0


def cone_site_count(horizon: int, d: int) -> int:
    """Number of reachable sites with 1 <= j <= horizon (exact count)."""
    if d == 1:
        return sum(j + 1 for j in range(1, horizon + 1))
    total = 0
    for j in range(1, horizon + 1):
        # sites with |x|_1 = k <= j, k parity-matched to j
        for k in range(j % 2, j + 1, 2):
            total += _l1_shell_count(k, d)
    return total


def _l1_shell_count(k: int, d: int) -> int:
    """Number of x in Z^d with |x|_1 = k."""
    if k == 0:
        return 1
    from math import comb

    return sum(2**i * comb(d, i) * comb(k - 1, i - 1) for i in range(1, min(d, k) + 1))


_MAX_CONE_SITES = 10**7


@dataclass(frozen=True)
class EnvironmentSlab:
    """One realized disorder field on the space-time cone, addressed by seed.

    Values are materialized lazily; ``overrides`` pins chosen sites to
    explicit values (used for finite-difference probes).
    """

    seed: int
    horizon: int
    dimension: int = 1
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.horizon < 1:
            raise ParameterError("horizon must be >= 1")
        if self.dimension < 1:
            raise ParameterError("dimension must be >= 1")
        if self.dimension >= 2 and cone_site_count(self.horizon, self.dimension) > _MAX_CONE_SITES:
            raise ParameterError(
                f"cone has more than {_MAX_CONE_SITES} sites; shrink the "
                f"horizon for dimension {self.dimension}"
            )
        object.__setattr__(
            self,
            "overrides",
            {self._canon(j, x): float(v) for (j, x), v in self.overrides.items()},
        )

    def _canon(self, j, x):
        if self.dimension == 1 and np.ndim(x) == 0:
            return (int(j), (int(x),))
        return (int(j), tuple(int(c) for c in np.atleast_1d(x)))

    def _check(self, j: int, x):
        if not 1 <= j <= self.horizon:
            raise DomainError(f"time {j} outside [1, {self.horizon}]")
        if not in_cone(j, x, self.dimension):
            raise DomainError(f"site {x!r} unreachable at time {j}")

    def value(self, model: EnvironmentModel, j: int, x) -> float:
        """Energy at site (j, x); pure in (seed, j, x) for a given model."""
        self._check(j, x)
        key = self._canon(j, x)
        if key in self.overrides:
            return self.overrides[key]
        if self.dimension == 1:
            h = rng.site_hash(self.seed, j, key[1][0])
        else:
            h = rng.site_hash(self.seed, j, np.asarray(key[1]), dim=self.dimension)
        return float(values_from_hash(model, h))

    def row_values(self, model: EnvironmentModel, j: int) -> np.ndarray:
        """d=1 only: energies over the full row x = -j, -j+2, ..., j."""
        if self.dimension != 1:
            raise DomainError("row_values is the d=1 fast path")
        if not 1 <= j <= self.horizon:
            raise DomainError(f"time {j} outside [1, {self.horizon}]")
        xs = np.arange(-j, j + 1, 2, dtype=np.int64)
        vals = np.asarray(values_from_hash(model, rng.site_hash(self.seed, j, xs)))
        for (jj, site), v in self.overrides.items():
            if jj == j:
                vals[(site[0] + j) // 2] = v
        return vals

    def with_override(self, j: int, x, value: float) -> "EnvironmentSlab":
        """Copy of this slab with the energy at (j, x) pinned to ``value``."""
        self._check(j, x)
        new = dict(self.overrides)
        new[self._canon(j, x)] = float(value)
        return EnvironmentSlab(self.seed, self.horizon, self.dimension, new)


def sample_energy(model: EnvironmentModel, slab_seed: int, j: int, x, d: int = 1) -> float:
    """Energy at (j, x) of the slab addressed by ``slab_seed``; pure function."""
    if j < 1:
        raise DomainError(f"time {j} must be >= 1")
    if not in_cone(j, x, d):
        raise DomainError(f"site {x!r} unreachable at time {j}")
    if d == 1 and np.ndim(x) == 0:
        h = rng.site_hash(slab_seed, j, int(x))
    else:
        h = rng.site_hash(slab_seed, j, np.asarray(x, dtype=np.int64), dim=d)
    return float(values_from_hash(model, h))
