"""Log-domain transfer-matrix recursion for point-to-point polymer weights.

Weights are normalized per step by the environment's log-MGF, so the total
weight at time n is a mean-one martingale over the disorder.  Everything is
kept as logarithms with max-shifted summation: energies grow linearly in n
and raw weights overflow long before n = 100 at moderate beta.

Convention: the weight at (n, x) covers paths that START at the origin and
END at x, making the one-step Markov recursion a literal forward pass and
the row sum equal to the full partition weight.

Three layers:
  * single-slab steps (``forward_step``) on one realized environment,
  * an exhaustive path-enumeration oracle for small n,
  * a replica scan that runs many independent environments at once on a
    dense (replica, site) matrix; d=1 only, the optimized path.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import BudgetError, DomainError, ParameterError
from .env import EnvironmentModel, EnvironmentSlab, log_mgf, values_from_hash
from . import rng

LOG_HALF = float(np.log(0.5))

_ORACLE_PATH_BUDGET = 10**7


@dataclass
class PolymerWeights:
    """Log point-to-point weights {ln W(x)} at a fixed time.

    d=1 stores a dense row over the cone slice (index i <-> x = 2i - time);
    d>=2 stores a site->log-weight dict.  Unreachable parity sites are
    simply absent.  Immutable by convention once produced.
    """

    time: int
    beta: float
    d: int
    log_w: object

    def sites(self):
        if self.d == 1:
            return [int(x) for x in range(-self.time, self.time + 1, 2)]
        return sorted(self.log_w.keys())

    def log_weight(self, x) -> float:
        if self.d == 1:
            xi = int(x)
            if abs(xi) > self.time or (xi - self.time) % 2 != 0:
                raise DomainError(f"site {x} unreachable at time {self.time}")
            return float(self.log_w[(xi + self.time) // 2])
        key = tuple(int(c) for c in np.atleast_1d(x))
        if key not in self.log_w:
            raise DomainError(f"site {x} unreachable at time {self.time}")
        return float(self.log_w[key])

    def as_dict(self) -> dict:
        if self.d == 1:
            return {x: float(self.log_w[(x + self.time) // 2]) for x in self.sites()}
        return dict(self.log_w)


def initial_weights(beta: float, d: int = 1) -> PolymerWeights:
    """Time-zero weights: unit mass at the origin (empty product)."""
    if beta < 0:
        raise ParameterError("beta must be >= 0 for polymer weights")
    if d == 1:
        return PolymerWeights(0, float(beta), 1, np.zeros(1))
    return PolymerWeights(0, float(beta), d, {tuple([0] * d): 0.0})


def _neighbor_logsum_1d(prev: np.ndarray) -> np.ndarray:
    """logsumexp over the two lattice parents of each next-row site."""
    c = prev.shape[-1]
    shape = prev.shape[:-1] + (c + 1,)
    a = np.full(shape, -np.inf)
    b = np.full(shape, -np.inf)
    a[..., 1:] = prev
    b[..., :-1] = prev
    return np.logaddexp(a, b)


def forward_step(w: PolymerWeights, slab: EnvironmentSlab, model: EnvironmentModel) -> PolymerWeights:
    """One Markov step: weights at time n+1 from weights at time n."""
    j = w.time + 1
    if j > slab.horizon:
        raise DomainError(f"step to time {j} exceeds slab horizon {slab.horizon}")
    if w.d != slab.dimension:
        raise ParameterError("weights and slab dimension mismatch")
    lam = log_mgf(model, w.beta)
    if w.d == 1:
        eta = slab.row_values(model, j)
        new = _neighbor_logsum_1d(w.log_w) + LOG_HALF + w.beta * eta - lam
        return PolymerWeights(j, w.beta, 1, new)
    d = w.d
    log_step = -np.log(2.0 * d)
    acc: dict = {}
    for x in sorted(w.log_w.keys()):
        lw = w.log_w[x] + log_step
        for axis in range(d):
            for sign in (-1, 1):
                y = list(x)
                y[axis] += sign
                y = tuple(y)
                acc[y] = np.logaddexp(acc[y], lw) if y in acc else lw
    out = {}
    for y in sorted(acc.keys()):
        out[y] = acc[y] + w.beta * slab.value(model, j, y) - lam
    return PolymerWeights(j, w.beta, d, out)


def run_chain(slab: EnvironmentSlab, model: EnvironmentModel, beta: float, n: int) -> PolymerWeights:
    """Forward recursion from time 0 to time n on one slab."""
    w = initial_weights(beta, slab.dimension)
    for _ in range(n):
        w = forward_step(w, slab, model)
    return w


def partition_log(w: PolymerWeights) -> float:
    """ln of the total (normalized) partition weight at w.time."""
    if w.d == 1:
        return float(logsumexp(w.log_w))
    return float(logsumexp(np.array(list(w.log_w.values()))))


def step_distribution(w: PolymerWeights, slab: EnvironmentSlab, model: EnvironmentModel) -> dict:
    """Law of the next endpoint: next-row weights normalized to sum 1.

    Each candidate site y gets mass proportional to the weight of all
    paths reaching y at time n+1, including the energy collected at y.
    """
    stepped = forward_step(w, slab, model)
    if stepped.d == 1:
        logp = np.asarray(stepped.log_w, dtype=np.float64)
        p = np.exp(logp - logsumexp(logp))
        p /= p.sum()
        return {x: float(pi) for x, pi in zip(stepped.sites(), p)}
    items = sorted(stepped.log_w.items())
    logp = np.array([v for _, v in items])
    p = np.exp(logp - logsumexp(logp))
    p /= p.sum()
    return {site: float(pi) for (site, _), pi in zip(items, p)}


@dataclass
class PathOracleResult:
    """Exhaustive-enumeration ground truth for small horizons."""

    log_partition: float
    per_site: dict


def path_oracle(slab: EnvironmentSlab, model: EnvironmentModel, beta: float, n: int) -> PathOracleResult:
    """Exact ln W_n and per-endpoint ln W_n(x) by summing every path.

    Enumerates all (2d)^n nearest-neighbor walks from the origin; refuses
    beyond the path budget since cost is exponential in n.
    """
    if beta < 0:
        raise ParameterError("beta must be >= 0")
    if n < 1:
        raise ParameterError("n must be >= 1")
    if n > slab.horizon:
        raise DomainError(f"n {n} exceeds slab horizon {slab.horizon}")
    d = slab.dimension
    n_paths = (2 * d) ** n
    if n_paths > _ORACLE_PATH_BUDGET:
        raise BudgetError(
            f"enumeration needs {n_paths} paths, budget is {_ORACLE_PATH_BUDGET}; "
            f"reduce n to {int(np.log(_ORACLE_PATH_BUDGET) / np.log(2 * d))} or less"
        )
    lam = log_mgf(model, beta)
    idx = np.arange(n_paths, dtype=np.int64)
    pos = np.zeros((n_paths, d), dtype=np.int64)
    energy = np.zeros(n_paths)
    for j in range(1, n + 1):
        digit = (idx // (2 * d) ** (j - 1)) % (2 * d)
        axis = (digit // 2).astype(np.int64)
        sign = (digit % 2) * 2 - 1
        for a in range(d):
            mask = axis == a
            pos[mask, a] += sign[mask]
        if d == 1:
            h = rng.site_hash(slab.seed, j, pos[:, 0])
        else:
            h = rng.site_hash(slab.seed, j, pos, dim=d)
        eta = np.asarray(values_from_hash(model, h), dtype=np.float64)
        for (jj, site), v in slab.overrides.items():
            if jj == j:
                eta[np.all(pos == np.asarray(site), axis=1)] = v
        energy += eta
    log_paths = beta * energy - n * (lam + np.log(2.0 * d))
    per_site = {}
    uniq, inverse = np.unique(pos, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    for k, site in enumerate(uniq):
        key = int(site[0]) if d == 1 else tuple(int(c) for c in site)
        per_site[key] = float(logsumexp(log_paths[inverse == k]))
    return PathOracleResult(float(logsumexp(log_paths)), per_site)


def replica_scan(
    model: EnvironmentModel,
    beta: float,
    n_max: int,
    replicas: int,
    seed: int,
    *,
    rows_at=(),
    logz_at=(),
    key_start: int = 0,
    chunk: int = 1 << 16,
):
    """Run ``replicas`` independent d=1 environments through the forward
    recursion at once.

    Returns (rows, logz): rows[m] is the (replicas, m+1) matrix of
    ln W_m(x); logz[n] is the (replicas,) vector of ln W_n.  Replica r uses
    the slab seed ``replica_slab_seed(seed, key_start + r)``, so results are
    bit-identical however the work is chunked or distributed.
    """
    if beta < 0:
        raise ParameterError("beta must be >= 0")
    if replicas < 1:
        raise ParameterError("replicas must be >= 1")
    rows_at = sorted(set(int(m) for m in rows_at))
    logz_at = sorted(set(int(n) for n in logz_at))
    for m in rows_at + logz_at:
        if not 1 <= m <= n_max:
            raise ParameterError(f"collection time {m} outside [1, {n_max}]")
    lam = log_mgf(model, beta)
    rows = {m: [] for m in rows_at}
    logz = {n: [] for n in logz_at}
    for lo in range(0, replicas, chunk):
        count = min(chunk, replicas - lo)
        seeds = rng.replica_seeds(seed, key_start + lo, count)
        skey = rng.slab_key(seeds)[:, None]
        logw = np.zeros((count, 1))
        for j in range(1, n_max + 1):
            xs = np.arange(-j, j + 1, 2, dtype=np.int64)
            h = rng.fold_coord(rng.time_prefix(skey, j), rng.as_u64(xs)[None, :])
            # same term order as forward_step so both paths agree bit-exactly
            eta = values_from_hash(model, h)
            logw = _neighbor_logsum_1d(logw) + LOG_HALF + beta * eta - lam
            if j in rows:
                rows[j].append(logw.copy())
            if j in logz:
                logz[j].append(logsumexp(logw, axis=1))
    rows = {m: np.vstack(parts) for m, parts in rows.items()}
    logz = {n: np.concatenate(parts) for n, parts in logz.items()}
    return rows, logz


def replica_slab_seed(seed: int, r: int) -> int:
    """Seed of the slab used by replica r of a scan started from ``seed``.

    ``EnvironmentSlab(replica_slab_seed(seed, r), ...)`` reproduces the
    r-th replica's environment bit-exactly.
    """
    return int(rng.replica_seeds(seed, r, 1)[0])
