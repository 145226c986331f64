"""Generalized multiplicative cascade: the variational free-energy curve of a
random weight vector, its derivative apparatus, and direct martingale
simulation on the regular tree.

The central object is the curve

    v(theta) = (1/theta) * ln E[ sum_i A_i^theta ],   theta in (0, 1],

for a random vector (A_1..A_N) of positive weights with E sum A_i = 1.  Its
infimum over theta is the tree free energy; the infimum sits at theta = 1
exactly when the slope there, E sum A_i ln A_i, is <= 0, and otherwise at a
unique interior point (the curve is unimodal because the scaled slope
g(theta) = theta^2 v'(theta) is strictly increasing).

All estimators work on stored log-weights and evaluate every theta on the
same replicas (common random numbers), so comparisons across theta, across
m, and across beta are paired.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetError, NumericError, ParameterError, UsageError
from .env import EnvironmentModel
from .transfer import replica_scan, replica_slab_seed, run_chain
from .env import EnvironmentSlab

_MOM_BLOCKS = 16
# standard error inflation of a median of K block means vs the plain mean
_MEDIAN_EFF = float(np.sqrt(np.pi / 2.0))

_CASCADE_LEAF_BUDGET = 10**8
_BLOCK_LEAVES = 1 << 16


@dataclass(frozen=True)
class WeightVectorSamples:
    """Monte Carlo draws of a positive weight vector, stored as logs.

    ``log_values[r, i]`` is ln A_i in replica r.  Entries must be finite:
    the weight laws handled here put no mass at zero.
    """

    log_values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.log_values, dtype=np.float64)
        if arr.ndim != 2:
            raise ParameterError("log_values must be a (replicas, components) matrix")
        if not np.isfinite(arr).all():
            raise ParameterError("log weights must be finite (weights strictly positive)")
        object.__setattr__(self, "log_values", arr)

    @classmethod
    def from_weights(cls, values) -> "WeightVectorSamples":
        arr = np.asarray(values, dtype=np.float64)
        if (arr <= 0).any():
            raise ParameterError("weights must be strictly positive")
        return cls(np.log(arr))

    @property
    def n_samples(self) -> int:
        return self.log_values.shape[0]

    @property
    def n_components(self) -> int:
        return self.log_values.shape[1]


def polymer_weight_samples(
    model: EnvironmentModel,
    beta: float,
    m: int,
    replicas: int,
    seed: int,
    d: int = 1,
    key_start: int = 0,
) -> WeightVectorSamples:
    """Draws of the point-to-point weight vector at time m over the disorder.

    Component i is the weight of endpoint x ordered left to right; replica r
    lives on the slab ``replica_slab_seed(seed, key_start + r)``.
    """
    if m < 1:
        raise ParameterError("m must be >= 1")
    if d == 1:
        rows, _ = replica_scan(
            model, beta, m, replicas, seed, rows_at=[m], key_start=key_start
        )
        return WeightVectorSamples(rows[m])
    out = []
    for r in range(replicas):
        slab = EnvironmentSlab(replica_slab_seed(seed, key_start + r), m, d)
        w = run_chain(slab, model, beta, m)
        out.append([w.log_w[x] for x in sorted(w.log_w.keys())])
    return WeightVectorSamples(np.array(out))


@dataclass(frozen=True)
class ThetaMoment:
    """Estimate of E sum_i A_i^theta with a heavy-tail cross-check."""

    theta: float
    estimate: float
    std_err: float
    median_of_means: float
    mom_std_err: float

    @property
    def heavy_tail_suspect(self) -> bool:
        spread = np.hypot(self.std_err, self.mom_std_err)
        return bool(abs(self.estimate - self.median_of_means) > 3.0 * spread)


def _moment_terms(samples: WeightVectorSamples, theta: float) -> np.ndarray:
    if not 0.0 < theta <= 1.0:
        raise ParameterError(f"theta {theta} outside (0, 1]")
    return np.exp(theta * samples.log_values).sum(axis=1)


def theta_moment(samples: WeightVectorSamples, theta: float) -> ThetaMoment:
    """Sample mean of sum_i A_i^theta with its standard error.

    The median-of-means column is a heavy-tail guard: fractional moments of
    polymer weights can have fat tails at large beta, where a plain CLT
    interval around the mean is optimistic.
    """
    if samples.n_samples < 2:
        raise UsageError("need at least 2 samples for a standard error")
    s = _moment_terms(samples, theta)
    r = s.size
    est = float(s.mean())
    se = float(s.std(ddof=1) / np.sqrt(r))
    n_blocks = min(_MOM_BLOCKS, r // 2)
    blocks = np.array([b.mean() for b in np.array_split(s, n_blocks)])
    mom = float(np.median(blocks))
    mom_se = float(_MEDIAN_EFF * blocks.std(ddof=1) / np.sqrt(blocks.size))
    return ThetaMoment(float(theta), est, se, mom, mom_se)


@dataclass
class ThetaCurve:
    """Estimates of the variational curve over a theta grid (shared replicas)."""

    theta_grid: np.ndarray
    v_hat: np.ndarray
    std_err: np.ndarray
    replicas: int
    m: int
    beta: float
    heavy_tail: list = field(default_factory=list)

    def __post_init__(self):
        g = np.asarray(self.theta_grid, dtype=np.float64)
        if g.size < 1 or (np.diff(g) <= 0).any():
            raise ParameterError("theta grid must be strictly increasing")
        if g[0] <= 0 or abs(g[-1] - 1.0) > 1e-12:
            raise ParameterError("theta grid must lie in (0, 1] and end at 1.0")

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("theta,v_hat,std_err\n")
            for t, v, s in zip(self.theta_grid, self.v_hat, self.std_err):
                fh.write(f"{float(t)!r},{float(v)!r},{float(s)!r}\n")


def curve_value(samples: WeightVectorSamples, theta: float):
    """Point estimate of v(theta) = ln(moment)/theta with delta-method error."""
    tm = theta_moment(samples, theta)
    if not np.isfinite(tm.estimate) or tm.estimate <= 0.0:
        raise NumericError(
            f"moment estimate {tm.estimate} at theta={theta} is unusable "
            f"(underflow or non-finite weights)"
        )
    v = float(np.log(tm.estimate) / theta)
    se = float(tm.std_err / (theta * tm.estimate))
    return v, se, tm


def curve_from_samples(
    samples: WeightVectorSamples, theta_grid, *, m: int = 0, beta: float = 0.0
) -> ThetaCurve:
    grid = np.asarray(theta_grid, dtype=np.float64)
    vals, errs, flags = [], [], []
    for t in grid:
        v, se, tm = curve_value(samples, float(t))
        vals.append(v)
        errs.append(se)
        flags.append(tm.heavy_tail_suspect)
    return ThetaCurve(
        grid, np.array(vals), np.array(errs), samples.n_samples, m, beta, flags
    )


def fractional_moment_curve(
    model: EnvironmentModel,
    beta: float,
    m: int,
    theta_grid,
    replicas: int,
    seed: int,
    d: int = 1,
) -> ThetaCurve:
    """Estimate the variational curve of the time-m polymer weight vector."""
    samples = polymer_weight_samples(model, beta, m, replicas, seed, d)
    return curve_from_samples(samples, theta_grid, m=m, beta=beta)


def derivative_criterion(samples: WeightVectorSamples):
    """Slope of the estimated curve at theta = 1: (estimate, std_err).

    This is the plug-in derivative of v-hat, i.e. mean(sum A ln A) corrected
    by the estimated normalization mean(sum A); for an exactly normalized
    sample it reduces to the plain mean of sum_i A_i ln A_i.  Non-positive
    values mean the infimum sits at theta = 1.
    """
    return scaled_slope(samples, 1.0)


def scaled_slope(samples: WeightVectorSamples, theta: float):
    """Estimate of g(theta) = theta^2 * v'(theta): (estimate, std_err).

    g(theta) = theta * E[sum A^theta ln A] / E[sum A^theta]
               - ln E[sum A^theta],
    strictly increasing in theta, so its sign locates the curve minimum.
    """
    if samples.n_samples < 2:
        raise UsageError("need at least 2 samples for a standard error")
    if not 0.0 < theta <= 1.0:
        raise ParameterError(f"theta {theta} outside (0, 1]")
    log_a = samples.log_values
    w = np.exp(theta * log_a)
    s = w.sum(axis=1)
    t = (w * log_a).sum(axis=1)
    mu = s.mean()
    tbar = t.mean()
    if mu <= 0 or not np.isfinite(mu):
        raise NumericError(f"moment estimate {mu} at theta={theta} is unusable")
    est = theta * tbar / mu - np.log(mu)
    infl = (theta / mu) * (t - tbar) - (theta * tbar / mu**2 + 1.0 / mu) * (s - mu)
    se = float(infl.std(ddof=1) / np.sqrt(s.size))
    return float(est), se


def scaled_slope_derivative(samples: WeightVectorSamples, theta: float):
    """Estimate of g'(theta): (estimate, std_err).

    g'(theta) = theta * E[sum A^theta (ln A - c)^2] / E[sum A^theta] with c
    the A^theta-weighted mean of ln A; nonnegative by construction, which is
    the monotonicity behind unimodality of the curve.
    """
    if samples.n_samples < 2:
        raise UsageError("need at least 2 samples for a standard error")
    if not 0.0 < theta <= 1.0:
        raise ParameterError(f"theta {theta} outside (0, 1]")
    log_a = samples.log_values
    w = np.exp(theta * log_a)
    s = w.sum(axis=1)
    t = (w * log_a).sum(axis=1)
    q = (w * log_a * log_a).sum(axis=1)
    mu, tbar, qbar = s.mean(), t.mean(), q.mean()
    if mu <= 0 or not np.isfinite(mu):
        raise NumericError(f"moment estimate {mu} at theta={theta} is unusable")
    est = theta * (qbar / mu - tbar**2 / mu**2)
    infl = (
        (theta / mu) * (q - qbar)
        - (2.0 * theta * tbar / mu**2) * (t - tbar)
        + theta * (2.0 * tbar**2 / mu**3 - qbar / mu**2) * (s - mu)
    )
    se = float(infl.std(ddof=1) / np.sqrt(s.size))
    return float(est), se


@dataclass(frozen=True)
class CascadeBoundResult:
    """Result of minimizing the variational curve over (theta_min, 1]."""

    theta_star: float
    p_tree: float
    ci_halfwidth: float
    boundary_minimum: bool


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0

DEFAULT_THETA_MIN = 0.01
DEFAULT_SEARCH_TOL = 1e-3


def minimize_curve(
    evaluate,
    tol: float = DEFAULT_SEARCH_TOL,
    theta_min: float = DEFAULT_THETA_MIN,
    v_prime_at_one=None,
) -> CascadeBoundResult:
    """Golden-section minimum of a unimodal curve estimate on [theta_min, 1].

    ``evaluate(theta) -> (value, std_err)``.  The search domain is cut off
    at theta_min because the curve blows up like (1/theta)*ln N as theta -> 0
    for normalized laws, so the infimum is never at the left edge.  When the
    slope at 1 (``v_prime_at_one``, if supplied) is <= 0 the minimum is the
    boundary value at theta = 1 and no search runs.
    """
    if not 0.0 < theta_min < 1.0:
        raise ParameterError("theta_min must be in (0, 1)")
    if tol <= 0:
        raise ParameterError("tol must be > 0")

    def _eval(t):
        v, se = evaluate(t)[:2]
        if not np.isfinite(v):
            raise NumericError(f"curve evaluation not finite at theta={t}")
        return v, se

    if v_prime_at_one is not None and v_prime_at_one <= 0:
        v1, se1 = _eval(1.0)
        return CascadeBoundResult(1.0, v1, 3.0 * se1, True)

    a, b = float(theta_min), 1.0
    h = b - a
    c = a + (1.0 - _INVPHI) * h
    d = a + _INVPHI * h
    fc, _ = _eval(c)
    fd, _ = _eval(d)
    while h > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            h = b - a
            c = a + (1.0 - _INVPHI) * h
            fc, _ = _eval(c)
        else:
            a, c, fc = c, d, fd
            h = b - a
            d = a + _INVPHI * h
            fd, _ = _eval(d)
    theta_star = 0.5 * (a + b)
    boundary = v_prime_at_one is None and (1.0 - theta_star) <= 2.0 * tol
    if boundary:
        theta_star = 1.0
    value, se = _eval(theta_star)
    return CascadeBoundResult(float(theta_star), value, 3.0 * se, boundary)


def constant_weight_sampler(n_components: int):
    """Deterministic vector (1/N, ..., 1/N); the cascade stays exactly 1."""

    def sample(gen, size):
        return np.full((size, n_components), 1.0 / n_components)

    return sample


def lognormal_weight_sampler(n_components: int, beta: float):
    """I.i.d. components (1/N) e^{beta g - beta^2/2}, g standard normal."""

    def sample(gen, size):
        g = gen.standard_normal((size, n_components))
        return np.exp(beta * g - 0.5 * beta * beta) / n_components

    return sample


def polymer_cascade_sampler(model: EnvironmentModel, beta: float, m: int, d: int = 1):
    """Weight vectors drawn from the time-m polymer law (fresh slab each node)."""

    def sample(gen, size):
        seed = int(gen.integers(0, 2**63))
        samples = polymer_weight_samples(model, beta, m, size, seed, d)
        return np.exp(samples.log_values)

    return sample


def _subtree_level_sums(q_sampler, gen, n_components: int, depth: int) -> np.ndarray:
    """Vectorized per-level path-product sums of one fresh depth-`depth` subtree."""
    sums = np.empty(depth)
    prods = None
    count = 1
    for level in range(depth):
        a = np.asarray(q_sampler(gen, count), dtype=np.float64)
        if a.shape != (count, n_components):
            raise ParameterError(
                f"q_sampler returned shape {a.shape}, expected {(count, n_components)}"
            )
        prods = (prods[:, None] * a).ravel() if prods is not None else a.ravel()
        sums[level] = prods.sum()
        count *= n_components
    return sums


def cascade_level_sums(q_sampler, n_components: int, depth: int, seed: int) -> np.ndarray:
    """Exact per-level sums of one cascade realization.

    Entry k (0-based; entry 0 is 1.0) is the sum over all level-k tree nodes
    of the product of sampled edge weights on the root path - the martingale
    value at time k.  Depth-first over the top of the tree; the bottom levels
    of each subtree are evaluated as one vectorized block, which keeps memory
    bounded by the block size instead of the leaf count.
    """
    if n_components < 2:
        raise ParameterError("need a branching factor of at least 2")
    if depth < 1:
        raise ParameterError("depth must be >= 1")
    leaves = n_components**depth
    if leaves > _CASCADE_LEAF_BUDGET:
        raise BudgetError(
            f"cascade has {leaves} leaves, budget is {_CASCADE_LEAF_BUDGET}; "
            f"reduce depth to "
            f"{int(np.log(_CASCADE_LEAF_BUDGET) / np.log(n_components))} or less"
        )
    block_depth = max(1, int(np.log(_BLOCK_LEAVES) / np.log(n_components)))
    gen = np.random.default_rng(seed)
    acc = np.zeros(depth + 1)
    acc[0] = 1.0

    def visit(level: int, prod: float):
        remaining = depth - level
        if remaining <= block_depth:
            acc[level + 1 : level + remaining + 1] += prod * _subtree_level_sums(
                q_sampler, gen, n_components, remaining
            )
            return
        a = np.asarray(q_sampler(gen, 1), dtype=np.float64).ravel()
        for i in range(n_components):
            child = prod * a[i]
            acc[level + 1] += child
            visit(level + 1, child)

    visit(0, 1.0)
    return acc


def simulate_cascade_martingale(q_sampler, n_components: int, depth: int, seed: int) -> float:
    """Exact cascade martingale value at `depth` (sum over all leaf paths)."""
    return float(cascade_level_sums(q_sampler, n_components, depth, seed)[depth])


def cascade_free_energy_path(q_sampler, n_components: int, depths, seed: int) -> np.ndarray:
    """Free energy (1/n) ln W_n along one cascade realization, per depth."""
    depths = [int(n) for n in depths]
    if not depths or min(depths) < 1:
        raise ParameterError("depths must be positive integers")
    acc = cascade_level_sums(q_sampler, n_components, max(depths), seed)
    if (acc[depths] <= 0).any():
        raise NumericError("cascade sum underflowed to zero")
    return np.array([np.log(acc[n]) / n for n in depths])
