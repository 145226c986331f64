"""Localization and concentration diagnostics.

The replica overlap at step k is the probability that two independent
polymers drawn from the same environment land on the same site at time k;
its Cesaro average staying bounded away from zero is the telltale of
localization, reported here alongside certificates rather than tested as a
theorem (a liminf is not finitely checkable).

Overlaps are computed exactly per environment from the endpoint laws: no
path sampling, so the only randomness left is the disorder itself.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, ParameterError, UsageError
from .env import GAUSSIAN, EnvironmentModel, EnvironmentSlab, log_mgf
from .transfer import (
    LOG_HALF,
    _neighbor_logsum_1d,
    forward_step,
    initial_weights,
    partition_log,
    replica_scan,
)

_SIGMAS = 3.0


@dataclass
class OverlapSeries:
    """Per-step replica overlaps I_k and their running averages."""

    beta: float
    n: int
    i_k: np.ndarray
    cesaro: np.ndarray

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("k,i_k,cesaro\n")
            for k, (i, c) in enumerate(zip(self.i_k, self.cesaro), start=1):
                fh.write(f"{k},{float(i)!r},{float(c)!r}\n")


def overlap_series(
    slab: EnvironmentSlab, model: EnvironmentModel, beta: float, n: int
) -> OverlapSeries:
    """I_k = sum_x mu_{k-1}(next site = x)^2 for k = 1..n, one environment.

    The step law weights each candidate site by all paths reaching it,
    including the energy collected there, i.e. the normalized next row of
    the forward recursion.
    """
    if n > slab.horizon:
        raise DomainError(f"n {n} exceeds slab horizon {slab.horizon}")
    if n < 1:
        raise ParameterError("n must be >= 1")
    w = initial_weights(beta, slab.dimension)
    i_k = np.empty(n)
    for k in range(1, n + 1):
        w = forward_step(w, slab, model)
        if w.d == 1:
            logp = np.asarray(w.log_w) - partition_log(w)
        else:
            logp = np.array(list(w.log_w.values())) - partition_log(w)
        p = np.exp(logp)
        p /= p.sum()
        i_k[k - 1] = float((p * p).sum())
    cesaro = np.cumsum(i_k) / np.arange(1, n + 1)
    return OverlapSeries(float(beta), int(n), i_k, cesaro)


@dataclass
class ConcentrationRow:
    lam: float
    empirical: float
    std_err: float
    bound: float
    passed: bool


def concentration_check(
    model: EnvironmentModel,
    beta: float,
    n: int,
    lambda_list,
    replicas: int,
    seed: int = 1,
) -> list:
    """Empirical exponential moments of the centered log partition weight
    against the sub-Gaussian concentration bound.

    Bound column: (sd*beta*lam)^2 n/2 for a gaussian environment, and
    beta^2 width^2 lam^2 n for a bounded one.  A row passes when the
    empirical value does not exceed the bound by more than 3 se; the bound
    is loose, so failures indicate bugs rather than sharpness.
    """
    lams = [float(v) for v in lambda_list]
    if any(v < 0 for v in lams):
        raise UsageError("lambda values must be >= 0")
    width = model.support_width()
    if model.family == GAUSSIAN:
        sd = model.params[1]
        bounds = {lam: 0.5 * (sd * beta * lam) ** 2 * n for lam in lams}
    elif width is not None:
        bounds = {lam: (beta * width * lam) ** 2 * n for lam in lams}
    else:
        raise UsageError(
            "concentration bounds cover gaussian or bounded-support "
            "environments only"
        )
    _, logz = replica_scan(model, beta, n, replicas, seed, logz_at=[n])
    centered = logz[n] - logz[n].mean()
    rows = []
    for lam in lams:
        x = np.exp(lam * centered)
        mean = x.mean()
        se = float(x.std(ddof=1) / (np.sqrt(replicas) * mean))
        emp = float(np.log(mean))
        rows.append(
            ConcentrationRow(
                lam, emp, se, bounds[lam], bool(emp <= bounds[lam] + _SIGMAS * se)
            )
        )
    return rows


def concentration_csv(rows: list, path):
    with open(path, "w") as fh:
        fh.write("lambda,empirical,bound,verdict\n")
        for r in rows:
            fh.write(f"{r.lam!r},{r.empirical!r},{r.bound!r},{'pass' if r.passed else 'fail'}\n")


@dataclass
class InfluenceRow:
    j: int
    x: int
    exact: float
    finite_diff: float
    abs_err: float
    step: float
    adjusted: bool


@dataclass
class InfluenceReport:
    rows: list
    gradient_norm: float
    norm_bound: float


def _forward_rows(slab, model, beta, n):
    lam = log_mgf(model, beta)
    rows = [np.zeros(1)]
    for j in range(1, n + 1):
        eta = slab.row_values(model, j)
        rows.append(_neighbor_logsum_1d(rows[-1]) + LOG_HALF + beta * eta - lam)
    return rows


def _backward_rows(slab, model, beta, n):
    """log of the free-endpoint continuation weight from (j, x) to time n."""
    lam = log_mgf(model, beta)
    rows = [None] * (n + 1)
    rows[n] = np.zeros(n + 1)
    for j in range(n - 1, -1, -1):
        eta = slab.row_values(model, j + 1)
        child = rows[j + 1] + beta * eta - lam
        # children of x=2i-j at time j sit at indices i and i+1 of row j+1
        rows[j] = LOG_HALF + np.logaddexp(child[:-1], child[1:])
    return rows


def occupation_probabilities(
    slab: EnvironmentSlab, model: EnvironmentModel, beta: float, n: int
) -> list:
    """P(path visits x at time j) under the time-n polymer measure, exactly.

    Returned as one probability row per j in 0..n (d=1).
    """
    if slab.dimension != 1:
        raise ParameterError("occupation probabilities implemented for d=1")
    if n > slab.horizon:
        raise DomainError(f"n {n} exceeds slab horizon {slab.horizon}")
    fwd = _forward_rows(slab, model, beta, n)
    bwd = _backward_rows(slab, model, beta, n)
    log_total = float(logsumexp(fwd[n]))
    return [np.exp(f + b - log_total) for f, b in zip(fwd, bwd)]


def influence_check(
    slab: EnvironmentSlab,
    model: EnvironmentModel,
    beta: float,
    n: int,
    sites=None,
    fd_step: float = 1e-5,
) -> InfluenceReport:
    """Sensitivity of ln W_n to single site energies.

    The exact derivative with respect to the energy at (j, x) is beta times
    the occupation probability of (j, x); the finite-difference column
    recomputes the chain with the site pinned to value +- step.  The full
    gradient has Euclidean norm at most beta * sqrt(n) because each time
    slice's occupation probabilities are a unit-mass vector.
    """
    probs = occupation_probabilities(slab, model, beta, n)
    grad_sq = sum(float((p * p).sum()) for p in probs[1:])
    norm = beta * float(np.sqrt(grad_sq))
    if sites is None:
        sites = [(j, x) for j in range(1, n + 1) for x in range(-j, j + 1, 2)]
    rows = []
    for j, x in sites:
        if not (1 <= j <= n) or abs(x) > j or (x - j) % 2 != 0:
            raise DomainError(f"site ({j}, {x}) outside the time-{n} cone")
        exact = beta * float(probs[j][(x + j) // 2])
        base = slab.value(model, j, x)
        step = fd_step
        adjusted = False
        for _ in range(2):
            up = partition_log(_chain_to(slab.with_override(j, x, base + step), model, beta, n))
            down = partition_log(_chain_to(slab.with_override(j, x, base - step), model, beta, n))
            fd = (up - down) / (2.0 * step)
            if up != down or exact <= 1e-12:
                break
            # difference underflowed at this step size; widen and report
            step *= 100.0
            adjusted = True
        rows.append(InfluenceRow(j, x, exact, float(fd), abs(exact - fd), step, adjusted))
    return InfluenceReport(rows, norm, beta * float(np.sqrt(n)))


def _chain_to(slab, model, beta, n):
    w = initial_weights(beta, slab.dimension)
    for _ in range(n):
        w = forward_step(w, slab, model)
    return w
