"""Headline quantities: tree upper bounds on the polymer free energy, the
super-additive lower bound, strong-disorder certificates, and critical
temperature brackets for the tree model.

Decision rules (documented confidence policy):
  * certificates (feeding the claim "free energy < 0") use 4 standard
    errors; ordinary comparisons use 3;
  * a sign decision landing within 1 standard error of its threshold
    triggers one automatic re-estimate at 4x the replica budget;
  * ``running_inf`` is the prefix minimum of the per-step point estimates;
    confidence slack enters only in the comparisons that consume it.

Replica slabs are keyed by (seed, replica index) alone, so rows for
different m, different beta, and doubled budgets share environments: all
cross-row comparisons are paired, and extending a study never changes the
rows already computed.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ParameterError, UsageError
from .env import EnvironmentModel
from .transfer import replica_scan
from .cascade import (
    DEFAULT_SEARCH_TOL,
    DEFAULT_THETA_MIN,
    curve_from_samples,
    curve_value,
    derivative_criterion,
    minimize_curve,
    polymer_weight_samples,
    theta_moment,
)

COMPARISON_SIGMAS = 3.0
CERTIFICATE_SIGMAS = 4.0
FINAL_REPLICA_FACTOR = 4
ESCALATION_FACTOR = 4

DEFAULT_M_LIST = (1, 2, 4, 8, 16, 32)
DEFAULT_N_LIST = (4, 8, 16, 32, 64)
DEFAULT_REPLICAS = 100_000


@dataclass
class TreeBoundRow:
    """Tree bound at one m: minimized curve value per polymer step."""

    m: int
    theta_star: float
    p_tree: float
    p_tree_per_step: float
    std_err: float
    ci: float
    boundary_minimum: bool
    moment_estimate: float
    moment_std_err: float
    heavy_tail: bool
    replicas_search: int
    replicas_final: int
    escalated: bool
    running_inf: float = np.nan
    curve: object = None  # optional ThetaCurve on the search grid (not serialized)


@dataclass
class LowerBoundRow:
    """Mean of (1/n) ln W_n over disorder replicas."""

    n: int
    value: float
    std_err: float
    ci: float


@dataclass
class Certificate:
    """Fractional-moment certificate: estimate + 4 se < 1 implies strong
    disorder (negative free energy) at this beta, up to MC confidence."""

    m: int
    theta: float
    estimate: float
    std_err: float
    ci: float
    certified: bool
    replicas: int
    escalated: bool = False


@dataclass
class BoundReport:
    beta: float
    rows: list
    lower_rows: list
    running_inf: float
    lower_sup: float
    certificate: object
    seeds: dict
    budgets: dict

    def to_dict(self) -> dict:
        rows = []
        for r in self.rows:
            d = asdict(r)
            d.pop("curve", None)
            rows.append(d)
        return {
            "beta": self.beta,
            "rows": rows,
            "lower_rows": [asdict(r) for r in self.lower_rows],
            "running_inf": self.running_inf,
            "lower_sup": self.lower_sup,
            "certificate": asdict(self.certificate) if self.certificate else None,
            "seeds": self.seeds,
            "budgets": self.budgets,
        }


def tree_bound_row(
    model: EnvironmentModel,
    beta: float,
    m: int,
    replicas: int,
    seed: int,
    *,
    d: int = 1,
    theta_min: float = DEFAULT_THETA_MIN,
    search_tol: float = DEFAULT_SEARCH_TOL,
    escalate: bool = True,
    curve_grid=None,
) -> TreeBoundRow:
    """Minimize the variational curve for the time-m weight vector.

    Search runs on a base sample of ``replicas``, then the minimizer is
    re-estimated on a fresh sample 4x as large (cheap search, accurate
    terminal value).  ``curve_grid`` additionally records the curve on the
    base sample for reporting.
    """
    if m < 1:
        raise ParameterError("m must be >= 1")
    base = polymer_weight_samples(model, beta, m, replicas, seed, d)
    crit, _ = derivative_criterion(base)
    result = minimize_curve(
        lambda t: curve_value(base, t)[:2],
        tol=search_tol,
        theta_min=theta_min,
        v_prime_at_one=crit,
    )
    theta_star = result.theta_star

    def final_estimate(count, key_start):
        fresh = polymer_weight_samples(
            model, beta, m, count, seed, d, key_start=key_start
        )
        return curve_value(fresh, theta_star)

    replicas_final = FINAL_REPLICA_FACTOR * replicas
    v, se, tm = final_estimate(replicas_final, replicas)
    escalated = False
    # marginal sign decision (p vs 0, equivalently moment vs 1): escalate once
    if escalate and abs(v) < se:
        replicas_final *= ESCALATION_FACTOR
        v, se, tm = final_estimate(replicas_final, replicas * (1 + FINAL_REPLICA_FACTOR))
        escalated = True
    curve = None
    if curve_grid is not None:
        curve = curve_from_samples(base, curve_grid, m=m, beta=beta)
    return TreeBoundRow(
        m=m,
        theta_star=float(theta_star),
        p_tree=float(v),
        p_tree_per_step=float(v / m),
        std_err=float(se / m),
        ci=float(COMPARISON_SIGMAS * se / m),
        boundary_minimum=result.boundary_minimum,
        moment_estimate=tm.estimate,
        moment_std_err=tm.std_err,
        heavy_tail=tm.heavy_tail_suspect,
        replicas_search=replicas,
        replicas_final=replicas_final,
        escalated=escalated,
        curve=curve,
    )


def attach_running_inf(rows: list) -> list:
    """Prefix minimum of the per-step values, in list order."""
    best = np.inf
    for row in rows:
        best = min(best, row.p_tree_per_step)
        row.running_inf = float(best)
    return rows


def tree_upper_bound(
    model: EnvironmentModel,
    beta: float,
    m_list,
    replicas: int,
    seed: int,
    **kwargs,
) -> list:
    """Tree bound rows for each m, with the running infimum attached."""
    if not m_list:
        raise ParameterError("m_list must be non-empty")
    rows = [tree_bound_row(model, beta, int(m), replicas, seed, **kwargs) for m in m_list]
    return attach_running_inf(rows)


def superadditive_lower_bound(
    model: EnvironmentModel,
    beta: float,
    n_list,
    replicas: int,
    seed: int,
    *,
    return_samples: bool = False,
):
    """MC mean of (1/n) ln W_n per n; the supremum is a lower bound on the
    per-step free energy.  All n share replica slabs (nested in time), so
    successive rows are paired."""
    if not n_list:
        raise ParameterError("n_list must be non-empty")
    n_list = [int(n) for n in n_list]
    if min(n_list) < 1:
        raise ParameterError("n values must be >= 1")
    _, logz = replica_scan(
        model, beta, max(n_list), replicas, seed, logz_at=sorted(set(n_list))
    )
    rows = []
    for n in n_list:
        per_step = logz[n] / n
        se = float(per_step.std(ddof=1) / np.sqrt(replicas))
        rows.append(
            LowerBoundRow(n, float(per_step.mean()), se, float(COMPARISON_SIGMAS * se))
        )
    if return_samples:
        return rows, logz
    return rows


def strong_disorder_certificate(
    model: EnvironmentModel,
    beta: float,
    m: int,
    theta: float,
    replicas: int,
    seed: int,
    *,
    d: int = 1,
    key_start: int = 0,
    escalate: bool = True,
) -> Certificate:
    """Estimate E sum_x W_m(x)^theta; certified when estimate + 4 se < 1."""
    if m < 2:
        raise UsageError("certificates need m >= 2")
    if not 0.0 < theta < 1.0:
        raise UsageError("certificates need theta strictly inside (0, 1)")
    count = replicas
    samples = polymer_weight_samples(model, beta, m, count, seed, d, key_start=key_start)
    tm = theta_moment(samples, theta)
    escalated = False
    if escalate and abs(tm.estimate - 1.0) < tm.std_err:
        count = ESCALATION_FACTOR * replicas
        samples = polymer_weight_samples(
            model, beta, m, count, seed, d, key_start=key_start + replicas
        )
        tm = theta_moment(samples, theta)
        escalated = True
    ci = CERTIFICATE_SIGMAS * tm.std_err
    return Certificate(
        m=m,
        theta=float(theta),
        estimate=tm.estimate,
        std_err=tm.std_err,
        ci=float(ci),
        certified=bool(tm.estimate + ci < 1.0),
        replicas=count,
        escalated=escalated,
    )


def certificate_from_rows(rows: list) -> Certificate | None:
    """Strongest certified row (smallest estimate + 4 se), if any.

    Only interior minimizers at m >= 2 qualify: the certificate logic needs
    theta strictly inside (0, 1).
    """
    best = None
    for row in rows:
        if row.m < 2 or row.boundary_minimum or not 0.0 < row.theta_star < 1.0:
            continue
        upper = row.moment_estimate + CERTIFICATE_SIGMAS * row.moment_std_err
        if upper < 1.0 and (best is None or upper < best[0]):
            best = (
                upper,
                Certificate(
                    m=row.m,
                    theta=row.theta_star,
                    estimate=row.moment_estimate,
                    std_err=row.moment_std_err,
                    ci=float(CERTIFICATE_SIGMAS * row.moment_std_err),
                    certified=True,
                    replicas=row.replicas_final,
                    escalated=row.escalated,
                ),
            )
    return best[1] if best else None


def build_bound_report(
    model: EnvironmentModel,
    beta: float,
    m_list=DEFAULT_M_LIST,
    n_list=DEFAULT_N_LIST,
    replicas: int = DEFAULT_REPLICAS,
    seed: int = 1,
    **kwargs,
) -> BoundReport:
    rows = tree_upper_bound(model, beta, m_list, replicas, seed, **kwargs)
    lower_rows = superadditive_lower_bound(model, beta, n_list, replicas, seed)
    return assemble_report(beta, rows, lower_rows, replicas, seed, m_list, n_list)


def assemble_report(beta, rows, lower_rows, replicas, seed, m_list, n_list) -> BoundReport:
    running_inf = rows[-1].running_inf if rows else np.nan
    lower_sup = max(r.value for r in lower_rows) if lower_rows else np.nan
    return BoundReport(
        beta=float(beta),
        rows=rows,
        lower_rows=lower_rows,
        running_inf=float(running_inf),
        lower_sup=float(lower_sup),
        certificate=certificate_from_rows(rows),
        seeds={"study_seed": int(seed)},
        budgets={
            "replicas": int(replicas),
            "final_factor": FINAL_REPLICA_FACTOR,
            "escalation_factor": ESCALATION_FACTOR,
            "m_list": [int(m) for m in m_list],
            "n_list": [int(n) for n in n_list],
        },
    )


def sandwich_gap(report: BoundReport):
    """(gap, slack) for the two-sided consistency check.

    The lower bound may not exceed the upper bound by more than the
    combined confidence slack: gap = lower_sup - running_inf <= slack.
    """
    inf_row = min(report.rows, key=lambda r: r.p_tree_per_step)
    sup_row = max(report.lower_rows, key=lambda r: r.value)
    slack = COMPARISON_SIGMAS * float(np.hypot(inf_row.std_err, sup_row.std_err))
    return report.lower_sup - report.running_inf, slack


@dataclass
class BetaCQuery:
    beta: float
    p_per_step: float
    std_err: float
    verdict: str  # "negative" | "inconclusive" | "zero"


@dataclass
class BetaCBracket:
    m: int
    lo: float
    hi: float
    tolerance: float
    queries: list = field(default_factory=list)
    flagged: bool = False


def bracket_critical_beta(
    model: EnvironmentModel,
    m: int,
    beta_interval,
    tolerance: float,
    replicas: int,
    seed: int = 1,
    **kwargs,
) -> BetaCBracket:
    """Bisection bracket for the tree model's critical inverse temperature.

    Valid because the per-step tree value is non-increasing in beta.  A
    query certifies "negative" when its CI (3 se) excludes 0 from below;
    anything else keeps the lower edge (shrinking the bracket toward the
    certified-negative end) and queries that looked negative without
    certifying are flagged.
    """
    lo, hi = (float(b) for b in beta_interval)
    if not 0 <= lo < hi:
        raise UsageError("need 0 <= beta_lo < beta_hi")
    if tolerance <= 0:
        raise UsageError("tolerance must be > 0")
    queries = []

    def query(beta_val: float) -> BetaCQuery:
        row = tree_bound_row(model, beta_val, m, replicas, seed, **kwargs)
        p, se = row.p_tree_per_step, row.std_err
        if p + COMPARISON_SIGMAS * se < 0:
            verdict = "negative"
        elif p < 0:
            verdict = "inconclusive"
        else:
            verdict = "zero"
        q = BetaCQuery(float(beta_val), p, se, verdict)
        queries.append(q)
        return q

    if query(lo).verdict == "negative":
        raise UsageError(
            f"lower endpoint beta={lo} already certifies a negative value; widen downward"
        )
    if query(hi).verdict != "negative":
        raise UsageError(
            f"upper endpoint beta={hi} does not certify a negative value; "
            f"widen upward or raise replicas"
        )
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        if query(mid).verdict == "negative":
            hi = mid
        else:
            lo = mid
    flagged = any(q.verdict == "inconclusive" for q in queries)
    return BetaCBracket(int(m), lo, hi, float(tolerance), queries, flagged)


@dataclass
class EntropyDoubling:
    """Endpoint log-weight entropy at 2m versus twice the value at m.

    Doubling the horizon cannot lower the weighted log-weight sum below
    twice its one-horizon value (paired replicas; strict inequality except
    in degenerate cases)."""

    m: int
    lhs: float
    lhs_std_err: float
    rhs: float
    rhs_std_err: float
    diff: float
    diff_std_err: float
    holds: bool


def entropy_doubling_check(
    model: EnvironmentModel, beta: float, m: int, replicas: int, seed: int = 1
) -> EntropyDoubling:
    if m < 1:
        raise ParameterError("m must be >= 1")
    rows, _ = replica_scan(model, beta, 2 * m, replicas, seed, rows_at=[m, 2 * m])

    def weighted_log_sum(log_w):
        return (np.exp(log_w) * log_w).sum(axis=1)

    half = weighted_log_sum(rows[m])
    full = weighted_log_sum(rows[2 * m])
    diff = full - 2.0 * half
    r = np.sqrt(replicas)
    diff_se = float(diff.std(ddof=1) / r)
    return EntropyDoubling(
        m=int(m),
        lhs=float(full.mean()),
        lhs_std_err=float(full.std(ddof=1) / r),
        rhs=float(2.0 * half.mean()),
        rhs_std_err=float(2.0 * half.std(ddof=1) / r),
        diff=float(diff.mean()),
        diff_std_err=diff_se,
        holds=bool(diff.mean() >= -COMPARISON_SIGMAS * diff_se),
    )
