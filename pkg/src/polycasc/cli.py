"""Batch front-end: ``polycasc <command> [flags]``.

Commands: bound, beta-c, cascade, overlap, concentration.  Studies are
configured by a key=value file plus command-line overrides (overrides win);
every report embeds the resolved configuration and seed, so rerunning from
a report's echo reproduces it byte for byte.  Wall-clock numbers go to a
run_meta.json sidecar, never into reports, which keeps reports identical
across reruns and worker counts.

Exit codes: 0 success, 1 usage, 2 numeric failure, 3 budget refusal.
"""

import argparse
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import bounds as bd
from . import cascade as cs
from . import diagnostics as dg
from .config import StudyConfig, load_config
from .env import EnvironmentModel, EnvironmentSlab
from .errors import PolycascError, UsageError
from .reports import write_csv, write_json
from .rng import derive_key


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="polycasc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("bound", "beta-c", "cascade", "overlap", "concentration"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key=value study file")
        p.add_argument("--beta", default=None)
        p.add_argument("--m-list", dest="m_list", default=None)
        p.add_argument("--n-list", dest="n_list", default=None)
        p.add_argument("--replicas", default=None)
        p.add_argument("--seed", default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--theta-min", dest="theta_min", default=None)
        p.add_argument("--workers", default=None)
    return parser


_OVERRIDE_KEYS = {
    "beta": "beta",
    "m_list": "m_list",
    "n_list": "n_list",
    "replicas": "replicas",
    "seed": "seed",
    "out": "out",
    "theta_min": "theta_min",
    "workers": "workers",
}


def _theta_grid(cfg: StudyConfig) -> np.ndarray:
    return np.linspace(cfg.theta_min, 1.0, cfg.theta_grid_size)


def _report_payload(cfg: StudyConfig, command: str, body: dict) -> dict:
    return {"command": command, "config": cfg.echo(), **body}


def _tree_job(payload):
    family, params, beta, m, replicas, seed, theta_min, grid = payload
    model = EnvironmentModel(family, tuple(params))
    return bd.tree_bound_row(
        model, beta, m, replicas, seed, theta_min=theta_min, curve_grid=np.asarray(grid)
    )


def _lower_job(payload):
    family, params, beta, n_list, replicas, seed = payload
    model = EnvironmentModel(family, tuple(params))
    return bd.superadditive_lower_bound(model, beta, list(n_list), replicas, seed)


def _run_bound_study(cfg: StudyConfig, beta: float):
    grid = tuple(_theta_grid(cfg))
    tree_payloads = [
        (cfg.env_family, cfg.env_params, beta, m, cfg.replicas, cfg.seed, cfg.theta_min, grid)
        for m in cfg.m_list
    ]
    lower_payload = (cfg.env_family, cfg.env_params, beta, cfg.n_list, cfg.replicas, cfg.seed)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            lower_future = pool.submit(_lower_job, lower_payload)
            rows = list(pool.map(_tree_job, tree_payloads))
            lower_rows = lower_future.result()
    else:
        rows = [_tree_job(p) for p in tree_payloads]
        lower_rows = _lower_job(lower_payload)
    bd.attach_running_inf(rows)
    return bd.assemble_report(
        beta, rows, lower_rows, cfg.replicas, cfg.seed, cfg.m_list, cfg.n_list
    )


def cmd_bound(cfg: StudyConfig) -> None:
    out = Path(cfg.out)
    betas = cfg.betas()
    for idx, beta in enumerate(betas):
        suffix = "" if len(betas) == 1 else f"_b{idx}"
        report = _run_bound_study(cfg, beta)
        write_json(
            out / f"report{suffix}.json",
            _report_payload(cfg, "bound", report.to_dict()),
        )
        write_csv(
            out / f"tree_bounds{suffix}.csv",
            ["m", "theta_star", "p_tree", "p_tree_per_step", "std_err", "running_inf",
             "boundary_minimum", "heavy_tail"],
            [
                (r.m, r.theta_star, r.p_tree, r.p_tree_per_step, r.std_err,
                 r.running_inf, r.boundary_minimum, r.heavy_tail)
                for r in report.rows
            ],
        )
        write_csv(
            out / f"lower_bounds{suffix}.csv",
            ["n", "value", "std_err"],
            [(r.n, r.value, r.std_err) for r in report.lower_rows],
        )
        curve_rows = []
        for r in report.rows:
            if r.curve is None:
                continue
            for t, v, s in zip(r.curve.theta_grid, r.curve.v_hat, r.curve.std_err):
                curve_rows.append((r.m, float(t), float(v), float(s)))
        write_csv(out / f"curves{suffix}.csv", ["m", "theta", "v_hat", "std_err"], curve_rows)


def cmd_beta_c(cfg: StudyConfig) -> None:
    model = cfg.model()
    bracket = bd.bracket_critical_beta(
        model,
        cfg.beta_c_m,
        cfg.beta_c_interval,
        cfg.beta_c_tolerance,
        cfg.replicas,
        cfg.seed,
        theta_min=cfg.theta_min,
    )
    payload = _report_payload(
        cfg,
        "beta-c",
        {
            "m": bracket.m,
            "bracket": [bracket.lo, bracket.hi],
            "tolerance": bracket.tolerance,
            "flagged": bracket.flagged,
            "queries": [asdict(q) for q in bracket.queries],
        },
    )
    write_json(Path(cfg.out) / "report.json", payload)


def cmd_cascade(cfg: StudyConfig) -> None:
    source = cfg.cascade_weights
    if source == "constant":
        branching = cfg.cascade_branching
        sampler = cs.constant_weight_sampler(branching)
    elif source == "lognormal":
        branching = cfg.cascade_branching
        sampler = cs.lognormal_weight_sampler(branching, cfg.beta)
    elif source == "polymer":
        if cfg.d != 1:
            raise UsageError("polymer cascade weights are implemented for d=1")
        branching = cfg.cascade_m + 1
        sampler = cs.polymer_cascade_sampler(cfg.model(), cfg.beta, cfg.cascade_m)
    else:
        raise UsageError(
            f"cascade.weights must be constant, lognormal, or polymer, got {source!r}"
        )
    depths = list(range(1, cfg.cascade_depth + 1))
    p_path = cs.cascade_free_energy_path(
        sampler, branching, depths, derive_key(cfg.seed, "cascade")
    )
    payload = _report_payload(
        cfg,
        "cascade",
        {
            "weights": source,
            "branching": branching,
            "rows": [{"n": n, "p_n": float(p)} for n, p in zip(depths, p_path)],
        },
    )
    out = Path(cfg.out)
    write_json(out / "report.json", payload)
    write_csv(out / "cascade.csv", ["n", "p_n"], list(zip(depths, (float(p) for p in p_path))))


def cmd_overlap(cfg: StudyConfig) -> None:
    model = cfg.model()
    finals = []
    first = None
    for i in range(cfg.overlap_slabs):
        slab = EnvironmentSlab(
            derive_key(cfg.seed, "overlap", i), cfg.overlap_n, cfg.d
        )
        series = dg.overlap_series(slab, model, cfg.beta, cfg.overlap_n)
        finals.append(float(series.cesaro[-1]))
        if first is None:
            first = series
    payload = _report_payload(
        cfg,
        "overlap",
        {
            "n": cfg.overlap_n,
            "slabs": cfg.overlap_slabs,
            "final_cesaro": finals,
            "mean_final_cesaro": float(np.mean(finals)),
        },
    )
    out = Path(cfg.out)
    write_json(out / "report.json", payload)
    first.to_csv(out / "overlap.csv")


def cmd_concentration(cfg: StudyConfig) -> None:
    model = cfg.model()
    rows = dg.concentration_check(
        model,
        cfg.beta,
        cfg.concentration_n,
        cfg.concentration_lambdas,
        cfg.replicas,
        derive_key(cfg.seed, "concentration"),
    )
    payload = _report_payload(
        cfg,
        "concentration",
        {"n": cfg.concentration_n, "rows": [asdict(r) for r in rows],
         "all_passed": all(r.passed for r in rows)},
    )
    out = Path(cfg.out)
    write_json(out / "report.json", payload)
    dg.concentration_csv(rows, out / "concentration.csv")


_COMMANDS = {
    "bound": cmd_bound,
    "beta-c": cmd_beta_c,
    "cascade": cmd_cascade,
    "overlap": cmd_overlap,
    "concentration": cmd_concentration,
}


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        overrides = {
            key: getattr(args, attr)
            for attr, key in _OVERRIDE_KEYS.items()
            if getattr(args, attr, None) is not None
        }
        cfg = load_config(args.config, overrides)
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        started = time.time()
        _COMMANDS[args.command](cfg)
        write_json(
            Path(cfg.out) / "run_meta.json",
            {
                "command": args.command,
                "workers": cfg.workers,
                "out": cfg.out,
                "started_at": started,
                "wall_seconds": time.time() - started,
            },
        )
        return 0
    except PolycascError as exc:
        print(f"polycasc: error: {exc}", file=sys.stderr)
        return getattr(exc, "exit_code", 1)


if __name__ == "__main__":
    sys.exit(main())
