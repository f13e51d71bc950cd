"""Command-line interface: run, certify, rate, transport.

One command is one process.  Exit codes: 0 on success (certifications
passing), 1 when a requested certification or trajectory check fails,
2 on usage or configuration errors.  Reports embed the resolved config
and seed; CSV output never contains timestamps, so identical
(config, seed) runs write identical bytes.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from .blockspace import block_probabilities
from .config import ExperimentConfig, load_config
from .errors import BlocksplitError, ConfigError, DegenerateSequence
from .markov import (
    init_ensemble,
    point_sampler,
    read_trajectory_csv,
    run as run_ensemble,
    uniform_box_sampler,
    write_snapshot,
    write_trajectory_csv,
)
from .operators import gd_step_bound
from .rates import (
    RateReport,
    check_asymptotic_regularity,
    check_fejer,
    check_gauge_monotone,
    fit_linear_rate,
    theta_linear,
)
from .regularity import (
    certify_aafne_in_expectation,
    certify_paracontraction_in_expectation,
    certify_pointwise_aafne,
    verify_expectation_identities,
)
from .splitting import apply_T, apply_full
from .transport import (
    DiscreteMeasure,
    distance_to_point_mass,
    read_measure,
    wasserstein2_weighted,
    write_measure,
)


def _out_dir(cfg_dir: str | None, cli_dir: str | None) -> Path:
    out = Path(cli_dir if cli_dir is not None else (cfg_dir or "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _build(cfg: ExperimentConfig):
    problem = cfg.build_problem()
    m = problem.build_map(cfg.flavor, cfg.scheme, cfg.steps)
    return problem, m


def _init_sampler(cfg: ExperimentConfig, problem):
    init = cfg.run.init
    kind = init["kind"]
    if kind == "point":
        if "x" not in init:
            raise ConfigError("config.run.init.x: required for point init")
        x = np.asarray(init["x"], dtype=float)
        if x.shape != (problem.layout.total_dim,):
            raise ConfigError(
                f"config.run.init.x: expected {problem.layout.total_dim} coordinates, got {x.shape}"
            )
        return point_sampler(x)
    if kind == "uniform_box":
        for key in ("lo", "hi"):
            if key not in init:
                raise ConfigError(f"config.run.init.{key}: required for uniform_box init")
        return uniform_box_sampler(np.asarray(init["lo"], float), np.asarray(init["hi"], float))
    return uniform_box_sampler(problem.region.lo, problem.region.hi)


def cmd_run(cfg: ExperimentConfig, out_dir: Path) -> int:
    """Simulate the ensemble and write trajectory, snapshots, and summary."""
    if cfg.run is None:
        raise ConfigError("config.run: required by the run command")
    problem, m = _build(cfg)
    if cfg.run.strict_steps and cfg.flavor == "fb":
        bounds = gd_step_bound(m.coupling, 0.5)
        if not bounds.admits(m.steps):
            raise ConfigError(
                f"config.steps: {list(m.steps)} outside the admissible ranges {bounds.per_block} "
                "(strict_steps is on)"
            )
    p = block_probabilities(cfg.scheme, problem.layout)
    target = problem.target_point

    def target_distance(states):
        return distance_to_point_mass(DiscreteMeasure.empirical(states, problem.layout), target, p)

    def step_distance(a, b):
        return wasserstein2_weighted(
            DiscreteMeasure.empirical(a, problem.layout),
            DiscreteMeasure.empirical(b, problem.layout),
            p,
        )[0]

    t0 = time.time()
    ensemble = init_ensemble(m, _init_sampler(cfg, problem), cfg.run.num_chains, cfg.seed)
    result = run_ensemble(
        ensemble,
        m,
        cfg.run.iterations,
        snapshot_every=cfg.run.snapshot_every,
        dw_step_every=cfg.run.dw_step_every,
        target_distance=None if target is None else target_distance,
        step_distance=step_distance if cfg.run.dw_step_every > 0 else None,
        threads=cfg.threads,
    )
    elapsed = time.time() - t0

    traj_path = out_dir / "trajectory.csv"
    write_trajectory_csv(traj_path, result.records)
    for k, states in sorted(result.snapshots.items()):
        write_snapshot(out_dir / f"snapshot_{k:06d}.csv", states, k, cfg.seed)
    write_measure(out_dir / "final_measure.csv", DiscreteMeasure.empirical(ensemble.states, problem.layout))

    verdicts = {}
    d_target = np.array([r.d_target for r in result.records], dtype=float) if target is not None else None
    if d_target is not None and d_target.shape[0] >= 2:
        verdicts["fejer_d_target"] = check_fejer(d_target).to_dict()
        try:
            verdicts["linear_rate_d_target"] = fit_linear_rate(d_target).to_dict()
        except DegenerateSequence as e:
            verdicts["linear_rate_d_target"] = {"error": str(e)}
    dw = np.array([r.dw_step for r in result.records if r.dw_step is not None], dtype=float)
    if dw.shape[0] >= 4:
        verdicts["asymptotic_regularity_dw"] = check_asymptotic_regularity(dw).to_dict()

    summary = {
        "config": cfg.resolved(),
        "seed": cfg.seed,
        "elapsed_seconds": elapsed,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
        "final": {
            "k": result.records[-1].k,
            "mean_residual": result.records[-1].mean_residual,
            "psi_upper": result.records[-1].psi_upper,
            "d_target": result.records[-1].d_target,
        },
        "verdicts": verdicts,
        "outputs": {
            "trajectory": traj_path.name,
            "snapshots": [f"snapshot_{k:06d}.csv" for k in sorted(result.snapshots)],
            "final_measure": "final_measure.csv",
        },
    }
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    print(f"run complete: k={result.records[-1].k} chains={cfg.run.num_chains} "
          f"psi_upper={result.records[-1].psi_upper:.6e} out={out_dir}")
    return 0


def cmd_certify(cfg: ExperimentConfig, out_dir: Path) -> int:
    """Run one certification and write its report; exit 1 when it fails."""
    if cfg.certify is None:
        raise ConfigError("config.certify: required by the certify command")
    problem, m = _build(cfg)
    c = cfg.certify
    region = c.region if c.region is not None else problem.region
    if region.dim != problem.layout.total_dim:
        raise ConfigError(
            f"config.certify.region: dimension {region.dim} does not match problem "
            f"dimension {problem.layout.total_dim}"
        )

    if c.property_name == "pointwise_aafne":
        if c.target["kind"] == "subset":
            idx = int(c.target["index"])
            if idx >= cfg.scheme.num_outcomes:
                raise ConfigError(
                    f"config.certify.target.index: {idx} out of range for "
                    f"{cfg.scheme.num_outcomes} subsets"
                )
            T = lambda x: apply_T(m, idx, x)
        else:
            T = lambda x: apply_full(m, x)
        report = certify_pointwise_aafne(
            T, region, c.alpha, c.violation, c.num_pairs, cfg.seed,
            tolerance=c.tolerance, adversarial=c.adversarial,
        )
    elif c.property_name == "aafne_in_expectation":
        report = certify_aafne_in_expectation(
            m, region, c.alpha, c.violation, c.num_pairs, cfg.seed,
            tolerance=c.tolerance, adversarial=c.adversarial,
        )
    elif c.property_name == "paracontraction_in_expectation":
        if problem.fixed_points is None:
            raise ConfigError(
                "config.certify.property: paracontraction needs a problem with declared fixed points"
            )
        report = certify_paracontraction_in_expectation(
            m, problem.fixed_points, region, c.num_pairs, cfg.seed,
            residual_threshold=c.residual_threshold,
        )
    else:
        report = verify_expectation_identities(m, region, c.num_pairs, cfg.seed, tolerance=1e-9)

    doc = {"config": cfg.resolved(), "seed": cfg.seed, "report": report.to_dict()}
    with open(out_dir / "certify_report.json", "w") as fh:
        json.dump(doc, fh, indent=2)
    status = "PASS" if report.passed else "FAIL"
    print(f"{status} {report.property_name}: margin={report.margin:.6e} "
          f"tol={report.tolerance:.1e} samples={report.num_samples}")
    return 0 if report.passed else 1


def cmd_rate(args, cfg: ExperimentConfig | None, out_dir: Path) -> int:
    """Check a distance trajectory; exit 1 when a requested check fails."""
    cols = read_trajectory_csv(args.trajectory)
    rate_cfg = cfg.rate if cfg is not None and cfg.rate is not None else None
    column = args.column or (rate_cfg.column if rate_cfg else "d_target")
    if column not in cols:
        raise ConfigError(f"rate.column: trajectory has no column {column!r}; "
                          f"available: {sorted(cols)}")
    d = cols[column]
    d = d[~np.isnan(d)]
    if d.shape[0] < 2:
        raise ConfigError(f"rate.column: column {column!r} has fewer than two usable entries")

    report = RateReport(details={"column": column, "trajectory": str(args.trajectory),
                                 "num_entries": int(d.shape[0])})
    fejer_tol = rate_cfg.fejer_tol_rel if rate_cfg else 1e-3
    report.fejer = check_fejer(d, tol_rel=fejer_tol)
    try:
        report.fit = fit_linear_rate(d)
    except DegenerateSequence:
        report.fit = None

    dw = cols.get("dw_step")
    if dw is not None:
        dw = dw[~np.isnan(dw)]
        if dw.shape[0] >= 4:
            tail_tol = rate_cfg.tail_tol if rate_cfg else 1e-3
            report.asymptotic = check_asymptotic_regularity(dw, tail_tol=tail_tol)

    gauge_params = None
    if args.kappa is not None:
        gauge_params = {"kappa": args.kappa, "tau": args.tau, "epsilon": args.epsilon}
    elif rate_cfg is not None and rate_cfg.gauge is not None:
        gauge_params = rate_cfg.gauge
    if gauge_params is not None:
        if gauge_params.get("tau") is None:
            raise ConfigError("rate.gauge.tau: required alongside kappa")
        gauge = theta_linear(float(gauge_params["kappa"]), float(gauge_params["tau"]),
                             float(gauge_params.get("epsilon", 0.0) or 0.0))
        report.gauge = check_gauge_monotone(d, gauge, tol_rel=1e-3)
        report.details["gauge_factor"] = gauge.factor

    doc = {"config": None if cfg is None else cfg.resolved(), "report": report.to_dict()}
    with open(out_dir / "rate_report.json", "w") as fh:
        json.dump(doc, fh, indent=2)

    checks = {"fejer": report.fejer.passed}
    if report.gauge is not None:
        checks["gauge"] = report.gauge.passed
    if report.asymptotic is not None:
        checks["asymptotic_regularity"] = report.asymptotic.passed
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    if report.fit is not None:
        print(f"fitted rate c_hat={report.fit.c_hat:.6f} over {report.fit.num_used} entries")
    return 0 if all(checks.values()) else 1


def cmd_transport(args, out_dir: Path) -> int:
    """Exact weighted W2 distance between two measure files."""
    mu = read_measure(args.measures[0])
    nu = read_measure(args.measures[1])
    if args.probs is not None:
        probs = np.array([float(v) for v in args.probs.split(",")])
    else:
        probs = np.ones(mu.layout.num_blocks)
    from .blockspace import BlockProbabilities

    p = BlockProbabilities(probs, mu.layout)
    d, plan = wasserstein2_weighted(mu, nu, p)
    print(format(d, ".17g"))
    if args.plan is not None:
        np.savetxt(args.plan, plan.matrix, delimiter=",", fmt="%.17g")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blocksplit",
        description="Stochastic blockwise splitting: simulate, certify, rate, transport.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="experiment config JSON")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed (uint64)")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=None, help="worker threads across chains")

    sp_run = sub.add_parser("run", help="simulate a particle ensemble")
    common(sp_run)
    sp_cert = sub.add_parser("certify", help="certify a regularity property")
    common(sp_cert)
    sp_rate = sub.add_parser("rate", help="check a distance trajectory against gauges")
    common(sp_rate, config_required=False)
    sp_rate.add_argument("--trajectory", required=True, help="trajectory CSV from a run")
    sp_rate.add_argument("--column", default=None, help="distance column (default d_target)")
    sp_rate.add_argument("--kappa", type=float, default=None, help="linear gauge modulus")
    sp_rate.add_argument("--tau", type=float, default=None, help="gauge transport coefficient")
    sp_rate.add_argument("--epsilon", type=float, default=0.0, help="gauge violation")
    sp_tr = sub.add_parser("transport", help="distance between two measure files")
    sp_tr.add_argument("measures", nargs=2, help="two measure files")
    sp_tr.add_argument("--probs", default=None, help="comma-separated block probabilities")
    sp_tr.add_argument("--plan", default=None, help="write the optimal plan to this CSV")
    sp_tr.add_argument("--out", default=None, help="output directory")
    sp_tr.add_argument("--seed", type=int, default=None, help="unused; accepted for uniformity")
    sp_tr.add_argument("--threads", type=int, default=None, help="unused; accepted for uniformity")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = None
        if getattr(args, "config", None) is not None:
            cfg = load_config(args.config)
            if args.seed is not None:
                if args.seed < 0:
                    raise ConfigError("--seed: must be nonnegative")
                cfg.seed = args.seed
            if args.threads is not None:
                if args.threads < 1:
                    raise ConfigError("--threads: must be at least 1")
                cfg.threads = args.threads
        out_dir = _out_dir(cfg.output_dir if cfg is not None else None, getattr(args, "out", None))
        if args.command == "run":
            if cfg is None:
                raise ConfigError("--config: required")
            return cmd_run(cfg, out_dir)
        if args.command == "certify":
            if cfg is None:
                raise ConfigError("--config: required")
            return cmd_certify(cfg, out_dir)
        if args.command == "rate":
            return cmd_rate(args, cfg, out_dir)
        return cmd_transport(args, out_dir)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except BlocksplitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"io error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
