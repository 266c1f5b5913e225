"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O or
data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, datasets
from .errors import ConfigError, IoError, RestrictedLikelihoodError
from .estimators import EstimatorSpec
from .evaluation.agency import agency_tlm, synthetic_agency, tlm_compare
from .evaluation.simulation import SimulationDesign, run_simulation_study
from .io import RunConfig, emit_report, load_config, load_csv, write_csv
from .reproduce import STUDIES, reproduce
from .sampler.chain import ChainConfig, run_chain
from .sampler.priors import NIGPrior
from .sampler.student_t import run_student_t_baseline

log = logging.getLogger("restricted_lm")


def _chain(cfg: RunConfig) -> ChainConfig:
    return ChainConfig(iterations=cfg.iterations, burn_in=cfg.burn_in, thin=cfg.thin, seed=cfg.seed,
                       proposal=cfg.proposal, kappa=cfg.kappa, coarea=cfg.coarea)


def _prior(cfg: RunConfig, p: int) -> NIGPrior:
    mean = np.broadcast_to(np.asarray(cfg.prior_mean, dtype=float), (p,)) if len(cfg.prior_mean) in (1, p) else None
    var = np.broadcast_to(np.asarray(cfg.prior_var, dtype=float), (p,)) if len(cfg.prior_var) in (1, p) else None
    if mean is None or var is None:
        raise ConfigError(f"prior mean/var must have 1 or {p} entries")
    return NIGPrior(mean.copy(), np.diag(var), cfg.a0, cfg.b0)


def _spec(cfg: RunConfig):
    if cfg.estimator in ("none", "full"):
        return None
    return EstimatorSpec.from_name(cfg.estimator, cfg.efficiency)


def _config(args, need_data=False) -> RunConfig:
    if args.config is None:
        if args.seed is None:
            raise ConfigError("pass --config or at least --seed")
        cfg = RunConfig(seed=args.seed)
    else:
        cfg = load_config(args.config, {"seed": args.seed})
    if args.out is not None:
        cfg.out = args.out
    if need_data and cfg.data is None:
        raise ConfigError("this command needs [data] path in the config")
    return cfg


def _out_dir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {p}: {exc}") from None
    return p


def cmd_fit(args) -> int:
    cfg = _config(args, need_data=True)
    data = load_csv(cfg.data, cfg.response, cfg.design, cfg.intercept)
    prior = _prior(cfg, data.p)
    chain = _chain(cfg)
    if cfg.model == "t":
        out = run_student_t_baseline(data.y, data.X, prior, cfg.nu, chain)
        method = "t"
    else:
        out = run_chain(data.y, data.X, prior, _spec(cfg), chain)
        method = cfg.estimator if _spec(cfg) is not None else "normal"
    od = _out_dir(cfg.out)
    cols = {f"beta{j}": out.beta[:, j] for j in range(data.p)}
    cols["sigma2"] = out.sigma2
    write_csv(od / "draws.csv", cols)
    rows = []
    for j in range(data.p):
        b = out.beta[:, j]
        rows.append((method, "all", f"beta{j}_mean", float(b.mean()), float(b.std(ddof=1) / np.sqrt(b.size))))
        rows.append((method, "all", f"beta{j}_sd", float(b.std(ddof=1)), float("nan")))
    rows.append((method, "all", "sigma2_mean", float(out.sigma2.mean()),
                 float(out.sigma2.std(ddof=1) / np.sqrt(out.sigma2.size))))
    if out.attempted:
        rows.append((method, "all", "acceptance_rate", out.acceptance_rate, float("nan")))
    emit_report(rows, args.format, od / f"report.{args.format}", cfg.as_dict(), cfg.seed)
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if len(cfg.sim_a_s) != len(cfg.sim_c):
        raise ConfigError("[simulation] a_s and c must have the same length")
    priors = list(zip(cfg.sim_a_s, cfg.sim_c))
    chain = _chain(cfg) if args.config else ChainConfig(iterations=1500, burn_in=300, thin=1, seed=cfg.seed)
    report = run_simulation_study(SimulationDesign(replicates=cfg.replicates), priors, K=cfg.K, config=chain,
                                  seed=cfg.seed, workers=args.workers, efficiency=cfg.efficiency)
    od = _out_dir(cfg.out)
    emit_report(report.table(), args.format, od / f"kl.{args.format}", {**cfg.as_dict(), **report.config}, cfg.seed)
    for f in report.failures:
        log.warning("failed cell: %s", f)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    chain = _chain(cfg)
    if cfg.data is None:
        state = synthetic_agency(np.random.default_rng(np.random.SeedSequence(cfg.seed)))
        rep = agency_tlm(state, cfg.train_fraction, cfg.splits, chain, cfg.seed, cfg.alpha, nu=cfg.nu,
                         efficiency=cfg.efficiency)
        source = "synthetic_agency"
    else:
        data = load_csv(cfg.data, cfg.response, cfg.design, cfg.intercept)
        rep = tlm_compare(data.y, data.X, _prior(cfg, data.p), cfg.train_fraction, cfg.splits, chain, cfg.seed,
                          cfg.alpha, nu=cfg.nu, efficiency=cfg.efficiency)
        source = cfg.data
    rows = [(m, source, f"tlm[alpha={rep.alpha:g},base={rep.base}]", mean, sd) for m, mean, sd in rep.rows()]
    od = _out_dir(cfg.out)
    emit_report(rows, args.format, od / f"tlm.{args.format}", cfg.as_dict(), cfg.seed)
    return 0


def cmd_reproduce(args) -> int:
    if args.seed is None and args.config is None:
        raise ConfigError("reproduce needs --seed (or a config with a seed)")
    chain = None
    seed = args.seed
    kw = {}
    if args.config is not None:
        cfg = load_config(args.config, {"seed": args.seed})
        seed = cfg.seed
        chain = _chain(cfg)
        if args.name == "simulation":
            kw = dict(K=cfg.K, replicates=cfg.replicates, priors=tuple(zip(cfg.sim_a_s, cfg.sim_c)))
    out = args.out or f"out/{args.name}"
    paths = reproduce(args.name, out, seed, chain, workers=args.workers, **kw)
    for p in paths:
        print(p)
    return 0


def cmd_selftest(args) -> int:
    from .estimators import irls_solve
    from .geometry import build_geometry
    from .sampler.proposal import Constraint, h_transform, inverse_h

    datasets.verify_all()
    st = irls_solve(np.ones((2, 1)), np.array([0.0, 2.0]), EstimatorSpec.least_squares())
    checks = [("mean/sd of (0, 2)", abs(st.b[0] - 1.0) < 1e-12 and abs(st.s - 1.0) < 1e-12)]
    rng = np.random.default_rng(0)
    X = np.column_stack([np.ones(10), rng.standard_normal(10)])
    y = X @ [1.0, 2.0] + rng.standard_normal(10)
    c = Constraint.from_observed(X, y, EstimatorSpec.huber(), build_geometry(X))
    checks.append(("h(inverse_h(y)) = y", np.max(np.abs(h_transform(inverse_h(y, c.geom), c) - y)) < 1e-8))
    ok = True
    for name, passed in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok &= bool(passed)
    print("embedded dataset checksums verified")
    return 0 if ok else 3


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="restricted-lm", description="Bayesian restricted-likelihood linear models")
    ap.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI run configuration")
    common.add_argument("--seed", type=int, help="master random seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, default=1, help="worker processes for independent cells")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="report format")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("fit", parents=[common], help="fit one dataset").set_defaults(func=cmd_fit)
    sub.add_parser("simulate", parents=[common], help="contaminated-mixture KL study").set_defaults(func=cmd_simulate)
    sub.add_parser("evaluate", parents=[common], help="train/holdout TLM comparison").set_defaults(func=cmd_evaluate)
    rp = sub.add_parser("reproduce", parents=[common], help="canned studies")
    rp.add_argument("name", choices=STUDIES)
    rp.set_defaults(func=cmd_reproduce)
    sub.add_parser("selftest", parents=[common], help="quick installation check").set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return ConfigError.exit_code
    try:
        return args.func(args)
    except RestrictedLikelihoodError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return IoError.exit_code


if __name__ == "__main__":
    sys.exit(main())
