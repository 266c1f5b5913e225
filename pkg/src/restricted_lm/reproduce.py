"""Canned studies on the embedded datasets and the contaminated-mixture design.

The newcomb and phones studies write ``draws.csv`` (posterior draws, long
format), ``predictive.csv`` (plot-ready predictive summaries) and
``summary.json`` (posterior summaries, resolved configuration and seed) into
the output directory.  The simulation study writes ``kl.csv`` (the KL table),
``kl_groups.csv`` (per-group values) and ``summary.json``.  Reruns with the
same seed produce byte-identical files.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import datasets
from .errors import ConfigError, IoError
from .estimators import EstimatorSpec
from .evaluation.predictive import predictive_density
from .evaluation.simulation import FITTERS, SimulationDesign, run_simulation_study
from .io import dump_json, emit_report, write_csv
from .sampler.chain import ChainConfig, run_chain
from .sampler.priors import NIGPrior
from .sampler.student_t import run_student_t_baseline

log = logging.getLogger(__name__)

STUDIES = ("newcomb", "phones", "simulation")
DEFAULT_CHAIN = ChainConfig(iterations=20000, burn_in=5000, thin=5)

NEWCOMB_PRIOR = dict(mean=23.6, sd=2.04, a0=5.0, b0=10.0)
T_NU = 5.0
PHONES_PRIOR = dict(mu0=(1.87, 0.03), sigma0=0.03, g=21.0, a0=2.0, b0=1.0)


def _seeded(chain: ChainConfig, seed: int, stream: int) -> ChainConfig:
    """Distinct, reproducible chain seed per method."""
    s = int(np.random.SeedSequence(seed, spawn_key=(stream,)).generate_state(1)[0])
    return replace(chain, seed=s)


def _fits(y, X, prior, chain, seed, methods, efficiency=0.95):
    out = {}
    for j, (name, kind) in enumerate(methods):
        cfg = _seeded(chain, seed, j)
        if kind == "t":
            out[name] = run_student_t_baseline(y, X, prior, T_NU, cfg)
        else:
            spec = None if kind == "normal" else EstimatorSpec.from_name(kind, efficiency)
            out[name] = run_chain(y, X, prior, spec, cfg)
        log.info("%s done", name)
    return out


def _draw_columns(fits):
    cols = {"method": [], "draw": [], "sigma2": []}
    p = next(iter(fits.values())).beta.shape[1]
    for j in range(p):
        cols[f"beta{j}"] = []
    for name, o in fits.items():
        S = o.n_draws
        cols["method"] += [name] * S
        cols["draw"] += list(range(S))
        cols["sigma2"] += o.sigma2.tolist()
        for j in range(p):
            cols[f"beta{j}"] += o.beta[:, j].tolist()
    order = ["method", "draw"] + [f"beta{j}" for j in range(p)] + ["sigma2"]
    return {k: cols[k] for k in order}


def _summaries(fits):
    return {name: {**o.summary(), "family": o.family} for name, o in fits.items()}


def reproduce_newcomb(out_dir: Path, seed: int, chain: ChainConfig = DEFAULT_CHAIN) -> dict:
    data = datasets.newcomb()
    pr = NEWCOMB_PRIOR
    prior = NIGPrior.scalar(pr["mean"], pr["sd"], pr["a0"], pr["b0"])
    methods = [("normal", "normal"), ("huber", "huber"), ("tukey", "tukey"), ("t", "t")]
    fits = _fits(data.y, data.X, prior, chain, seed, methods)

    grid = np.round(np.arange(0.0, 50.0001, 0.25), 10)
    preds = {name: predictive_density(o) for name, o in fits.items()}
    pred_cols = {"y": grid}
    for name, pd in preds.items():
        pred_cols[name] = pd.pdf(grid)
    write_csv(out_dir / "draws.csv", _draw_columns(fits))
    write_csv(out_dir / "predictive.csv", pred_cols)

    summary = _summaries(fits)
    for name, pd in preds.items():
        lo, hi = pd.interval(0.95)
        summary[name]["predictive_95"] = [lo, hi]
        summary[name]["predictive_95_width"] = hi - lo
    return summary


def reproduce_phones(out_dir: Path, seed: int, chain: ChainConfig = DEFAULT_CHAIN) -> dict:
    year, y, X = datasets.phones()
    k = datasets.PHONES_PRIOR_ROWS
    pr = PHONES_PRIOR
    Xp = X[:k]
    Sigma0 = pr["g"] * pr["sigma0"] ** 2 * np.linalg.inv(Xp.T @ Xp)
    prior = NIGPrior(np.array(pr["mu0"]), Sigma0, pr["a0"], pr["b0"])
    yf, Xf, yearf = y[k:], X[k:], year[k:]
    clean = ~np.isin(yearf, datasets.PHONES_OUTLIER_YEARS)

    methods = [("normal", "normal"), ("tukey", "tukey"), ("t", "t")]
    fits = _fits(yf, Xf, prior, chain, seed, methods)
    fits["normal_clean"] = run_chain(yf[clean], Xf[clean], prior, None, _seeded(chain, seed, len(methods)))

    pred_cols = {"year": year}
    for name, o in fits.items():
        lo, mid, hi = [], [], []
        for xr in X:
            pd = predictive_density(o, xr)
            a, b = pd.interval(0.95)
            lo.append(a)
            hi.append(b)
            mid.append(pd.ppf(0.5))
        pred_cols[f"{name}_lo"], pred_cols[f"{name}_median"], pred_cols[f"{name}_hi"] = lo, mid, hi
    write_csv(out_dir / "draws.csv", _draw_columns(fits))
    write_csv(out_dir / "predictive.csv", pred_cols)

    summary = _summaries(fits)
    summary["_data"] = {"n_fit": int(yf.shape[0]), "n_clean": int(clean.sum()),
                        "year_center": datasets.PHONES_YEAR_CENTER, "response": "log(calls in millions)"}
    return summary


def reproduce_simulation(out_dir: Path, seed: int, chain: ChainConfig, K: int = 2, replicates: int = 1,
                         priors=((5.0, 1.0),), workers: int = 1, fitters=FITTERS) -> dict:
    design = SimulationDesign(replicates=replicates)
    report = run_simulation_study(design, priors, fitters, K=K, config=chain, seed=seed, workers=workers)
    rows = report.table()
    emit_report(rows, "csv", out_dir / "kl.csv")
    write_csv(out_dir / "kl_groups.csv", {
        "fitter": [r[0] for r in report.records], "a_s": [r[1] for r in report.records],
        "c": [r[2] for r in report.records], "k": [r[3] for r in report.records],
        "group": [r[4] for r in report.records], "p": [r[5] for r in report.records],
        "m": [r[6] for r in report.records], "n": [r[7] for r in report.records],
        "kl": [r[8] for r in report.records],
    })
    return {"rows": [list(r) for r in rows], "failures": [list(f) for f in report.failures],
            "design": report.config["design"]}


def reproduce(name: str, out_dir, seed: int, chain: ChainConfig | None = None, workers: int = 1, **kw):
    """Run one named study and write its artifacts; returns the list of written paths."""
    if name not in STUDIES:
        raise ConfigError(f"unknown study {name!r}; choose from {', '.join(STUDIES)}")
    if seed is None or seed < 0:
        raise ConfigError("a non-negative seed is required")
    datasets.verify_all()
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoError(f"cannot create {out_dir}: {exc}") from None
    if chain is None:
        chain = DEFAULT_CHAIN if name != "simulation" else ChainConfig(iterations=1500, burn_in=300, thin=1)
    if name == "newcomb":
        summary = reproduce_newcomb(out_dir, seed, chain)
    elif name == "phones":
        summary = reproduce_phones(out_dir, seed, chain)
    else:
        summary = reproduce_simulation(out_dir, seed, chain, workers=workers, **kw)
    dump_json(out_dir / "summary.json", {"study": name, "seed": seed, "chain": chain.as_dict(),
                                         "options": kw, "results": summary})
    return sorted(out_dir.iterdir())
