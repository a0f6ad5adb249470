"""Batch front-end: `pin <experiment> --config FILE [--seed S] [--workers W] [--out DIR]`.

Every run writes versioned CSV tables, a manifest sufficient to re-run
exactly, and (unless --no-plots) a PNG figure per experiment.  CSV bodies
are byte-identical for identical (config, seed) at any worker count.

Exit codes: 0 success, 2 config error, 3 budget partial, 4 numerical
diagnostic.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import RunConfig, ConfigError, parse_config, EXPERIMENTS
from .slowvar import SlowlyVarying, DeBruijnError
from . import renewal as rn
from . import disorder as ds
from . import continuum_psi as cpsi
from . import coarsegrain as cgr
from . import weakcoupling as wc
from . import freenergy as fe

__all__ = ["main", "run"]


def build_law(cfg: RunConfig) -> rn.RenewalLaw:
    kind = cfg["law.kind"]
    if kind == "heavy":
        L = SlowlyVarying(cfg["law.family"], cfg["law.param"])
        return rn.build_renewal(cfg["law.alpha"], L, cfg["law.N_max"])
    if kind == "deterministic":
        return rn.deterministic_law(cfg["law.N_max"])
    if kind == "twopoint":
        return rn.twopoint_law(cfg["law.N_max"])
    if kind == "contact":
        return rn.contact_power_law(cfg["law.nu"], cfg["law.N_max"], cfg["law.M"])
    raise ConfigError([f"unknown law.kind {kind!r}"])


def build_disorder(cfg: RunConfig) -> ds.DisorderLaw:
    kind = cfg["disorder.kind"]
    return ds.make_disorder(kind, cfg["disorder.gamma"] if kind == "gammaexp" else None)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


class Table:
    """Deterministic CSV table with a versioned schema header line."""

    def __init__(self, name: str, experiment: str, columns):
        self.name = name
        self.columns = list(columns)
        self.buf = io.StringIO()
        self.buf.write(f"# pinsim-csv v1 experiment={experiment} table={name}\n")
        self.buf.write(",".join(self.columns) + "\n")
        self.n_rows = 0

    def row(self, *vals):
        if len(vals) != len(self.columns):
            raise ValueError(f"table {self.name}: expected {len(self.columns)} values")
        self.buf.write(",".join(_fmt(v) for v in vals) + "\n")
        self.n_rows += 1

    def write(self, out_dir: Path) -> str:
        path = out_dir / f"{self.name}.csv"
        path.write_text(self.buf.getvalue())
        return path.name


def _pmap(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# -- experiment runners; each returns (tables, figure payload) ----------------

def _run_sim(cfg, workers, tables):
    law, dlaw = build_law(cfg), build_disorder(cfg)
    per = Table("samples", "sim",
                ["N", "t", "beta_hat", "h_hat", "replica", "logZ_free", "logZ_constr"])
    tables.append(per)
    summ = Table("summary", "sim",
                 ["N", "t", "beta_hat", "h_hat", "replicas", "mean_logZ_constr",
                  "stderr_logZ_constr", "mean_Z_constr", "q05", "q50", "q95"])
    tables.append(summ)
    hist = {}
    bh, t = cfg["sim.beta_hat"], cfg["sim.t"]
    for N in cfg["sim.N"]:
        ests, path, path_free = wc.common_h_sweep(
            law, dlaw, bh, cfg["sim.h_hat"], t, N, cfg["replicas"], cfg.seed)
        for e in ests:
            q = e.quantiles_constr
            summ.row(N, t, bh, e.h_hat, e.replicas, e.mean_logZ_constr,
                     e.stderr_logZ_constr, e.mean_Z_constr, q[0], q[2], q[4])
        for i, hh in enumerate(cfg["sim.h_hat"]):
            for r in range(cfg["replicas"]):
                per.row(N, t, bh, hh, r, path_free[r, i], path[r, i])
        hist[f"N={N}, hh={cfg['sim.h_hat'][-1]:g}"] = path[:, -1].copy()
    return {"hist": hist}


def _run_psi(cfg, workers, tables):
    tab = Table("psi", "psi",
                ["nu", "delta_hat", "t", "psi_hat", "psi_hat_c", "k_max",
                 "trunc_bound"])
    tables.append(tab)
    nu, tol = cfg["psi.nu"], cfg["psi.tol"]
    ts = sorted(cfg["psi.t"])
    ev = cpsi.SeriesEvaluator(nu, max(ts) if max(ts) > 0 else 1.0,
                              extra_nodes=[x for x in ts if x > 0])
    curves = {}
    for dh in cfg["psi.delta_hat"]:
        vals, kf, bf, _ = ev.profile(dh, ts, constrained=False, tol=tol)
        valc, kc, bc, _ = ev.profile(dh, ts, constrained=True, tol=tol)
        for t, v, vc in zip(ts, vals, valc):
            tab.row(nu, dh, t, float(v), float(vc), max(kf, kc), max(bf, bc))
        curves[f"dh={dh:g}"] = (np.asarray(ts), vals, valc)
    return {"curves": curves}


def _run_uconv(cfg, workers, tables):
    law = build_law(cfg)
    dh = cfg["uconv.delta_hat"]
    t_grid = cfg["uconv.t_grid"]
    N_list = cfg["uconv.N_list"]
    rep = cpsi.uconv_check(law, dh, t_grid, N_list)
    prof = Table("profiles", "uconv",
                 ["nu", "delta_hat", "N", "t", "discrete_free", "continuum_free",
                  "discrete_constr", "continuum_constr"])
    summ = Table("supdev", "uconv",
                 ["nu", "delta_hat", "N", "sup_dev_free", "sup_dev_constr"])
    tables.extend([prof, summ])
    for N in N_list:
        for i, t in enumerate(rep.t_grid):
            prof.row(rep.nu, dh, N, float(t), float(rep.discrete_free[N][i]),
                     float(rep.continuum_free[i]), float(rep.discrete_constrained[N][i]),
                     float(rep.continuum_constrained[i]))
    for N, df, dc in zip(N_list, rep.sup_dev_free, rep.sup_dev_constrained):
        summ.row(rep.nu, dh, N, df, dc)
    return {"N": N_list, "dev_free": rep.sup_dev_free,
            "dev_con": rep.sup_dev_constrained}


def _run_cg_check(cfg, workers, tables):
    from .rng import SeedRecord
    law, dlaw = build_law(cfg), build_disorder(cfg)
    tab = Table("cg_identity", "cg-check",
                ["N", "t", "beta", "h", "log_z_free", "log_rhs", "rel_dev",
                 "rel_dev_no_boundary", "n_signatures"])
    tables.append(tab)
    labels, devs = [], []
    for N, t in zip(cfg["cg.N"], cfg["cg.t"]):
        M = N * t
        om = ds.sample_disorder(dlaw, M, SeedRecord(cfg.seed, ("cg", N, t)))
        rep = cgr.verify_cg_identity(law, om.omega, dlaw, cfg["cg.beta"],
                                     cfg["cg.h"], N, t)
        tab.row(N, t, rep.beta, rep.h, rep.log_z_free, rep.log_rhs, rep.rel_dev,
                rep.rel_dev_no_boundary, rep.n_signatures)
        labels.append(f"N={N},t={t}")
        devs.append(rep.rel_dev)
    return {"labels": labels, "devs": devs}


def _run_rege(cfg, workers, tables):
    from .rng import stream
    tails = Table("tails", "rege",
                  ["alpha", "gamma", "event", "p_hat", "slope", "slope_lo",
                   "slope_hi", "n_samples"])
    ks = Table("g1_ks", "rege", ["alpha", "n_samples", "ks_distance"])
    skel = Table("skeleton", "rege", ["alpha", "sample", "k", "J", "s", "t"])
    tables.extend([tails, ks, skel])
    fig_tails = {}
    for a in cfg["rege.alpha"]:
        rng_w = stream(cfg.seed, "rege-skel", a)
        for i in range(64):
            rs = cgr.sample_regenerative_cg(a, 4, rng_w)
            for k in range(len(rs.cg.J)):
                skel.row(a, i, k + 1, int(rs.cg.J[k]), float(rs.cg.s[k]),
                         float(rs.cg.t[k]))
        g1 = np.sort(cgr.sample_g1(a, cfg["rege.samples"],
                                   stream(cfg.seed, "rege-g1", a)))
        grid = np.linspace(0.02, 0.98, 49)
        cdf = cgr.beta_cdf_from_glaw(a, grid)
        emp = np.searchsorted(g1, grid, side="right") / g1.size
        ks.row(a, g1.size, float(np.abs(emp - cdf).max()))
        rep = cgr.lemma_tail_estimates(a, cfg["rege.gammas"], cfg["rege.samples"],
                                       stream(cfg.seed, "rege-tail", a))
        for g, pe, ps in zip(rep.gammas, rep.p_near_edge, rep.p_short_visit):
            tails.row(a, float(g), "near-edge", float(pe), rep.slope_near_edge,
                      rep.ci_near_edge[0], rep.ci_near_edge[1], rep.n_samples)
            tails.row(a, float(g), "short-visit", float(ps), rep.slope_short_visit,
                      rep.ci_short_visit[0], rep.ci_short_visit[1], rep.n_samples)
        fig_tails[f"a={a:g} edge"] = (rep.gammas, rep.p_near_edge, rep.slope_near_edge)
        fig_tails[f"a={a:g} visit"] = (rep.gammas, rep.p_short_visit, rep.slope_short_visit)
    return {"tails": fig_tails}


def _hc_task(args):
    law, dlaw, beta, N, replicas, seed, kappa, c0, tol = args
    guess = max(2.0 * c0 / N, 1e-3)
    br = fe._auto_bracket(law, dlaw, beta, N, replicas, seed, kappa, c0, guess)
    return fe.critical_point(law, dlaw, beta, N, replicas, seed, bracket=br,
                             tol=tol, kappa=kappa, c0=c0)


def _run_hc(cfg, workers, tables):
    law, dlaw = build_law(cfg), build_disorder(cfg)
    tab = Table("hc", "hc", ["beta", "h_c", "ci_lo", "ci_hi", "N", "replicas"])
    tables.append(tab)
    tasks = [(law, dlaw, b, cfg["hc.N"], cfg["replicas"], cfg.seed,
              cfg["hc.kappa"], cfg["hc.c0"], cfg["hc.tol"])
             for b in cfg["hc.beta"]]
    cps = _pmap(_hc_task, tasks, workers)
    for cp in cps:
        tab.row(cp.beta, cp.h_c, cp.ci[0], cp.ci[1], cp.N, cp.replicas)
    return {"beta": [c.beta for c in cps], "h_c": [c.h_c for c in cps],
            "lo": [c.ci[0] for c in cps], "hi": [c.ci[1] for c in cps]}


def _run_scan(cfg, workers, tables):
    law, dlaw = build_law(cfg), build_disorder(cfg)
    sc = fe.universality_scan(law, dlaw, cfg["scan.beta_grid"], cfg["scan.N"],
                              cfg["replicas"], cfg.seed, kappa=cfg["scan.kappa"],
                              c0=cfg["scan.c0"], tol=cfg["scan.tol"])
    pts = Table("points", "scan", ["beta", "h_c", "ci_lo", "ci_hi", "ratio",
                                   "ratio_ci", "N", "replicas"])
    tables.append(pts)
    for i, b in enumerate(sc.beta_grid):
        pts.row(float(b), float(sc.h_c[i]), float(sc.ci_lo[i]), float(sc.ci_hi[i]),
                float(sc.ratios[i]), float(sc.ratio_ci[i]), sc.N, sc.replicas)
    summ = Table("fit", "scan", ["target_exponent", "fitted_exponent",
                                 "exponent_ci_lo", "exponent_ci_hi",
                                 "plateau_consistent", "m_alpha_estimate",
                                 "planned_cost"])
    tables.append(summ)
    summ.row(sc.target_exponent, sc.fitted_exponent, sc.exponent_ci[0],
             sc.exponent_ci[1], int(sc.plateau_consistent), float(sc.ratios[-1]),
             sc.planned_cost)
    x = np.log(sc.beta_grid)
    inter = float(np.mean(np.log(sc.h_c) - sc.fitted_exponent * x))
    return {"beta": sc.beta_grid, "h_c": sc.h_c,
            "fit": (sc.fitted_exponent, inter),
            "target": sc.target_exponent, "ratios": sc.ratios}


def _run_smoothing(cfg, workers, tables):
    law, dlaw = build_law(cfg), build_disorder(cfg)
    beta, N = cfg["smoothing.beta"], cfg["smoothing.N"]
    guess = max(4.0 / N, 1e-3)
    br = fe._auto_bracket(law, dlaw, beta, N, cfg["replicas"], cfg.seed, 3.0, 2.0, guess)
    cp = fe.critical_point(law, dlaw, beta, N, cfg["replicas"], cfg.seed, bracket=br)
    h_grid = [cp.h_c + o for o in cfg["smoothing.h_offsets"]]
    rep = fe.smoothing_check(law, dlaw, beta, h_grid, N, cfg["replicas"], cfg.seed,
                             h_c=cp.h_c)
    tab = Table("smoothing", "smoothing",
                ["beta", "h_c", "h", "F", "stderr", "bound", "violation"])
    tables.append(tab)
    for h, F, se, b in zip(rep.h_grid, rep.F, rep.stderr, rep.bound):
        tab.row(beta, rep.h_c, float(h), float(F), float(se), float(b),
                int(F > b + 3 * se))
    return {"h": rep.h_grid, "F": rep.F, "bound": rep.bound,
            "violations": rep.violations}


def _run_alpha_gt1(cfg, workers, tables):
    law, dlaw = build_law(cfg), build_disorder(cfg)
    rep = fe.alpha_gt1_check(law, dlaw, cfg["ag1.beta_grid"], cfg["ag1.N"],
                             cfg["replicas"], cfg.seed, tol=cfg["ag1.tol"])
    tab = Table("alpha_gt1", "alpha-gt1",
                ["beta", "ratio", "target", "rel_dev", "mean_return"])
    tables.append(tab)
    for b, r, d in zip(rep.beta_grid, rep.ratios, rep.rel_dev):
        tab.row(float(b), float(r), rep.target, float(d), rep.mean_return)
    return {"beta": rep.beta_grid, "ratios": rep.ratios, "target": rep.target}


_RUNNERS = {
    "sim": _run_sim,
    "psi": _run_psi,
    "uconv": _run_uconv,
    "cg-check": _run_cg_check,
    "rege": _run_rege,
    "hc": _run_hc,
    "scan": _run_scan,
    "smoothing": _run_smoothing,
    "alpha-gt1": _run_alpha_gt1,
}


def run(cfg: RunConfig, out_dir, workers: int | None = None,
        plots: bool = True) -> int:
    """Execute one experiment; returns the process exit status."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers if workers is not None else cfg["workers"]
    if "PIN_BUDGET" not in os.environ:
        os.environ["PIN_BUDGET"] = str(cfg["budget"])
    t0 = time.time()
    status, code = "ok", 0
    tables: list = []
    payload: dict = {}
    try:
        payload = _RUNNERS[cfg.experiment](cfg, workers, tables)
    except wc.BudgetError as e:
        status, code = f"budget-exceeded: {e}", 3
    except (cpsi.PsiTruncationError, DeBruijnError) as e:
        status, code = f"numerical-diagnostic: {e}", 4
    outputs = [t.write(out) for t in tables]
    if plots and code == 0 and payload:
        from . import plots as _plots
        figname = f"{cfg.experiment.replace('-', '_')}.png"
        _plots.render(cfg.experiment, payload, out / figname)
        outputs.append(figname)
    manifest = [
        f"experiment={cfg.experiment}",
        f"config_hash={cfg.hash()}",
        f"seed={cfg.seed}",
        f"workers={workers}",
        f"pinsim_version={__version__}",
        f"numpy_version={np.__version__}",
        f"scipy_version={scipy.__version__}",
        f"status={status}",
        f"exit_code={code}",
        f"outputs={','.join(outputs)}",
        f"wall_time_s={time.time() - t0:.3f}",
    ]
    (out / "manifest.txt").write_text("\n".join(manifest) + "\n")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pin", description="disordered pinning model experiments")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for exp in EXPERIMENTS:
        p = sub.add_parser(exp)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out", default="out")
        p.add_argument("--no-plots", action="store_true")
    args = parser.parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, experiment=args.experiment)
        if args.seed is not None:
            cfg.values["seed"] = args.seed
    except ConfigError as e:
        for err in e.errors:
            print(f"config error: {err}", file=sys.stderr)
        return 2
    return run(cfg, args.out, workers=args.workers, plots=not args.no_plots)


if __name__ == "__main__":
    sys.exit(main())
