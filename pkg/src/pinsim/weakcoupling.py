"""Weak-coupling ensembles: distributions of Z_{beta_N,h_N}(Nt).

Replica seeds derive from (seed, replica index) only, never from the
parameter point, so ensembles at different (beta_hat, h_hat, c) share
disorder: pathwise monotonicity checks and the scaling-relation comparison
all run on common random numbers, and results are identical for any worker
count or replica chunking.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .disorder import DisorderLaw
from .renewal import RenewalLaw
from .rng import stream
from . import partition as pt

__all__ = ["BudgetError", "EnsembleEstimate", "ensemble", "common_h_sweep",
           "ScalingReport", "scaling_check"]

_QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


class BudgetError(RuntimeError):
    """Requested run exceeds the configured cost budget."""


def _budget() -> float:
    return float(os.environ.get("PIN_BUDGET", 5e12))


def _check_budget(N: int, M: int, replicas: int, n_points: int = 1):
    cost = float(M) * M * replicas * n_points
    if cost > _budget():
        raise BudgetError(f"cost {cost:.2e} exceeds budget {_budget():.2e} "
                          "(set PIN_BUDGET to raise)")


@dataclass
class EnsembleEstimate:
    alpha: float
    beta_hat: float
    h_hat: float
    t: float
    N: int
    replicas: int
    mean_logZ_free: float
    mean_logZ_constr: float
    stderr_logZ_free: float
    stderr_logZ_constr: float
    quantiles_constr: np.ndarray
    mean_Z_constr: float
    stderr_Z_constr: float
    seed: int
    logZ_free: np.ndarray | None = field(default=None, repr=False)
    logZ_constr: np.ndarray | None = field(default=None, repr=False)


def _replica_disorder(dlaw: DisorderLaw, seed: int, r0: int, r1: int, M: int) -> np.ndarray:
    out = np.empty((r1 - r0, M))
    for i, r in enumerate(range(r0, r1)):
        out[i] = dlaw.draw(M, stream(seed, "replica", r))
    return out


def _chunks(replicas: int, M: int) -> list:
    per = max(1, int(3e7) // max(M, 1))
    return [(a, min(a + per, replicas)) for a in range(0, replicas, per)]


def ensemble(law: RenewalLaw, dlaw: DisorderLaw, beta_hat: float, h_hat: float,
             t: float, N: int, replicas: int, seed: int,
             keep_samples: bool = False) -> EnsembleEstimate:
    """Per-replica free/constrained log partition values at the scaled point."""
    M = int(round(N * t))
    if abs(N * t - M) > 1e-9:
        raise ValueError("N*t must be an integer")
    if replicas < 2:
        raise ValueError("need at least 2 replicas")
    _check_budget(N, M, replicas)
    beta_N, h_N = law.weak_coupling(beta_hat, h_hat, N)
    lam = dlaw.log_mgf(beta_N)
    lzc = np.empty(replicas)
    lzf = np.empty(replicas)
    for r0, r1 in _chunks(replicas, M):
        om = _replica_disorder(dlaw, seed, r0, r1, M)
        lzc[r0:r1] = pt.constrained_logZ(law, om, beta_N, lam, h_N, 0, M)
        lzf[r0:r1] = pt.free_logZ(law, om, beta_N, lam, h_N, M)
    zc = np.exp(lzc)
    sq = math.sqrt(replicas)
    return EnsembleEstimate(
        alpha=law.alpha, beta_hat=beta_hat, h_hat=h_hat, t=t, N=N,
        replicas=replicas,
        mean_logZ_free=float(lzf.mean()), mean_logZ_constr=float(lzc.mean()),
        stderr_logZ_free=float(lzf.std(ddof=1) / sq),
        stderr_logZ_constr=float(lzc.std(ddof=1) / sq),
        quantiles_constr=np.quantile(lzc, _QUANTILES),
        mean_Z_constr=float(zc.mean()), stderr_Z_constr=float(zc.std(ddof=1) / sq),
        seed=seed,
        logZ_free=lzf if keep_samples else None,
        logZ_constr=lzc if keep_samples else None)


def common_h_sweep(law: RenewalLaw, dlaw: DisorderLaw, beta_hat: float,
                   h_hat_list, t: float, N: int, replicas: int, seed: int
                   ) -> tuple[list[EnsembleEstimate], np.ndarray, np.ndarray]:
    """Ensembles over an h_hat grid on one shared disorder sample.

    Returns (estimates, pathwise, pathwise_free) where pathwise[r, i] is
    replica r's constrained log partition value at h_hat_list[i]: rows are
    monotone and log-convex in h_hat by construction of the model.
    """
    if len(h_hat_list) == 0:
        raise ValueError("h_hat_list must be nonempty")
    M = int(round(N * t))
    if abs(N * t - M) > 1e-9:
        raise ValueError("N*t must be an integer")
    _check_budget(N, M, replicas, n_points=len(h_hat_list))
    beta_N, _ = law.weak_coupling(beta_hat, 0.0, N)
    lam = dlaw.log_mgf(beta_N)
    h_hats = [float(h) for h in h_hat_list]
    pathwise = np.empty((replicas, len(h_hats)))
    lzf = np.empty((replicas, len(h_hats)))
    for r0, r1 in _chunks(replicas, M):
        om = _replica_disorder(dlaw, seed, r0, r1, M)
        for i, hh in enumerate(h_hats):
            h_N = law.weak_coupling(beta_hat, hh, N)[1]
            pathwise[r0:r1, i] = pt.constrained_logZ(law, om, beta_N, lam, h_N, 0, M)
            lzf[r0:r1, i] = pt.free_logZ(law, om, beta_N, lam, h_N, M)
    out = []
    sq = math.sqrt(replicas)
    for i, hh in enumerate(h_hats):
        lzc = pathwise[:, i]
        zc = np.exp(lzc)
        out.append(EnsembleEstimate(
            alpha=law.alpha, beta_hat=beta_hat, h_hat=hh, t=t, N=N,
            replicas=replicas,
            mean_logZ_free=float(lzf[:, i].mean()),
            mean_logZ_constr=float(lzc.mean()),
            stderr_logZ_free=float(lzf[:, i].std(ddof=1) / sq),
            stderr_logZ_constr=float(lzc.std(ddof=1) / sq),
            quantiles_constr=np.quantile(lzc, _QUANTILES),
            mean_Z_constr=float(zc.mean()),
            stderr_Z_constr=float(zc.std(ddof=1) / sq),
            seed=seed))
    return out, pathwise, lzf


@dataclass
class ScalingReport:
    c: float
    N: int
    ks_distance: float
    mean_dev: float
    var_ratio: float
    point_a: tuple
    point_b: tuple


def scaling_check(law: RenewalLaw, dlaw: DisorderLaw, beta_hat: float,
                  h_hat: float, t: float, c: float, N: int, replicas: int,
                  seed: int) -> ScalingReport:
    """Distributional comparison of Z at (bh, hh, c*t) against
    (c^(a-1/2) bh, c^a hh, t) on matched lattices of N*c*t sites."""
    from scipy.stats import ks_2samp

    M = N * c * t
    if abs(M - round(M)) > 1e-9 or abs(N * t - round(N * t)) > 1e-9:
        raise ValueError("both N*t and N*c*t must be integers")
    a = law.alpha
    ea = ensemble(law, dlaw, beta_hat, h_hat, c * t, N, replicas, seed,
                  keep_samples=True)
    Nb = int(round(N * c))
    eb = ensemble(law, dlaw, c ** (a - 0.5) * beta_hat, c**a * h_hat, t, Nb,
                  replicas, seed, keep_samples=True)
    xa, xb = ea.logZ_constr, eb.logZ_constr
    if np.array_equal(xa, xb):
        ks = 0.0
    else:
        import warnings
        with warnings.catch_warnings():
            # only the statistic is used; scipy warns when the exact
            # p-value computation falls back to the asymptotic one
            warnings.simplefilter("ignore", RuntimeWarning)
            ks = float(ks_2samp(xa, xb).statistic)
    return ScalingReport(
        c=c, N=N, ks_distance=ks,
        mean_dev=float(abs(xa.mean() - xb.mean())),
        var_ratio=float(xa.var(ddof=1) / max(xb.var(ddof=1), 1e-300)),
        point_a=(beta_hat, h_hat, c * t, N),
        point_b=(c ** (a - 0.5) * beta_hat, c**a * h_hat, t, Nb))
