"""Coarse-grained decomposition and alpha-stable regenerative-set sampling.

A point set in [0, inf) is summarized per unit block B_k = [k-1, k) by the
index J_k of each visited block and the first/last visited points s_k, t_k
inside it; m_t counts visited blocks up to t.  The alpha-stable regenerative
set is sampled exactly at this resolution: from a point x in block [n-1, n),
the last visited point of the block is g = x + (n-x) * Beta(alpha, 1-alpha)
and the next point beyond is d = g + (n-g) * U^(-1/alpha) (Pareto), after
which the set starts afresh from d.

The block-decomposition identity writes the free partition function as a sum
over coarse-grained configurations of exact renewal weights times constrained
partition values.  The enumeration check here is exact: it also carries the
site energies at each block's entry and exit points and at the horizon,
which the asymptotic form of the identity drops as lower order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .disorder import DisorderLaw
from .renewal import RenewalLaw, PointSet
from . import partition as pt

__all__ = [
    "CoarseGrain",
    "RegenSample",
    "decompose",
    "sample_regenerative_cg",
    "sample_g1",
    "sample_after_t1",
    "beta_cdf_from_glaw",
    "cg_hamiltonian",
    "CgIdentityReport",
    "verify_cg_identity",
    "LemmaTailReport",
    "lemma_tail_estimates",
]


@dataclass
class CoarseGrain:
    """Visited-block record: arrays J (int), s, t, plus the horizon count."""

    J: np.ndarray
    s: np.ndarray
    t: np.ndarray
    horizon: float

    @property
    def m_t(self) -> int:
        return int(np.count_nonzero(self.J <= self.horizon))

    def pairs(self):
        return list(zip(self.s, self.t))


def decompose(points, t: float) -> CoarseGrain:
    """Exact coarse-grained decomposition of the points below the horizon t."""
    x = points.times if isinstance(points, PointSet) else np.asarray(points, dtype=float)
    x = x[x < t]
    if x.size == 0:
        return CoarseGrain(J=np.empty(0, dtype=np.int64), s=np.empty(0),
                           t=np.empty(0), horizon=t)
    blocks = np.floor(x).astype(np.int64) + 1
    change = np.flatnonzero(np.diff(blocks)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change - 1, [x.size - 1]])
    return CoarseGrain(J=blocks[starts], s=x[starts], t=x[ends], horizon=t)


@dataclass
class RegenSample:
    alpha: float
    t_max: float
    cg: CoarseGrain


def sample_regenerative_cg(alpha: float, t_max: float,
                           rng: np.random.Generator, start: float = 0.0) -> RegenSample:
    """Coarse-grained skeleton (J_k, s_k, t_k) of the alpha-stable set."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    J, S, T = [], [], []
    x = float(start)
    while True:
        n = math.floor(x) + 1
        if n > t_max:
            break
        g = x + (n - x) * rng.beta(alpha, 1.0 - alpha)
        J.append(n)
        S.append(x)
        T.append(g)
        u = 1.0 - rng.random()  # (0, 1]
        x = g + (n - g) * u ** (-1.0 / alpha)
    cg = CoarseGrain(J=np.asarray(J, dtype=np.int64), s=np.asarray(S),
                     t=np.asarray(T), horizon=float(t_max))
    return RegenSample(alpha=alpha, t_max=float(t_max), cg=cg)


def sample_g1(alpha: float, n_samples: int, rng: np.random.Generator,
              start: float = 0.0) -> np.ndarray:
    """Last visited point of block [0,1) for sets started at x in [0,1)."""
    return start + (1.0 - start) * rng.beta(alpha, 1.0 - alpha, size=n_samples)


def sample_after_t1(alpha: float, y: float, n_samples: int,
                    rng: np.random.Generator):
    """(s2, J2, t2) given the first block's last point t1 = y, from the
    explicit conditional laws: s2 is Pareto beyond block 1, then t2 is a
    Beta last-visit point within s2's block."""
    u = 1.0 - rng.random(n_samples)
    s2 = y + (1.0 - y) * u ** (-1.0 / alpha)
    J2 = np.floor(s2).astype(np.int64) + 1
    t2 = s2 + (J2 - s2) * rng.beta(alpha, 1.0 - alpha, size=n_samples)
    return s2, J2, t2


def beta_cdf_from_glaw(alpha: float, x_grid) -> np.ndarray:
    """CDF of the g_1 marginal by quadrature of its density
    u^(alpha-1) (1-u)^(-alpha) * C_alpha/alpha; independent of rng.beta."""
    from scipy.integrate import quad
    c = math.sin(alpha * math.pi) / math.pi  # C_alpha / alpha
    dens = lambda u: c * u ** (alpha - 1.0) * (1.0 - u) ** (-alpha)
    out = []
    prev_x, acc = 0.0, 0.0
    for x in np.asarray(x_grid, dtype=float):  # grid must be increasing
        hi = min(float(x), 1.0 - 1e-12)
        val, _ = quad(dens, prev_x, hi, limit=200)
        acc += val
        out.append(acc)
        prev_x = hi
    return np.asarray(out)


def cg_hamiltonian(cg: CoarseGrain, zc_eval) -> float:
    """Sum of log constrained partition values over the visited blocks."""
    total = 0.0
    for k in range(cg.m_t):
        total += zc_eval(cg.s[k], cg.t[k])
    return total


@dataclass
class CgIdentityReport:
    N: int
    t: int
    beta: float
    h: float
    log_z_free: float
    log_rhs: float
    rel_dev: float
    rel_dev_no_boundary: float
    n_signatures: int


def _msb_positions(masks: np.ndarray) -> np.ndarray:
    """Most significant set-bit position per mask (-1 for zero)."""
    out = np.full(masks.shape, -1, dtype=np.int64)
    nz = masks > 0
    m, e = np.frexp(masks[nz].astype(np.float64))
    out[nz] = e - 1
    return out


def _lsb_positions(masks: np.ndarray) -> np.ndarray:
    low = masks & (-masks)
    return _msb_positions(low)


def verify_cg_identity(law: RenewalLaw, omega, dlaw: DisorderLaw, beta: float,
                       h: float, N: int, t: int) -> CgIdentityReport:
    """Exact check of the block-decomposition identity at small size.

    Enumerates all subsets of lattice points on {1..Nt} (each subset is one
    renewal configuration, with exact probability prod K(gaps) * Kbar(rest)),
    groups them by coarse-grained signature, and sums signature probability
    times the product of constrained partition values and the block-boundary
    site weights.  The result must equal the free partition function.
    rel_dev_no_boundary reports the same sum without the boundary and
    horizon-edge weights: that is the asymptotic form, not an identity.
    """
    M = N * t
    if M > 24:
        raise ValueError("enumeration cap N*t <= 24 exceeded")
    om = pt._as_matrix(omega)[0]
    lam = dlaw.log_mgf(beta)
    wts = np.ones(M + 1)
    wts[1:] = np.exp(beta * om[:M] - lam + h)

    # path probability factor: product of K over gaps of {0} U bits(mask),
    # built per msb level so every read hits an already-computed entry
    f = np.empty(1 << M)
    f[0] = 1.0
    for q in range(M):
        m_level = np.arange(1 << q, 1 << (q + 1), dtype=np.int64)
        rem = m_level - (1 << q)
        gap = np.where(rem > 0, q - _msb_positions(rem), q + 1)
        f[m_level] = f[rem] * law.K[gap]

    code_base = (N + 1) * (N + 1) + 1
    sig_prob: dict = {}
    sig_rep: dict = {}
    chunk = 1 << min(M, 20)
    for lo in range(0, 1 << M, chunk):
        masks = np.arange(lo, min(lo + chunk, 1 << M), dtype=np.int64)
        last = _msb_positions(masks)                     # site = last + 1
        prob = f[lo:lo + masks.size] * law.Kbar[M - 1 - last]
        keys = np.zeros(masks.size, dtype=np.int64)
        for j in range(1, t + 1):
            if j == 1:
                sub = masks & ((1 << (N - 1)) - 1)       # sites 1..N-1
                local_f = np.zeros(masks.size, dtype=np.int64)  # s1 = 0
                local_l = _msb_positions(sub) + 1
                code = local_f * (N + 1) + local_l
            else:
                lo_site = (j - 1) * N                    # sites lo..lo+N-1
                sub = (masks >> (lo_site - 1)) & ((1 << N) - 1)
                local_f = _lsb_positions(sub)
                local_l = _msb_positions(sub)
                code = np.where(sub > 0, local_f * (N + 1) + local_l,
                                code_base - 1)
            keys = keys * code_base + code
        keys = keys * 2 + ((masks >> (M - 1)) & 1)       # horizon site M flag
        uniq, idx, inv = np.unique(keys, return_index=True, return_inverse=True)
        part = np.bincount(inv, weights=prob, minlength=uniq.size)
        for key, rep_mask, p_sum in zip(uniq, masks[idx], part):
            sig_prob[int(key)] = sig_prob.get(int(key), 0.0) + float(p_sum)
            sig_rep.setdefault(int(key), int(rep_mask))

    zc_cache: dict = {}

    def zc(a, b):
        if (a, b) not in zc_cache:
            zc_cache[(a, b)] = math.exp(pt.constrained_logZ(
                law, om[None, :], beta, lam, h, a, b)[0])
        return zc_cache[(a, b)]

    def blocks_of(mask: int):
        out = []
        for j in range(1, t + 1):
            if j == 1:
                sub = mask & ((1 << (N - 1)) - 1)
                a = 0
                b = sub.bit_length()                     # site of top bit, 0 if none
            else:
                lo_site = (j - 1) * N
                sub = (mask >> (lo_site - 1)) & ((1 << N) - 1)
                if sub == 0:
                    continue
                a = lo_site + ((sub & -sub).bit_length() - 1)
                b = lo_site + (sub.bit_length() - 1)
            out.append((a, b))
        return out

    total = 0.0
    total_plain = 0.0
    for key, p_sum in sig_prob.items():
        mask = sig_rep[key]
        w = 1.0
        w_plain = 1.0
        for a, b in blocks_of(mask):
            zc_val = zc(a, b)
            w_plain *= zc_val
            w *= zc_val
            if a > 0:
                w *= wts[a]
            if b > a:
                w *= wts[b]
        if (mask >> (M - 1)) & 1:
            w *= wts[M]
        total += p_sum * w
        total_plain += p_sum * w_plain
    lhs = float(pt.free_logZ(law, om[None, :], beta, lam, h, M)[0])
    zfree = math.exp(lhs)
    return CgIdentityReport(
        N=N, t=t, beta=beta, h=h, log_z_free=lhs, log_rhs=math.log(total),
        rel_dev=abs(total - zfree) / zfree,
        rel_dev_no_boundary=abs(total_plain - zfree) / zfree,
        n_signatures=len(sig_prob))


@dataclass
class LemmaTailReport:
    alpha: float
    gammas: np.ndarray
    p_near_edge: np.ndarray      # max over y of P(t2 in [J2-g, J2] | t1=y)
    p_short_visit: np.ndarray    # max over y of P(t2-s2 <= g | t1=y)
    slope_near_edge: float       # expected 1 - alpha
    slope_short_visit: float     # expected alpha
    ci_near_edge: tuple
    ci_short_visit: tuple
    n_samples: int
    y_grid: np.ndarray


def _loglog_slope(g, p) -> tuple[float, float]:
    lx, ly = np.log(g), np.log(p)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    dof = max(1, lx.size - 2)
    se = math.sqrt(float(resid @ resid) / dof / float(((lx - lx.mean()) ** 2).sum()))
    return float(coef[0]), se


def lemma_tail_estimates(alpha: float, gamma_list, n_samples: int, seed_rng,
                         y_grid=(0.1, 0.3, 0.5, 0.7, 0.9)) -> LemmaTailReport:
    """Monte Carlo tail probabilities of the second visited block.

    Conditioning on t1 = y uses the explicit conditional laws (the joint
    density is independent of the start point x), so the events
    {t2 within gamma of its block's right edge} and {t2 - s2 <= gamma}
    can be sampled directly; their log-log slopes in gamma are compared
    to 1-alpha and alpha.
    """
    gammas = np.asarray(sorted(gamma_list), dtype=float)
    if np.any(gammas <= 0) or np.any(gammas > 0.25):
        raise ValueError("gamma values must lie in (0, 1/4]")
    p_edge = np.zeros((len(y_grid), gammas.size))
    p_short = np.zeros((len(y_grid), gammas.size))
    for iy, y in enumerate(y_grid):
        s2, J2, t2 = sample_after_t1(alpha, float(y), n_samples, seed_rng)
        edge_dist = J2 - t2
        visit_len = t2 - s2
        for ig, g in enumerate(gammas):
            p_edge[iy, ig] = np.mean(edge_dist <= g)
            p_short[iy, ig] = np.mean(visit_len <= g)
    pe = p_edge.max(axis=0)
    ps = p_short.max(axis=0)
    se_slope, se_err = _loglog_slope(gammas, pe)
    ss_slope, ss_err = _loglog_slope(gammas, ps)
    return LemmaTailReport(
        alpha=alpha, gammas=gammas, p_near_edge=pe, p_short_visit=ps,
        slope_near_edge=se_slope, slope_short_visit=ss_slope,
        ci_near_edge=(se_slope - 2 * se_err, se_slope + 2 * se_err),
        ci_short_visit=(ss_slope - 2 * ss_err, ss_slope + 2 * ss_err),
        n_samples=n_samples, y_grid=np.asarray(y_grid, dtype=float))
