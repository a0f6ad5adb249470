"""Exact partition functions of the disordered pinning model.

Everything is computed from the pinned dynamic programming pass

    zeta(a) = 1,
    S(m)    = sum_{k=a}^{m-1} zeta(k) K(m-k),      a < m <= b,
    zeta(m) = S(m) * exp(beta*omega_m - Lambda + h),

which runs in linear space with a per-row running log offset (rescaled when
values threaten overflow), so horizons with strongly positive h stay exact.
The constrained partition over (a, b) is S(b)/u(b-a); the free partition over
N is sum_k zeta(k) * Kbar(N-k).  The pass is batched over disorder replicas:
one BLAS matrix-vector product per lattice step services all replicas.

Site-weight convention: the constrained partition over (a, b) weights sites
a+1..b-1 only; the free partition weights sites 1..N (site N counted exactly
when it is a renewal point, through the pinned table).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .disorder import DisorderLaw, DisorderSample
from .renewal import RenewalLaw, intersection_law
from .rng import stream

__all__ = [
    "DP_SPAN_CAP",
    "WeakCouplingScale",
    "PartitionTable",
    "z_constrained",
    "z_free",
    "constrained_logZ",
    "constrained_logZ_all",
    "free_logZ",
    "free_logZ_at",
    "pinned_partition_table",
    "psi",
    "psi_c",
    "log_psi",
    "log_psi_c",
    "psi_profiles",
    "brute_force_constrained",
    "brute_force_free",
    "IdentityReport",
    "mean_partition_identity_check",
    "second_moment_check",
    "mean_constrained_exact_rademacher",
    "second_moment_exact_rademacher",
    "moment_sup_estimate",
]

# O(N^2) cost is accepted up to this span; beyond it the exact DP is refused
# rather than approximated.
DP_SPAN_CAP = 20_000

# rescale margin: between checks values can grow by exp(16 * max energy),
# so the threshold leaves ample headroom below the float64 overflow point
_RESCALE_THRESHOLD = 1e100
_CHECK_EVERY = 16


@dataclass(frozen=True)
class WeakCouplingScale:
    """Joint scaling beta_N = bh * L(N)/N^(a-1/2), h_N = hh * L(N)/N^a."""

    alpha: float
    N: int
    beta_hat: float
    h_hat: float
    beta_N: float
    h_N: float

    @classmethod
    def for_law(cls, law: RenewalLaw, beta_hat: float, h_hat: float, N: int):
        beta_N, h_N = law.weak_coupling(beta_hat, h_hat, N)
        return cls(alpha=law.alpha, N=N, beta_hat=beta_hat, h_hat=h_hat,
                   beta_N=beta_N, h_N=h_N)


def _as_matrix(omega) -> np.ndarray:
    if isinstance(omega, DisorderSample):
        omega = omega.omega
    omega = np.asarray(omega, dtype=float)
    return omega[None, :] if omega.ndim == 1 else omega


def _energy_factors(omega_mat: np.ndarray, beta: float, lam: float, h: float,
                    b: int) -> np.ndarray:
    """E[:, n] = exp(beta*omega_n - Lambda(beta) + h) for n = 1..b; col 0 is 1."""
    R = omega_mat.shape[0]
    if omega_mat.shape[1] < b:
        raise ValueError(f"disorder covers {omega_mat.shape[1]} sites, need {b}")
    E = np.empty((R, b + 1))
    E[:, 0] = 1.0
    np.exp(beta * omega_mat[:, :b] - lam + h, out=E[:, 1:])
    return E


class _PinnedPass:
    """One batched DP sweep over a window (a, b]; exposes scaled state."""

    def __init__(self, law: RenewalLaw, E: np.ndarray, a: int, b: int,
                 record_S: bool = False, record_zeta: bool = False):
        W = b - a
        if W < 0:
            raise ValueError("need a <= b")
        if W > DP_SPAN_CAP:
            raise ValueError(f"span {W} exceeds exact-DP cap {DP_SPAN_CAP}")
        if W > law.N_max:
            raise ValueError("span exceeds the law's table")
        R = E.shape[0]
        Z = np.zeros((R, W + 1))
        Z[:, 0] = 1.0
        off = np.zeros(R)
        Krev = law.K[1:W + 1][::-1].copy() if W else np.empty(0)
        log_S = np.full((R, W + 1), -np.inf) if record_S else None
        log_zeta = np.zeros((R, W + 1)) if record_zeta else None
        for m in range(1, W + 1):
            S = Z[:, :m] @ Krev[W - m:]
            if record_S:
                log_S[:, m] = np.log(S) + off
            Z[:, m] = S * E[:, a + m]
            if record_zeta:
                log_zeta[:, m] = np.log(Z[:, m]) + off
            if m % _CHECK_EVERY == 0 and Z[:, m].max() > _RESCALE_THRESHOLD:
                rowmax = Z[:, :m + 1].max(axis=1)
                Z[:, :m + 1] /= rowmax[:, None]
                off += np.log(rowmax)
        self.law = law
        self.a, self.b = a, b
        self.Z = Z
        self.off = off
        self.log_S = log_S
        self.log_zeta = log_zeta
        self._last_S = S if W else np.ones(R)

    def final_log_S(self) -> np.ndarray:
        return np.log(self._last_S) + self.off

    def free_log_at(self, n: int) -> np.ndarray:
        """log sum_k zeta(k) Kbar(n-k) for window-local n (a = 0 windows)."""
        vals = self.Z[:, :n + 1] @ self.law.Kbar[:n + 1][::-1].copy()
        return np.log(vals) + self.off


def constrained_logZ(law: RenewalLaw, omega, beta: float, lam: float, h: float,
                     a: int, b: int) -> np.ndarray:
    """log Z^c(a, b) per replica row of omega."""
    if a > b:
        raise ValueError("need a <= b")
    if a == b:
        return np.zeros(_as_matrix(omega).shape[0])
    E = _energy_factors(_as_matrix(omega), beta, lam, h, b)
    dp = _PinnedPass(law, E, a, b)
    return dp.final_log_S() - math.log(law.u[b - a])


def constrained_logZ_all(law: RenewalLaw, omega, beta: float, lam: float, h: float,
                         a: int, b: int) -> np.ndarray:
    """log Z^c(a, m) for every m in [a, b], shape (R, b-a+1)."""
    E = _energy_factors(_as_matrix(omega), beta, lam, h, b)
    dp = _PinnedPass(law, E, a, b, record_S=True)
    out = dp.log_S - np.log(law.u[:b - a + 1])[None, :]
    out[:, 0] = 0.0
    return out


def free_logZ(law: RenewalLaw, omega, beta: float, lam: float, h: float,
              N: int) -> np.ndarray:
    """log Z(N) per replica row; N = 0 gives 0 exactly."""
    if N == 0:
        return np.zeros(_as_matrix(omega).shape[0])
    E = _energy_factors(_as_matrix(omega), beta, lam, h, N)
    dp = _PinnedPass(law, E, 0, N)
    return dp.free_log_at(N)


def free_logZ_at(law: RenewalLaw, omega, beta: float, lam: float, h: float,
                 n_values) -> np.ndarray:
    """log Z(n) for each n in n_values from a single pass, shape (R, len)."""
    n_values = [int(n) for n in n_values]
    N = max(n_values)
    E = _energy_factors(_as_matrix(omega), beta, lam, h, N)
    dp = _PinnedPass(law, E, 0, N)
    return np.column_stack([dp.free_log_at(n) for n in n_values])


# -- public single-sample wrappers (spec operations) -------------------------

def z_constrained(law: RenewalLaw, omega, dlaw: DisorderLaw, beta: float,
                  h: float, a: int, b: int) -> float:
    """log Z^{omega,c}_{beta,h}(a, b) for one disorder sample."""
    lam = dlaw.log_mgf(beta)
    return float(constrained_logZ(law, omega, beta, lam, h, a, b)[0])


def z_free(law: RenewalLaw, omega, dlaw: DisorderLaw, beta: float,
           h: float, N: int) -> float:
    """log Z^omega_{beta,h}(N) for one disorder sample."""
    lam = dlaw.log_mgf(beta)
    return float(free_logZ(law, omega, beta, lam, h, N)[0])


@dataclass
class PartitionTable:
    """Pinned partition values log z(0..N) for one disorder sample."""

    N: int
    beta: float
    h: float
    log_z: np.ndarray
    law_label: str


def pinned_partition_table(law: RenewalLaw, omega, dlaw: DisorderLaw,
                           beta: float, h: float, N: int) -> PartitionTable:
    lam = dlaw.log_mgf(beta)
    E = _energy_factors(_as_matrix(omega), beta, lam, h, N)
    dp = _PinnedPass(law, E, 0, N, record_zeta=True)
    return PartitionTable(N=N, beta=beta, h=h, log_z=dp.log_zeta[0],
                          law_label=law.base_label)


# -- homogeneous Psi functions ------------------------------------------------

def log_psi(law: RenewalLaw, delta: float, N: int) -> float:
    """log of the homogeneous free partition Psi_delta(N)."""
    if N == 0:
        return 0.0
    om = np.zeros((1, N))
    return float(free_logZ(law, om, 0.0, 0.0, delta, N)[0])


def log_psi_c(law: RenewalLaw, delta: float, N: int) -> float:
    """log of the homogeneous constrained partition Psi^c_delta(N)."""
    if N == 0:
        return 0.0
    om = np.zeros((1, N))
    return float(constrained_logZ(law, om, 0.0, 0.0, delta, 0, N)[0])


def psi(law: RenewalLaw, delta: float, N: int) -> float:
    """Homogeneous free partition Psi_delta(N): beta = 0, h = delta.

    Overflows to inf past log-value ~709; use log_psi for long horizons.
    """
    lv = log_psi(law, delta, N)
    return math.exp(lv) if lv < 700 else math.inf


def psi_c(law: RenewalLaw, delta: float, N: int) -> float:
    """Homogeneous constrained partition Psi^c_delta(N)."""
    lv = log_psi_c(law, delta, N)
    return math.exp(lv) if lv < 700 else math.inf


def psi_profiles(law: RenewalLaw, delta: float, n_values) -> tuple[np.ndarray, np.ndarray]:
    """(Psi_delta(n), Psi^c_delta(n)) for each n in n_values, one DP pass."""
    n_values = [int(n) for n in n_values]
    N = max(n_values)
    om = np.zeros((1, max(N, 1)))
    E = _energy_factors(om, 0.0, 0.0, delta, N)
    dp = _PinnedPass(law, E, 0, N, record_S=True)
    con = np.exp(dp.log_S[0] - np.log(law.u[:N + 1]))
    con[0] = 1.0
    free = np.array([np.exp(dp.free_log_at(n)[0]) for n in n_values])
    return free, con[n_values]


# -- brute-force oracles -------------------------------------------------------

_BRUTE_SPAN_CAP = 22


def _site_weights(omega, dlaw: DisorderLaw, beta: float, h: float, b: int) -> np.ndarray:
    om = _as_matrix(omega)[0]
    lam = dlaw.log_mgf(beta)
    w = np.ones(b + 1)
    w[1:] = np.exp(beta * om[:b] - lam + h)
    return w


def brute_force_constrained(law: RenewalLaw, omega, dlaw: DisorderLaw,
                            beta: float, h: float, a: int, b: int) -> float:
    """Z^c(a, b) by explicit enumeration of renewal configurations.

    Sums prod K(gaps)/u(b-a) times the Boltzmann factor over all subsets of
    {a+1..b-1}; independent of the DP path.
    """
    span = b - a
    if span > _BRUTE_SPAN_CAP:
        raise ValueError(f"span {span} exceeds enumeration cap {_BRUTE_SPAN_CAP}")
    if span == 0:
        return 1.0
    wts = _site_weights(omega, dlaw, beta, h, b)
    K = law.K
    interior = range(a + 1, b)
    terms = []
    for k in range(0, span):
        for sub in combinations(interior, k):
            prev, val = a, 1.0
            for p in sub:
                val *= K[p - prev] * wts[p]
                prev = p
            terms.append(val * K[b - prev])
    return math.fsum(terms) / law.u[span]


def brute_force_free(law: RenewalLaw, omega, dlaw: DisorderLaw,
                     beta: float, h: float, N: int) -> float:
    """Z(N) by explicit enumeration over subsets of {1..N}."""
    if N > _BRUTE_SPAN_CAP:
        raise ValueError(f"N {N} exceeds enumeration cap {_BRUTE_SPAN_CAP}")
    wts = _site_weights(omega, dlaw, beta, h, N)
    K, Kbar = law.K, law.Kbar
    terms = []
    for k in range(0, N + 1):
        for sub in combinations(range(1, N + 1), k):
            prev, val = 0, 1.0
            for p in sub:
                val *= K[p - prev] * wts[p]
                prev = p
            terms.append(val * Kbar[N - prev])
    return math.fsum(terms)


# -- expectation identities ------------------------------------------------------

@dataclass
class IdentityReport:
    mc_estimate: float
    exact_value: float
    stderr: float
    z_score: float
    replicas: int
    mode: str


def _identity_report(values: np.ndarray, exact: float, mode: str) -> IdentityReport:
    R = values.size
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(R)) if R > 1 else 0.0
    z = (mean - exact) / stderr if stderr > 0 else (0.0 if mean == exact else np.inf)
    return IdentityReport(mc_estimate=mean, exact_value=exact, stderr=stderr,
                          z_score=float(z), replicas=R, mode=mode)


def _disorder_matrix(dlaw: DisorderLaw, replicas: int, N: int, seed: int) -> np.ndarray:
    out = np.empty((replicas, N))
    for r in range(replicas):
        out[r] = dlaw.draw(N, stream(seed, "replica", r))
    return out


def mean_partition_identity_check(law: RenewalLaw, dlaw: DisorderLaw,
                                  beta_hat: float, h_hat: float, N: int, t: float,
                                  replicas: int, seed: int) -> IdentityReport:
    """Monte Carlo E[Z^c_{beta_N,h_N}(0, Nt)] against the exact Psi^c_{h_N}(Nt)."""
    M = int(round(N * t))
    if abs(N * t - M) > 1e-9:
        raise ValueError("N*t must be an integer")
    sc = WeakCouplingScale.for_law(law, beta_hat, h_hat, N)
    lam = dlaw.log_mgf(sc.beta_N)
    om = _disorder_matrix(dlaw, replicas, M, seed)
    vals = np.exp(constrained_logZ(law, om, sc.beta_N, lam, sc.h_N, 0, M))
    exact = psi_c(law, sc.h_N, M)
    return _identity_report(vals, exact, mode="mc")


def second_moment_check(law: RenewalLaw, dlaw: DisorderLaw, beta_hat: float,
                        N: int, t: float, replicas: int, seed: int) -> IdentityReport:
    """E[(Z^c_{beta_N,0})^2] against Psi^c on the intersection renewal.

    The exact side evaluates Psi^c_{Lambda(2b)-2Lambda(b)}(Nt) over
    tau ∩ tau'.
    """
    M = int(round(N * t))
    if abs(N * t - M) > 1e-9:
        raise ValueError("N*t must be an integer")
    sc = WeakCouplingScale.for_law(law, beta_hat, 0.0, N)
    lam = dlaw.log_mgf(sc.beta_N)
    om = _disorder_matrix(dlaw, replicas, M, seed)
    vals = np.exp(2.0 * constrained_logZ(law, om, sc.beta_N, lam, 0.0, 0, M))
    inter = intersection_law(law, M)
    delta = dlaw.log_mgf(2.0 * sc.beta_N) - 2.0 * lam
    exact = psi_c(inter, delta, M)
    return _identity_report(vals, exact, mode="mc")


def _rademacher_patterns(m: int) -> np.ndarray:
    """All sign patterns over m sites, shape (2^m, m)."""
    if m > 22:
        raise ValueError("pattern enumeration too large")
    idx = np.arange(2**m, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(m)[None, :]) & 1
    return bits * 2.0 - 1.0


def mean_constrained_exact_rademacher(law: RenewalLaw, beta: float, h: float,
                                      M: int) -> tuple[float, float]:
    """(exact disorder mean of Z^c(0,M), exact Psi^c_h(M)) for rademacher charges.

    Full enumeration over the 2^(M-1) sign patterns on the interior sites.
    """
    lam = math.log(math.cosh(beta))
    pats = _rademacher_patterns(M - 1)
    om = np.concatenate([pats, np.zeros((pats.shape[0], 1))], axis=1)
    vals = np.exp(constrained_logZ(law, om, beta, lam, h, 0, M))
    return float(vals.mean()), psi_c(law, h, M)


def second_moment_exact_rademacher(law: RenewalLaw, beta: float, M: int
                                   ) -> tuple[float, float]:
    """(exact E[(Z^c)^2], exact Psi^c over the intersection renewal)."""
    lam = math.log(math.cosh(beta))
    pats = _rademacher_patterns(M - 1)
    om = np.concatenate([pats, np.zeros((pats.shape[0], 1))], axis=1)
    vals = np.exp(2.0 * constrained_logZ(law, om, beta, lam, 0.0, 0, M))
    inter = intersection_law(law, M)
    delta = math.log(math.cosh(2 * beta)) - 2 * lam
    return float(vals.mean()), psi_c(inter, delta, M)


def moment_sup_estimate(law: RenewalLaw, dlaw: DisorderLaw, beta_hat: float,
                        h_hat: float, N: int, p: float, replicas: int, seed: int,
                        s_points: int = 8) -> float:
    """Mean over replicas of sup over a (s,t)-grid of Z^c(Ns, Nt)^p.

    Grid: s on multiples of N/s_points, all t >= s on the lattice.
    """
    sc = WeakCouplingScale.for_law(law, beta_hat, h_hat, N)
    lam = dlaw.log_mgf(sc.beta_N)
    om = _disorder_matrix(dlaw, replicas, N, seed)
    sup = np.full(replicas, -np.inf)
    for i in range(s_points):
        a = (N * i) // s_points
        logZ = constrained_logZ_all(law, om, sc.beta_N, lam, sc.h_N, a, N)
        np.maximum(sup, (p * logZ).max(axis=1), out=sup)
    return float(np.exp(sup).mean())
