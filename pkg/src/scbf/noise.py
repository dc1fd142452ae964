"""Trace-class Wiener noise, compound-Poisson jumps, and coefficient families.

The Wiener process has per-mode variance weights mu_k = c |k|^{-2s} (trace
class for 2s > d on the full lattice, finite here by truncation).  Jumps
form a compound Poisson stream with finite total intensity, marks drawn
from a closed-moment law, and a separable state-to-jump map
gamma(t, u, z) = G(u) h(z) g with a fixed unit direction field g, so the
compensator and every quadratic-variation rate have closed forms.
"""

from dataclasses import dataclass, field

import numpy as np

from .basis import SpectralField


@dataclass
class QSpectrum:
    """Covariance weights mu_k = c |k|^{-2s} per (wavevector, polarization)."""

    c: float = 0.1
    s: float = 2.0

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError(f"q_c must be > 0, got {self.c}")

    def mode_weights(self, basis):
        """(M,) weights per wavevector row (each polarization carries one)."""
        return self.c * basis.ksq.astype(float) ** (-self.s)

    def trace(self, basis):
        """Tr Q over the retained modes: sum of mu_k over (k, p)."""
        return float(np.sum(self.mode_weights(basis))) * basis.n_polarizations


def sample_wiener_increment(q, basis, dt, rng):
    """Hermitian-symmetric increment, variance mu_k dt per real dof.

    Each conjugate pair (k, -k) carries two real degrees of freedom; with
    both drawn N(0, mu_k dt) the H-energy rate is E||dW||^2/dt = Tr Q.
    """
    M, P = basis.n_wavevectors, basis.n_polarizations
    coeffs = np.zeros((M, P), dtype=np.complex128)
    if dt == 0.0 or M == 0:
        return SpectralField(basis, coeffs)
    half_rows = np.flatnonzero(basis.half)
    sd = np.sqrt(q.mode_weights(basis)[half_rows] * dt)
    draws = rng.standard_normal((half_rows.size, P, 2)) * sd[:, None, None]
    coeffs[half_rows] = (draws[..., 0] - 1j * draws[..., 1]) / np.sqrt(2.0)
    coeffs[basis.conj_idx[half_rows]] = np.conj(coeffs[half_rows])
    return SpectralField(basis, coeffs)


# -- marks and jump timing ----------------------------------------------------


@dataclass
class UniformMarks:
    """Marks uniform on [lo, hi]; h(z) = z."""

    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("uniform mark law needs hi > lo")

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size)

    def moment(self, p):
        a, b = self.lo, self.hi
        return (b ** (p + 1) - a ** (p + 1)) / ((p + 1) * (b - a))


@dataclass
class GaussianMarks:
    """Marks N(mean, std^2); h(z) = z."""

    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if self.std <= 0:
            raise ValueError("gaussian mark law needs std > 0")

    def sample(self, rng, size):
        return rng.normal(self.mean, self.std, size)

    def moment(self, p):
        m, s = self.mean, self.std
        if p == 1:
            return m
        if p == 2:
            return m * m + s * s
        if p == 4:
            return m ** 4 + 6 * m * m * s * s + 3 * s ** 4
        raise ValueError(f"moment order {p} not implemented")


@dataclass
class JumpSpec:
    """Finite-intensity jump stream with closed-form mark moments."""

    intensity: float = 0.0  # events per unit time, Lambda = lambda(Z)
    marks: object = field(default_factory=UniformMarks)

    def __post_init__(self):
        if self.intensity < 0:
            raise ValueError(f"jump intensity must be >= 0, got {self.intensity}")

    @property
    def m1(self):
        """integral of h(z) against the intensity measure."""
        return self.intensity * self.marks.moment(1)

    @property
    def m2(self):
        return self.intensity * self.marks.moment(2)

    @property
    def m4(self):
        return self.intensity * self.marks.moment(4)


def sample_jumps(spec, T, rng_times, rng_marks):
    """Jump times (sorted, uniform on [0, T]) and i.i.d. marks."""
    if T <= 0:
        raise ValueError(f"horizon must be > 0, got {T}")
    if spec.intensity == 0.0:
        return np.empty(0), np.empty(0)
    count = int(rng_times.poisson(spec.intensity * T))
    times = np.sort(rng_times.uniform(0.0, T, count))
    marks = spec.marks.sample(rng_marks, count)
    return times, marks


# -- coefficient families -----------------------------------------------------


@dataclass
class SigmaFamily:
    """Per-mode Wiener amplitude a_k = a0 |k|^{-decay}, optionally modulated.

    kind "additive" ignores the state; "bounded-multiplicative" scales by
    1 + rho ||u||_H / (1 + ||u||_H), which is bounded and Lipschitz in u.
    """

    kind: str = "additive"
    a0: float = 1.0
    decay: float = 0.0
    rho: float = 0.0

    def __post_init__(self):
        if self.kind not in ("additive", "bounded-multiplicative"):
            raise ValueError(f"unknown sigma kind {self.kind!r}")
        if self.rho < 0:
            raise ValueError(f"sigma_rho must be >= 0, got {self.rho}")

    def amplitudes(self, basis):
        return self.a0 * basis.ksq.astype(float) ** (-self.decay / 2.0)

    def modulation(self, u_norm):
        if self.kind == "additive":
            return 1.0
        return 1.0 + self.rho * u_norm / (1.0 + u_norm)

    def apply(self, u_norm, dW):
        """sigma(t, u) dW as spectral coefficients."""
        a = self.amplitudes(dW.basis) * self.modulation(u_norm)
        return SpectralField(dW.basis, a[:, None] * dW.coeffs)

    def base_lq(self, q, basis):
        """sum over modes of mu_k a_k^2 (the additive L_Q norm squared)."""
        return float(np.sum(q.mode_weights(basis) * self.amplitudes(basis) ** 2)) \
            * basis.n_polarizations

    def lq_norm_sq(self, q, basis, u_norm):
        return self.base_lq(q, basis) * self.modulation(u_norm) ** 2

    def growth_constant(self, q, basis):
        return self.base_lq(q, basis) * (1.0 + self.rho) ** 2

    def lipschitz_constant(self, q, basis):
        return self.base_lq(q, basis) * self.rho ** 2


@dataclass
class GammaFamily:
    """Separable jump coefficient G(u) h(z) g with unit direction ||g||_H = 1."""

    c0: float = 1.0
    c1: float = 0.0
    direction: SpectralField = None
    spec: JumpSpec = field(default_factory=JumpSpec)

    def __post_init__(self):
        if self.c0 < 0 or self.c1 < 0:
            raise ValueError("gamma coefficients c0, c1 must be >= 0")
        if self.direction is not None and self.direction.coeffs.size:
            g = self.direction.norm_h()
            if abs(g - 1.0) > 1e-9:
                raise ValueError(f"jump direction must be normalized, ||g|| = {g}")

    def gain(self, u_norm):
        return self.c0 + self.c1 * u_norm / (1.0 + u_norm)

    def jump_increment(self, u_norm, z):
        """gamma(t, u, z) as spectral coefficients."""
        return SpectralField(self.direction.basis,
                             (self.gain(u_norm) * z) * self.direction.coeffs)

    def compensator_rate(self, u_norm):
        """Per-unit-time drift integral of gamma against the intensity measure."""
        return SpectralField(self.direction.basis,
                             (self.gain(u_norm) * self.spec.m1) * self.direction.coeffs)

    def second_moment_rate(self, u_norm):
        """integral of ||gamma||^2 against the intensity measure."""
        return self.gain(u_norm) ** 2 * self.spec.m2

    def fourth_moment_rate(self, u_norm):
        return self.gain(u_norm) ** 4 * self.spec.m4

    def growth_constant(self):
        return (self.c0 + self.c1) ** 2 * self.spec.m2

    def fourth_moment_constant(self):
        return (self.c0 + self.c1) ** 4 * self.spec.m4

    def lipschitz_constant(self):
        return self.c1 ** 2 * self.spec.m2


def diffusion_increment(sigma, t, u, dW):
    """sigma(t, u) dW on the shared basis (additive: independent of u)."""
    return sigma.apply(u.norm_h(), dW)


def jump_increment(gamma, t, u, z):
    """gamma(t, u, z) = G(||u||) h(z) g."""
    return gamma.jump_increment(u.norm_h(), z)


def compensator_drift(gamma, t, u):
    """Closed-form drift subtracted when integrating against the compensated measure."""
    return gamma.compensator_rate(u.norm_h())


# -- hypothesis certification -------------------------------------------------


@dataclass
class CertReport:
    """Empirical check of the growth / moment / Lipschitz clauses."""

    ok: bool
    k1_declared: float
    k1_observed: float
    k2_declared: float
    k2_observed: float
    lip_declared: float
    lip_observed: float
    n_pairs: int
    failures: list

    def summary(self):
        state = "pass" if self.ok else "FAIL"
        return (f"hypotheses {state}: K1 {self.k1_observed:.6g}/{self.k1_declared:.6g} "
                f"K2 {self.k2_observed:.6g}/{self.k2_declared:.6g} "
                f"L {self.lip_observed:.6g}/{self.lip_declared:.6g}")


def certify_hypotheses(sigma, gamma, q, basis, pairs, tol=1e-6):
    """Scan field pairs for violations of the declared noise constants.

    Checks the joint quadratic growth bound, the fourth-moment growth
    bound of the jump coefficient, and the joint Lipschitz bound; a pair
    whose ratio exceeds the declared constant times (1 + tol) is reported
    as a witness.
    """
    if len(pairs) < 2:
        raise ValueError("corpus must contain at least 2 field pairs")
    k1_dec = (sigma.growth_constant(q, basis) if sigma else 0.0) \
        + (gamma.growth_constant() if gamma else 0.0)
    k2_dec = gamma.fourth_moment_constant() if gamma else 0.0
    lip_dec = (sigma.lipschitz_constant(q, basis) if sigma else 0.0) \
        + (gamma.lipschitz_constant() if gamma else 0.0)
    k1_obs = k2_obs = lip_obs = 0.0
    failures = []
    for i, (u, v) in enumerate(pairs):
        hu, hv = u.norm_h(), v.norm_h()
        growth = (sigma.lq_norm_sq(q, basis, hu) if sigma else 0.0) \
            + (gamma.second_moment_rate(hu) if gamma else 0.0)
        g_ratio = growth / (1.0 + hu ** 2)
        k1_obs = max(k1_obs, g_ratio)
        if g_ratio > k1_dec * (1.0 + tol):
            failures.append(("growth", i, g_ratio))
        if gamma is not None:
            m4 = gamma.fourth_moment_rate(hu)
            m4_ratio = m4 / (1.0 + hu ** 4)
            k2_obs = max(k2_obs, m4_ratio)
            if m4_ratio > k2_dec * (1.0 + tol):
                failures.append(("2p-moment", i, m4_ratio))
        dz = SpectralField(u.basis, u.coeffs - v.coeffs).norm_h()
        if dz > 0:
            lip = 0.0
            if sigma:
                dm = sigma.modulation(hu) - sigma.modulation(hv)
                lip += sigma.base_lq(q, basis) * dm * dm
            if gamma:
                dgain = gamma.gain(hu) - gamma.gain(hv)
                lip += dgain * dgain * gamma.spec.m2
            l_ratio = lip / dz ** 2
            lip_obs = max(lip_obs, l_ratio)
            if l_ratio > lip_dec * (1.0 + tol) and lip > 0:
                failures.append(("lipschitz", i, l_ratio))
    return CertReport(ok=not failures, k1_declared=k1_dec, k1_observed=k1_obs,
                      k2_declared=k2_dec, k2_observed=k2_obs,
                      lip_declared=lip_dec, lip_observed=lip_obs,
                      n_pairs=len(pairs), failures=failures)


# -- noise record -------------------------------------------------------------


@dataclass
class NoiseRecord:
    """Everything needed to replay a trajectory bit-exactly."""

    seed: int
    path_index: int
    d: int
    n: int
    T: float
    dt: float
    wiener: np.ndarray       # (n_substeps, M, P) complex increments
    jump_times: np.ndarray   # (J,) strictly increasing in (0, T)
    jump_marks: np.ndarray   # (J,)

    def __post_init__(self):
        if self.jump_times.size and np.any(np.diff(self.jump_times) <= 0):
            raise ValueError("jump times must be strictly increasing")

    def equal(self, other):
        return (self.seed == other.seed and self.path_index == other.path_index
                and np.array_equal(self.wiener, other.wiener)
                and np.array_equal(self.jump_times, other.jump_times)
                and np.array_equal(self.jump_marks, other.jump_marks))


def restrict_record(record, basis_small, basis_large):
    """Project a record onto a sub-basis (smaller cutoff, same seed streams).

    Mode-indexed restriction: each retained wavevector keeps the identical
    Wiener increments it had in the larger basis, so studies across
    cutoffs consume a consistent prefix of the same noise.
    """
    rows_large = basis_large.mode_rows()
    take = np.array([rows_large[tuple(int(c) for c in kv)] for kv in basis_small.k],
                    dtype=np.int64)
    return NoiseRecord(seed=record.seed, path_index=record.path_index,
                       d=record.d, n=basis_small.n, T=record.T, dt=record.dt,
                       wiener=record.wiener[:, take, :],
                       jump_times=record.jump_times.copy(),
                       jump_marks=record.jump_marks.copy())
