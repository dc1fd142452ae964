"""Divergence-free Fourier basis on the periodic torus [0, 2pi)^d.

The velocity state is stored as complex amplitudes c[m, p] per retained
wavevector k_m and polarization p (unit vectors orthogonal to k_m; one in
2D, two in 3D).  Excluding the zero mode and projecting onto polarizations
makes every represented field mean-zero and divergence-free by
construction.  Transforms are normalized so that Parseval holds with unit
weight: ||u||_H^2 = sum |c|^2 equals the L2-norm squared of the physical
field over the torus.
"""

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


class GridTooSmallError(ValueError):
    """Collocation grid cannot represent the requested modes alias-free."""


def _is_canonical(k):
    """First nonzero component positive: picks one of each (k, -k) pair."""
    for comp in k:
        if comp != 0:
            return comp > 0
    return False


def _polarizations(k):
    """Orthonormal vectors spanning the plane orthogonal to k (d-1 of them)."""
    k = np.asarray(k, dtype=float)
    d = k.size
    if d == 2:
        p = np.array([-k[1], k[0]]) / np.linalg.norm(k)
        return p[None, :]
    helper = np.zeros(3)
    helper[np.argmin(np.abs(k))] = 1.0
    p1 = np.cross(k, helper)
    p1 /= np.linalg.norm(p1)
    p2 = np.cross(k / np.linalg.norm(k), p1)
    p2 /= np.linalg.norm(p2)
    return np.stack([p1, p2])


@dataclass
class Basis:
    """Retained modes 0 < |k|^2 < n^2 with polarizations, in a fixed order."""

    d: int
    n: int
    k: np.ndarray          # (M, d) int wavevectors, lexicographic order
    ksq: np.ndarray        # (M,) int |k|^2
    pol: np.ndarray        # (M, P, d) float, P = d-1, same vectors for k and -k
    conj_idx: np.ndarray   # (M,) row index of -k
    half: np.ndarray       # (M,) bool, canonical representative of each pair
    _plans: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_wavevectors(self):
        return self.k.shape[0]

    @property
    def n_polarizations(self):
        return self.d - 1

    @property
    def n_modes(self):
        """Complex coefficients stored (independent real dofs = this count)."""
        return self.k.shape[0] * (self.d - 1)

    def mode_rows(self):
        """Lookup table wavevector tuple -> row index."""
        return {tuple(int(c) for c in kv): i for i, kv in enumerate(self.k)}

    def plan(self, N):
        """Shared read-only transform plan for an N^d collocation grid."""
        if N not in self._plans:
            self._plans[N] = TransformPlan(self, N)
        return self._plans[N]


def build_basis(d, n):
    """All modes with 0 < |k|^2 < n^2, ordered lexicographically on k."""
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    if n < 1:
        raise ValueError(f"cutoff must be >= 1, got {n}")
    kmax = n - 1  # |k_i| <= kmax for every retained component
    rng = range(-kmax, kmax + 1)
    ks = []
    if d == 2:
        for k1 in rng:
            for k2 in rng:
                if 0 < k1 * k1 + k2 * k2 < n * n:
                    ks.append((k1, k2))
    else:
        for k1 in rng:
            for k2 in rng:
                for k3 in rng:
                    if 0 < k1 * k1 + k2 * k2 + k3 * k3 < n * n:
                        ks.append((k1, k2, k3))
    ks.sort()
    k = np.array(ks, dtype=np.int64).reshape(len(ks), d)
    ksq = np.sum(k * k, axis=1)
    rows = {tuple(kv): i for i, kv in enumerate(ks)}
    conj_idx = np.array([rows[tuple(-c for c in kv)] for kv in ks], dtype=np.int64)
    half = np.array([_is_canonical(kv) for kv in ks], dtype=bool)
    P = d - 1
    pol = np.zeros((len(ks), P, d))
    for i, kv in enumerate(ks):
        if half[i]:
            pol[i] = _polarizations(kv)
    pol[~half] = pol[conj_idx[~half]]
    return Basis(d=d, n=n, k=k, ksq=ksq, pol=pol, conj_idx=conj_idx, half=half)


@dataclass
class SpectralField:
    """Complex amplitudes per (wavevector, polarization); Hermitian-symmetric."""

    basis: Basis
    coeffs: np.ndarray  # (M, P) complex128

    def copy(self):
        return SpectralField(self.basis, self.coeffs.copy())

    def norm_h(self):
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def norm_v(self):
        return float(np.sqrt(np.sum(self.basis.ksq[:, None] * np.abs(self.coeffs) ** 2)))


@dataclass
class PhysicalField:
    """Real velocity samples on the N^d collocation grid (component-first)."""

    d: int
    N: int
    values: np.ndarray  # (d, N, ..., N) float64


def zero_field(basis):
    return SpectralField(basis, np.zeros((basis.n_wavevectors, basis.n_polarizations),
                                         dtype=np.complex128))


def hermitianize(basis, coeffs):
    """Project onto the Hermitian-symmetric subspace (real physical fields)."""
    return 0.5 * (coeffs + np.conj(coeffs[..., basis.conj_idx, :]))


def hermitian_defect(u):
    """Max |c(-k) - conj(c(k))|, 0 for a real-valued physical field."""
    c = u.coeffs
    return float(np.max(np.abs(c[u.basis.conj_idx, :] - np.conj(c)))) if c.size else 0.0


def inner_h(u, v):
    """H inner product (u, v) = Re sum conj(c_u) c_v."""
    return float(np.real(np.sum(np.conj(u.coeffs) * v.coeffs)))


def full_amplitudes(u):
    """Per-wavevector vector amplitudes (M, d): sum_p c[m,p] pol[m,p,:]."""
    return np.einsum("mp,mpd->md", u.coeffs, u.basis.pol)


def divergence_defect(u):
    """Max |k . u_hat(k)| over modes; identically ~0 by representation."""
    amp = full_amplitudes(u)
    return float(np.max(np.abs(np.sum(amp * u.basis.k, axis=1)))) if amp.size else 0.0


def leray_project(basis, amp):
    """Apply I - k k^T/|k|^2 per mode to full vector amplitudes (M, d).

    Equivalent to keeping the components along the polarization vectors;
    the zero mode is excluded from the basis, hence annihilated.
    """
    amp = np.asarray(amp, dtype=np.complex128)
    coeffs = np.einsum("...md,mpd->...mp", amp, basis.pol)
    return SpectralField(basis, coeffs) if amp.ndim == 2 else coeffs


class TransformPlan:
    """Precomputed scatter/gather indices for spectral <-> grid transforms."""

    def __init__(self, basis, N):
        if N <= 2 * (basis.n - 1):
            raise GridTooSmallError(
                f"grid N={N} too small for cutoff n={basis.n}; need N > {2 * (basis.n - 1)}")
        self.basis = basis
        self.N = N
        d = basis.d
        idx = np.mod(basis.k, N)  # (M, d)
        self.flat_idx = np.ravel_multi_index(tuple(idx.T), (N,) * d)
        self.scale = TWO_PI ** (-d / 2.0)
        self.cell = (TWO_PI / N) ** d  # quadrature weight per grid point

    def to_grid(self, coeffs):
        """coeffs (..., M, P) -> real values (..., d, N, ..., N)."""
        b = self.basis
        d, N = b.d, self.N
        amp = np.einsum("...mp,mpd->...md", coeffs, b.pol) * self.scale
        lead = amp.shape[:-2]
        F = np.zeros(lead + (d, N ** d), dtype=np.complex128)
        F[..., :, self.flat_idx] = np.swapaxes(amp, -1, -2)
        F = F.reshape(lead + (d,) + (N,) * d)
        vals = np.fft.ifftn(F, axes=tuple(range(-d, 0))) * (N ** d)
        return np.real(vals)

    def from_grid(self, values):
        """Real values (..., d, N, ..., N) -> coeffs (..., M, P), Leray-projected."""
        b = self.basis
        d, N = b.d, self.N
        F = np.fft.fftn(np.asarray(values, dtype=np.float64),
                        axes=tuple(range(-d, 0))) / (N ** d)
        lead = F.shape[:-(d + 1)]
        F = F.reshape(lead + (d, N ** d))
        amp = np.swapaxes(F[..., :, self.flat_idx], -1, -2) / self.scale
        return np.einsum("...md,mpd->...mp", amp, b.pol)


def min_grid(kmax, degree):
    """Smallest power-of-two grid alias-free for products of `degree` fields."""
    need = (degree + 1) * kmax + 1
    N = 2
    while N < need:
        N *= 2
    return max(N, 4)


def to_physical(u, N):
    """Evaluate the field on the N^d collocation grid (N > 2 n required)."""
    vals = u.basis.plan(N).to_grid(u.coeffs)
    return PhysicalField(d=u.basis.d, N=N, values=vals)


def to_spectral(f, basis):
    """Forward transform restricted to the basis modes (Leray included)."""
    coeffs = basis.plan(f.N).from_grid(f.values)
    return SpectralField(basis, coeffs)


def lp_norm(u, p, N=None):
    """||u||_{L^p} by collocation quadrature on an alias-free grid."""
    b = u.basis
    if N is None:
        N = min_grid(b.n - 1, int(np.ceil(p)))
    plan = b.plan(N)
    vals = plan.to_grid(u.coeffs)
    speed = np.sqrt(np.sum(vals ** 2, axis=0))
    return float(np.sum(speed ** p) * plan.cell) ** (1.0 / p)


def norms(u, r):
    """(H-norm, V-norm, L^{r+1}-norm) of the field; r >= 1."""
    if r < 1:
        raise ValueError(f"exponent r must be >= 1, got {r}")
    return u.norm_h(), u.norm_v(), lp_norm(u, r + 1.0)
