"""Deterministic operators of the damped Navier-Stokes system.

All operators act on SpectralField values and return new fields on the
same basis: the diagonal Stokes operator, the convection term (either
alias-free padded collocation or direct mode-pair convolution), the
pointwise absorption nonlinearity |u|^{r-1} u, the spectral truncation
and smoothing projectors, and a discrete time mollifier.
"""

from dataclasses import dataclass

import numpy as np

from .basis import (SpectralField, TWO_PI, full_amplitudes, leray_project,
                    min_grid)


class NonFiniteFieldError(FloatingPointError):
    """Non-finite values encountered; signals upstream blow-up."""


class KernelUnresolvedError(ValueError):
    """Mollifier width too small for the series step."""


@dataclass
class OperatorConfig:
    """Coefficients and dealiasing policy for the nonlinear terms."""

    r: float = 3.0
    mu: float = 1.0
    beta: float = 1.0
    dealias: str = "padded-collocation"  # or "exact-convolution"
    padding: float = 1.5

    def __post_init__(self):
        if self.r < 1:
            raise ValueError(f"absorption exponent r must be >= 1, got {self.r}")
        if self.mu <= 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.dealias not in ("padded-collocation", "exact-convolution"):
            raise ValueError(f"unknown dealias mode {self.dealias!r}")
        if self.padding < 1.5:
            raise ValueError(f"padding factor must be >= 3/2, got {self.padding}")

    def grid_quadratic(self, basis):
        """Alias-free grid for quadratic products (3/2-rule or wider)."""
        kmax = basis.n - 1
        N = min_grid(kmax, 2)
        while N < self.padding * 2 * kmax:
            N *= 2
        return N

    def grid_absorption(self, basis):
        """Alias-free grid for degree-r products (exact for odd integer r)."""
        degree = max(2, int(np.ceil(self.r)))
        return min_grid(basis.n - 1, degree)


def apply_stokes(u):
    """A u: multiply each coefficient by its eigenvalue |k|^2."""
    return SpectralField(u.basis, u.coeffs * u.basis.ksq[:, None])


def _pair_plan(basis):
    """Mode-pair index lists (i, j, out) with k_i + k_j = k_out, all in basis."""
    key = ("pairs",)
    if key not in basis._plans:
        rows = basis.mode_rows()
        pi, pj, po = [], [], []
        kl = [tuple(int(c) for c in kv) for kv in basis.k]
        for i, ki in enumerate(kl):
            for j, kj in enumerate(kl):
                out = tuple(a + b for a, b in zip(ki, kj))
                o = rows.get(out)
                if o is not None:
                    pi.append(i)
                    pj.append(j)
                    po.append(o)
        basis._plans[key] = (np.array(pi, dtype=np.int64),
                             np.array(pj, dtype=np.int64),
                             np.array(po, dtype=np.int64))
    return basis._plans[key]


def _convection_exact(u, v):
    """Direct O(M^2) truncated convolution of (u . grad) v, then projection."""
    b = u.basis
    pi, pj, po = _pair_plan(b)
    amp_u = full_amplitudes(u)
    amp_v = full_amplitudes(v)
    M, d = amp_u.shape
    out = np.zeros((M, d), dtype=np.complex128)
    if len(pi):
        # coefficient of (u . grad) v at k_out: sum (u_hat(k_i) . i k_j) v_hat(k_j)
        dot = 1j * np.sum(amp_u[pi] * b.k[pj], axis=1) * TWO_PI ** (-d / 2.0)
        for c in range(d):
            w = dot * amp_v[pj, c]
            out[:, c] = (np.bincount(po, weights=w.real, minlength=M)
                         + 1j * np.bincount(po, weights=w.imag, minlength=M))
    return leray_project(b, out)


def _convection_collocation(u, v, N):
    """(u . grad) v on a padded grid, transformed back (alias-free for N > 3k)."""
    b = u.basis
    plan = b.plan(N)
    d = b.d
    U = plan.to_grid(u.coeffs)
    # gradients of v: batch the d derivative directions as a leading axis
    grad_coeffs = (1j * b.k.T[:, :, None]) * v.coeffs[None, :, :]
    dV = plan.to_grid(grad_coeffs)          # (d_deriv, d_comp, N, ...)
    W = np.einsum("j...,jc...->c...", U, dV)
    return SpectralField(b, plan.from_grid(W))


def apply_convection(u, v, cfg):
    """Projected convection term: truncation of P[(u . grad) v]."""
    if cfg.dealias == "exact-convolution":
        return _convection_exact(u, v)
    return _convection_collocation(u, v, cfg.grid_quadratic(u.basis))


def convection_form(u, v, w, cfg):
    """Trilinear form value <(u . grad) v, w> under the configured mode."""
    from .basis import inner_h
    return inner_h(apply_convection(u, v, cfg), w)


def apply_absorption(u, cfg):
    """Projected absorption term: truncation of P[|u|^{r-1} u]."""
    r = cfg.r
    if r == 1.0:
        return u.copy()  # P u = u for divergence-free u
    b = u.basis
    plan = b.plan(cfg.grid_absorption(b))
    vals = plan.to_grid(u.coeffs)
    with np.errstate(over="ignore", invalid="ignore"):
        speed2 = np.sum(vals ** 2, axis=0)
        W = speed2 ** ((r - 1.0) / 2.0) * vals
    if not np.all(np.isfinite(W)):
        raise NonFiniteFieldError("absorption term produced non-finite values")
    return SpectralField(b, plan.from_grid(W))


def galerkin_truncate(u, m):
    """Zero every coefficient with |k|^2 >= m^2 (orthogonal, idempotent)."""
    keep = (u.basis.ksq < m * m)[:, None]
    return SpectralField(u.basis, np.where(keep, u.coeffs, 0.0))


def smooth_project(u, n):
    """Smoothed truncation: c(k) -> exp(-|k|^2/n) c(k) for |k|^2 < n^2, else 0."""
    if n < 1:
        raise ValueError(f"smoothing parameter must be >= 1, got {n}")
    ksq = u.basis.ksq
    factor = np.where(ksq < n * n, np.exp(-ksq / float(n)), 0.0)
    return SpectralField(u.basis, u.coeffs * factor[:, None])


def dual_norm_vprime(u):
    """Negative-order norm sqrt(sum |k|^{-2} |c|^2), dual to the V-norm."""
    return float(np.sqrt(np.sum(np.abs(u.coeffs) ** 2 / u.basis.ksq[:, None])))


# -- time mollifier -----------------------------------------------------------

_BUMP_NORM = 2.252283621043585  # 1 / integral of exp(-1/(1-s^2)) over (-1, 1)


def bump(s):
    """Fixed even smooth bump supported in (-1, 1) with unit integral."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = _BUMP_NORM * np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


@dataclass
class TimeSeries:
    """Values on a uniform time grid t_i = i * dt (scalars or stacked arrays)."""

    values: np.ndarray  # (n_t, ...) with n_t >= 2
    dt: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] < 2:
            raise ValueError("time series needs at least 2 nodes")
        if self.dt <= 0:
            raise ValueError("dt must be positive")


def _kernel_weights(h, dt):
    """Sampled kernel zeta^h(j dt) dt, normalized to unit discrete mass."""
    if h < 2 * dt:
        raise KernelUnresolvedError(f"width h={h} unresolved by dt={dt}; need h >= 2 dt")
    m = int(np.floor(h / dt))
    offsets = np.arange(-m, m + 1)
    w = bump(offsets * dt / h) / h * dt
    return offsets, w / np.sum(w)


def discrete_half_mass(h, dt):
    """Discretized integral of zeta^h over [0, h] (half weight at s = 0)."""
    offsets, w = _kernel_weights(h, dt)
    right = offsets >= 0
    return float(np.sum(w[right]) - 0.5 * w[offsets == 0][0])


def mollify_time(series, h):
    """Discrete convolution with the unit-mass kernel of width h.

    The series is treated as supported on its own time interval; nodes
    within h of either end see a truncated kernel.
    """
    offsets, w = _kernel_weights(h, series.dt)
    v = series.values
    n = v.shape[0]
    out = np.zeros_like(v)
    for off, wj in zip(offsets, w):
        lo, hi = max(0, -off), min(n, n - off)
        if lo < hi:
            out[lo:hi] += wj * v[lo + off:hi + off]
    return TimeSeries(values=out, dt=series.dt)
