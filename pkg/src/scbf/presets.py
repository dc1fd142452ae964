"""Initial velocity fields and jump direction presets."""

import csv

import numpy as np

from .basis import (PhysicalField, SpectralField, hermitianize, min_grid,
                    to_spectral, zero_field)

GOLDEN = np.array([0.7548776662466927, 0.5698402909980532, 0.6180339887498949])


def _grid_eval(basis, fn):
    """Project a closed-form velocity field onto the basis via one transform."""
    N = min_grid(basis.n - 1, 1)
    x = np.arange(N) * (2 * np.pi / N)
    mesh = np.meshgrid(*([x] * basis.d), indexing="ij")
    vals = np.stack(fn(*mesh))
    return to_spectral(PhysicalField(d=basis.d, N=N, values=vals), basis)


def taylor_green(basis):
    """Classical cellular vortex field, divergence-free by construction."""
    if basis.d == 2:
        return _grid_eval(basis, lambda x, y: (np.sin(x) * np.cos(y),
                                               -np.cos(x) * np.sin(y)))
    return _grid_eval(basis, lambda x, y, z: (np.sin(x) * np.cos(y) * np.cos(z),
                                              -np.cos(x) * np.sin(y) * np.cos(z),
                                              np.zeros_like(x)))


def lowest_mode(basis):
    """Unit-norm field supported on the single wavevector (1, 0, ...)."""
    u = zero_field(basis)
    kv = (1,) + (0,) * (basis.d - 1)
    rows = basis.mode_rows()
    if kv not in rows:
        raise ValueError(f"basis cutoff n={basis.n} excludes the lowest mode")
    i = rows[kv]
    u.coeffs[i, 0] = 1.0 / np.sqrt(2.0)
    u.coeffs[basis.conj_idx[i], 0] = np.conj(u.coeffs[i, 0])
    return u


def decaying(basis, rate=1.0):
    """Smooth deterministic field with |c(k)| = exp(-rate |k|) and fixed phases."""
    phase = 2 * np.pi * np.mod(basis.k @ GOLDEN[:basis.d], 1.0)
    mag = np.exp(-rate * np.sqrt(basis.ksq.astype(float)))
    c = (mag * np.exp(1j * phase))[:, None] * np.ones((1, basis.n_polarizations))
    return SpectralField(basis, hermitianize(basis, c))


def random_field(basis, rng, decay=0.0, amplitude=1.0):
    """Hermitian random field with per-mode decay |k|^{-decay}, scaled norm."""
    M, P = basis.n_wavevectors, basis.n_polarizations
    c = rng.standard_normal((M, P)) + 1j * rng.standard_normal((M, P))
    c *= basis.ksq.astype(float)[:, None] ** (-decay / 2.0)
    u = SpectralField(basis, hermitianize(basis, c))
    h = u.norm_h()
    if h > 0:
        u.coeffs *= amplitude / h
    return u


def scaled(u, amplitude):
    """Copy of u with H-norm equal to amplitude (zero field stays zero)."""
    h = u.norm_h()
    out = u.copy()
    if h > 0:
        out.coeffs *= amplitude / h
    return out


_PRESETS = {
    "taylor-green": taylor_green,
    "lowest": lowest_mode,
    "decaying": decaying,
    "zero": zero_field,
}


def load_coefficients(path, basis):
    """Initial field from CSV rows k1..kd, pol, re, im (canonical modes only)."""
    u = zero_field(basis)
    rows = basis.mode_rows()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for line in reader:
            kv = tuple(int(line[f"k{i + 1}"]) for i in range(basis.d))
            if kv not in rows:
                raise ValueError(f"wavevector {kv} outside basis cutoff n={basis.n}")
            i = rows[kv]
            p = int(line["pol"])
            c = float(line["re"]) + 1j * float(line["im"])
            u.coeffs[i, p] = c
            u.coeffs[basis.conj_idx[i], p] = np.conj(c)
    return u


def initial_field(name, basis, amplitude=1.0):
    """Preset by name, or `file:<path>` for explicit coefficients."""
    if name.startswith("file:"):
        return scaled(load_coefficients(name[5:], basis), amplitude)
    if name not in _PRESETS:
        raise ValueError(f"unknown initial-condition preset {name!r}")
    if name == "zero":
        return zero_field(basis)
    return scaled(_PRESETS[name](basis), amplitude)


def direction_field(name, basis):
    """Unit-norm jump direction preset."""
    if name not in _PRESETS or name == "zero":
        raise ValueError(f"unknown direction preset {name!r}")
    return scaled(_PRESETS[name](basis), 1.0)
