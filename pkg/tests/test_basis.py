import itertools

import numpy as np
import pytest

from scbf.basis import (GridTooSmallError, SpectralField, build_basis,
                        divergence_defect, full_amplitudes, hermitian_defect,
                        hermitianize, inner_h, leray_project, lp_norm, norms,
                        to_physical, to_spectral, zero_field)
from scbf.operators import apply_stokes
from scbf.presets import random_field
from scbf.rng import stream


def brute_force_modes(d, n):
    """Independent lattice enumeration: all k with 0 < |k|^2 < n^2."""
    ks = []
    for k in itertools.product(range(-n + 1, n), repeat=d):
        s = sum(c * c for c in k)
        if 0 < s < n * n:
            ks.append(k)
    return sorted(ks)


def test_empty_cutoff():
    b = build_basis(2, 1)
    assert b.n_wavevectors == 0
    assert zero_field(b).norm_h() == 0.0


def test_d2_n2_mode_set():
    b = build_basis(2, 2)
    expect = {(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)}
    assert set(map(tuple, b.k)) == expect
    assert b.n_modes == 8
    assert int(np.sum(b.half)) == 4  # independent conjugate pairs


@pytest.mark.parametrize("d,n", [(2, 2), (2, 5), (3, 2), (3, 4)])
def test_mode_count_against_lattice_enumeration(d, n):
    b = build_basis(d, n)
    expect = brute_force_modes(d, n)
    assert [tuple(k) for k in b.k] == expect
    assert b.n_modes == len(expect) * (d - 1)


def test_invalid_dimension_and_cutoff():
    with pytest.raises(ValueError):
        build_basis(4, 2)
    with pytest.raises(ValueError):
        build_basis(2, 0)


@pytest.mark.parametrize("d,n", [(2, 6), (3, 3)])
def test_polarization_invariants(d, n):
    b = build_basis(d, n)
    dots = np.einsum("mpd,md->mp", b.pol, b.k.astype(float))
    assert np.max(np.abs(dots)) < 1e-13
    lengths = np.linalg.norm(b.pol, axis=2)
    assert np.max(np.abs(lengths - 1.0)) < 1e-13
    # same polarization vectors for k and -k (Hermitian pairing works)
    assert np.allclose(b.pol, b.pol[b.conj_idx])
    # conjugate pair both present
    assert np.array_equal(b.k[b.conj_idx], -b.k)


def test_leray_idempotent_and_kernel():
    b = build_basis(2, 5)
    u = random_field(b, stream(0, 0, 0), decay=0.5)
    again = leray_project(b, full_amplitudes(u))
    assert np.allclose(again.coeffs, u.coeffs, rtol=0, atol=1e-14)
    # gradient of cos(k.x) has amplitudes parallel to k -> annihilated
    amp = (1j * b.k).astype(np.complex128)
    grad = leray_project(b, amp)
    assert np.max(np.abs(grad.coeffs)) < 1e-14


def test_leray_single_mode_hand_computed():
    b = build_basis(2, 3)
    rows = b.mode_rows()
    i = rows[(1, 1)]
    v = np.array([2.0 + 1.0j, -0.5 + 0.25j])
    amp = np.zeros((b.n_wavevectors, 2), dtype=np.complex128)
    amp[i] = v
    amp[b.conj_idx[i]] = np.conj(v)
    proj = leray_project(b, amp)
    k = np.array([1.0, 1.0])
    expect = v - (v @ k) / 2.0 * k  # I - k k^T / |k|^2
    got = full_amplitudes(proj)[i]
    assert np.allclose(got, expect, atol=1e-14)


def test_transform_zero_and_single_mode():
    b = build_basis(2, 4)
    assert np.max(np.abs(to_physical(zero_field(b), 16).values)) == 0.0
    u = zero_field(b)
    rows = b.mode_rows()
    i = rows[(2, 1)]
    c = 0.7 - 0.2j
    u.coeffs[i, 0] = c
    u.coeffs[b.conj_idx[i], 0] = np.conj(c)
    N = 16
    f = to_physical(u, N)
    # closed form: u(x) = 2 Re(c p exp(i k.x)) / (2 pi)^{d/2}
    x = np.arange(N) * 2 * np.pi / N
    X, Y = np.meshgrid(x, x, indexing="ij")
    phase = np.exp(1j * (2 * X + 1 * Y))
    for comp in range(2):
        expect = 2.0 * np.real(c * b.pol[i, 0, comp] * phase) / (2 * np.pi)
        assert np.max(np.abs(f.values[comp] - expect)) < 1e-12


def test_round_trip_and_parseval():
    b = build_basis(2, 8)
    u = random_field(b, stream(1, 0, 0), decay=0.3)
    N = 32
    f = to_physical(u, N)
    back = to_spectral(f, b)
    ref = np.max(np.abs(u.coeffs))
    assert np.max(np.abs(back.coeffs - u.coeffs)) < 1e-12 * ref
    quad = np.sum(f.values ** 2) * (2 * np.pi / N) ** 2
    assert abs(quad - u.norm_h() ** 2) < 1e-10 * u.norm_h() ** 2


def test_grid_too_small():
    b = build_basis(2, 8)
    u = random_field(b, stream(2, 0, 0))
    with pytest.raises(GridTooSmallError):
        to_physical(u, 14)  # need N > 2 (n - 1)


def test_norms_zero_and_eigenmode():
    b = build_basis(2, 3)
    assert norms(zero_field(b), 3.0) == (0.0, 0.0, 0.0)
    u = zero_field(b)
    rows = b.mode_rows()
    i = rows[(1, 0)]
    u.coeffs[i, 0] = 1 / np.sqrt(2)
    u.coeffs[b.conj_idx[i], 0] = 1 / np.sqrt(2)
    h, v, _ = norms(u, 3.0)
    assert abs(v - h) < 1e-14  # |k|^2 = 1 eigenmode


def test_v_norm_matches_stokes_pairing():
    b = build_basis(3, 3)
    u = random_field(b, stream(3, 0, 0), decay=0.4)
    lhs = inner_h(apply_stokes(u), u)
    rhs = u.norm_v() ** 2
    assert abs(lhs - rhs) <= 1e-12 * rhs


def test_hermitian_and_divergence_invariants():
    b = build_basis(3, 3)
    rng = stream(4, 0, 0)
    u = random_field(b, rng, decay=0.2)
    assert hermitian_defect(u) <= 1e-13 * np.max(np.abs(u.coeffs))
    assert divergence_defect(u) <= 1e-12
    au = apply_stokes(u)
    assert hermitian_defect(au) <= 1e-13 * np.max(np.abs(au.coeffs))
    # hermitianize projects arbitrary coefficients onto real physical fields
    raw = rng.standard_normal((b.n_wavevectors, 2)) * (1 + 1j)
    h = SpectralField(b, hermitianize(b, raw))
    assert hermitian_defect(h) <= 1e-13 * np.max(np.abs(h.coeffs))


def test_lp_norm_single_mode_closed_form():
    # ||a cos(k.x) p||_{L^p} over the torus has a closed 1D reduction
    b = build_basis(2, 3)
    u = zero_field(b)
    rows = b.mode_rows()
    i = rows[(1, 0)]
    u.coeffs[i, 0] = 1 / np.sqrt(2)
    u.coeffs[b.conj_idx[i], 0] = 1 / np.sqrt(2)
    # physical field: sqrt(2)/(2 pi) * cos(x) * p, |p| = 1
    a = np.sqrt(2) / (2 * np.pi)
    x = np.linspace(0, 2 * np.pi, 20001)
    target = (np.trapezoid(np.abs(a * np.cos(x)) ** 4, x) * 2 * np.pi) ** 0.25
    assert abs(lp_norm(u, 4.0) - target) < 1e-6
