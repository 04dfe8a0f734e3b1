"""Filter-bank core: prototype design, OQAM mapping, synthesis/analysis banks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from fbmclink import (OqamGrid, demodulate, design_prototype, modulate,
                      oqam_to_qam, phase_factor, qam_to_oqam,
                      transmux_response)


# ---------------------------------------------------------------- prototype

def test_prototype_basic_geometry(pf64):
    assert pf64.L_f == 4 * 64
    assert pf64.kappa == 4
    assert pf64.centre == (pf64.L_f - 1) / 2.0
    # unit energy and even symmetry p[l] == p[L_f-1-l]
    assert abs(np.sum(pf64.coeffs ** 2) - 1.0) < 1e-12
    assert np.abs(pf64.coeffs - pf64.coeffs[::-1]).max() < 1e-15


@pytest.mark.parametrize("kappa", [2, 3, 4])
def test_prototype_all_kappas(kappa):
    pf = design_prototype(kappa, 32)
    assert pf.L_f == kappa * 32
    assert abs(np.sum(pf.coeffs ** 2) - 1.0) < 1e-12


@pytest.mark.parametrize("kappa", [1, 5, 0])
def test_prototype_rejects_bad_kappa(kappa):
    with pytest.raises(ValueError, match="unsupported kappa"):
        design_prototype(kappa, 64)


@pytest.mark.parametrize("M", [3, 12, 2, 100])
def test_prototype_rejects_bad_M(M):
    with pytest.raises(ValueError, match="power of two"):
        design_prototype(4, M)


def test_prototype_autocorrelation_at_symbol_lags():
    """Autocorrelation at multiples of M, normalized by the peak.

    kappa=2 nulls them to machine precision; the longer pulses trade that for
    spectral containment, leaving small fixed residues.
    """
    frozen = {2: 0.0, 3: 1.081053852e-03, 4: 2.034902718e-04}
    for kappa, want in frozen.items():
        pf = design_prototype(kappa, 64)
        p = pf.coeffs
        ac = np.correlate(p, p, "full")
        c0 = ac[p.size - 1]
        worst = max(abs(ac[p.size - 1 + k * 64] / c0)
                    for k in range(1, kappa))
        if kappa == 2:
            assert worst < 1e-15
        else:
            assert_allclose(worst, want, rtol=1e-6)


def test_subcarrier_filter_modulation(pf64):
    f0 = pf64.subcarrier_filter(0)
    assert_allclose(f0, pf64.coeffs, atol=1e-15)
    m = 5
    t = np.arange(pf64.L_f)
    want = pf64.coeffs * np.exp(2j * np.pi * m * (t - pf64.centre) / 64)
    assert_allclose(pf64.subcarrier_filter(m), want, atol=1e-13)


# ------------------------------------------------------------------- phases

def test_phase_factor_table():
    for m in range(8):
        for n in range(8):
            assert phase_factor(m, n) == 1j ** ((m + n) % 4)
    assert phase_factor(0, 0) == 1.0
    assert phase_factor(1, 0) == 1j
    assert phase_factor(2, 4) == -1.0


def test_phase_factor_is_exact_unit_modulus():
    vals = {phase_factor(m, n) for m in range(4) for n in range(4)}
    assert vals == {1.0 + 0j, 1j, -1.0 + 0j, -1j}


# -------------------------------------------------------------- OQAM mapping

def test_qam_oqam_round_trip():
    rng = np.random.default_rng(7)
    q = rng.normal(size=(2, 16, 9)) + 1j * rng.normal(size=(2, 16, 9))
    grid = qam_to_oqam(q, 0.5)
    assert grid.symbols.shape == (2, 16, 18)
    back = oqam_to_qam(grid)
    assert np.abs(back - q).max() == 0.0


def test_qam_staggering_layout():
    q = np.array([[1 + 2j, 3 - 4j]])[None]   # (1, 1, 2)
    grid = qam_to_oqam(q, 0.5)
    assert_allclose(grid.symbols[0, 0], [1.0, 2.0, 3.0, -4.0])


def test_oqam_grid_promotes_2d():
    g = OqamGrid(np.zeros((8, 4)), 0.5)
    assert g.symbols.shape == (1, 8, 4)
    assert g.P_s == 0.5


def test_oqam_power_convention():
    """A unit-power QAM constellation carries 0.5 per real symbol."""
    lv = np.array([-3, -1, 1, 3]) / np.sqrt(10.0)
    const = (lv[:, None] + 1j * lv[None, :]).ravel()     # full 16-QAM
    assert abs(np.mean(np.abs(const) ** 2) - 1.0) < 1e-12
    grid = qam_to_oqam(const[None, None, :], 0.5)
    assert abs(np.mean(grid.symbols ** 2) - 0.5) < 1e-12


# -------------------------------------------------------------- modulation

def test_modulate_single_symbol_is_the_atom(pf64):
    """One unit symbol produces its subcarrier filter times the lattice phase."""
    for m0 in (0, 5, 32, 63):
        s = np.zeros((64, 1))
        s[m0, 0] = 1.0
        y = modulate(OqamGrid(s, 0.5), pf64)
        want = phase_factor(m0, 0) * pf64.subcarrier_filter(m0)
        assert y.shape == (1, pf64.L_f)
        assert np.abs(y[0] - want).max() < 1e-12


def test_modulate_frame_length_and_linearity(pf32):
    rng = np.random.default_rng(3)
    a = rng.normal(size=(2, 32, 7))
    b = rng.normal(size=(2, 32, 7))
    ya = modulate(OqamGrid(a, 0.5), pf32)
    yb = modulate(OqamGrid(b, 0.5), pf32)
    yab = modulate(OqamGrid(a + b, 0.5), pf32)
    assert ya.shape == (2, 6 * 16 + pf32.L_f)
    assert np.abs(ya + yb - yab).max() < 1e-12


def test_modulate_checks_grid_size(pf32):
    with pytest.raises(ValueError, match="grid has M=16 but prototype has M=32"):
        modulate(OqamGrid(np.zeros((16, 3)), 0.5), pf32)


# ------------------------------------------------------------ demodulation

def test_demodulate_zero_stream(pf32):
    D = demodulate(np.zeros(pf32.L_f + 64, dtype=complex), pf32)
    assert D.shape == (32, 5)
    assert np.abs(D).max() == 0.0


def test_demodulate_rejects_matrix_and_short_stream(pf32):
    with pytest.raises(ValueError, match="single antenna stream"):
        demodulate(np.zeros((2, 400), dtype=complex), pf32)
    with pytest.raises(ValueError, match="stream too short"):
        demodulate(np.zeros(pf32.L_f - 1, dtype=complex), pf32)


def test_demodulate_is_the_matched_filter(pf16):
    rng = np.random.default_rng(11)
    y = rng.normal(size=200) + 1j * rng.normal(size=200)
    D = demodulate(y, pf16, n_out=4)
    for m in (0, 3, 9):
        for k in range(4):
            f_m = pf16.subcarrier_filter(m)
            want = np.sum(y[k * 8:k * 8 + pf16.L_f] * np.conj(f_m))
            assert abs(D[m, k] - want) < 1e-10


def test_demodulate_noise_variance(pf32):
    """Unit-energy analysis filters preserve the white-noise variance."""
    rng = np.random.default_rng(5)
    sigma2 = 0.7
    n = 200 * 16 + pf32.L_f
    y = (rng.normal(size=n) + 1j * rng.normal(size=n)) * np.sqrt(sigma2 / 2)
    D = demodulate(y, pf32, n_out=200)
    var = np.mean(np.abs(D) ** 2)
    assert abs(var - sigma2) / sigma2 < 0.05


# ----------------------------------------------------------------- loopback

def test_loopback_floor_by_kappa():
    """Back-to-back TX/RX on a 3-instant burst, real-domain recovery.

    kappa=2 reconstructs exactly; kappa=4 keeps the residual below 1e-3;
    kappa=3 lands at its known (worse) floor.
    """
    frozen = {2: None, 3: 3.426481834e-03, 4: 4.659296438e-04}
    for kappa, want in frozen.items():
        pf = design_prototype(kappa, 64)
        s = np.ones((64, 3))
        y = modulate(OqamGrid(s, 0.5), pf)[0]
        D = demodulate(y, pf, n_out=3)
        ph = np.array([[phase_factor(m, n) for n in range(3)]
                       for m in range(64)])
        err = np.abs((D * np.conj(ph)).real - s).max()
        if kappa == 2:
            assert err < 1e-12
        else:
            assert_allclose(err, want, rtol=1e-6)
            if kappa == 4:
                assert err < 1e-3


def test_loopback_random_burst(pf64):
    rng = np.random.default_rng(0)
    s = rng.integers(0, 2, size=(64, 3)) * 2.0 - 1.0
    y = modulate(OqamGrid(s, 0.5), pf64)[0]
    D = demodulate(y, pf64, n_out=3)
    ph = np.array([[phase_factor(m, n) for n in range(3)] for m in range(64)])
    assert np.abs((D * np.conj(ph)).real - s).max() < 1e-3


# ----------------------------------------------------------------- transmux

def test_transmux_own_channel_peak(pf64):
    F = transmux_response(pf64, 32, 32)
    assert F.size == 2 * pf64.L_f - 1
    assert abs(F[pf64.L_f - 1] - 1.0) < 1e-12


def test_transmux_neighbour_levels(pf64):
    peak1 = peak2 = 0.0
    for m in (31, 32, 33):
        for mp in range(64):
            if mp == m:
                continue
            F = transmux_response(pf64, m, mp)
            dm = min(abs(m - mp), 64 - abs(m - mp))
            if dm == 1:
                peak1 = max(peak1, np.abs(F).max())
            else:
                peak2 = max(peak2, np.abs(F).max())
    assert_allclose(peak1, 2.392766949e-01, rtol=1e-6)
    assert_allclose(peak2, 8.213278340e-04, rtol=1e-6)
    assert peak2 < 1e-3


def test_transmux_reciprocity(pf32):
    """F_{m m'}[l] and F_{m' m}[-l] describe the same inner products."""
    for m, mp in ((3, 4), (10, 13), (0, 31)):
        F1 = transmux_response(pf32, m, mp)
        F2 = transmux_response(pf32, mp, m)
        assert np.abs(F1 - np.conj(F2[::-1])).max() < 1e-12


def test_transmux_matches_atom_inner_products(pf8):
    """Gram matrix of transmit atoms vs sampled transmultiplexer response."""
    M, L_f, half = 8, pf8.L_f, 4
    n_span = 5
    atoms = {}
    for m in range(M):
        for n in range(n_span):
            s = np.zeros((M, n_span))
            s[m, n] = 1.0
            atoms[(m, n)] = modulate(OqamGrid(s, 0.5), pf8)[0]
    for m in range(M):
        fm_atom = atoms[(m, 2)]
        for mp in range(M):
            F = transmux_response(pf8, m, mp)
            for npr in range(n_span):
                inner = np.vdot(fm_atom, atoms[(mp, npr)])  # <f_m, f_m'>
                lag = (npr - 2) * half
                want = (F[L_f - 1 - lag] * phase_factor(mp, npr)
                        * np.conj(phase_factor(m, 2)))
                assert abs(inner - want) < 1e-9


# ----------------------------------------------------------------- property

@given(st.integers(min_value=0, max_value=1000),
       st.integers(min_value=0, max_value=1000))
def test_phase_factor_periodicity(m, n):
    assert phase_factor(m, n) == phase_factor((m + 4) % 4096, n)
    assert phase_factor(m, n) == phase_factor(n, m)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(min_value=-10, max_value=10, allow_nan=False),
                min_size=8, max_size=8))
def test_oqam_round_trip_property(vals):
    q = (np.array(vals[:4]) + 1j * np.array(vals[4:]))[None, None, :]
    grid = qam_to_oqam(q, 0.5)
    assert np.abs(oqam_to_qam(grid) - q).max() == 0.0
