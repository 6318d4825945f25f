"""Delay scans, spectra, peak extraction, and amplitude retrieval."""

import math

import numpy as np
import pytest

from qbounce.pulses import KickPulse
from qbounce.quantum import impulsive_kick_matrix
from qbounce.spectroscopy import (DelayScan, SpectrumResult,
                                  find_peaks_and_match,
                                  impulsive_scan_analytic, perturbative_scan,
                                  retrieve_amplitudes, scan_delay, spectrum)

DELAYS = 2.0 + 0.05 * np.arange(961)  # tau in [2, 50]


# ------------------------------------------------------------- scan basics

def test_zero_kicks_leave_ground_state(basis20):
    scan = scan_delay(basis20, KickPulse(0.0, 0.2), KickPulse(0.0, 0.2),
                      DELAYS[:300])
    assert np.allclose(scan.populations, 1.0, atol=1e-12)


def test_single_kick_population_independent_of_delay(basis20):
    scan = scan_delay(basis20, KickPulse(1.0, 0.2), KickPulse(0.0, 0.2),
                      DELAYS[:300])
    assert np.ptp(scan.populations) < 1e-10
    assert scan.populations[0] < 1.0


def test_populations_bounded(basis20):
    scan = scan_delay(basis20, KickPulse(2.0, 0.2), KickPulse(1.0, 0.2),
                      DELAYS)
    assert np.all(scan.populations >= 0.0)
    assert np.all(scan.populations <= 1.0)


def test_overlap_flagging(basis20):
    scan = scan_delay(basis20, KickPulse(0.5, 0.3), KickPulse(0.5, 0.3),
                      np.arange(0.5, 10.0, 0.5))
    assert np.array_equal(scan.overlap, scan.delays < 3.0 * 0.6)


def test_mismatched_kick_kinds_rejected(basis20):
    with pytest.raises(ValueError):
        scan_delay(basis20, KickPulse(0.5, 0.2, kind="magnetic"),
                   KickPulse(0.5, 0.2, kind="shake"), DELAYS[:300])


def test_nonuniform_grid_rejected():
    with pytest.raises(ValueError):
        DelayScan(np.array([0.0, 1.0, 3.0]), np.ones(3), "magnetic")


# ------------------------------------------------------- impulsive oracle

def test_impulsive_scan_matches_paper_sum(basis20):
    """Equal kicks: |c_1|^2 from the closed sum over P^2_1i phases."""
    alpha = 0.3
    p = impulsive_kick_matrix(basis20, alpha, 1)
    expected = np.abs(np.exp(-1j * np.outer(DELAYS, basis20.zeros))
                      @ (p[0, :] * p[:, 0])) ** 2
    scan = impulsive_scan_analytic(basis20, alpha, alpha, DELAYS,
                                   spin_average=False)
    assert np.max(np.abs(scan.populations - expected)) < 1e-14


def test_impulsive_scan_zero_area(basis20):
    scan = impulsive_scan_analytic(basis20, 0.0, 0.0, DELAYS)
    assert np.allclose(scan.populations, 1.0, atol=1e-14)


def test_short_pulse_scan_reaches_impulsive_limit(basis50):
    """scan_delay with sigma = 1e-3 against the analytic impulsive scan."""
    sigma = 1e-3
    area1, area2 = 0.4, 0.25
    delays = DELAYS[:600]
    scan = scan_delay(basis50,
                      KickPulse(area1 / (sigma * math.sqrt(math.pi)), sigma),
                      KickPulse(area2 / (sigma * math.sqrt(math.pi)), sigma),
                      delays)
    analytic = impulsive_scan_analytic(basis50, area1, area2, delays)
    assert np.max(np.abs(scan.populations - analytic.populations)) < 1e-4


# ----------------------------------------------------- perturbative oracle

def test_perturbative_matches_full_scan_weak_magnetic(basis50):
    """alpha = 0.05 kicks: first-order result within 1e-3 of the full scan."""
    sigma = 0.2
    amp = 0.05 / (sigma * math.sqrt(math.pi))
    p1 = KickPulse(amp, sigma)
    p2 = KickPulse(amp, sigma)
    full = scan_delay(basis50, p1, p2, DELAYS)
    pert = perturbative_scan(basis50, p1, p2, DELAYS)
    assert np.max(np.abs(full.populations - pert.populations)) < 1e-3


def test_perturbative_matches_full_scan_weak_shake(basis50):
    sigma = 0.2
    p1 = KickPulse(0.02, sigma, kind="shake")
    p2 = KickPulse(0.02, sigma, kind="shake")
    full = scan_delay(basis50, p1, p2, DELAYS, spin_average=False)
    pert = perturbative_scan(basis50, p1, p2, DELAYS, spin_average=False)
    assert np.max(np.abs(full.populations - pert.populations)) < 1e-3


def test_perturbative_zero_kick_is_flat(basis20):
    scan = perturbative_scan(basis20, KickPulse(0.0, 0.2), KickPulse(0.0, 0.2),
                             DELAYS)
    assert np.allclose(scan.populations, 1.0, atol=1e-15)


def test_perturbative_contains_only_ground_transitions(basis20):
    """No excited-excited difference lines (the first-order truncation)."""
    delays = 2.0 + 0.05 * np.arange(4001)
    scan = perturbative_scan(basis20, KickPulse(1.0, 0.2), KickPulse(0.5, 0.2),
                             delays)
    spec = spectrum(scan, window="hann")
    w21 = basis20.zeros[1] - basis20.zeros[0]
    w32 = basis20.zeros[2] - basis20.zeros[1]  # strongest absent line, 1.433
    main = spec.amplitudes[np.argmin(np.abs(spec.frequencies - w21))]
    near_w32 = np.abs(spec.frequencies - w32) < 0.05
    assert spec.amplitudes[near_w32].max() < 0.01 * main


# ---------------------------------------------------------------- spectra

def test_pure_tone_spectrum_peak(basis20):
    delays = 2.0 + 0.05 * np.arange(2961)
    w = 1.7498420336710598
    pops = 0.5 + 0.25 * np.cos(w * delays)
    scan = DelayScan(delays, pops, "magnetic")
    spec = spectrum(scan, window="hann")
    out = find_peaks_and_match(spec, basis20, 1)
    assert len(out.matches) == 1
    assert out.matches[0].omega_measured == pytest.approx(w, abs=1e-3)
    assert out.matches[0].state == 2


def test_constant_input_has_no_peaks(basis20):
    scan = DelayScan(DELAYS, np.full(len(DELAYS), 0.7), "magnetic")
    spec = spectrum(scan, window="hann")
    out = find_peaks_and_match(spec, basis20, 3)
    assert out.matches == []


def test_spectrum_requires_enough_samples():
    scan = DelayScan(np.arange(100.0), np.ones(100), "magnetic")
    with pytest.raises(ValueError):
        spectrum(scan)


def test_zero_padding_refines_frequency_grid(basis20):
    scan = DelayScan(DELAYS, 0.5 + 0.1 * np.cos(1.75 * DELAYS), "magnetic")
    coarse = spectrum(scan, zero_pad_factor=1)
    fine = spectrum(scan, zero_pad_factor=8)
    ratio = (coarse.frequencies[1] - coarse.frequencies[0]) / \
        (fine.frequencies[1] - fine.frequencies[0])
    assert ratio == pytest.approx(8.0, rel=1e-12)


def test_doubling_tau_max_halves_grid_spacing(basis20):
    short = DelayScan(DELAYS, 0.5 + 0.5 * np.cos(DELAYS), "magnetic")
    longer_delays = 2.0 + 0.05 * np.arange(2 * len(DELAYS) - 40)
    longer = DelayScan(longer_delays, 0.5 + 0.5 * np.cos(longer_delays),
                       "magnetic")
    df_short = np.diff(spectrum(short).frequencies[:2])[0]
    df_long = np.diff(spectrum(longer).frequencies[:2])[0]
    assert df_long < 0.52 * df_short


# ---------------------------------------------------------- retrieval

def test_retrieval_round_trip(basis20):
    """Generate an impulsive weak scan, fit it, compare against P itself."""
    alpha = 0.1
    delays = 2.0 + 0.05 * np.arange(2961)
    scan = impulsive_scan_analytic(basis20, alpha, alpha, delays,
                                   spin_average=False)
    p = impulsive_kick_matrix(basis20, alpha, 1)
    # fix the global phase exactly as the retrieval does: P_11 real positive
    gauge = p[0, 0] / abs(p[0, 0])
    amps, residual = retrieve_amplitudes(scan, basis20, 4)
    # residual carries the genuine second-order (two-photon) content of
    # the scan that the first-order fit model leaves out
    assert residual < 1e-4
    for a in amps[:3]:  # i = 2..4
        truth = p[0, a.state - 1] / gauge
        assert a.magnitude == pytest.approx(abs(truth), rel=1e-3), a.state
        dphi = (a.phase - np.angle(truth)) % math.pi
        dphi = min(dphi, math.pi - dphi)
        assert dphi < 1e-2, a.state
        assert a.phase_ambiguity == math.pi


def test_retrieval_vanishes_with_kick_strength(basis20):
    delays = 2.0 + 0.05 * np.arange(2961)
    scan = impulsive_scan_analytic(basis20, 1e-5, 1e-5, delays,
                                   spin_average=False)
    amps, _ = retrieve_amplitudes(scan, basis20, 3)
    assert all(a.magnitude < 1e-4 for a in amps)


def test_retrieval_rejects_unresolvable_lines(basis20):
    # tau range far too short to separate adjacent transition frequencies
    delays = 2.0 + 0.001 * np.arange(300)
    scan = DelayScan(delays, np.full(len(delays), 0.9), "magnetic")
    with pytest.raises(np.linalg.LinAlgError):
        retrieve_amplitudes(scan, basis20, 6)
