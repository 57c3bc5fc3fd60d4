"""Round-trip tests for the JSON fixture layout."""

import numpy as np

from ofdmlink import fixtures
from ofdmlink.channel import draw_channel
from ofdmlink.equalization import CpeUpdate
from ofdmlink.estimation import EstimatorState
from ofdmlink.impairments import IqParams, gen_phase_noise
from ofdmlink.numerics import RandomSource


def test_complex_layout_is_re_im_pairs():
    a = np.array([1 + 2j, -3j])
    assert fixtures.complex_to_json(a) == [[1.0, 2.0], [0.0, -3.0]]


def test_complex_round_trip():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(3, 4, 2)) + 1j * rng.normal(size=(3, 4, 2))
    np.testing.assert_array_equal(fixtures.complex_from_json(fixtures.complex_to_json(a)), a)


def test_bits_hex_round_trip():
    rng = np.random.default_rng(2)
    bits = rng.integers(0, 2, size=101)
    text = fixtures.bits_to_hex(bits)
    int(text, 16)  # well-formed hex
    np.testing.assert_array_equal(fixtures.bits_from_hex(text, 101), bits)


def test_channel_round_trip(tmp_path):
    ch = draw_channel(2, 3, 7, 2.0, RandomSource(3).child("ch"))
    path = tmp_path / "channel.json"
    fixtures.save(fixtures.channel_to_dict(ch), path)
    back = fixtures.channel_from_dict(fixtures.load(path))
    np.testing.assert_array_equal(back.taps, ch.taps)
    np.testing.assert_array_equal(back.freq, ch.freq)
    assert back.n_fft == ch.n_fft


def test_iq_round_trip():
    iq = IqParams.uniform(3, 5.0, 10.0)
    back = fixtures.iq_from_dict(fixtures.iq_to_dict(iq))
    np.testing.assert_array_equal(back.eps, iq.eps)
    np.testing.assert_array_equal(back.k1, iq.k1)


def test_trace_round_trip():
    tr = gen_phase_noise(5e3, 5e-8, 50, 2, RandomSource(4).child("pn"))
    back = fixtures.trace_from_dict(fixtures.trace_to_dict(tr))
    np.testing.assert_array_equal(back.phi, tr.phi)
    assert back.beta == tr.beta and back.ts == tr.ts


def test_state_round_trip():
    rng = np.random.default_rng(5)
    state = EstimatorState(
        h_pre=rng.normal(size=(64, 2, 2)) + 1j * rng.normal(size=(64, 2, 2)),
        k1=IqParams.uniform(2, 5.0, 10.0).k1,
        psi=np.eye(2, dtype=complex) * 0.1,
        eps_hat=np.array([1.1, 1.1]),
        theta_hat=np.deg2rad([5.0, 5.0]),
    )
    back = fixtures.state_from_dict(fixtures.state_to_dict(state))
    np.testing.assert_array_equal(back.h_pre, state.h_pre)
    np.testing.assert_array_equal(back.k1, state.k1)
    np.testing.assert_array_equal(back.k2, state.k2)
    np.testing.assert_array_equal(back.eps_hat, state.eps_hat)


def test_state_without_iq_estimates():
    state = EstimatorState(
        h_pre=np.zeros((8, 1, 1), dtype=complex),
        k1=np.ones(1, dtype=complex),
        psi=np.zeros((1, 1), dtype=complex),
    )
    back = fixtures.state_from_dict(fixtures.state_to_dict(state))
    assert back.eps_hat is None


def test_cpe_round_trip():
    cpe = CpeUpdate(upsilon=np.array([1.0 + 0.1j, 0.9 - 0.2j]), flagged=True)
    back = fixtures.cpe_from_dict(fixtures.cpe_to_dict(cpe))
    np.testing.assert_array_equal(back.upsilon, cpe.upsilon)
    assert back.flagged is True


def test_frame_truth_round_trip(tmp_path):
    from ofdmlink.framing import (
        FrameConfig,
        assemble_frame,
        build_preamble,
        build_subcarrier_map,
    )

    config = FrameConfig(m_t=2, m_r=2, symbols_per_frame=6)
    smap = build_subcarrier_map(64)
    pre = build_preamble(2, smap)
    bits = RandomSource(6).child("payload").integers(
        0, 2, size=config.n_data_symbols * 48 * 2 * 4
    )
    _, truth = assemble_frame(config, smap, bits, pre)
    path = tmp_path / "truth.json"
    fixtures.save(fixtures.truth_to_dict(truth), path)
    back = fixtures.truth_from_dict(fixtures.load(path))
    np.testing.assert_array_equal(back.bits, truth.bits)
    np.testing.assert_array_equal(back.data_symbols, truth.data_symbols)
    np.testing.assert_array_equal(back.pilots, truth.pilots)
    np.testing.assert_array_equal(back.grids, truth.grids)


def test_grid_round_trip():
    rng = np.random.default_rng(7)
    g = rng.normal(size=(3, 64, 2)) + 1j * rng.normal(size=(3, 64, 2))
    np.testing.assert_array_equal(fixtures.grid_from_dict(fixtures.grid_to_dict(g)), g)
