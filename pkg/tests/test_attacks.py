from __future__ import annotations

import math

import numpy as np
import pytest

from drqkd.attacks import (
    PROBE_INDEX,
    BeamSplit,
    EveOutcome,
    InterceptResend,
    SuperpositionResend,
    UnitaryProbe,
    apply_attack,
    beam_split_apply,
    decohered_mixture,
    intercept_resend_apply,
    probe_apply,
    superposition_state,
)
from drqkd.fock_core import (
    BALANCED_I,
    MultiModeState,
    apply_beam_splitter,
    displaced_product,
    fidelity,
    photon_distribution,
)
from drqkd.protocol import CarrierLabel, ProtocolParams, carrier_state, compare_to_theory
from drqkd.theory import (
    SourceDistribution,
    beam_split_silent_exact,
    conditional_bit_prob,
    expected_output_distribution,
    p_zero,
    probe_overlaps,
    superposition_resend_exact,
)

from .conftest import SEED, within

HALF = SourceDistribution.symmetric(0.5)
IDEAL = expected_output_distribution(HALF, 1.0, 1.0)


def rng(seed=SEED):
    return np.random.default_rng(seed)


# specs ------------------------------------------------------------------


@pytest.mark.parametrize(
    "make",
    [
        lambda: InterceptResend(1.2),
        lambda: InterceptResend(0.5, -0.1),
        lambda: SuperpositionResend(eta_fraction=1.5),
        lambda: BeamSplit(0.9, 0.9),
        lambda: BeamSplit.from_t_mag2(1.1),
    ],
)
def test_invalid_specs_rejected(make):
    with pytest.raises(ValueError):
        make()


def test_beam_split_from_t_mag2():
    spec = BeamSplit.from_t_mag2(0.99)
    assert spec.t_mag2 == pytest.approx(0.99)


# intercept-resend -------------------------------------------------------


def test_intercept_resends_measured_bit_state():
    params = ProtocolParams(alpha=2.5)
    spec = InterceptResend(0.5, 0.5, alpha_star=2.5)
    s = carrier_state(CarrierLabel.BIT0, 2.5)
    r = rng()
    seen = 0
    for _ in range(200):
        resent, eve = intercept_resend_apply(CarrierLabel.BIT0, s, spec, r, params)
        if eve.outcome is EveOutcome.BIT0:
            seen += 1
            assert fidelity(resent, displaced_product((1, 0), (2.5, 2.5j), resent.cutoff)) == pytest.approx(1.0, abs=1e-12)
            assert eve.known_bit == 0
    assert seen > 50


def test_intercept_without_bit_resends_sends_only_disguised_after_failures(session):
    params = ProtocolParams(alpha=2.5)
    _, stats = session(params, InterceptResend(0.0, 0.0, alpha_star=2.5), n_trials=20_000)
    assert stats.disguised_prob == 0


def test_intercept_symmetric_disguised_terms(session):
    params = ProtocolParams(alpha=2.5)
    _, stats = session(params, InterceptResend(0.5, 0.5, alpha_star=2.5))
    n = stats.trial_count
    assert within(stats.disguised_by_side[0], 0.0625, n)
    assert within(stats.disguised_by_side[1], 0.0625, n)
    assert within(stats.disguised_prob, 0.125, n)


def test_intercept_disguised_rate_increases_with_resend_probability(session):
    params = ProtocolParams(alpha=2.5)
    n = 50_000
    rates = []
    for p in (0.2, 0.5, 0.8):
        _, stats = session(params, InterceptResend(p, 0.0, alpha_star=2.5), n_trials=n)
        assert within(stats.disguised_prob, p * 0.5 / 4, n)
        rates.append(stats.disguised_prob)
    for lo, hi in zip(rates, rates[1:]):
        sigma = math.sqrt(lo * (1 - lo) / n + hi * (1 - hi) / n)
        assert hi - lo > 3 * sigma


def test_partial_intercept_passes_most_carriers():
    s = carrier_state(CarrierLabel.BIT0, 1.0)
    r = rng()
    acted = sum(intercept_resend_apply(CarrierLabel.BIT0, s, InterceptResend(0.5, fraction=0.25), r)[1].acted for _ in range(4000))
    assert within(acted / 4000, 0.25, 4000)


# superposition-resend ---------------------------------------------------


@pytest.mark.parametrize("alpha_prime", [0.5, 1.0, 2.0])
def test_superposition_state_lands_on_one_rail(alpha_prime):
    s = superposition_state(0, alpha_prime)
    out = apply_beam_splitter(s, 0, 1, BALANCED_I)
    expect = displaced_product((1, 0), (0, 1j * math.sqrt(2) * alpha_prime), out.cutoff)
    assert fidelity(out, expect) > 1 - 1e-6
    s1 = apply_beam_splitter(superposition_state(1, alpha_prime), 0, 1, BALANCED_I)
    expect1 = displaced_product((0, 1), (1j * math.sqrt(2) * alpha_prime, 0), s1.cutoff)
    assert fidelity(s1, expect1) > 1 - 1e-6


def test_decohered_mixture_has_equal_weights():
    mix = decohered_mixture(0, 1.0)
    assert [w for w, _ in mix.components] == [0.5, 0.5]


def test_decohered_session_matches_exact_rate_at_unit_resend_amplitude(session):
    _, stats = session(ProtocolParams(), SuperpositionResend(1.0, 1.0, decohered=True))
    n = stats.trial_count
    exact = superposition_resend_exact(0.5, 1.0, 1.0, 1.0, True)
    assert within(stats.empirical.p_bit0, exact, n)
    # the large-amplitude formula does not describe this regime
    assert not within(stats.empirical.p_bit0, 0.024974, n)


def test_decohered_eve_fraction_by_branch_counting(session):
    eta, ap = 0.5, 3.0
    _, stats = session(ProtocolParams(), SuperpositionResend(ap, eta, decohered=True), n_trials=50_000)
    c, b = conditional_bit_prob(1.0), (1 - p_zero(ap)) / 2
    expect = eta * c * b / (eta * c * b + (1 - eta) * c)
    assert expect == pytest.approx(eta / (2 - eta), abs=1e-3)
    assert within(stats.eve_fraction, expect, stats.conclusive_count)


def test_decohered_rate_linear_in_eta(session):
    rates = []
    n = 50_000
    for eta in (0.0, 0.5, 1.0):
        _, stats = session(ProtocolParams(), SuperpositionResend(3.0, eta, decohered=True), n_trials=n)
        rates.append(stats.empirical.p_bit0)
    mid = (rates[0] + rates[2]) / 2
    sigma = math.sqrt(sum(r * (1 - r) / n for r in rates) / 2)
    assert abs(rates[1] - mid) < 3 * sigma


# beam splitting ---------------------------------------------------------


def test_transparent_tap_changes_nothing():
    s = carrier_state(CarrierLabel.BIT0, 1.0)
    r = rng()
    for _ in range(20):
        fwd, eve = beam_split_apply(CarrierLabel.BIT0, s, BeamSplit.from_t_mag2(1.0), r)
        assert fidelity(fwd, s) == pytest.approx(1.0, abs=1e-12)
        assert eve.outcome is EveOutcome.NO_MEASUREMENT
        assert eve.known_bit is None
    for _, tap in eve.tapped_state.components:
        assert photon_distribution(tap, 0)[0] == pytest.approx(1.0)
        assert photon_distribution(tap, 1)[0] == pytest.approx(1.0)


def test_beam_split_session(session):
    spec = BeamSplit.from_t_mag2(0.99)
    records, stats = session(ProtocolParams(), spec)
    n = stats.trial_count
    assert within(stats.empirical.p_bit0, 0.048867, n)
    exact_silent = beam_split_silent_exact(HALF, 1.0, 0.99)
    assert within(stats.eve_silent_fraction, exact_silent, n)


def test_beam_split_eve_information_on_sifted_key(session):
    records, stats = session(ProtocolParams(), BeamSplit.from_t_mag2(0.99))
    sifted = [r for r in records if r.outcome.bit is not None]
    silent = sum(r.eve_outcome is EveOutcome.NO_MEASUREMENT for r in sifted) / len(sifted)
    info = 1 - math.exp(-0.02)
    assert within(1 - silent, info, len(sifted))
    assert within(stats.eve_fraction, info, len(sifted))


# unitary probe ----------------------------------------------------------


def test_symmetric_probe_forwards_input():
    s = carrier_state(CarrierLabel.DISGUISED1, 1.0)
    fwd, eve = probe_apply(CarrierLabel.DISGUISED1, s, UnitaryProbe(1.0, 1.0))
    assert fidelity(fwd, s) == pytest.approx(1.0, abs=1e-12)
    assert all(abs(v) == pytest.approx(1.0) for v in probe_overlaps(1, 1, 1).as_dict().values())
    assert eve.probe_index == 4


def test_probe_bit0_forward():
    fwd, eve = probe_apply(CarrierLabel.BIT0, carrier_state(CarrierLabel.BIT0, 1.0), UnitaryProbe(0.9, 0.7))
    assert fidelity(fwd, displaced_product((1, 0), (0.9, 0.9j), fwd.cutoff)) == pytest.approx(1.0, abs=1e-12)
    assert eve.probe_index == PROBE_INDEX[CarrierLabel.BIT0] == 1


# invariants -------------------------------------------------------------

STRATEGIES = [
    InterceptResend(0.5, 0.5, alpha_star=1.0),
    SuperpositionResend(1.0, 1.0, decohered=False),
    SuperpositionResend(1.0, 1.0, decohered=True),
    BeamSplit.from_t_mag2(0.9),
    UnitaryProbe(0.9, 1.1),
]


@pytest.mark.parametrize("spec", STRATEGIES, ids=lambda s: type(s).__name__)
def test_forwarded_norms_and_record_fields(spec):
    r = rng()
    params = ProtocolParams()
    for label in CarrierLabel:
        s = carrier_state(label, 1.0)
        for _ in range(10):
            fwd, eve = apply_attack(label, s, spec, r, params)
            assert isinstance(fwd, MultiModeState)
            assert abs(fwd.norm() - 1) < 1e-6
            assert (eve.probe_index is not None) == isinstance(spec, UnitaryProbe)
            assert (eve.tapped_state is not None) == isinstance(spec, BeamSplit)


NULL_ATTACKS = [
    InterceptResend(0.0, 0.0, fraction=0.0),
    SuperpositionResend(eta_fraction=0.0),
    BeamSplit.from_t_mag2(1.0),
    UnitaryProbe(1.0, 1.0),
]


@pytest.mark.parametrize("spec", NULL_ATTACKS, ids=lambda s: type(s).__name__)
def test_null_attacks_are_invisible(session, spec):
    _, stats = session(ProtocolParams(), spec)
    assert compare_to_theory(stats, IDEAL).passed
    assert stats.eve_fraction == 0


def test_coherent_superposition_is_the_blind_spot(session):
    _, stats = session(ProtocolParams(), SuperpositionResend(3.0, 1.0, decohered=False))
    assert compare_to_theory(stats, IDEAL).passed
    assert stats.eve_fraction > 0.95
