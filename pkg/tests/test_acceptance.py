"""Acceptance criteria, one test each; every test reports a PASS/FAIL line.

The lines are printed in the terminal summary under "acceptance criteria".
"""

from __future__ import annotations

import cmath
import itertools
import json
import math
import time

import jsonschema
import numpy as np

from drqkd.attacks import BeamSplit, InterceptResend, SuperpositionResend
from drqkd.cli import main
from drqkd.fock_core import (
    BALANCED_I,
    BeamSplitterSpec,
    FockCutoff,
    MultiModeState,
    apply_beam_splitter,
    displaced_fock_amplitudes,
    displaced_product,
    fidelity,
    quadrature_mean,
    superpose,
)
from drqkd.oracles import apply_beam_splitter_oracle, displaced_fock_oracle
from drqkd.protocol import CarrierLabel, Outcome, ProtocolParams, carrier_state, classify_pattern, compare_to_theory, run_session
from drqkd.schema import CONFIG, RESULT
from drqkd.theory import (
    SourceDistribution,
    beam_split_prediction,
    expected_output_distribution,
    intercept_resend_prediction,
    mutual_information,
    p_zero,
    probe_overlaps,
    superposition_resend_prediction,
)

from .conftest import SEED, report

N = 200_000
HALF = SourceDistribution.symmetric(0.5)
IDEAL = expected_output_distribution(HALF, 1.0, 1.0)


def sigma(p: float, n: int = N) -> float:
    return math.sqrt(p * (1 - p) / n)


def z(emp: float, exp: float, n: int = N) -> float:
    return (emp - exp) / sigma(exp, n)


# 1 ----------------------------------------------------------------------


def test_criterion_1_closed_forms():
    t0 = time.perf_counter()
    e99 = math.exp(-0.99)
    hand_beam = 0.5 * 0.99 / 4 * (1 - (e99 * e99 + 2 * e99 * (1 - e99)))
    checks = {
        "p_zero(1)": (p_zero(1), 0.600423),
        "p_bit0(P=0.5, alpha=1)": (expected_output_distribution(HALF, 1, 1).p_bit0, 0.049947),
        "I(equal weights)": (mutual_information(0.3, 0.3), 1.0),
        "intercept p_bit0": (intercept_resend_prediction(HALF, 0.5)[0], 0.15625),
        "intercept P_d": (intercept_resend_prediction(HALF, 0.5)[1], 0.0625),
        "superposition decohered p_bit0": (superposition_resend_prediction(0.5, 1, 1, True)[0].p_bit0, 0.024974),
        "beam-split P_vac": (beam_split_prediction(0.5, 1, 0.99)[1], 0.980199),
        "beam-split p_bit0 (hand evaluation)": (beam_split_prediction(0.5, 1, 0.99)[0].p_bit0, hand_beam),
        "<e4|e2>(1, 0.9, 0.9)": (probe_overlaps(1, 0.9, 0.9).e4_e2.real, 0.683861),
    }
    worst = max(abs(got - want) for got, want in checks.values())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-6 and elapsed < 1.0
    report(
        "1 closed forms",
        ok,
        f"max |dev| {worst:.1e} over {len(checks)} worked points (tol 1e-6), {elapsed * 1e3:.1f} ms; "
        f"beam-split p_bit0 evaluates to {hand_beam:.7f}",
    )
    assert ok, {k: v for k, v in checks.items() if abs(v[0] - v[1]) > 1e-6}


# 2 ----------------------------------------------------------------------


def _eq4_closed_forms(alpha: float, cut: FockCutoff) -> dict[CarrierLabel, MultiModeState]:
    b = 1j * math.sqrt(2) * alpha
    return {
        CarrierLabel.BIT0: superpose([(1, displaced_product((1, 0), (0, b), cut)), (1j, displaced_product((0, 1), (0, b), cut))]),
        CarrierLabel.DISGUISED0: displaced_product((0, 0), (0, b), cut),
        CarrierLabel.BIT1: superpose([(1, displaced_product((1, 0), (b, 0), cut)), (1j, displaced_product((0, 1), (b, 0), cut))]),
        CarrierLabel.DISGUISED1: displaced_product((0, 0), (b, 0), cut),
    }


def test_criterion_2_engine_matches_oracle():
    t0 = time.perf_counter()
    cut = FockCutoff(40)
    disp = 0.0
    for n in (0, 1):
        for r in np.linspace(0, 3, 7):
            for phi in np.linspace(0, 2 * math.pi, 8, endpoint=False):
                a = r * cmath.exp(1j * phi)
                ref = displaced_fock_oracle(n, a, cut.dim)
                disp = max(disp, float(np.max(np.abs(displaced_fock_amplitudes(n, a, cut) - ref))))

    rng = np.random.default_rng(SEED)
    bs_err = 0.0
    small = FockCutoff(10)
    n_tot = np.add.outer(np.arange(small.dim), np.arange(small.dim))
    for _ in range(20):
        amps = rng.normal(size=(small.dim,) * 2) + 1j * rng.normal(size=(small.dim,) * 2)
        amps[n_tot > small.n_max] = 0
        state = MultiModeState(amps / np.linalg.norm(amps), small)
        theta, phi, psi = rng.uniform(0, 2 * math.pi, 3)
        bs = BeamSplitterSpec(math.cos(theta) * cmath.exp(1j * phi), math.sin(theta) * cmath.exp(1j * psi))
        ref = apply_beam_splitter_oracle(state.amplitudes, bs)
        bs_err = max(bs_err, float(np.max(np.abs(apply_beam_splitter(state, 0, 1, bs).amplitudes - ref))))
    # carriers: compare on sectors the truncated oracle represents exactly
    for label in CarrierLabel:
        s = carrier_state(label, 0.5, cutoff=FockCutoff(23))
        d = 24
        ref = apply_beam_splitter_oracle(s.amplitudes, BALANCED_I)
        valid = np.add.outer(np.arange(d), np.arange(d)) <= d - 1
        out = apply_beam_splitter(s, 0, 1, BALANCED_I).amplitudes
        bs_err = max(bs_err, float(np.max(np.abs(out - ref)[valid])))

    worst_fid = 1.0
    for alpha in (0.5, 1.0, 2.0):
        for label, closed in _eq4_closed_forms(alpha, carrier_state(CarrierLabel.BIT0, alpha).cutoff).items():
            sim = apply_beam_splitter(carrier_state(label, alpha, alpha), 0, 1, BALANCED_I)
            worst_fid = min(worst_fid, fidelity(sim, closed))
    elapsed = time.perf_counter() - t0
    ok = disp <= 1e-8 and bs_err <= 1e-8 and worst_fid > 1 - 1e-6 and elapsed < 30
    report(
        "2 engine vs oracle",
        ok,
        f"displacement {disp:.1e}, beam splitter {bs_err:.1e} (tol 1e-8); "
        f"receiver-splitter closed forms min fidelity 1-{1 - worst_fid:.1e}; {elapsed:.1f} s",
    )
    assert ok


# 3 ----------------------------------------------------------------------


def test_criterion_3_monte_carlo_matches_theory():
    t0 = time.perf_counter()
    _, stats = run_session(ProtocolParams(alpha=1.0), None, N, SEED)
    elapsed = time.perf_counter() - t0
    zs = [z(e, x) for e, x in zip(stats.empirical.as_tuple(), IDEAL.as_tuple())]
    ok = all(abs(v) <= 3 for v in zs) and stats.disguised_prob == 0 and stats.mismatch_rate == 0 and elapsed < 60
    report(
        "3 Monte Carlo vs theory",
        ok,
        "z(bit0, bit1, inconclusive) = (" + ", ".join(f"{v:+.2f}" for v in zs) + f"); "
        f"P_d {stats.disguised_prob}, mismatch {stats.mismatch_rate}; {elapsed:.1f} s",
    )
    assert ok


# 4 ----------------------------------------------------------------------


def test_criterion_4a_intercept_resend():
    t0 = time.perf_counter()
    params = ProtocolParams(alpha=2.5)
    _, stats = run_session(params, InterceptResend(0.5, 0.0, alpha_star=2.5), N, SEED)
    elapsed = time.perf_counter() - t0
    zb, zd = z(stats.empirical.p_bit0, 0.15625), z(stats.disguised_prob, 0.0625)
    ok = abs(zb) <= 3 and abs(zd) <= 3 and elapsed < 90
    report(
        "4a intercept-resend",
        ok,
        f"p_bit0 {stats.empirical.p_bit0:.5f} (z {zb:+.2f} vs 0.15625), P_d {stats.disguised_prob:.5f} "
        f"(z {zd:+.2f} vs 0.0625); {elapsed:.1f} s",
    )
    assert ok


def test_criterion_4b_decohered_superposition_detected():
    t0 = time.perf_counter()
    _, stats = run_session(ProtocolParams(), SuperpositionResend(3.0, 1.0, decohered=True), N, SEED)
    elapsed = time.perf_counter() - t0
    verdict = compare_to_theory(stats, IDEAL)
    zb = verdict.checks["p_bit0"].z
    ok = not verdict.passed and zb <= -10 and elapsed < 90
    report("4b decohered superposition", ok, f"verdict {verdict.status}, z(p_bit0) {zb:+.1f}; {elapsed:.1f} s")
    assert ok


def test_criterion_4c_coherent_superposition_undetected():
    t0 = time.perf_counter()
    _, stats = run_session(ProtocolParams(), SuperpositionResend(3.0, 1.0, decohered=False), N, SEED)
    elapsed = time.perf_counter() - t0
    verdict = compare_to_theory(stats, IDEAL)
    ok = verdict.passed and stats.eve_fraction > 0.95 and elapsed < 90
    report(
        "4c coherent superposition",
        ok,
        f"verdict {verdict.status}, eve_fraction {stats.eve_fraction:.4f}; {elapsed:.1f} s",
    )
    assert ok


_BEAM: dict = {}


def _beam_session():
    if not _BEAM:
        t0 = time.perf_counter()
        _BEAM["stats"] = run_session(ProtocolParams(), BeamSplit.from_t_mag2(0.99), N, SEED)[1]
        _BEAM["elapsed"] = time.perf_counter() - t0
    return _BEAM["stats"], _BEAM["elapsed"]


def test_criterion_4d_beam_split_bob_rate():
    stats, elapsed = _beam_session()
    zb = z(stats.empirical.p_bit0, 0.048867)
    ok = abs(zb) <= 3 and elapsed < 90
    report("4d beam split, Bob p_bit0", ok, f"{stats.empirical.p_bit0:.6f} (z {zb:+.2f} vs 0.048867); {elapsed:.1f} s")
    assert ok


def test_criterion_4d_beam_split_eve_silent_fraction():
    stats, elapsed = _beam_session()
    zs = z(stats.eve_silent_fraction, 0.980199)
    ok = abs(zs) <= 3 and elapsed < 90
    report(
        "4d beam split, Eve silent fraction",
        ok,
        f"{stats.eve_silent_fraction:.6f} (z {zs:+.1f} vs 0.980199); {elapsed:.1f} s",
    )
    assert ok


# 5 ----------------------------------------------------------------------


def test_criterion_5_invariant_suites():
    rng = np.random.default_rng(SEED)
    cut = FockCutoff(7)
    n_tot = np.add.outer(np.arange(cut.dim), np.arange(cut.dim))
    norm_dev = 0.0
    for _ in range(1000):
        amps = rng.normal(size=(cut.dim,) * 2) + 1j * rng.normal(size=(cut.dim,) * 2)
        amps[n_tot > cut.n_max] = 0
        s = MultiModeState(amps / np.linalg.norm(amps), cut)
        theta, phi, psi = rng.uniform(0, 2 * math.pi, 3)
        bs = BeamSplitterSpec(math.cos(theta) * cmath.exp(1j * phi), math.sin(theta) * cmath.exp(1j * psi))
        norm_dev = max(norm_dev, abs(apply_beam_splitter(s, 0, 1, bs).norm() - s.norm()))

    quad = 0.0
    for alpha in (0.5, 1.0, 2.0):
        s0 = displaced_product((0,), (alpha,))
        s1 = displaced_product((1,), (alpha,), s0.cutoff)
        for theta in np.linspace(0, 2 * math.pi, 16, endpoint=False):
            quad = max(quad, abs(quadrature_mean(s0, 0, theta) - quadrature_mean(s1, 0, theta)))

    outcomes = [classify_pattern(p) for p in itertools.product((False, True), repeat=4)]
    total = all(isinstance(o, Outcome) for o in outcomes) and sum(o is not Outcome.INCONCLUSIVE for o in outcomes) == 4

    runs = [run_session(ProtocolParams(), None, 20_000, SEED, threads=k) for k in (1, 2, 4)]
    deterministic = all(r[0] == runs[0][0] for r in runs)

    ok = norm_dev < 1e-6 and quad < 1e-8 and total and deterministic
    report(
        "5 invariant suites",
        ok,
        f"norm dev {norm_dev:.1e}, quadrature gap {quad:.1e}, classifier total {total}, "
        f"thread-count determinism {deterministic}",
    )
    assert ok


# 6 ----------------------------------------------------------------------


def test_criterion_6_cli_contract(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_trials": 1000, "seed": 7}))
    codes = {}
    codes["simulate"] = main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["simulate", "--config", str(cfg), "--threads", "2", "--out", str(tmp_path / "b")])
    docs = [json.loads((tmp_path / d / "summary.json").read_text()) for d in ("a", "b")]
    for doc in docs:
        jsonschema.validate(doc, RESULT)
        jsonschema.validate(doc["config"], CONFIG)
        doc["meta"].pop("runtime")
    same_csv = (tmp_path / "a" / "trials.csv").read_bytes() == (tmp_path / "b" / "trials.csv").read_bytes()
    identical = same_csv and docs[0] == docs[1]

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"unexpected": True}))
    codes["schema"] = main(["simulate", "--config", str(bad), "--out", str(tmp_path / "c")])
    rt = tmp_path / "rt.json"
    rt.write_text(json.dumps({"protocol": {"alpha": 3, "cutoff": 2}, "n_trials": 10}))
    codes["runtime"] = main(["simulate", "--config", str(rt), "--out", str(tmp_path / "d")])
    att = tmp_path / "att.json"
    att.write_text(json.dumps({"attack": {"type": "superposition_resend", "alpha_prime": 3, "decohered": True}, "n_trials": 20000}))
    codes["validation"] = main(["validate", "--config", str(att), "--out", str(tmp_path / "e")])
    expected = {"simulate": 0, "schema": 2, "runtime": 3, "validation": 4}
    ok = identical and codes == expected
    report("6 CLI contract", ok, f"exit codes {codes}, schema round-trip ok, byte-identical reruns {identical}")
    assert ok
