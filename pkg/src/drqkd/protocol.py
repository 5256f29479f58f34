"""Alice -> channel -> Bob pipeline, sifting and session statistics."""

from __future__ import annotations

import cmath
import enum
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Hashable, Iterable, Sequence

import numpy as np

from .fock_core import (
    BALANCED_I,
    BALANCED_REAL,
    IDEAL_DETECTOR,
    BeamSplitterSpec,
    DetectorModel,
    FockCutoff,
    MixedState,
    MultiModeState,
    PhotonSampler,
    State,
    apply_beam_splitter,
    click_probabilities,
    compose_modes,
    displaced_product,
    permute_modes,
    trace_out,
    vacuum,
)
from .theory import OutputDistribution, SourceDistribution

if TYPE_CHECKING:
    from .attacks import AttackSpec, EveOutcome

SQRT2 = math.sqrt(2.0)


class EmptySession(ValueError):
    pass


class CarrierLabel(enum.Enum):
    BIT0 = "bit0"
    DISGUISED0 = "disguised0"
    BIT1 = "bit1"
    DISGUISED1 = "disguised1"

    @property
    def side(self) -> int:
        """0 for the first ensemble, 1 for the second."""
        return 0 if self in (CarrierLabel.BIT0, CarrierLabel.DISGUISED0) else 1

    @property
    def is_bit(self) -> bool:
        return self in (CarrierLabel.BIT0, CarrierLabel.BIT1)

    @classmethod
    def of(cls, side: int, is_bit: bool) -> "CarrierLabel":
        return [[cls.DISGUISED0, cls.BIT0], [cls.DISGUISED1, cls.BIT1]][side][int(is_bit)]


class Outcome(enum.Enum):
    BIT0 = "0"
    BIT1 = "1"
    INCONCLUSIVE = "?"

    @property
    def bit(self) -> int | None:
        return {"0": 0, "1": 1}.get(self.value)


ClickPattern = tuple[bool, bool, bool, bool]


@dataclass(frozen=True)
class PhysicalSourceParams:
    """Heralded single photon mixed with a strong coherent pump on Alice's splitter."""

    prep_efficiency: float
    mix_t: complex
    mix_r: complex
    pump_amplitude: complex

    def __post_init__(self):
        if not 0.0 <= self.prep_efficiency <= 1.0:
            raise ValueError("prep_efficiency must lie in [0, 1]")
        if abs(abs(self.mix_t) ** 2 + abs(self.mix_r) ** 2 - 1) > 1e-12:
            raise ValueError("|T|^2 + |R|^2 must equal 1")

    @property
    def implied(self) -> SourceDistribution:
        eta, r2 = self.prep_efficiency, abs(self.mix_r) ** 2
        p_bit = eta * r2
        return SourceDistribution(p_bit, 1 - p_bit, p_bit, 1 - p_bit)

    @property
    def alpha(self) -> complex:
        return complex(self.pump_amplitude) * complex(self.mix_t)


@dataclass(frozen=True)
class ProtocolParams:
    alpha: complex = 1.0
    alpha1: complex | None = None
    source: SourceDistribution = field(default_factory=SourceDistribution)
    cutoff: FockCutoff | None = None
    detectors: tuple[DetectorModel, ...] = (IDEAL_DETECTOR,) * 4
    channel_transmittance: float = 1.0
    physical_source: PhysicalSourceParams | None = None
    # per-trial (alpha, alpha1) pairs, cycled by trial index; empty = fixed amplitudes
    amplitude_schedule: tuple[tuple[complex, complex], ...] = ()
    detector_splitter: BeamSplitterSpec = BALANCED_REAL

    def __post_init__(self):
        if not 0.0 < self.channel_transmittance <= 1.0:
            raise ValueError("channel_transmittance must lie in (0, 1]")
        if len(self.detectors) != 4:
            raise ValueError("Bob needs exactly four detectors")
        object.__setattr__(self, "alpha", complex(self.alpha))
        if self.alpha1 is not None:
            object.__setattr__(self, "alpha1", complex(self.alpha1))

    def amplitudes(self, index: int = 0) -> tuple[complex, complex]:
        if self.amplitude_schedule:
            a, a1 = self.amplitude_schedule[index % len(self.amplitude_schedule)]
            return complex(a), complex(a1)
        if self.physical_source is not None:
            a = self.physical_source.alpha
            return a, a
        return self.alpha, self.alpha if self.alpha1 is None else self.alpha1

    @property
    def effective_source(self) -> SourceDistribution:
        return self.physical_source.implied if self.physical_source is not None else self.source


@dataclass(frozen=True, slots=True)
class TrialRecord:
    index: int
    sent: CarrierLabel
    pattern: ClickPattern
    outcome: Outcome
    eve_knowledge: int | None = None
    eve_outcome: "EveOutcome | None" = None


@dataclass(frozen=True)
class SessionStats:
    empirical: OutputDistribution
    disguised_prob: float
    mismatch_rate: float
    eve_fraction: float
    trial_count: int
    conclusive_count: int = 0
    # bit outcomes on DISGUISED0 / DISGUISED1 sends, each over all trials
    disguised_by_side: tuple[float, float] = (0.0, 0.0)
    # share of attacked trials where Eve's detectors stayed dark (None without such trials)
    eve_silent_fraction: float | None = None

    def as_dict(self) -> dict:
        return {
            "p_bit0": self.empirical.p_bit0,
            "p_bit1": self.empirical.p_bit1,
            "p_inconclusive": self.empirical.p_inconclusive,
            "p_disguised": self.disguised_prob,
            "mismatch": self.mismatch_rate,
            "eve_fraction": self.eve_fraction,
        }


# --------------------------------------------------------------------------
# carriers


def network_cutoff(*alphas: complex) -> FockCutoff:
    """Default cutoff for a carrier passing Bob's first splitter.

    The splitter can pile both rails' displacement into one mode, so the
    policy is applied to sqrt(2) times the largest amplitude.
    """
    return FockCutoff.for_amplitude(SQRT2 * max(abs(a) for a in alphas))


@lru_cache(maxsize=256)
def carrier_state(
    label: CarrierLabel, alpha: complex, alpha1: complex | None = None, cutoff: FockCutoff | None = None
) -> MultiModeState:
    """Two-rail carrier for ``label``.

    First ensemble: |n, alpha>|0, i alpha>; second: |n, i alpha1>|0, alpha1>,
    with n = 1 for bit states and n = 0 for disguised ones.
    """
    alpha = complex(alpha)
    alpha1 = alpha if alpha1 is None else complex(alpha1)
    n = 1 if label.is_bit else 0
    rails = (alpha, 1j * alpha) if label.side == 0 else (1j * alpha1, alpha1)
    amp = alpha if label.side == 0 else alpha1
    cut = cutoff or network_cutoff(amp)
    state = displaced_product((n, 0), rails, cut)
    return state.with_key(("carrier", label.value, amp, state.cutoff.n_max))


def alice_sample_carrier(
    params: ProtocolParams, rng, index: int = 0, side: int | None = None
) -> tuple[CarrierLabel, MultiModeState]:
    """Draw Alice's ensemble (fair coin), then bit vs disguised within it.

    Consumes exactly two uniforms. ``side`` forces the ensemble choice.
    """
    if params.physical_source is not None and not params.amplitude_schedule:
        label, state, _ = alice_physical_source(params.physical_source, rng, side=side, cutoff=params.cutoff)
        return label, state
    u_side, u_bit = rng.random(), rng.random()
    if side is None:
        side = 0 if u_side < 0.5 else 1
    src = params.source
    p_bit = src.p1 if side == 0 else src.p2
    label = CarrierLabel.of(side, u_bit < p_bit)
    alpha, alpha1 = params.amplitudes(index)
    return label, carrier_state(label, alpha, alpha1, params.cutoff)


def alice_physical_source(
    phys: PhysicalSourceParams, rng, side: int | None = None, cutoff: FockCutoff | None = None
) -> tuple[CarrierLabel, MultiModeState, SourceDistribution]:
    """Sample the carrier ensemble produced by a heralded photon plus pump splitter.

    The heralded mode holds a photon with probability ``prep_efficiency``; the
    splitter reflects it into the signal rail with probability ``|R|^2`` while
    displacing the rail by ``pump * T``. The second rail carries the matching
    coherent field with the ``i`` phase relation.
    """
    implied = phys.implied
    u_side, u_bit = rng.random(), rng.random()
    if side is None:
        side = 0 if u_side < 0.5 else 1
    label = CarrierLabel.of(side, u_bit < implied.p1)
    a = phys.alpha
    return label, carrier_state(label, a, a, cutoff), implied


# --------------------------------------------------------------------------
# receiver


def channel_loss(state: State, transmittance: float) -> State:
    """Pass each rail through a splitter to a discarded vacuum mode."""
    if transmittance == 1.0:
        return state
    if isinstance(state, MixedState):
        items = []
        for w, s in state.components:
            items += [(w * v, c) for v, c in channel_loss(s, transmittance).components]
        return MixedState.from_unnormalized(items)
    bs = BeamSplitterSpec.from_transmittance(transmittance)
    k = state.mode_count
    full = compose_modes([state, vacuum(k, state.cutoff)])
    for m in range(k):
        full = apply_beam_splitter(full, m, k + m, bs)
    return trace_out(full, list(range(k, 2 * k)))


def _detector_stage(two_mode: MultiModeState, splitter: BeamSplitterSpec) -> MultiModeState:
    s = apply_beam_splitter(two_mode, 0, 1, BALANCED_I)
    full = compose_modes([s, vacuum(2, s.cutoff)])
    full = permute_modes(full, (0, 2, 1, 3))
    full = apply_beam_splitter(full, 0, 1, splitter)
    return apply_beam_splitter(full, 2, 3, splitter)


def receiver(state: State, transmittance: float = 1.0, splitter: BeamSplitterSpec = BALANCED_REAL) -> State:
    """Loss, the receiver splitter, then one splitter per output rail.

    Output modes are (D1, D2, D3, D4); D1 and D2 share the first output rail.
    A pure input through a lossless channel stays pure.
    """
    if state.mode_count != 2:
        raise ValueError(f"receiver expects a two-rail carrier, got {state.mode_count} modes")
    lossy = channel_loss(state, transmittance)
    if isinstance(lossy, MultiModeState):
        return _detector_stage(lossy, splitter)
    return MixedState(tuple((w, _detector_stage(s, splitter)) for w, s in lossy.components))


def bob_network(carrier: State, params: ProtocolParams) -> State:
    """Bob's four-detector receiver applied to a two-rail carrier."""
    return receiver(carrier, params.channel_transmittance, params.detector_splitter)


_SAMPLERS: dict[Hashable, PhotonSampler] = {}
_SAMPLER_LOCK = threading.Lock()


def receiver_sampler(
    state: MultiModeState, transmittance: float = 1.0, splitter: BeamSplitterSpec = BALANCED_REAL
) -> PhotonSampler:
    """Photon-number sampler of ``receiver(state)``, memoized on ``state.key``."""
    if state.key is None:
        return PhotonSampler(receiver(state, transmittance, splitter))
    k = (state.key, transmittance, splitter)
    hit = _SAMPLERS.get(k)
    if hit is None:
        hit = PhotonSampler(receiver(state, transmittance, splitter))
        with _SAMPLER_LOCK:
            hit = _SAMPLERS.setdefault(k, hit)
    return hit


def clear_caches() -> None:
    with _SAMPLER_LOCK:
        _SAMPLERS.clear()
    carrier_state.cache_clear()


def classify_pattern(pattern: Sequence[bool]) -> Outcome:
    """Three-click rule.

    Bit 0: one click on (D1, D2) and both of (D3, D4). Bit 1: both of (D1, D2)
    and one of (D3, D4). Anything else is inconclusive.
    """
    d1, d2, d3, d4 = pattern
    first, second = int(d1) + int(d2), int(d3) + int(d4)
    if first == 1 and second == 2:
        return Outcome.BIT0
    if first == 2 and second == 1:
        return Outcome.BIT1
    return Outcome.INCONCLUSIVE


def infer_side(pattern: Sequence[bool], rng) -> int:
    """Guess the ensemble from which output rail saw more light.

    The first ensemble sends its coherent light to (D3, D4). Ties are broken
    by a fair coin; one uniform is always consumed.
    """
    u = rng.random()
    first, second = int(pattern[0]) + int(pattern[1]), int(pattern[2]) + int(pattern[3])
    if second > first:
        return 0
    if first > second:
        return 1
    return 0 if u < 0.5 else 1


def measure(state: MultiModeState, detectors: Sequence[DetectorModel], rng,
            transmittance: float = 1.0, splitter: BeamSplitterSpec = BALANCED_REAL) -> tuple[ClickPattern, Outcome]:
    """Run a carrier through a Bob-style receiver and classify the clicks."""
    pattern = receiver_sampler(state, transmittance, splitter).clicks(detectors, rng)
    return pattern, classify_pattern(pattern)


@dataclass(frozen=True)
class ExactPrediction:
    distribution: OutputDistribution
    disguised_prob: float
    mismatch_rate: float


def exact_prediction(params: ProtocolParams) -> ExactPrediction:
    """No-eavesdropper statistics by enumerating every click pattern of every carrier.

    Covers detector inefficiency, dark counts and channel loss. With an
    amplitude schedule the result is averaged over its entries.
    """
    src = params.effective_source
    weights = {
        CarrierLabel.BIT0: src.p1 / 2,
        CarrierLabel.DISGUISED0: src.p1_prime / 2,
        CarrierLabel.BIT1: src.p2 / 2,
        CarrierLabel.DISGUISED1: src.p2_prime / 2,
    }
    pairs = params.amplitude_schedule or (params.amplitudes(),)
    tot = {o: 0.0 for o in Outcome}
    disguised = wrong = 0.0
    for a, a1 in pairs:
        for label, w in weights.items():
            if w == 0:
                continue
            w = w / len(pairs)
            out = bob_network(carrier_state(label, a, a1, params.cutoff), params)
            for pattern, p in click_probabilities(out, params.detectors).items():
                o = classify_pattern(pattern)
                tot[o] += w * p
                if o.bit is None:
                    continue
                if not label.is_bit:
                    disguised += w * p
                    wrong += w * p
                elif o.bit != label.side:
                    wrong += w * p
    conclusive = tot[Outcome.BIT0] + tot[Outcome.BIT1]
    dist = OutputDistribution(tot[Outcome.BIT0], tot[Outcome.BIT1], max(0.0, 1 - conclusive))
    return ExactPrediction(dist, disguised, wrong / conclusive if conclusive else 0.0)


# --------------------------------------------------------------------------
# trials and sessions

TRIAL_DRAWS = 32
CHUNK = 4096


class UniformStream:
    """Finite list of uniforms handed out one at a time."""

    __slots__ = ("_vals", "_pos")

    def __init__(self, values: Sequence[float]):
        self._vals = values
        self._pos = 0

    def random(self) -> float:
        v = self._vals[self._pos]
        self._pos += 1
        return v


def trial_uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniforms for trials ``start .. start+count-1``; row ``i`` depends only on (seed, start+i).

    Trial ``j`` owns Philox blocks ``[j*TRIAL_DRAWS/4, (j+1)*TRIAL_DRAWS/4)`` of
    the stream keyed by ``seed``.
    """
    bg = np.random.Philox(key=seed, counter=start * (TRIAL_DRAWS // 4))
    return np.random.Generator(bg).random((count, TRIAL_DRAWS))


def trial_stream(seed: int, index: int) -> UniformStream:
    return UniformStream(trial_uniforms(seed, index, 1)[0].tolist())


def run_trial(params: ProtocolParams, attack: "AttackSpec | None", rng, index: int = 0) -> TrialRecord:
    """Alice's carrier, optional attack, Bob's receiver, clicks, classification."""
    from .attacks import apply_attack

    label, state = alice_sample_carrier(params, rng, index)
    eve = None
    if attack is not None:
        state, eve = apply_attack(label, state, attack, rng, params)
    sampler = receiver_sampler(state, params.channel_transmittance, params.detector_splitter)
    pattern = sampler.clicks(params.detectors, rng)
    return TrialRecord(
        index,
        label,
        pattern,
        classify_pattern(pattern),
        None if eve is None else eve.known_bit,
        None if eve is None else eve.outcome,
    )


def _run_chunk(params, attack, seed, start, count) -> list[TrialRecord]:
    rows = trial_uniforms(seed, start, count).tolist()
    return [run_trial(params, attack, UniformStream(row), start + i) for i, row in enumerate(rows)]


def run_session(
    params: ProtocolParams,
    attack: "AttackSpec | None" = None,
    n_trials: int = 200_000,
    seed: int = 0,
    threads: int = 1,
) -> tuple[list[TrialRecord], SessionStats]:
    """Run ``n_trials`` independent trials; results depend only on (params, attack, seed)."""
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    starts = list(range(0, n_trials, CHUNK))
    jobs = [(s, min(CHUNK, n_trials - s)) for s in starts]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda j: _run_chunk(params, attack, seed, *j), jobs))
    else:
        parts = [_run_chunk(params, attack, seed, *j) for j in jobs]
    records = [r for part in parts for r in part]
    return records, empirical_stats(records)


def empirical_stats(records: Iterable[TrialRecord]) -> SessionStats:
    """Outcome frequencies and the eavesdropping indicators of a session."""
    from .attacks import EveOutcome

    records = list(records)
    n = len(records)
    if n == 0:
        raise EmptySession("no trials to summarize")
    counts = {o: 0 for o in Outcome}
    disguised = [0, 0]
    mismatches = eve_right = 0
    attacked = silent = 0
    for rec in records:
        counts[rec.outcome] += 1
        bit = rec.outcome.bit
        if rec.eve_outcome is not None:
            attacked += 1
            silent += rec.eve_outcome is EveOutcome.NO_MEASUREMENT
        if bit is None:
            continue
        if not rec.sent.is_bit:
            disguised[rec.sent.side] += 1
            mismatches += 1
        elif bit != rec.sent.side:
            mismatches += 1
        if rec.eve_knowledge is not None and rec.eve_knowledge == bit:
            eve_right += 1
    conclusive = counts[Outcome.BIT0] + counts[Outcome.BIT1]
    return SessionStats(
        empirical=OutputDistribution(
            counts[Outcome.BIT0] / n, counts[Outcome.BIT1] / n, counts[Outcome.INCONCLUSIVE] / n
        ),
        disguised_prob=sum(disguised) / n,
        mismatch_rate=mismatches / conclusive if conclusive else 0.0,
        eve_fraction=eve_right / conclusive if conclusive else 0.0,
        trial_count=n,
        conclusive_count=conclusive,
        disguised_by_side=(disguised[0] / n, disguised[1] / n),
        eve_silent_fraction=silent / attacked if attacked else None,
    )


# --------------------------------------------------------------------------
# validation

MIN_TRIALS = 1000


@dataclass(frozen=True)
class Check:
    empirical: float
    expected: float
    z: float
    passed: bool


@dataclass(frozen=True)
class Verdict:
    status: str  # "pass", "fail" or "insufficient-data"
    checks: dict[str, Check] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    @property
    def failed(self) -> list[str]:
        return [k for k, c in self.checks.items() if not c.passed]

    def as_dict(self) -> dict:
        return {
            "status": self.status,
            "failed": self.failed,
            "checks": {
                k: {"empirical": c.empirical, "expected": c.expected, "z": _finite(c.z), "passed": c.passed}
                for k, c in self.checks.items()
            },
        }


def _finite(z: float):
    return z if math.isfinite(z) else ("inf" if z > 0 else "-inf")


def _z(emp: float, exp: float, n: int) -> float:
    sigma = math.sqrt(exp * (1 - exp) / n)
    if sigma == 0:
        return 0.0 if emp == exp else math.copysign(math.inf, emp - exp)
    return (emp - exp) / sigma


def _z_excess(emp: float, exp: float, n: int) -> float:
    """One-sided z of ``emp`` above ``exp``; falls back to the empirical spread when ``exp`` is 0."""
    if n == 0:
        return 0.0
    p = exp if exp > 0 else emp
    sigma = math.sqrt(p * (1 - p) / n)
    if sigma == 0:
        return 0.0 if emp <= exp else math.inf
    return (emp - exp) / sigma


def compare_to_theory(
    stats: SessionStats,
    expected: OutputDistribution,
    n: int | None = None,
    expected_disguised: float = 0.0,
    expected_mismatch: float | None = 0.0,
    z_max: float = 3.0,
) -> Verdict:
    """Binomial z-tests of a session against a predicted outcome distribution.

    Each outcome frequency gets a two-sided test; the disguised probability and
    the mismatch rate fail only when they sit more than ``z_max`` sigma above
    their expected values (zero for an ideal channel). ``expected_mismatch=None``
    skips the mismatch test.
    """
    n = stats.trial_count if n is None else n
    if n < MIN_TRIALS:
        return Verdict("insufficient-data")
    checks = {}
    for name, emp, exp in zip(
        ("p_bit0", "p_bit1", "p_inconclusive"), stats.empirical.as_tuple(), expected.as_tuple()
    ):
        z = _z(emp, exp, n)
        checks[name] = Check(emp, exp, z, abs(z) <= z_max)
    z = _z_excess(stats.disguised_prob, expected_disguised, n)
    checks["p_disguised"] = Check(stats.disguised_prob, expected_disguised, z, z <= z_max)
    if expected_mismatch is not None:
        z = _z_excess(stats.mismatch_rate, expected_mismatch, stats.conclusive_count)
        checks["mismatch"] = Check(stats.mismatch_rate, expected_mismatch, z, z <= z_max)
    status = "pass" if all(c.passed for c in checks.values()) else "fail"
    return Verdict(status, checks)
