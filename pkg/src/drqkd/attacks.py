"""Eavesdropping strategies as transformations of the carrier on its way to Bob."""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Union

from .fock_core import (
    BALANCED_I,
    BeamSplitterSpec,
    FockCutoff,
    MixedState,
    MultiModeState,
    State,
    apply_beam_splitter,
    compose_modes,
    condition_on_photon_numbers,
    displaced_product,
    fidelity,
    superpose,
    trace_out,
    vacuum,
)
from .protocol import (
    CarrierLabel,
    ProtocolParams,
    carrier_state,
    infer_side,
    measure,
    network_cutoff,
)


class EveOutcome(enum.Enum):
    BIT0 = "0"
    BIT1 = "1"
    INCONCLUSIVE = "?"
    NO_MEASUREMENT = "-"

    @property
    def bit(self) -> int | None:
        return {"0": 0, "1": 1}.get(self.value)


def _check_prob(name, v):
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class InterceptResend:
    """Measure like Bob, resend a fresh carrier.

    ``p1_star`` / ``p2_star``: chance of resending the bit state (rather than the
    disguised one) after an inconclusive result attributed to the first /
    second ensemble. ``fraction`` of carriers are intercepted at all.
    """

    p1_star: float
    p2_star: float = 0.0
    alpha_star: complex | None = None
    fraction: float = 1.0

    def __post_init__(self):
        for name in ("p1_star", "p2_star", "fraction"):
            _check_prob(name, getattr(self, name))


@dataclass(frozen=True)
class SuperpositionResend:
    alpha_prime: complex | None = None
    eta_fraction: float = 1.0
    decohered: bool = False

    def __post_init__(self):
        _check_prob("eta_fraction", self.eta_fraction)


@dataclass(frozen=True)
class BeamSplit:
    t_e: complex
    r_e: complex

    def __post_init__(self):
        BeamSplitterSpec(self.t_e, self.r_e)

    @classmethod
    def from_t_mag2(cls, t_mag2: float) -> "BeamSplit":
        _check_prob("t_mag2", t_mag2)
        return cls(math.sqrt(t_mag2), math.sqrt(1 - t_mag2))

    @property
    def splitter(self) -> BeamSplitterSpec:
        return BeamSplitterSpec(self.t_e, self.r_e)

    @property
    def t_mag2(self) -> float:
        return abs(self.t_e) ** 2


@dataclass(frozen=True)
class UnitaryProbe:
    alpha_e: complex
    alpha_1e: complex


AttackSpec = Union[InterceptResend, SuperpositionResend, BeamSplit, UnitaryProbe]


@dataclass(frozen=True)
class EveRecord:
    acted: bool
    outcome: EveOutcome
    probe_index: int | None = None
    tapped_state: State | None = None
    # bit Eve is certain Bob holds if his result is conclusive
    known_bit: int | None = None


PASS = EveRecord(False, EveOutcome.NO_MEASUREMENT)


def _amp(value: complex | None, params: ProtocolParams) -> complex:
    return params.amplitudes()[0] if value is None else complex(value)


# --------------------------------------------------------------------------
# intercept-resend


def intercept_resend_apply(
    label: CarrierLabel, state: MultiModeState, spec: InterceptResend, rng, params: ProtocolParams | None = None
) -> tuple[MultiModeState, EveRecord]:
    params = params or ProtocolParams()
    if rng.random() >= spec.fraction:
        return state, PASS
    pattern, outcome = measure(state, params.detectors, rng)
    a = _amp(spec.alpha_star, params)
    if outcome.bit is not None:
        side, send_bit = outcome.bit, True
    else:
        side = infer_side(pattern, rng)
        send_bit = rng.random() < (spec.p1_star if side == 0 else spec.p2_star)
    resent = carrier_state(CarrierLabel.of(side, send_bit), a, a, params.cutoff)
    return resent, EveRecord(True, EveOutcome(outcome.value), known_bit=side if send_bit else None)


# --------------------------------------------------------------------------
# superposition resend


@lru_cache(maxsize=64)
def superposition_state(side: int, alpha_prime: complex, cutoff: FockCutoff | None = None) -> MultiModeState:
    """Eve's dual-rail superposition that the receiver splitter maps onto a single rail.

    side 0: (|1,a>|0,ia> - i|0,a>|1,ia>)/sqrt(2);
    side 1: (-i|1,ia>|0,a> + |0,ia>|1,a>)/sqrt(2).
    """
    a = complex(alpha_prime)
    cut = cutoff or network_cutoff(a)
    if side == 0:
        rails, c = (a, 1j * a), (1.0, -1j)
    else:
        rails, c = (1j * a, a), (-1j, 1.0)
    first = displaced_product((1, 0), rails, cut)
    second = displaced_product((0, 1), rails, first.cutoff)
    return superpose(
        [(c[0], first), (c[1], second)], key=("psi", side, a, first.cutoff.n_max)
    )


@lru_cache(maxsize=64)
def decohered_component(side: int, which: int, alpha_prime: complex, cutoff: FockCutoff | None = None) -> MultiModeState:
    """One of the two equally weighted members of the dephased superposition."""
    a = complex(alpha_prime)
    rails = (a, 1j * a) if side == 0 else (1j * a, a)
    photons = (1, 0) if which == 0 else (0, 1)
    s = displaced_product(photons, rails, cutoff or network_cutoff(a))
    return s.with_key(("psi-mix", side, which, a, s.cutoff.n_max))


def decohered_mixture(side: int, alpha_prime: complex, cutoff: FockCutoff | None = None) -> MixedState:
    return MixedState(
        ((0.5, decohered_component(side, 0, alpha_prime, cutoff)), (0.5, decohered_component(side, 1, alpha_prime, cutoff)))
    )


def superposition_resend_apply(
    label: CarrierLabel, state: MultiModeState, spec: SuperpositionResend, rng, params: ProtocolParams | None = None
) -> tuple[MultiModeState, EveRecord]:
    """Eve measures; on a bit she resends the superposition (or a draw from its
    dephased mixture), otherwise the disguised state of the ensemble she infers."""
    params = params or ProtocolParams()
    if rng.random() >= spec.eta_fraction:
        return state, PASS
    pattern, outcome = measure(state, params.detectors, rng)
    a = _amp(spec.alpha_prime, params)
    if outcome.bit is None:
        side = infer_side(pattern, rng)
        resent = carrier_state(CarrierLabel.of(side, False), a, a, params.cutoff)
        return resent, EveRecord(True, EveOutcome(outcome.value))
    side = outcome.bit
    if spec.decohered:
        resent = decohered_component(side, 0 if rng.random() < 0.5 else 1, a, params.cutoff)
    else:
        resent = superposition_state(side, a, params.cutoff)
    return resent, EveRecord(True, EveOutcome(outcome.value), known_bit=side)


# --------------------------------------------------------------------------
# beam splitting


@dataclass(frozen=True)
class TapTable:
    """Joint description of Bob's forwarded rails and Eve's taps for one carrier.

    ``outcomes[i] = (photons on Eve's two detectors, probability, forwarded state)``.
    """

    outcomes: tuple[tuple[tuple[int, int], float, MultiModeState], ...]
    cumulative: tuple[float, ...]
    tapped_state: MixedState


_TAPS: dict[Hashable, TapTable] = {}
_TAP_LOCK = threading.Lock()


def tap_table(state: MultiModeState, spec: BeamSplit) -> TapTable:
    """Split each rail on Eve's splitter, then count photons behind her receiver splitter.

    Conditioning on Eve's photon numbers leaves Bob's rails in a pure state,
    so Eve's and Bob's results are sampled jointly without approximation.
    """
    cache_key = None if state.key is None else (state.key, spec)
    if cache_key is not None and cache_key in _TAPS:
        return _TAPS[cache_key]
    full = compose_modes([state, vacuum(2, state.cutoff)])
    full = apply_beam_splitter(full, 0, 2, spec.splitter)
    full = apply_beam_splitter(full, 1, 3, spec.splitter)
    tapped = trace_out(full, (0, 1))
    eve_view = apply_beam_splitter(full, 2, 3, BALANCED_I)
    distinct: list[MultiModeState] = []
    outcomes = []
    for photons, p, fwd in condition_on_photon_numbers(eve_view, (2, 3)):
        for j, known in enumerate(distinct):
            if fidelity(known, fwd) > 1 - 1e-12:
                fwd = known
                break
        else:
            j = len(distinct)
            fwd = fwd.with_key(None if state.key is None else ("tap", state.key, spec, j))
            distinct.append(fwd)
        outcomes.append((photons, p, fwd))
    cum, acc = [], 0.0
    for _, p, _ in outcomes:
        acc += p
        cum.append(acc)
    cum[-1] = 1.0
    table = TapTable(tuple(outcomes), tuple(cum), tapped)
    if cache_key is not None:
        with _TAP_LOCK:
            table = _TAPS.setdefault(cache_key, table)
    return table


def beam_split_apply(
    label: CarrierLabel, state: MultiModeState, spec: BeamSplit, rng, params: ProtocolParams | None = None
) -> tuple[MultiModeState, EveRecord]:
    """Forward the transmitted rails to Bob; Eve reads her taps through her own receiver splitter.

    Eve's result: light only on her second detector -> first ensemble (bit 0),
    only on her first -> bit 1, none -> no measurement, both -> inconclusive.
    """
    from bisect import bisect_right

    params = params or ProtocolParams()
    table = tap_table(state, spec)
    photons, _, forwarded = table.outcomes[bisect_right(table.cumulative, rng.random())]
    c1 = rng.random() < params.detectors[0].click_probability(photons[0])
    c2 = rng.random() < params.detectors[1].click_probability(photons[1])
    outcome = {
        (False, False): EveOutcome.NO_MEASUREMENT,
        (False, True): EveOutcome.BIT0,
        (True, False): EveOutcome.BIT1,
        (True, True): EveOutcome.INCONCLUSIVE,
    }[(bool(c1), bool(c2))]
    return forwarded, EveRecord(True, outcome, tapped_state=table.tapped_state, known_bit=outcome.bit)


# --------------------------------------------------------------------------
# unitary probe

PROBE_INDEX = {CarrierLabel.BIT0: 1, CarrierLabel.DISGUISED0: 2, CarrierLabel.BIT1: 3, CarrierLabel.DISGUISED1: 4}


def probe_apply(
    label: CarrierLabel, state: MultiModeState, spec: UnitaryProbe, params: ProtocolParams | None = None
) -> tuple[MultiModeState, EveRecord]:
    """Entangle a probe with the carrier; Bob receives the same label at Eve's amplitudes.

    The probe states themselves are never built. Their distinguishability is
    summarized by ``theory.probe_overlaps``.
    """
    params = params or ProtocolParams()
    forwarded = carrier_state(label, complex(spec.alpha_e), complex(spec.alpha_1e), params.cutoff)
    return forwarded, EveRecord(True, EveOutcome.NO_MEASUREMENT, probe_index=PROBE_INDEX[label])


def apply_attack(
    label: CarrierLabel, state: MultiModeState, spec: AttackSpec, rng, params: ProtocolParams | None = None
) -> tuple[MultiModeState, EveRecord]:
    if isinstance(spec, InterceptResend):
        return intercept_resend_apply(label, state, spec, rng, params)
    if isinstance(spec, SuperpositionResend):
        return superposition_resend_apply(label, state, spec, rng, params)
    if isinstance(spec, BeamSplit):
        return beam_split_apply(label, state, spec, rng, params)
    if isinstance(spec, UnitaryProbe):
        return probe_apply(label, state, spec, params)
    raise TypeError(f"unknown attack spec {spec!r}")


def clear_caches() -> None:
    with _TAP_LOCK:
        _TAPS.clear()
    superposition_state.cache_clear()
    decohered_component.cache_clear()
