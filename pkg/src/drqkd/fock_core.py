"""Truncated Fock-space states of a few optical modes.

States are dense complex tensors indexed by the photon number of each mode.
Everything here is a pure function of its inputs; the only randomness enters
through an explicit ``rng`` object exposing ``random() -> float`` (a
``numpy.random.Generator`` works, as does the per-trial stream used by the
session runner).
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Hashable, Sequence, Union

import numpy as np

NORM_TOL = 1e-9
OVERFLOW_TOL = 1e-6


class FockError(Exception):
    """Base class for Fock-space errors."""


class CutoffTooSmall(FockError):
    pass


class InvalidPhotonNumber(FockError):
    pass


class CutoffMismatch(FockError):
    pass


class CutoffOverflow(FockError):
    pass


class ShapeMismatch(FockError):
    pass


@dataclass(frozen=True)
class FockCutoff:
    """Highest photon number kept in every mode."""

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be an integer >= 1, got {self.n_max!r}")

    @property
    def dim(self) -> int:
        return self.n_max + 1

    @classmethod
    def for_amplitude(cls, alpha_max: complex) -> "FockCutoff":
        """Default cutoff for states whose largest displacement is ``alpha_max``."""
        a = abs(alpha_max)
        return cls(math.ceil(a * a + 6 * a + 10))


@dataclass(frozen=True, eq=False)
class MultiModeState:
    """Pure state of ``mode_count`` modes.

    ``key`` is an optional hashable recipe identifying the state; two states
    with equal keys are assumed to be equal, which lets callers cache work
    done on them. It takes no part in the numerics.
    """

    amplitudes: np.ndarray
    cutoff: FockCutoff
    key: Hashable | None = field(default=None, compare=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim < 1:
            raise ShapeMismatch("a state needs at least one mode")
        if any(s != self.cutoff.dim for s in amps.shape):
            raise ShapeMismatch(f"tensor shape {amps.shape} does not match cutoff {self.cutoff.n_max}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def mode_count(self) -> int:
        return self.amplitudes.ndim

    def norm(self) -> float:
        """Squared norm, i.e. total probability retained by the truncation."""
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def with_key(self, key: Hashable | None) -> "MultiModeState":
        return MultiModeState(self.amplitudes, self.cutoff, key)


@dataclass(frozen=True, eq=False)
class MixedState:
    """Weighted ensemble of pure states (weights positive, summing to one)."""

    components: tuple[tuple[float, MultiModeState], ...]
    key: Hashable | None = field(default=None, compare=False)

    def __post_init__(self):
        comps = tuple((float(w), s) for w, s in self.components)
        if not comps:
            raise ValueError("empty ensemble")
        if any(w <= 0 for w, _ in comps):
            raise ValueError("ensemble weights must be positive")
        total = sum(w for w, _ in comps)
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"ensemble weights sum to {total}, expected 1")
        modes = {s.mode_count for _, s in comps}
        cutoffs = {s.cutoff for _, s in comps}
        if len(modes) != 1 or len(cutoffs) != 1:
            raise ShapeMismatch("ensemble members must share mode count and cutoff")
        object.__setattr__(self, "components", comps)

    @property
    def mode_count(self) -> int:
        return self.components[0][1].mode_count

    @property
    def cutoff(self) -> FockCutoff:
        return self.components[0][1].cutoff

    @classmethod
    def from_unnormalized(cls, items, key=None) -> "MixedState":
        """Build from ``(weight, state)`` pairs, rescaling weights to sum to one."""
        items = [(w, s) for w, s in items if w > 0]
        total = sum(w for w, _ in items)
        return cls(tuple((w / total, s) for w, s in items), key)


State = Union[MultiModeState, MixedState]


@dataclass(frozen=True)
class BeamSplitterSpec:
    """Two-mode splitter with mode matrix ``[[t, r], [-r*, t*]]``.

    Coherent amplitudes transform as ``beta_out = U @ beta_in``; equivalently
    the creation operator of input mode ``j`` maps to ``sum_k U[k, j] a_k^dag``.
    """

    t: complex
    r: complex

    def __post_init__(self):
        t, r = complex(self.t), complex(self.r)
        if abs(abs(t) ** 2 + abs(r) ** 2 - 1.0) > 1e-12:
            raise ValueError(f"|t|^2 + |r|^2 must be 1, got {abs(t) ** 2 + abs(r) ** 2}")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "r", r)

    @property
    def matrix(self) -> np.ndarray:
        t, r = self.t, self.r
        return np.array([[t, r], [-r.conjugate(), t.conjugate()]])

    def inverse(self) -> "BeamSplitterSpec":
        return BeamSplitterSpec(self.t.conjugate(), -self.r)

    @classmethod
    def from_transmittance(cls, transmittance: float) -> "BeamSplitterSpec":
        """Real splitter passing ``transmittance`` of the intensity."""
        if not 0.0 <= transmittance <= 1.0:
            raise ValueError("transmittance must lie in [0, 1]")
        return cls(math.sqrt(transmittance), math.sqrt(1.0 - transmittance))


_S2 = 1 / math.sqrt(2)
#: Receiver splitter with the ``i`` phase on the reflected arm.
BALANCED_I = BeamSplitterSpec(_S2, 1j * _S2)
#: Phase-free balanced splitter: |1,0> -> (|1,0> + |0,1>)/sqrt(2).
BALANCED_REAL = BeamSplitterSpec(_S2, -_S2)
IDENTITY = BeamSplitterSpec(1.0, 0.0)


@dataclass(frozen=True)
class DetectorModel:
    """Threshold (click / no-click) detector."""

    efficiency: float = 1.0
    dark_count: float = 0.0

    def __post_init__(self):
        for name in ("efficiency", "dark_count"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def click_probability(self, n):
        """Probability of a click given ``n`` incident photons (scalar or array)."""
        return 1.0 - (1.0 - self.dark_count) * (1.0 - self.efficiency) ** np.asarray(n)

    @property
    def ideal(self) -> bool:
        return self.efficiency == 1.0 and self.dark_count == 0.0


IDEAL_DETECTOR = DetectorModel()


# --------------------------------------------------------------------------
# single-mode amplitudes


def _displaced_column(n: int, alpha: complex, dim: int) -> np.ndarray:
    """<m|D(alpha)|n> for m < dim, no norm check.

    Uses D|n> = (a^dag - alpha*)^n D|0> / sqrt(n!), built in a padded space so
    that the top entries are not clipped by the raising operator.
    """
    alpha = complex(alpha)
    big = dim + n + 1
    vec = np.empty(big, dtype=np.complex128)
    vec[0] = math.exp(-abs(alpha) ** 2 / 2)
    for m in range(1, big):
        vec[m] = vec[m - 1] * alpha / math.sqrt(m)
    sq = np.sqrt(np.arange(big))
    ac = alpha.conjugate()
    for k in range(1, n + 1):
        raised = np.zeros_like(vec)
        raised[1:] = sq[1:] * vec[:-1]
        vec = (raised - ac * vec) / math.sqrt(k)
    return vec[:dim].copy()


def displaced_fock_amplitudes(n: int, alpha: complex, cutoff: FockCutoff) -> np.ndarray:
    """Fock amplitudes of the displaced number state D(alpha)|n>.

    Raises:
        InvalidPhotonNumber: if ``n`` exceeds the cutoff.
        CutoffTooSmall: if the truncated vector keeps less than 1 - 1e-9 of the norm.
    """
    if n < 0 or n > cutoff.n_max:
        raise InvalidPhotonNumber(f"photon number {n} outside [0, {cutoff.n_max}]")
    vec = _displaced_column(n, alpha, cutoff.dim)
    kept = float(np.vdot(vec, vec).real)
    if kept < 1.0 - NORM_TOL:
        raise CutoffTooSmall(f"cutoff {cutoff.n_max} keeps only {kept:.12f} of |{n},{alpha}>")
    return vec


def displaced_product(
    photons: Sequence[int],
    alphas: Sequence[complex],
    cutoff: FockCutoff | None = None,
    key: Hashable | None = None,
) -> MultiModeState:
    """Product of displaced number states, one per mode.

    With no explicit cutoff the default policy is applied to the largest
    displacement, and raised once (doubled) if the norm bound still fails.
    """
    if len(photons) != len(alphas):
        raise ShapeMismatch("one displacement per mode is required")
    explicit = cutoff is not None
    if cutoff is None:
        cutoff = FockCutoff.for_amplitude(max(abs(a) for a in alphas))
    try:
        vecs = [displaced_fock_amplitudes(n, a, cutoff) for n, a in zip(photons, alphas)]
    except CutoffTooSmall:
        if explicit:
            raise
        cutoff = FockCutoff(2 * cutoff.n_max)
        vecs = [displaced_fock_amplitudes(n, a, cutoff) for n, a in zip(photons, alphas)]
    amps = vecs[0]
    for v in vecs[1:]:
        amps = np.multiply.outer(amps, v)
    return MultiModeState(amps, cutoff, key)


def vacuum(mode_count: int, cutoff: FockCutoff) -> MultiModeState:
    amps = np.zeros((cutoff.dim,) * mode_count, dtype=np.complex128)
    amps[(0,) * mode_count] = 1.0
    return MultiModeState(amps, cutoff, ("vacuum", mode_count, cutoff.n_max))


def superpose(terms: Sequence[tuple[complex, MultiModeState]], key: Hashable | None = None) -> MultiModeState:
    """Normalized coherent sum of states sharing cutoff and mode count."""
    base = terms[0][1]
    amps = np.zeros_like(base.amplitudes)
    for c, s in terms:
        if s.cutoff != base.cutoff or s.mode_count != base.mode_count:
            raise CutoffMismatch("superposed states must share cutoff and mode count")
        amps = amps + c * s.amplitudes
    amps = amps / math.sqrt(float(np.vdot(amps, amps).real))
    return MultiModeState(amps, base.cutoff, key)


# --------------------------------------------------------------------------
# multi-mode operations


def compose_modes(states: Sequence[MultiModeState], key: Hashable | None = None) -> MultiModeState:
    """Tensor product, modes concatenated in argument order."""
    if len(states) == 1:
        return states[0]
    cut = states[0].cutoff
    if any(s.cutoff != cut for s in states):
        raise CutoffMismatch("all composed states must share a cutoff")
    amps = states[0].amplitudes
    for s in states[1:]:
        amps = np.multiply.outer(amps, s.amplitudes)
    return MultiModeState(amps, cut, key)


def permute_modes(state: MultiModeState, order: Sequence[int], key: Hashable | None = None) -> MultiModeState:
    """New state whose mode ``i`` is the old mode ``order[i]``."""
    return MultiModeState(np.transpose(state.amplitudes, order), state.cutoff, key)


@lru_cache(maxsize=64)
def _splitter_blocks(t: complex, r: complex, dim: int) -> tuple[np.ndarray, ...]:
    """Per-sector matrices of a two-mode splitter.

    Entry ``[k, n]`` of block ``N`` is <k, N-k| U |n, N-n>. Columns are built
    by acting with the transformed creation operators on vacuum: first the
    image of mode 1 is raised ``n`` times in closed binomial form, then the
    image of mode 2 is applied ``N - n`` times one photon at a time in the
    normalized Fock basis, so that no large binomial sums have to cancel.
    """
    u11, u12 = t, r
    u21, u22 = -r.conjugate(), t.conjugate()
    top = 2 * (dim - 1)
    width = top + 1
    sq = np.sqrt(np.arange(width + 1))
    blocks = [np.zeros((N + 1, N + 1), dtype=np.complex128) for N in range(top + 1)]

    # rows: n photons from mode 1; columns: k photons in output mode 1
    cur = np.zeros((dim, width), dtype=np.complex128)
    for n in range(dim):
        k = np.arange(n + 1)
        binom = np.array([math.comb(n, int(i)) for i in k], dtype=float)
        cur[n, : n + 1] = np.sqrt(binom) * u11**k * u21 ** (n - k)
    ns = np.arange(dim)[:, None]
    ks = np.arange(width)[None, :]
    for m in range(dim):
        for n in range(dim):
            N = n + m
            blocks[N][:, n] = cur[n, : N + 1]
        if m == dim - 1:
            break
        total = ns + m  # photons before this step
        nxt = np.zeros_like(cur)
        nxt[:, 1:] += u12 * sq[1:width] * cur[:, :-1]
        nxt += u22 * np.sqrt(np.clip(total - ks + 1, 0, None)) * cur
        cur = nxt / math.sqrt(m + 1)
    for b in blocks:
        b.setflags(write=False)
    return tuple(blocks)


def apply_beam_splitter(
    state: MultiModeState,
    mode_a: int,
    mode_b: int,
    bs: BeamSplitterSpec,
    key: Hashable | None = None,
) -> MultiModeState:
    """Apply ``bs`` to modes ``(mode_a, mode_b)``.

    Raises:
        CutoffOverflow: if more than 1e-6 of the probability is pushed above the cutoff.
    """
    k = state.mode_count
    if mode_a == mode_b or not (0 <= mode_a < k and 0 <= mode_b < k):
        raise ValueError(f"invalid mode pair ({mode_a}, {mode_b}) for {k} modes")
    d = state.cutoff.dim
    if bs.r == 0 and bs.t == 1:
        return MultiModeState(state.amplitudes, state.cutoff, key)
    blocks = _splitter_blocks(bs.t, bs.r, d)
    moved = np.moveaxis(state.amplitudes, (mode_a, mode_b), (-2, -1))
    flat = moved.reshape(-1, d, d)
    out = np.zeros_like(flat)
    lost = 0.0
    for N in range(2 * d - 1):
        lo, hi = max(0, N - d + 1), min(N, d - 1)
        idx = np.arange(lo, hi + 1)
        v = flat[:, idx, N - idx]
        if not v.any():
            continue
        w = v @ blocks[N][lo : hi + 1, lo : hi + 1].T
        out[:, idx, N - idx] = w
        if lo > 0 or hi < N:
            lost += float((np.vdot(v, v) - np.vdot(w, w)).real)
    if lost > OVERFLOW_TOL:
        raise CutoffOverflow(f"beam splitter pushed {lost:.3g} of the norm above n_max={d - 1}")
    amps = np.moveaxis(out.reshape(moved.shape), (-2, -1), (mode_a, mode_b))
    return MultiModeState(amps, state.cutoff, key)


def _check_mode(state: State, mode: int) -> None:
    if not 0 <= mode < state.mode_count:
        raise IndexError(f"mode {mode} out of range for {state.mode_count} modes")


def joint_photon_distribution(state: State) -> np.ndarray:
    """|amplitude|^2 tensor (ensemble-averaged for mixed states)."""
    if isinstance(state, MixedState):
        return sum(w * np.abs(s.amplitudes) ** 2 for w, s in state.components)
    return np.abs(state.amplitudes) ** 2


def photon_distribution(state: State, mode: int) -> np.ndarray:
    """Marginal photon-number distribution of one mode."""
    _check_mode(state, mode)
    probs = joint_photon_distribution(state)
    axes = tuple(i for i in range(probs.ndim) if i != mode)
    return probs.sum(axis=axes) if axes else probs


def mean_photon_number(state: State, mode: int) -> float:
    p = photon_distribution(state, mode)
    return float(np.dot(np.arange(p.size), p))


def mean_amplitude(state: State, mode: int) -> complex:
    """Expectation value of the annihilation operator on ``mode``."""
    _check_mode(state, mode)
    if isinstance(state, MixedState):
        return sum(w * mean_amplitude(s, mode) for w, s in state.components)
    amps = np.moveaxis(state.amplitudes, mode, 0)
    sq = np.sqrt(np.arange(1, amps.shape[0]))
    lowered = sq.reshape((-1,) + (1,) * (amps.ndim - 1)) * amps[1:]
    return complex(np.vdot(amps[:-1], lowered))


def quadrature_mean(state: State, mode: int, phase: float) -> float:
    """<X_theta> with X_theta = (a e^{-i theta} + a^dag e^{i theta}) / sqrt(2)."""
    a = mean_amplitude(state, mode)
    return math.sqrt(2.0) * (a * complex(math.cos(phase), -math.sin(phase))).real


def inner_product(a: MultiModeState, b: MultiModeState) -> complex:
    """<a|b>."""
    if a.mode_count != b.mode_count or a.cutoff != b.cutoff:
        raise ShapeMismatch("inner product needs equal mode counts and cutoffs")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: MultiModeState, b: MultiModeState) -> float:
    return abs(inner_product(a, b)) ** 2


# --------------------------------------------------------------------------
# reduction and conditioning


def _contract_mode(amps: np.ndarray, mode: int, vec: np.ndarray) -> np.ndarray:
    return np.tensordot(amps, vec.conj(), axes=([mode], [0]))


def trace_out(state: State, modes: Sequence[int], tol: float = 1e-13) -> MixedState:
    """Reduced state of the remaining modes as a pure-state ensemble.

    Each traced mode is expanded in the displaced number basis centred on its
    own mean amplitude, which for displaced few-photon states needs only a
    handful of terms. Expansion stops once the discarded weight drops below
    ``tol``.
    """
    if isinstance(state, MixedState):
        items = []
        for w, s in state.components:
            items += [(w * v, c) for v, c in trace_out(s, modes, tol).components]
        return MixedState.from_unnormalized(items)
    order = sorted(set(modes), reverse=True)
    if len(order) >= state.mode_count:
        raise ValueError("cannot trace out every mode")
    for m in order:
        _check_mode(state, m)
    d = state.cutoff.dim
    parts = [(1.0, state.amplitudes)]
    for m in order:
        nxt = []
        for w, amps in parts:
            sub = MultiModeState(amps, state.cutoff)
            centre = mean_amplitude(sub, m)
            total = float(np.vdot(amps, amps).real)
            kept = 0.0
            for j in range(d):
                comp = _contract_mode(amps, m, _displaced_column(j, centre, d))
                p = float(np.vdot(comp, comp).real)
                kept += p
                if p > tol * total:
                    nxt.append((w * p, comp / math.sqrt(p)))
                if total - kept < tol * total:
                    break
        parts = nxt
    return MixedState.from_unnormalized([(w, MultiModeState(a, state.cutoff)) for w, a in parts])


def condition_on_photon_numbers(
    state: MultiModeState, modes: Sequence[int], tol: float = 1e-14
) -> list[tuple[tuple[int, ...], float, MultiModeState]]:
    """Outcomes of counting photons on ``modes``.

    Returns ``(photon numbers, probability, post-measurement state of the other
    modes)`` for every outcome with probability above ``tol``; probabilities
    are renormalized over the kept outcomes.
    """
    for m in modes:
        _check_mode(state, m)
    rest = [i for i in range(state.mode_count) if i not in modes]
    if not rest:
        raise ValueError("at least one mode must remain")
    moved = np.moveaxis(state.amplitudes, list(modes), list(range(len(modes))))
    probs = np.abs(moved) ** 2
    marginal = probs.reshape(probs.shape[: len(modes)] + (-1,)).sum(axis=-1)
    out = []
    for idx in zip(*np.nonzero(marginal > tol)):
        p = float(marginal[idx])
        amps = moved[idx] / math.sqrt(p)
        out.append((tuple(int(i) for i in idx), p, MultiModeState(amps, state.cutoff)))
    total = sum(p for _, p, _ in out)
    return [(n, p / total, s) for n, p, s in out]


# --------------------------------------------------------------------------
# detection


class PhotonSampler:
    """Inverse-CDF sampler over the joint photon numbers of a state.

    Entries below ``floor`` are dropped; the retained distribution is
    renormalized.
    """

    def __init__(self, state: State, floor: float = 1e-16):
        probs = joint_photon_distribution(state)
        flat = probs.ravel()
        keep = np.nonzero(flat > floor)[0]
        p = flat[keep]
        cum = np.cumsum(p)
        cum /= cum[-1]
        cum[-1] = 1.0
        self.mode_count = probs.ndim
        self.cumulative = cum.tolist()
        self.photons = [tuple(int(x) for x in t) for t in zip(*np.unravel_index(keep, probs.shape))]

    def sample(self, rng) -> tuple[int, ...]:
        return self.photons[bisect_right(self.cumulative, rng.random())]

    def clicks(self, detectors: Sequence[DetectorModel], rng) -> tuple[bool, ...]:
        if len(detectors) != self.mode_count:
            raise ValueError(f"need {self.mode_count} detectors, got {len(detectors)}")
        photons = self.sample(rng)
        return tuple(
            bool(rng.random() < d.click_probability(n)) for d, n in zip(detectors, photons)
        )


def sample_click_pattern(state: State, detectors: Sequence[DetectorModel], rng) -> tuple[bool, ...]:
    """Draw joint photon numbers from the state, then one Bernoulli click per mode.

    One uniform is consumed for the photon numbers and one per detector, in
    mode order, so the result is a fixed function of the stream.
    """
    return PhotonSampler(state).clicks(detectors, rng)


def click_probabilities(state: State, detectors: Sequence[DetectorModel]) -> dict[tuple[bool, ...], float]:
    """Exact probability of every click pattern (no sampling)."""
    probs = joint_photon_distribution(state)
    if len(detectors) != probs.ndim:
        raise ValueError(f"need {probs.ndim} detectors, got {len(detectors)}")
    n = np.arange(probs.shape[0])
    per_mode = [np.stack([1 - d.click_probability(n), d.click_probability(n)]) for d in detectors]
    out = {}
    table = probs
    for vec in per_mode:
        # contract the leading photon axis against (no-click, click) weights
        table = np.tensordot(table, vec, axes=([0], [1]))
    for pattern in np.ndindex(*table.shape):
        out[tuple(bool(x) for x in pattern)] = float(table[pattern])
    return out
