"""Closed-form predictions for the dual-rail displaced-photon protocol.

These are the reference values every Monte Carlo run is checked against.
Amplitudes enter only through ``|alpha|``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass


class DomainError(ValueError):
    pass


class DegenerateDenominator(ZeroDivisionError):
    pass


@dataclass(frozen=True)
class SourceDistribution:
    """Bit/disguised weights inside each of Alice's two ensembles."""

    p1: float = 0.5
    p1_prime: float = 0.5
    p2: float = 0.5
    p2_prime: float = 0.5

    def __post_init__(self):
        for name in ("p1", "p1_prime", "p2", "p2_prime"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.p1 + self.p1_prime - 1) > 1e-12 or abs(self.p2 + self.p2_prime - 1) > 1e-12:
            raise ValueError("bit and disguised weights of each ensemble must sum to 1")

    @classmethod
    def symmetric(cls, p: float) -> "SourceDistribution":
        return cls(p, 1.0 - p, p, 1.0 - p)


@dataclass(frozen=True)
class OutputDistribution:
    p_bit0: float
    p_bit1: float
    p_inconclusive: float

    def __post_init__(self):
        vals = (self.p_bit0, self.p_bit1, self.p_inconclusive)
        if min(vals) < -1e-12 or abs(sum(vals) - 1.0) > 1e-9:
            raise ValueError(f"not a probability distribution: {vals}")

    @classmethod
    def from_bits(cls, p_bit0: float, p_bit1: float) -> "OutputDistribution":
        return cls(p_bit0, p_bit1, 1.0 - p_bit0 - p_bit1)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.p_bit0, self.p_bit1, self.p_inconclusive)


@dataclass(frozen=True)
class ProbeOverlaps:
    """Pairwise overlaps of Eve's probe states forced by unitarity."""

    e1_e3: complex
    e1_e4: complex
    e3_e2: complex
    e4_e2: complex

    def as_dict(self) -> dict[str, complex]:
        return {"e1_e3": self.e1_e3, "e1_e4": self.e1_e4, "e3_e2": self.e3_e2, "e4_e2": self.e4_e2}

    @property
    def unphysical(self) -> list[str]:
        """Names of overlaps whose magnitude exceeds one."""
        return [k for k, v in self.as_dict().items() if abs(v) > 1 + 1e-9]


def p_zero(alpha: complex) -> float:
    """Probability that a single photon plus coherent pulse gives fewer than three clicks."""
    x = abs(alpha) ** 2
    if not math.isfinite(x):
        raise DomainError("alpha must be finite")
    e = math.exp(-x)
    return e * e + 2 * e * (1 - e)


def conditional_bit_prob(alpha: complex) -> float:
    """Chance that Bob gets a conclusive result on a bit state."""
    return 0.5 * (1.0 - p_zero(alpha))


def expected_output_distribution(
    dist: SourceDistribution, alpha: complex, alpha1: complex | None = None
) -> OutputDistribution:
    """Bob's outcome distribution with no eavesdropper."""
    alpha1 = alpha if alpha1 is None else alpha1
    return OutputDistribution.from_bits(
        dist.p1 / 4 * (1 - p_zero(alpha)),
        dist.p2 / 4 * (1 - p_zero(alpha1)),
    )


def lossy_output_distribution(
    dist: SourceDistribution, alpha: complex, alpha1: complex | None, transmittance: float
) -> OutputDistribution:
    """No-eavesdropper distribution through a uniform linear loss.

    Loss of intensity fraction ``1 - transmittance`` on both rails removes the
    photon with that probability and shrinks both displacements by
    ``sqrt(transmittance)``. Uniform detector inefficiency enters the same way.
    """
    alpha1 = alpha if alpha1 is None else alpha1
    s = math.sqrt(transmittance)
    return OutputDistribution.from_bits(
        dist.p1 * transmittance / 4 * (1 - p_zero(alpha * s)),
        dist.p2 * transmittance / 4 * (1 - p_zero(alpha1 * s)),
    )


def mutual_information(p1w: float, p2w: float) -> float:
    """Alice-Bob information per sifted bit from the joint weights P1*p1 and P2*p2.

    Evaluated as log2(s) - (p1w log2 p1w + p2w log2 p2w) / s with s = p1w + p2w.
    """
    if p1w <= 0 or p2w <= 0:
        raise DomainError("both joint weights must be positive")
    s = p1w + p2w
    return math.log2(s) - (p1w * math.log2(p1w) + p2w * math.log2(p2w)) / s


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def intercept_resend_prediction(dist: SourceDistribution, p1_star: float) -> tuple[float, float]:
    """Bit-0 rate and disguised probability under intercept-resend on the first ensemble.

    Valid for large amplitudes, where Eve's own failure probability
    ``p_zero(alpha_star)`` can be neglected (roughly p_zero < 0.01).
    """
    if not 0.0 <= p1_star <= 1.0:
        raise DomainError("p1_star must lie in [0, 1]")
    p_d = p1_star * dist.p1_prime / 4
    return dist.p1 * (1 + p1_star) / 8 + p_d, p_d


def superposition_resend_prediction(
    p: float, alpha: complex, eta_e: float, decohered: bool
) -> tuple[OutputDistribution, float]:
    """Outcome distribution and Eve's information when she resends superposition states.

    When the resent states decohere, each intercepted bit state yields a bit
    half as often. Eve's information equals the intercepted fraction.
    """
    if not 0.0 <= eta_e <= 1.0:
        raise DomainError("eta_e must lie in [0, 1]")
    scale = (1 - eta_e / 2) if decohered else 1.0
    bit = p * scale * (1 - p_zero(alpha)) / 4
    return OutputDistribution.from_bits(bit, bit), eta_e


def superposition_resend_exact(
    p: float, alpha: complex, alpha_prime: complex, eta_e: float, decohered: bool
) -> float:
    """Bit-0 rate under superposition-resend keeping both failure probabilities.

    Eve's own measurement succeeds with ``conditional_bit_prob(alpha)``; Bob then
    succeeds with ``1 - p_zero(alpha_prime)`` on a coherent resend, or half that
    on the decohered mixture. Reduces to the large-amplitude formula above when
    ``p_zero(alpha_prime)`` is negligible.
    """
    bob = 1 - p_zero(alpha_prime)
    if decohered:
        bob /= 2
    per_bit_state = (1 - eta_e) * conditional_bit_prob(alpha) + eta_e * conditional_bit_prob(alpha) * bob
    return p / 2 * per_bit_state


def beam_split_prediction(p: float, alpha: complex, t_mag2: float) -> tuple[OutputDistribution, float, float]:
    """Bob's distribution, Eve's no-photon probability and Eve's information for a beam-splitting tap."""
    if not 0.0 <= t_mag2 <= 1.0:
        raise DomainError("t_mag2 must lie in [0, 1]")
    bit = p * t_mag2 * (1 - p_zero(alpha * math.sqrt(t_mag2))) / 4
    p_vac = math.exp(-2 * abs(alpha) ** 2 * (1 - t_mag2))
    return OutputDistribution.from_bits(bit, bit), p_vac, 1 - p_vac


def beam_split_silent_exact(dist: SourceDistribution, alpha: complex, t_mag2: float) -> float:
    """Probability that Eve's tap detectors stay dark, including the photon-tapping branch.

    On a bit state the single photon reaches the tap with probability
    ``1 - t_mag2``; a displaced photon |1, beta> is then dark with probability
    ``|beta|^2 exp(-|beta|^2)``.
    """
    r2 = 1 - t_mag2
    p_vac = math.exp(-2 * abs(alpha) ** 2 * r2)
    beta2 = abs(alpha) ** 2 * r2
    bit_fraction = (dist.p1 + dist.p2) / 2
    return p_vac * (1 - bit_fraction * r2 * (1 - beta2))


def probe_overlaps(alpha: complex, alpha_e: complex, alpha_1e: complex) -> ProbeOverlaps:
    """Overlaps of Eve's probe states implied by a unitary interaction.

    The rational factors are evaluated exactly as derived, including the
    ``(i*alpha - alpha)`` terms. Magnitudes above one are reported through
    ``ProbeOverlaps.unphysical`` rather than clipped.

    Raises:
        DegenerateDenominator: if ``i*alpha_1e - alpha_e`` or ``1 - (i*alpha_1e - alpha_e)**2`` vanishes.
    """
    alpha, alpha_e, alpha_1e = complex(alpha), complex(alpha_e), complex(alpha_1e)
    if not all(cmath.isfinite(z) for z in (alpha, alpha_e, alpha_1e)):
        raise DomainError("amplitudes must be finite")
    a2 = abs(alpha) ** 2
    pref = math.exp(-(a2 - abs(alpha_e) ** 2) - (a2 - abs(alpha_1e) ** 2))
    num = 1j * alpha - alpha
    den = 1j * alpha_1e - alpha_e
    if den == 0 or 1 - den**2 == 0:
        raise DegenerateDenominator(f"degenerate probe amplitudes alpha_e={alpha_e}, alpha_1e={alpha_1e}")
    return ProbeOverlaps(
        e1_e3=pref * (1 - num**2) / (1 - den**2),
        e1_e4=pref * num / den,
        e3_e2=pref * (-num) / (-den),
        e4_e2=complex(pref),
    )
