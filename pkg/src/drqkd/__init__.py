"""Simulation of dual-rail QKD with displaced single photons."""

from __future__ import annotations

__version__ = "0.1.0"

from .fock_core import (  # noqa: E402
    BALANCED_I,
    BALANCED_REAL,
    BeamSplitterSpec,
    DetectorModel,
    FockCutoff,
    MixedState,
    MultiModeState,
)
from .protocol import CarrierLabel, Outcome, ProtocolParams, run_session  # noqa: E402
from .theory import OutputDistribution, SourceDistribution  # noqa: E402

__all__ = [
    "__version__",
    "BALANCED_I",
    "BALANCED_REAL",
    "BeamSplitterSpec",
    "CarrierLabel",
    "DetectorModel",
    "FockCutoff",
    "MixedState",
    "MultiModeState",
    "Outcome",
    "OutputDistribution",
    "ProtocolParams",
    "SourceDistribution",
    "run_session",
]
