"""JSON schemas for run configurations and result summaries.

``python -m drqkd.schema config`` (or ``result``) prints the schema.
"""

from __future__ import annotations

import json
import sys

_prob = {"type": "number", "minimum": 0, "maximum": 1}
_complex = {
    "oneOf": [
        {"type": "number"},
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    ]
}
_detector = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"efficiency": _prob, "dark_count": _prob},
}

ATTACK = {
    "oneOf": [
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["type", "p1_star"],
            "properties": {
                "type": {"const": "intercept_resend"},
                "p1_star": _prob,
                "p2_star": _prob,
                "alpha_star": _complex,
                "fraction": _prob,
            },
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"const": "superposition_resend"},
                "alpha_prime": _complex,
                "eta_fraction": _prob,
                "decohered": {"type": "boolean"},
            },
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"const": "beam_split"},
                "t_mag2": _prob,
                "t_e": _complex,
                "r_e": _complex,
            },
        },
        {
            "type": "object",
            "additionalProperties": False,
            "required": ["type", "alpha_e", "alpha_1e"],
            "properties": {
                "type": {"const": "unitary_probe"},
                "alpha_e": _complex,
                "alpha_1e": _complex,
            },
        },
    ]
}

SWEEP_AXES = ("alpha", "channel_transmittance", "eta_fraction", "t_mag2", "p1_star")

CONFIG = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "drqkd run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "protocol": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": _complex,
                "alpha1": {"oneOf": [_complex, {"type": "null"}]},
                "p": _prob,
                "source": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["p1", "p2"],
                    "properties": {"p1": _prob, "p2": _prob},
                },
                "cutoff": {"oneOf": [{"type": "integer", "minimum": 1}, {"type": "null"}]},
                "detectors": {
                    "oneOf": [_detector, {"type": "array", "items": _detector, "minItems": 4, "maxItems": 4}]
                },
                "channel_transmittance": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "physical_source": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["prep_efficiency", "r_mag2", "pump_amplitude"],
                    "properties": {
                        "prep_efficiency": _prob,
                        "r_mag2": _prob,
                        "pump_amplitude": _complex,
                    },
                },
                "amplitude_schedule": {
                    "type": "array",
                    "items": {"type": "array", "items": _complex, "minItems": 2, "maxItems": 2},
                },
            },
        },
        "attack": {"oneOf": [ATTACK, {"type": "null"}]},
        "strategies": {"type": "array", "items": ATTACK, "minItems": 1},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["axis", "grid"],
            "properties": {
                "axis": {"enum": list(SWEEP_AXES)},
                "grid": {"type": "array", "items": {"type": "number"}},
            },
        },
        "n_trials": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "threads": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string"},
        "format": {"enum": ["json", "csv", "both"]},
    },
}

_stats = {
    "type": "object",
    "required": ["p_bit0", "p_bit1", "p_inconclusive", "p_disguised", "mismatch", "eve_fraction"],
    "properties": {
        k: {"type": "number"}
        for k in ("p_bit0", "p_bit1", "p_inconclusive", "p_disguised", "mismatch", "eve_fraction")
    },
}

RESULT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "drqkd result summary",
    "type": "object",
    "required": ["config", "stats", "theory", "verdicts", "meta"],
    "additionalProperties": False,
    "properties": {
        "config": CONFIG,
        "stats": {"oneOf": [_stats, {"type": "array", "items": {"type": "object"}}]},
        "theory": {"type": "object"},
        "verdicts": {"type": "object"},
        "meta": {
            "type": "object",
            "required": ["version", "seed", "trials"],
            "properties": {
                "version": {"type": "string"},
                "seed": {"type": "integer"},
                "trials": {"type": "integer"},
                "command": {"type": "string"},
                # varies between identical runs
                "runtime": {
                    "type": "object",
                    "properties": {"wall_clock_s": {"type": "number"}, "threads": {"type": "integer"}},
                },
            },
        },
    },
}


def main(argv=None) -> int:
    which = (argv if argv is not None else sys.argv[1:]) or ["config"]
    print(json.dumps(RESULT if which[0] == "result" else CONFIG, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
