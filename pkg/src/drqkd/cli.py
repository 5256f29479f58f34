"""Command-line front end: simulate, validate, sweep and attack-compare.

Settings come from built-in defaults, then a JSON config file, then flags.
Exit codes: 0 success, 2 invalid configuration, 3 runtime failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

import jsonschema

from . import __version__
from .attacks import AttackSpec, BeamSplit, InterceptResend, SuperpositionResend, UnitaryProbe
from .fock_core import DetectorModel, FockCutoff
from .protocol import (
    ProtocolParams,
    PhysicalSourceParams,
    SessionStats,
    Verdict,
    compare_to_theory,
    exact_prediction,
    run_session,
)
from .schema import CONFIG, RESULT, SWEEP_AXES
from .theory import (
    OutputDistribution,
    SourceDistribution,
    beam_split_prediction,
    beam_split_silent_exact,
    intercept_resend_prediction,
    lossy_output_distribution,
    probe_overlaps,
    superposition_resend_exact,
    superposition_resend_prediction,
)

EXIT_OK, EXIT_SCHEMA, EXIT_RUNTIME, EXIT_VALIDATION = 0, 2, 3, 4

DEFAULTS: dict[str, Any] = {
    "protocol": {"alpha": 1.0, "p": 0.5},
    "attack": None,
    "n_trials": 200_000,
    "seed": 0,
    "threads": 1,
    "out_dir": "drqkd_out",
    "format": "both",
}

# fields that change output bytes without changing results
_RUNTIME_KEYS = ("out_dir", "threads")

TRIAL_HEADER = ["index", "sent", "d1", "d2", "d3", "d4", "outcome", "eve_bit"]

DEFAULT_STRATEGIES = [
    {"type": "intercept_resend", "p1_star": 0.5, "p2_star": 0.0, "alpha_star": 2.5},
    {"type": "superposition_resend", "alpha_prime": 3.0, "eta_fraction": 1.0, "decohered": True},
    {"type": "superposition_resend", "alpha_prime": 3.0, "eta_fraction": 1.0, "decohered": False},
    {"type": "beam_split", "t_mag2": 0.99},
    {"type": "unitary_probe", "alpha_e": 0.9, "alpha_1e": 0.9},
]


class ConfigError(ValueError):
    """Configuration rejected before any simulation runs."""


# --------------------------------------------------------------------------
# configuration


def _complex(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, list) else complex(v)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k == "protocol":
            out[k] = {**out[k], **v}
        else:
            out[k] = copy.deepcopy(v)
    return out


def load_config(path: str | None, overrides: dict[str, Any]) -> dict:
    """Defaults, then the file, then non-None overrides; validated against the schema."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        validate_config(raw)
        cfg = _merge(cfg, raw)
    cfg = _merge(cfg, {k: v for k, v in overrides.items() if v is not None})
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def build_params(proto: dict) -> ProtocolParams:
    try:
        if "source" in proto:
            s = proto["source"]
            source = SourceDistribution(s["p1"], 1 - s["p1"], s["p2"], 1 - s["p2"])
        else:
            source = SourceDistribution.symmetric(proto.get("p", 0.5))
        det = proto.get("detectors", {})
        dets = [det] * 4 if isinstance(det, dict) else det
        detectors = tuple(DetectorModel(d.get("efficiency", 1.0), d.get("dark_count", 0.0)) for d in dets)
        phys = None
        if "physical_source" in proto:
            ps = proto["physical_source"]
            r2 = ps["r_mag2"]
            phys = PhysicalSourceParams(
                ps["prep_efficiency"], math.sqrt(1 - r2), math.sqrt(r2), _complex(ps["pump_amplitude"])
            )
        a1 = proto.get("alpha1")
        return ProtocolParams(
            alpha=_complex(proto.get("alpha", 1.0)),
            alpha1=None if a1 is None else _complex(a1),
            source=source,
            cutoff=None if proto.get("cutoff") is None else FockCutoff(proto["cutoff"]),
            detectors=detectors,
            channel_transmittance=proto.get("channel_transmittance", 1.0),
            physical_source=phys,
            amplitude_schedule=tuple((_complex(a), _complex(b)) for a, b in proto.get("amplitude_schedule", [])),
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid protocol parameters: {exc}") from exc


def build_attack(spec: dict | None) -> AttackSpec | None:
    if spec is None:
        return None
    kind = spec["type"]
    opt = lambda k: None if spec.get(k) is None else _complex(spec[k])  # noqa: E731
    try:
        if kind == "intercept_resend":
            return InterceptResend(
                spec["p1_star"], spec.get("p2_star", 0.0), opt("alpha_star"), spec.get("fraction", 1.0)
            )
        if kind == "superposition_resend":
            return SuperpositionResend(opt("alpha_prime"), spec.get("eta_fraction", 1.0), spec.get("decohered", False))
        if kind == "beam_split":
            if "t_e" in spec or "r_e" in spec:
                return BeamSplit(_complex(spec.get("t_e", 1.0)), _complex(spec.get("r_e", 0.0)))
            return BeamSplit.from_t_mag2(spec.get("t_mag2", 1.0))
        if kind == "unitary_probe":
            return UnitaryProbe(_complex(spec["alpha_e"]), _complex(spec["alpha_1e"]))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid attack parameters: {exc}") from exc
    raise ConfigError(f"unknown attack type {kind!r}")


# --------------------------------------------------------------------------
# predictions


def _uniform_efficiency(params: ProtocolParams) -> float | None:
    effs = {d.efficiency for d in params.detectors}
    if len(effs) == 1 and all(d.dark_count == 0 for d in params.detectors):
        return effs.pop()
    return None


@dataclass
class Prediction:
    distribution: OutputDistribution
    disguised: float
    mismatch: float | None
    detail: dict[str, Any]


def baseline_prediction(params: ProtocolParams) -> Prediction:
    """No-eavesdropper expectation: closed form when it applies, otherwise exact enumeration."""
    eff = _uniform_efficiency(params)
    if eff is not None and eff > 0 and not params.amplitude_schedule:
        a, a1 = params.amplitudes()
        dist = lossy_output_distribution(params.effective_source, a, a1, params.channel_transmittance * eff)
        return Prediction(dist, 0.0, 0.0, {"method": "closed_form"})
    ex = exact_prediction(params)
    return Prediction(ex.distribution, ex.disguised_prob, ex.mismatch_rate, {"method": "exact_enumeration"})


def attack_prediction(params: ProtocolParams, attack: AttackSpec) -> Prediction:
    """Large-amplitude model of Bob's statistics under ``attack``."""
    src = params.effective_source
    a, a1 = params.amplitudes()
    if isinstance(attack, InterceptResend):
        if attack.fraction != 1.0:
            base = baseline_prediction(params)
            return Prediction(base.distribution, base.disguised, None, {"method": "partial_intercept_baseline"})
        b0, d0 = intercept_resend_prediction(src, attack.p1_star)
        side1 = SourceDistribution(src.p2, src.p2_prime, src.p1, src.p1_prime)
        b1, d1 = intercept_resend_prediction(side1, attack.p2_star)
        return Prediction(
            OutputDistribution.from_bits(b0, b1),
            d0 + d1,
            None,
            {"method": "intercept_resend", "p_disguised_side0": d0, "p_disguised_side1": d1},
        )
    if isinstance(attack, SuperpositionResend):
        ap = a if attack.alpha_prime is None else attack.alpha_prime
        dist, eta = superposition_resend_prediction(src.p1, a, attack.eta_fraction, attack.decohered)
        exact = superposition_resend_exact(src.p1, a, ap, attack.eta_fraction, attack.decohered)
        return Prediction(
            dist, 0.0, 0.0, {"method": "superposition_resend", "eve_information": eta, "p_bit0_exact": exact}
        )
    if isinstance(attack, BeamSplit):
        dist, p_vac, info = beam_split_prediction(src.p1, a, attack.t_mag2)
        return Prediction(
            dist,
            0.0,
            0.0,
            {
                "method": "beam_split",
                "p_vac": p_vac,
                "eve_information": info,
                "eve_silent_exact": beam_split_silent_exact(src, a, attack.t_mag2),
            },
        )
    if isinstance(attack, UnitaryProbe):
        fwd = replace(params, alpha=attack.alpha_e, alpha1=attack.alpha_1e, amplitude_schedule=(), physical_source=None)
        base = baseline_prediction(fwd)
        detail = {"method": "unitary_probe"}
        try:
            ov = probe_overlaps(a, attack.alpha_e, attack.alpha_1e)
            detail["overlaps"] = {k: [v.real, v.imag] for k, v in ov.as_dict().items()}
            detail["unphysical"] = ov.unphysical
            detail["eve_information"] = 0.0 if all(abs(abs(v) - 1) < 1e-12 for v in ov.as_dict().values()) else None
        except ZeroDivisionError as exc:
            detail["overlaps_error"] = str(exc)
        return Prediction(base.distribution, base.disguised, base.mismatch, detail)
    raise TypeError(f"unknown attack spec {attack!r}")


def _prediction_json(pred: Prediction) -> dict:
    return {
        "p_bit0": pred.distribution.p_bit0,
        "p_bit1": pred.distribution.p_bit1,
        "p_inconclusive": pred.distribution.p_inconclusive,
        "p_disguised": pred.disguised,
        "mismatch": pred.mismatch,
        **pred.detail,
    }


def _verdict(stats: SessionStats, pred: Prediction) -> Verdict:
    return compare_to_theory(stats, pred.distribution, expected_disguised=pred.disguised, expected_mismatch=pred.mismatch)


def stats_json(stats: SessionStats) -> dict:
    d = stats.as_dict()
    d.update(
        trial_count=stats.trial_count,
        conclusive_count=stats.conclusive_count,
        disguised_by_side=list(stats.disguised_by_side),
        eve_silent_fraction=stats.eve_silent_fraction,
    )
    return d


# --------------------------------------------------------------------------
# output


def _echo(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if k not in _RUNTIME_KEYS}


def summary(cfg: dict, command: str, stats, theory: dict, verdicts: dict, started: float) -> dict:
    doc = {
        "config": _echo(cfg),
        "stats": stats,
        "theory": theory,
        "verdicts": verdicts,
        "meta": {
            "version": __version__,
            "seed": cfg["seed"],
            "trials": cfg["n_trials"],
            "command": command,
            "runtime": {"wall_clock_s": time.perf_counter() - started, "threads": cfg["threads"]},
        },
    }
    jsonschema.validate(doc, RESULT)
    return doc


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def trial_rows(records):
    for r in records:
        yield (
            r.index,
            r.sent.value,
            *(int(c) for c in r.pattern),
            r.outcome.value,
            "" if r.eve_knowledge is None else r.eve_knowledge,
        )


def _wants(cfg: dict, kind: str) -> bool:
    return cfg["format"] in (kind, "both")


# --------------------------------------------------------------------------
# commands


def _session(cfg: dict, params: ProtocolParams, attack: AttackSpec | None):
    return run_session(params, attack, n_trials=cfg["n_trials"], seed=cfg["seed"], threads=cfg["threads"])


def _single_run(cfg: dict, command: str) -> tuple[dict, list, Verdict]:
    started = time.perf_counter()
    params = build_params(cfg["protocol"])
    attack = build_attack(cfg["attack"])
    base = baseline_prediction(params)
    model = base if attack is None else attack_prediction(params, attack)
    records, stats = _session(cfg, params, attack)
    # the channel test judges against the undisturbed expectation
    primary = _verdict(stats, base)
    theory = {"no_attack": _prediction_json(base)}
    verdicts = {"no_attack": primary.as_dict()}
    if attack is not None:
        theory["attack"] = _prediction_json(model)
        verdicts["attack_model"] = _verdict(stats, model).as_dict()
    return summary(cfg, command, stats_json(stats), theory, verdicts, started), records, primary


def cmd_simulate(cfg: dict) -> int:
    doc, records, _ = _single_run(cfg, "simulate")
    out = Path(cfg["out_dir"])
    if _wants(cfg, "json"):
        _write_json(out / "summary.json", doc)
    if _wants(cfg, "csv"):
        _write_csv(out / "trials.csv", TRIAL_HEADER, trial_rows(records))
    s = doc["stats"]
    print(
        f"trials={cfg['n_trials']} p_bit0={s['p_bit0']:.6f} p_bit1={s['p_bit1']:.6f} "
        f"p_disguised={s['p_disguised']:.6f} mismatch={s['mismatch']:.6f} eve_fraction={s['eve_fraction']:.6f}"
    )
    return EXIT_OK


def cmd_validate(cfg: dict) -> int:
    from .oracles import oracles_agree

    doc, records, primary = _single_run(cfg, "validate")
    ok, errs = oracles_agree()
    doc["verdicts"]["oracles"] = {"status": "pass" if ok else "fail", "max_errors": errs}
    doc["verdicts"]["overall"] = "pass" if (primary.passed and ok) else "fail"
    jsonschema.validate(doc, RESULT)
    out = Path(cfg["out_dir"])
    if _wants(cfg, "json"):
        _write_json(out / "summary.json", doc)
    if _wants(cfg, "csv"):
        _write_csv(out / "trials.csv", TRIAL_HEADER, trial_rows(records))
    for name, c in primary.checks.items():
        print(f"{'PASS' if c.passed else 'FAIL'} {name}: empirical={c.empirical:.6f} expected={c.expected:.6f} z={c.z:+.2f}")
    print(f"{'PASS' if ok else 'FAIL'} oracles: " + " ".join(f"{k}={v:.1e}" for k, v in errs.items()))
    print(f"status: {primary.status}")
    return EXIT_OK if doc["verdicts"]["overall"] == "pass" else EXIT_VALIDATION


def _sweep_point(cfg: dict, axis: str, value: float) -> tuple[ProtocolParams, AttackSpec | None]:
    proto = dict(cfg["protocol"])
    attack_cfg = cfg["attack"]
    if axis == "alpha":
        proto["alpha"] = value
        proto.pop("alpha1", None)
        proto.pop("physical_source", None)
    elif axis == "channel_transmittance":
        proto["channel_transmittance"] = value
    elif axis == "eta_fraction":
        base = attack_cfg if attack_cfg and attack_cfg["type"] == "superposition_resend" else {"type": "superposition_resend", "decohered": True}
        attack_cfg = {**base, "eta_fraction": value}
    elif axis == "t_mag2":
        attack_cfg = {"type": "beam_split", "t_mag2": value}
    elif axis == "p1_star":
        base = attack_cfg if attack_cfg and attack_cfg["type"] == "intercept_resend" else {"type": "intercept_resend"}
        attack_cfg = {**base, "p1_star": value}
    validate_config({"protocol": proto, "attack": attack_cfg})
    return build_params(proto), build_attack(attack_cfg)


def cmd_sweep(cfg: dict) -> int:
    started = time.perf_counter()
    sweep = cfg.get("sweep")
    if not sweep or not sweep.get("grid"):
        raise ConfigError("sweep needs an axis and a non-empty grid")
    axis, grid = sweep["axis"], sweep["grid"]
    points = [_sweep_point(cfg, axis, float(v)) for v in grid]
    rows, stats_list, theory, verdicts = [], [], {}, {}
    for value, (params, attack) in zip(grid, points):
        pred = baseline_prediction(params) if attack is None else attack_prediction(params, attack)
        _, stats = _session(cfg, params, attack)
        v = _verdict(stats, pred)
        s = stats_json(stats)
        stats_list.append({axis: value, **s})
        theory[str(value)] = _prediction_json(pred)
        verdicts[str(value)] = v.as_dict()
        rows.append(
            (
                value,
                s["p_bit0"],
                s["p_bit1"],
                s["p_inconclusive"],
                s["p_disguised"],
                s["mismatch"],
                s["eve_fraction"],
                pred.distribution.p_bit0,
                pred.distribution.p_bit1,
                pred.disguised,
                v.checks["p_bit0"].z,
                v.status,
            )
        )
    out = Path(cfg["out_dir"])
    header = [
        axis, "p_bit0", "p_bit1", "p_inconclusive", "p_disguised", "mismatch", "eve_fraction",
        "theory_p_bit0", "theory_p_bit1", "theory_p_disguised", "z_p_bit0", "status",
    ]
    if _wants(cfg, "csv"):
        _write_csv(out / "sweep.csv", header, rows)
    if _wants(cfg, "json"):
        _write_json(out / "sweep.json", summary(cfg, "sweep", stats_list, theory, verdicts, started))
    for r in rows:
        print(f"{axis}={r[0]} p_bit0={r[1]:.6f} theory={r[7]:.6f} z={r[10]:+.2f} {r[11]}")
    return EXIT_OK


def compare_row(cfg: dict, params: ProtocolParams, spec_cfg: dict, base: Prediction) -> dict:
    """Run one strategy and judge it against the no-attack expectation."""
    attack = build_attack(spec_cfg)
    _, stats = _session(cfg, params, attack)
    verdict = _verdict(stats, base)
    model = attack_prediction(params, attack)
    detected = not verdict.passed
    info = model.detail.get("eve_information")
    # probe records carry no bit, so only the overlaps can show zero information
    zero_info = stats.eve_fraction == 0.0 and (info == 0.0 or (info is None and not isinstance(attack, UnitaryProbe)))
    blind = not detected and stats.eve_fraction > 0.5
    if zero_info:
        knowledge = "zero information"
    elif isinstance(attack, UnitaryProbe):
        knowledge = "probe information unquantified"
    else:
        knowledge = f"eve_fraction={stats.eve_fraction:.4f}"
    parts = ["detected" if detected else "undetected", knowledge]
    if blind:
        parts.append("blind spot")
    return {
        "strategy": spec_cfg,
        "status": "detected" if detected else "undetected",
        "failed_indicators": verdict.failed,
        "z": {k: c.z for k, c in verdict.checks.items()},
        "stats": stats_json(stats),
        "eve_fraction": stats.eve_fraction,
        "eve_information_theory": info,
        "zero_information": zero_info,
        "blind_spot": blind,
        "summary": ", ".join(parts),
    }


def cmd_attack_compare(cfg: dict) -> int:
    started = time.perf_counter()
    params = build_params(cfg["protocol"])
    base = baseline_prediction(params)
    strategies = cfg.get("strategies") or DEFAULT_STRATEGIES
    rows = [compare_row(cfg, params, s, base) for s in strategies]
    out = Path(cfg["out_dir"])
    if _wants(cfg, "csv"):
        _write_csv(
            out / "attack_compare.csv",
            ["strategy", "status", "z_p_bit0", "z_p_bit1", "z_p_disguised", "z_mismatch", "eve_fraction", "eve_information_theory", "blind_spot", "summary"],
            (
                (
                    json.dumps(r["strategy"], sort_keys=True),
                    r["status"],
                    r["z"].get("p_bit0"),
                    r["z"].get("p_bit1"),
                    r["z"].get("p_disguised"),
                    r["z"].get("mismatch"),
                    r["eve_fraction"],
                    "" if r["eve_information_theory"] is None else r["eve_information_theory"],
                    r["blind_spot"],
                    r["summary"],
                )
                for r in rows
            ),
        )
    if _wants(cfg, "json"):
        doc = summary(
            {**cfg, "strategies": strategies},
            "attack-compare",
            rows,
            {"no_attack": _prediction_json(base)},
            {"rows": [r["status"] for r in rows]},
            started,
        )
        _write_json(out / "attack_compare.json", doc)
    for r in rows:
        print(f"{r['strategy']['type']:<22} {r['summary']}")
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "sweep": cmd_sweep,
    "attack-compare": cmd_attack_compare,
}


def _grid(text: str) -> list[float]:
    text = text.strip()
    if not text:
        return []
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drqkd", description="Dual-rail displaced-photon QKD simulator")
    parser.add_argument("--version", action="version", version=f"drqkd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int, dest="n_trials")
        p.add_argument("--out", metavar="DIR", dest="out_dir")
        p.add_argument("--threads", type=int)
        p.add_argument("--format", choices=["json", "csv", "both"])
        if name == "sweep":
            p.add_argument("--axis", choices=SWEEP_AXES)
            p.add_argument("--grid", type=_grid, help="comma-separated values")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("seed", "n_trials", "out_dir", "threads", "format")}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "sweep" and (args.axis is not None or args.grid is not None):
            sweep = dict(cfg.get("sweep") or {})
            if args.axis is not None:
                sweep["axis"] = args.axis
            if args.grid is not None:
                sweep["grid"] = args.grid
            cfg["sweep"] = sweep
            validate_config(cfg)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
