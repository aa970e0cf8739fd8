"""Command-line orchestration: fields in, reports and dff-v1 files out.

One executable, one required ``--command``. Reports are JSON printed to
stdout and optionally written under ``--out``; floats are formatted with 17
significant digits and dictionary keys keep insertion order, so a fixed
configuration and seed always produce byte-identical output.

Exit codes: 0 success, 1 input or I/O problem, 2 verification or
classification failure, 3 the result is not a valid diffeomorphism,
4 the flow left the domain or blew up.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path

import numpy as np

from . import acceptance
from .battery import DEFAULT_SEED
from .decay import DecayClass, class_from_name, classify_decay
from .errors import (EngineError, FlowBlowupError, FlowDomainError,
                     InsufficientAnnuliError, InversionError, NonDiffeoError,
                     UnderResolvedError)
from .fields import DisplacementField, Grid, sample
from .flows import (TimeDependentVectorField, displacement_sup_bound, evolve,
                    gronwall_bound, right_log_derivative, sobolev_tracking)
from .group import Diffeo, compose, conjugate, invert
from .io import (read_diffeo, stable_json_dumps, write_diffeo, write_report,
                 write_time_series_csv)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_VERIFY = 2
EXIT_NON_DIFFEO = 3
EXIT_FLOW = 4

COMMANDS = ("classify", "compose", "invert", "conjugate", "evolve", "verify")


@dataclass
class RunConfig:
    """Validated CLI parameters shared by every command."""

    command: str
    dim: int = 1
    half_width: float = 8.0
    points: int = 257
    decay_class: str | None = None
    descriptors: list = dataclass_field(default_factory=list)
    inputs: list = dataclass_field(default_factory=list)
    t_final: float = 1.0
    dt: float = 1.0 / 32.0
    order_cap: int = 2
    weight_cap: int = 2
    tol: float = 1.0e-6
    seed: int = DEFAULT_SEED
    out: str | None = None
    quiet: bool = False

    def validate(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}")
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3")
        if self.points < 16:
            raise ValueError("points must be at least 16")
        if self.half_width <= 0.0:
            raise ValueError("half-width must be positive")
        if self.tol < 0.0:
            raise ValueError("tol must be non-negative")
        if self.t_final <= 0.0 or self.dt <= 0.0:
            raise ValueError("t-final and dt must be positive")
        if self.order_cap < 0 or self.weight_cap < 0:
            raise ValueError("order and weight caps must be non-negative")

    def grid(self) -> Grid:
        return Grid(self.dim, self.half_width, self.points)

    def claimed_class(self) -> DecayClass | None:
        if self.decay_class is None:
            return None
        return class_from_name(self.decay_class)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diffeoflow",
        description="group operations, flows and verification for "
                    "diffeomorphisms x + g(x) with decaying g")
    parser.add_argument("--command", required=True, choices=COMMANDS)
    parser.add_argument("--dim", type=int, default=1)
    parser.add_argument("--half-width", type=float, default=8.0)
    parser.add_argument("--points", type=int, default=257)
    parser.add_argument("--class", dest="decay_class", default=None,
                        help="claimed decay class of the input field(s)")
    parser.add_argument("--descriptor", action="append", default=[],
                        help="closed-form field text; repeatable")
    parser.add_argument("--input", action="append", default=[],
                        help="dff-v1 file path; repeatable")
    parser.add_argument("--t-final", type=float, default=1.0)
    parser.add_argument("--dt", type=float, default=1.0 / 32.0)
    parser.add_argument("--order-cap", type=int, default=2)
    parser.add_argument("--weight-cap", type=int, default=2)
    parser.add_argument("--tol", type=float, default=1.0e-6)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--out", default=None,
                        help="directory for report/field/CSV outputs")
    parser.add_argument("--quiet", action="store_true",
                        help="suppress the per-criterion progress lines")
    return parser


def config_from_argv(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    config = RunConfig(
        command=args.command, dim=args.dim, half_width=args.half_width,
        points=args.points, decay_class=args.decay_class,
        descriptors=list(args.descriptor), inputs=list(args.input),
        t_final=args.t_final, dt=args.dt, order_cap=args.order_cap,
        weight_cap=args.weight_cap, tol=args.tol, seed=args.seed,
        out=args.out, quiet=args.quiet)
    config.validate()
    return config


def _emit(config: RunConfig, report: dict, filename: str) -> dict:
    text = stable_json_dumps(report)
    if not config.quiet:
        print(text)
    if config.out:
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_report(str(out_dir / filename), report)
    return report


def _sources(config: RunConfig, needed: int) -> list:
    """Diffeos from descriptors and/or files, in the order given."""
    sources = ([("descriptor", d) for d in config.descriptors]
               + [("input", p) for p in config.inputs])
    if len(sources) != needed:
        raise ValueError(
            f"{config.command} needs exactly {needed} field source(s) "
            f"(--descriptor/--input), got {len(sources)}")
    claimed = config.claimed_class()
    grid = config.grid()
    out = []
    for kind, spec in sources:
        if kind == "descriptor":
            displacement = DisplacementField.from_descriptor(grid, spec)
            out.append(Diffeo(displacement, claimed))
        else:
            out.append(read_diffeo(spec))
    return out


def _field_summary(diffeo: Diffeo, config: RunConfig) -> dict:
    report = classify_decay(diffeo.displacement, config.order_cap,
                            config.weight_cap)
    return {
        "decay_class": diffeo.decay_class.value,
        "measured_class": report.inferred_class.value,
        "epsilon": diffeo.epsilon,
        "epsilon_location": diffeo.epsilon_location,
    }


def cmd_classify(config: RunConfig) -> int:
    if config.inputs:
        diffeo = read_diffeo(config.inputs[0])
        target = diffeo.displacement
    elif config.descriptors:
        target = sample(config.descriptors[0], config.grid())
    else:
        raise ValueError("classify needs --descriptor or --input")
    report = classify_decay(target, config.order_cap, config.weight_cap)
    claimed = config.claimed_class()
    class_ok = None
    if claimed is not None:
        class_ok = claimed.contains(report.inferred_class)
    payload = {
        "command": "classify",
        "grid": {"dim": target.grid.dim, "half_width": target.grid.half_width,
                 "points_per_axis": target.grid.points_per_axis},
        "claimed_class": None if claimed is None else claimed.value,
        "class_ok": class_ok,
        "report": report.to_dict(),
    }
    _emit(config, payload, "classify_report.json")
    return EXIT_OK if class_ok in (None, True) else EXIT_VERIFY


def cmd_compose(config: RunConfig) -> int:
    outer, inner = _sources(config, 2)
    result = compose(outer, inner)
    payload = {
        "command": "compose",
        "result": _field_summary(result, config),
    }
    if config.out:
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_diffeo(str(out_dir / "composed.dff"), result)
        payload["output"] = "composed.dff"
    _emit(config, payload, "compose_report.json")
    return EXIT_OK


def cmd_invert(config: RunConfig) -> int:
    (diffeo,) = _sources(config, 1)
    inverse = invert(diffeo)
    left = compose(inverse, diffeo)
    right = compose(diffeo, inverse)
    residuals = {
        "left_identity": float(np.max(np.abs(left.displacement.values))),
        "right_identity": float(np.max(np.abs(right.displacement.values))),
    }
    holds = max(residuals.values()) <= config.tol
    payload = {
        "command": "invert",
        "result": _field_summary(inverse, config),
        "residuals": residuals,
        "tol": config.tol,
        "holds": holds,
    }
    if config.out:
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_diffeo(str(out_dir / "inverse.dff"), inverse)
        payload["output"] = "inverse.dff"
    _emit(config, payload, "invert_report.json")
    return EXIT_OK if holds else EXIT_VERIFY


def cmd_conjugate(config: RunConfig) -> int:
    outer, inner = _sources(config, 2)
    result, diag = conjugate(outer, inner, diagnostics=True)
    measured = class_from_name(diag["measured_class"])
    class_ok = inner.decay_class.contains(measured)
    payload = {
        "command": "conjugate",
        "inner_class": inner.decay_class.value,
        "outer_class": outer.decay_class.value,
        "result": _field_summary(result, config),
        "diagnostics": diag,
        "class_ok": class_ok,
    }
    if config.out:
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_diffeo(str(out_dir / "conjugate.dff"), result)
        payload["output"] = "conjugate.dff"
    _emit(config, payload, "conjugate_report.json")
    return EXIT_OK if class_ok else EXIT_VERIFY


def cmd_evolve(config: RunConfig) -> int:
    if len(config.descriptors) != 1:
        raise ValueError("evolve needs exactly one --descriptor for X(t,x)")
    field = TimeDependentVectorField.from_descriptor(
        config.dim, config.descriptors[0], config.claimed_class())
    grid = config.grid()
    result = evolve(field, config.t_final, config.dt, grid,
                    decay_class=field.decay_class)

    bound, measured, sup_holds = displacement_sup_bound(result, field)
    predicted, observed, gronwall_holds = gronwall_bound(result, field)
    tracking = sobolev_tracking(result, field)
    log_gap = 0.0
    for t, derived in right_log_derivative(result):
        exact = field.at_time(grid, t).values
        log_gap = max(log_gap, float(np.max(np.abs(derived.values - exact))))

    payload = {
        "command": "evolve",
        "t_final": config.t_final,
        "dt": config.dt,
        "steps": len(result.times) - 1,
        "final_sup": float(result.diagnostics["sup_displacement"][-1]),
        "min_det": float(min(result.diagnostics["min_det"])),
        "sup_bound_holds": bool(sup_holds),
        "gronwall_holds": bool(gronwall_holds),
        "sobolev_holds": bool(tracking["holds"]),
        "right_log_derivative_gap": log_gap,
        "final_class": classify_decay(result.final_displacement).inferred_class.value,
    }
    if config.out:
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        write_time_series_csv(str(out_dir / "time_series.csv"), result)
        write_diffeo(str(out_dir / "final.dff"), result.to_diffeo())
        payload["outputs"] = ["time_series.csv", "final.dff"]
    _emit(config, payload, "evolve_report.json")
    verified = sup_holds and gronwall_holds and bool(tracking["holds"])
    return EXIT_OK if verified else EXIT_VERIFY


def cmd_verify(config: RunConfig) -> int:
    if config.tol == 0.0:
        payload = {
            "command": "verify",
            "seed": config.seed,
            "passed": False,
            "controlled_failure":
                "tolerance 0 cannot be met by finite-precision checks",
            "criteria": [],
        }
        _emit(config, payload, "verify_report.json")
        return EXIT_VERIFY
    results = acceptance.run_core(config.seed)
    for item in results:
        if not config.quiet:
            state = "PASS" if item.passed else "FAIL"
            print(f"[{state}] criterion {item.index}: {item.detail}",
                  file=sys.stderr)
    payload = {
        "command": "verify",
        "seed": config.seed,
        "passed": all(item.passed for item in results),
        "criteria": [item.to_dict() for item in results],
    }
    _emit(config, payload, "verify_report.json")
    return EXIT_OK if payload["passed"] else EXIT_VERIFY


_DISPATCH = {
    "classify": cmd_classify,
    "compose": cmd_compose,
    "invert": cmd_invert,
    "conjugate": cmd_conjugate,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    try:
        config = config_from_argv(argv)
    except SystemExit as stop:
        # argparse exits 2 on bad flags; fold that into the input code
        return EXIT_INPUT if stop.code else EXIT_OK
    except ValueError as exc:
        print(stable_json_dumps({"error": "config", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_INPUT
    try:
        return _DISPATCH[config.command](config)
    except (EngineError, OSError, ValueError) as exc:
        print(stable_json_dumps(
            {"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr)
        if isinstance(exc, (FlowDomainError, FlowBlowupError)):
            return EXIT_FLOW
        if isinstance(exc, (NonDiffeoError, UnderResolvedError,
                            InversionError)):
            return EXIT_NON_DIFFEO
        if isinstance(exc, InsufficientAnnuliError):
            return EXIT_VERIFY
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
