"""Command-line interface.

Subcommands: ``simulate``, ``sweep``, ``oracle``, ``decompose``,
``list-scenarios``.  Exit codes: 0 success, 2 validation error (bad
scenario file, bad wiring, bad arguments), 3 engine error.

Environment overrides: ``PROXYIFM_SEED`` replaces the scenario's default
seed; ``PROXYIFM_OUTDIR`` prefixes relative output paths.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .errors import (
    BinOverflowError,
    CutoffTooSmallError,
    CyclicGraphError,
    DanglingPortError,
    DimensionMismatchError,
    DimensionTooLargeError,
    EngineSourceMismatchError,
    IoError,
    NoLossTerminalError,
    NonUnitaryBeamSplitterError,
    NonUnitaryError,
    NonUnitaryInputError,
    ParseError,
    PortCountMismatchError,
    ProxyIfmError,
    StateTooLargeError,
    UnknownSchemaVersionError,
    UnresolvedElementIdError,
    ZeroPulsesError,
)
from .multiport import reck_decompose
from .runner import RunReport, Table, emit, run, sweep_table
from .scenarios import list_builtin_scenarios, load_scenario

_VALIDATION_ERRORS = (
    ParseError, UnknownSchemaVersionError, UnresolvedElementIdError,
    CyclicGraphError, DanglingPortError, NonUnitaryBeamSplitterError,
    PortCountMismatchError, NonUnitaryInputError, DimensionTooLargeError,
    DimensionMismatchError, ZeroPulsesError,
)
_ENGINE_ERRORS = (
    BinOverflowError, CutoffTooSmallError, StateTooLargeError,
    NoLossTerminalError, EngineSourceMismatchError, NonUnitaryError, IoError,
)


def _out_path(raw: str) -> Path:
    path = Path(raw)
    outdir = os.environ.get("PROXYIFM_OUTDIR")
    if outdir and not path.is_absolute():
        path = Path(outdir) / path
    return path


def _default_seed(scenario_seed: int) -> int:
    env = os.environ.get("PROXYIFM_SEED")
    return int(env) if env else scenario_seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="proxyifm",
        description="Time-bin interferometer simulator: exact coherent and "
                    "single-photon engines plus a brute-force Fock oracle.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario through an engine")
    sim.add_argument("--scenario", required=True,
                     help="scenario file path or shipped scenario name")
    sim.add_argument("--engine", choices=["coherent", "singlephoton", "fock"],
                     help="override the source's natural engine")
    sim.add_argument("--mode", choices=["exact", "mc"], default=None)
    sim.add_argument("--shots", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--cutoff", type=int, default=5,
                     help="Fock truncation (fock engine only)")
    sim.add_argument("--out", required=True)
    sim.add_argument("--format", choices=["csv", "jsonl"], default="csv")

    sw = sub.add_parser("sweep", help="sweep a scenario phase parameter")
    sw.add_argument("--scenario", required=True)
    sw.add_argument("--param", default="delay_phase")
    sw.add_argument("--from", dest="start", type=float, required=True)
    sw.add_argument("--to", dest="stop", type=float, required=True)
    sw.add_argument("--steps", type=int, required=True)
    sw.add_argument("--out", required=True)

    orc = sub.add_parser("oracle", help="exact Fock-space joint distribution")
    orc.add_argument("--scenario", required=True)
    orc.add_argument("--cutoff", type=int, default=5)
    orc.add_argument("--out", required=True)

    dec = sub.add_parser("decompose",
                         help="triangular two-mode decomposition of a unitary")
    dec.add_argument("--unitary", required=True,
                     help="CSV of complex entries, one matrix row per line")
    dec.add_argument("--tol", type=float, default=1e-10)
    dec.add_argument("--out", required=True)

    sub.add_parser("list-scenarios", help="list the shipped golden scenarios")
    return parser


def _cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    seed = args.seed if args.seed is not None else _default_seed(scenario.defaults.seed)
    report = run(scenario, engine=args.engine, mode=args.mode,
                 shots=args.shots, seed=seed, cutoff=args.cutoff)
    emit(report, args.format, _out_path(args.out))
    return 0


def _cmd_sweep(args) -> int:
    scenario = load_scenario(args.scenario)
    values = np.linspace(args.start, args.stop, args.steps)
    table = sweep_table(scenario, args.param, values)
    report = RunReport(scenario_id=scenario.scenario_id, engine="coherent",
                       mode="sweep", tables={"sweep": table})
    emit(report, "csv", _out_path(args.out))
    return 0


def _cmd_oracle(args) -> int:
    scenario = load_scenario(args.scenario)
    report = run(scenario, engine="fock", mode="exact", cutoff=args.cutoff)
    report = RunReport(scenario_id=report.scenario_id, engine="fock",
                       mode="exact", tables={"joint": report.tables["joint"]},
                       provenance=report.provenance)
    emit(report, "csv", _out_path(args.out))
    return 0


def _cmd_decompose(args) -> int:
    rows = []
    text = Path(args.unitary).read_text(encoding="utf-8")
    for line in text.strip().splitlines():
        rows.append([complex(tok.strip().replace(" ", ""))
                     for tok in line.split(",")])
    u = np.array(rows, dtype=complex)
    d = reck_decompose(u, tol=args.tol)
    out_rows: list[tuple] = []
    for op in d.steps:
        m = op.matrix
        out_rows.append((op.position, op.mode_pair[0], op.mode_pair[1],
                         m[0, 0].real, m[0, 0].imag, m[0, 1].real, m[0, 1].imag,
                         m[1, 0].real, m[1, 0].imag, m[1, 1].real, m[1, 1].imag))
    for k, ph in enumerate(d.output_phases):
        out_rows.append((f"phase_{k}", k, k,
                         ph.real, ph.imag, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0))
    table = Table(headers=("position", "i", "j", "m00re", "m00im", "m01re",
                           "m01im", "m10re", "m10im", "m11re", "m11im"),
                  rows=out_rows)
    report = RunReport(scenario_id="decompose", engine="multiport",
                       mode="exact", tables={"steps": table})
    emit(report, "csv", _out_path(args.out))
    return 0


def _cmd_list(_args) -> int:
    for name in list_builtin_scenarios():
        scenario = load_scenario(name)
        print(f"{name}: {scenario.description}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "oracle": _cmd_oracle,
        "decompose": _cmd_decompose,
        "list-scenarios": _cmd_list,
    }
    try:
        return handlers[args.command](args)
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _ENGINE_ERRORS as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return 3
    except ProxyIfmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
