"""Experiment orchestration: dispatch a scenario to an engine and emit
the results as byte-stable CSV or JSONL.

Every number is printed with 17 significant digits so regression diffs
are exact, and nothing volatile (timestamps included) reaches the output
files: the bytes are a pure function of (scenario, engine, mode, shots,
seed).
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import __version__
from .circuit import Delay, compile_circuit
from .coherent import (
    CoherentTrain,
    click_distribution,
    interaction_free_probability,
    propagate_coherent,
    sample_clicks,
)
from .errors import EngineSourceMismatchError, IoError, ProxyIfmError
from .fock import FockOracle, sample_joint
from .scenarios import (
    CoherentSourceSpec,
    FockSourceSpec,
    Scenario,
    TensorSumSourceSpec,
)
from .singlephoton import propagate_photon, sample_outcomes, tensor_sum_state

_ENGINE_SOURCES = {
    "coherent": (CoherentSourceSpec,),
    "singlephoton": (TensorSumSourceSpec,),
    "fock": (CoherentSourceSpec, TensorSumSourceSpec, FockSourceSpec),
}


@dataclass(frozen=True)
class Table:
    headers: tuple[str, ...]
    rows: list[tuple]


@dataclass(frozen=True)
class RunReport:
    """Engine output tables plus provenance.

    The provenance (seed, tool version, timestamp) documents the run; only
    the tables are emitted, so output files stay reproducible byte for
    byte from (scenario, engine, mode, shots, seed).
    """

    scenario_id: str
    engine: str
    mode: str
    tables: dict[str, Table]
    provenance: dict = field(default_factory=dict)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def run(scenario: Scenario, engine: Optional[str] = None,
        mode: Optional[str] = None, shots: Optional[int] = None,
        seed: Optional[int] = None, cutoff: int = 5) -> RunReport:
    """Execute a scenario and collect the result tables.

    ``engine`` defaults to the scenario source's natural engine; asking an
    engine to consume a source it cannot represent raises
    ``EngineSourceMismatchError``.
    """
    engine = engine or scenario.engine()
    mode = mode or scenario.defaults.mode
    shots = scenario.defaults.shots if shots is None else shots
    seed = scenario.defaults.seed if seed is None else seed
    if engine not in _ENGINE_SOURCES:
        raise EngineSourceMismatchError(f"unknown engine {engine!r}")
    if not isinstance(scenario.source, _ENGINE_SOURCES[engine]):
        raise EngineSourceMismatchError(
            f"engine {engine!r} cannot consume a {scenario.source.kind!r} "
            f"source (scenario {scenario.scenario_id!r})")

    try:
        if engine == "coherent":
            tables = _run_coherent(scenario, mode, shots, seed)
        elif engine == "singlephoton":
            tables = _run_singlephoton(scenario, mode, shots, seed)
        else:
            tables = _run_fock(scenario, mode, shots, seed, cutoff)
    except ProxyIfmError as exc:
        raise type(exc)(
            f"scenario {scenario.scenario_id!r}, engine {engine!r}: {exc}"
        ) from exc

    return RunReport(
        scenario_id=scenario.scenario_id,
        engine=engine,
        mode=mode,
        tables=tables,
        provenance={
            "seed": seed,
            "shots": shots,
            "tool_version": __version__,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        },
    )


def _coherent_train(scenario: Scenario) -> CoherentTrain:
    src = scenario.source
    return CoherentTrain(alpha=complex(np.sqrt(src.alpha_squared)),
                         phases=src.phases)


def _field_table(field_cfg, order: Sequence[str]) -> Table:
    rows = []
    for term in order:
        amps = field_cfg.amplitudes[term]
        for b, a in enumerate(amps):
            mean = float(abs(a) ** 2)
            rows.append((term, b, float(a.real), float(a.imag), mean,
                         float(-np.expm1(-mean))))
    return Table(headers=("terminal", "bin", "re", "im", "mean_n", "p_click"),
                 rows=rows)


def _run_coherent(scenario: Scenario, mode: str, shots: int, seed: int) -> dict:
    compiled = compile_circuit(scenario.spec)
    train = _coherent_train(scenario)
    field_cfg = propagate_coherent(compiled, train)
    tables: dict[str, Table] = {}
    if mode == "exact":
        tables["field"] = _field_table(field_cfg, compiled.terminal_order)
        if scenario.trigger_terminal and compiled.loss_terminals:
            interior = compiled.interior_bins()
            trig_bin = interior[len(interior) // 2]
            p_empty = interaction_free_probability(scenario.spec, train, trig_bin)
            tables["conditionals"] = Table(
                headers=("quantity", "value"),
                rows=[
                    ("trigger_terminal", scenario.trigger_terminal),
                    ("trigger_bin", trig_bin),
                    ("p_no_interaction", p_empty),
                ])
    elif mode == "mc":
        log = sample_clicks(click_distribution(field_cfg), shots, seed)
        tables["events"] = Table(
            headers=("shot", "terminal", "bin"),
            rows=[(int(s), log.terminal_order[t], int(b))
                  for s, t, b in zip(log.shot_idx, log.terminal, log.bin_idx)])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return tables


def _run_singlephoton(scenario: Scenario, mode: str, shots: int, seed: int) -> dict:
    compiled = compile_circuit(scenario.spec)
    psi = tensor_sum_state(scenario.source.n_pulses)
    dist = propagate_photon(compiled, psi)
    tables: dict[str, Table] = {}
    if mode == "exact":
        rows = []
        for term in compiled.terminal_order:
            for b, p in enumerate(dist.p_bins[term]):
                rows.append((term, b, float(p)))
        tables["field"] = Table(headers=("terminal", "bin", "p"), rows=rows)
        tables["p_outcome"] = Table(
            headers=("terminal", "probability"),
            rows=[(t, float(dist.p[t])) for t in compiled.terminal_order])
    elif mode == "mc":
        cells, draws = sample_outcomes(dist, shots, seed)
        tables["events"] = Table(
            headers=("shot", "terminal", "bin"),
            rows=[(s, cells[i][0], cells[i][1]) for s, i in enumerate(draws)])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return tables


def _prepare_fock_input(oracle: FockOracle, scenario: Scenario):
    src = scenario.source
    if isinstance(src, CoherentSourceSpec):
        return oracle.coherent_train_state(
            complex(np.sqrt(src.alpha_squared)), src.n_pulses, src.phases)
    if isinstance(src, TensorSumSourceSpec):
        return oracle.tensor_sum_state(src.n_pulses)
    return oracle.single_photon_state(src.photons)


def outcome_vector_string(dist, outcome: tuple[int, ...]) -> str:
    """Stable text form of a joint outcome: terminal=counts groups."""
    groups: dict[str, list[int]] = {}
    for (term, b), count in zip(dist.cells, outcome):
        groups.setdefault(term, []).append(count)
    return ";".join(f"{t}=" + ",".join(str(c) for c in counts)
                    for t, counts in groups.items())


def _run_fock(scenario: Scenario, mode: str, shots: int, seed: int,
              cutoff: int) -> dict:
    oracle = FockOracle(scenario.spec, cutoff)
    state = _prepare_fock_input(oracle, scenario)
    dist = oracle.run(state)
    tables: dict[str, Table] = {}
    if mode == "exact":
        rows = [(outcome_vector_string(dist, o), float(p))
                for o, p in sorted(dist.table.items(),
                                   key=lambda kv: (-kv[1], kv[0]))]
        tables["joint"] = Table(headers=("outcome_vector", "probability"),
                                rows=rows)
        tables["marginals"] = Table(
            headers=("terminal", "bin", "mean_n"),
            rows=[(t, b, dist.mean(t, b)) for (t, b) in dist.cells])
    elif mode == "mc":
        draws = sample_joint(dist, shots, seed)
        tables["events"] = Table(
            headers=("shot", "outcome_vector"),
            rows=[(s, outcome_vector_string(dist, o))
                  for s, o in enumerate(draws)])
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return tables


def emit(report: RunReport, fmt: str, path: Union[str, Path]) -> None:
    """Write the report tables; identical reports yield identical bytes.

    CSV: the first table lands at ``path``, any further table at
    ``<path>.<table>.csv``.  JSONL: one object per row, keyed by the
    table headers (a ``table`` key is added only when several tables are
    present).
    """
    path = Path(path)
    try:
        if fmt == "csv":
            names = list(report.tables)
            for k, name in enumerate(names):
                target = path if k == 0 else path.with_suffix(f".{name}.csv")
                _write_csv(report.tables[name], target)
        elif fmt == "jsonl":
            _write_jsonl(report, path)
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def _write_csv(table: Table, path: Path) -> None:
    lines = [",".join(table.headers)]
    for row in table.rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_jsonl(report: RunReport, path: Path) -> None:
    many = len(report.tables) > 1
    lines = []
    for name, table in report.tables.items():
        for row in table.rows:
            obj = {}
            if many:
                obj["table"] = name
            for h, x in zip(table.headers, row):
                obj[h] = float(format(x, ".17g")) if isinstance(x, float) else x
            lines.append(json.dumps(obj, separators=(",", ":")))
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def sweep_table(scenario: Scenario, param: str, values: Sequence[float]) -> Table:
    """Fringe sweep over a scenario's declared sweepable phase parameter."""
    from .coherent import fringe_sweep
    from .errors import ParseError, UnresolvedElementIdError

    if param not in scenario.sweep_params:
        raise UnresolvedElementIdError(
            f"scenario {scenario.scenario_id!r} exposes no parameter {param!r}")
    element_id, field_name = scenario.sweep_params[param]
    if field_name != "phase":
        raise ParseError(f"parameter {param!r} does not target a delay phase")
    delays = [e for e in scenario.spec.elements if isinstance(e, Delay)]
    if len(delays) != 1 or delays[0].id != element_id:
        raise ParseError(
            f"sweep target {element_id!r} must be the scenario's only delay")
    source = None
    if isinstance(scenario.source, CoherentSourceSpec):
        source = _coherent_train(scenario)
    rows = fringe_sweep(scenario.spec, values, source=source)
    return Table(headers=("phase", "p_d1", "p_d2"),
                 rows=[(float(a), float(b), float(c)) for a, b, c in rows])
