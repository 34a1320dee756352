"""Scenario files: a versioned JSON description of one experiment.

Schema ``proxy-ifm/1``.  Top-level keys:

* ``pulses``    - the source block: ``{"kind": "coherent", "n": N,
  "alpha_squared": ..., "phases": [...]}``, ``{"kind": "tensor_sum",
  "n": N}``, or ``{"kind": "single_photons", "photons": [[source_id,
  bin], ...]}``.
* ``circuit``   - ``{"n_bins": optional, "elements": [...]}`` with one
  object per element (``source``, ``beamsplitter``, ``obstacle``,
  ``delay``, ``phase``, ``absorber``) wired by named wires; wire names
  starting with ``vac`` are fresh vacuum inputs.
* ``obstacles`` - element id -> inserted flag.
* ``detectors`` - ``[{"id", "wire", "label"}]``.
* ``sweep``     - sweepable parameter name -> ``{"element", "field"}``.
* ``analysis``  - optional ``{"trigger": detector_id}``.
* ``defaults``  - ``{"shots", "seed", "mode"}``.

The golden scenarios shipped with the package double as schema examples.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .circuit import (
    Absorber,
    BeamSplitter,
    CircuitSpec,
    Delay,
    Detector,
    Element,
    Obstacle,
    PhaseShift,
    Source,
)
from .errors import (
    ParseError,
    UnknownSchemaVersionError,
    UnresolvedElementIdError,
)

SCHEMA = "proxy-ifm/1"

_BUILTIN_DIR = Path(__file__).parent / "scenarios"

GOLDEN_SCENARIOS = (
    "fig2_open",
    "fig2_blocked",
    "fig2_tensor_sum_open",
    "fig2_tensor_sum_blocked",
    "fig3_open",
    "fig3_blocked_l",
    "fig3_blocked_m",
    "fringe_sweep",
    "hom_pair",
)


@dataclass(frozen=True)
class CoherentSourceSpec:
    n_pulses: int
    alpha_squared: float
    phases: tuple[float, ...]

    kind = "coherent"


@dataclass(frozen=True)
class TensorSumSourceSpec:
    n_pulses: int

    kind = "tensor_sum"


@dataclass(frozen=True)
class FockSourceSpec:
    photons: tuple[tuple[str, int], ...]

    kind = "single_photons"


SourceSpec = Union[CoherentSourceSpec, TensorSumSourceSpec, FockSourceSpec]


@dataclass(frozen=True)
class RunDefaults:
    shots: int = 100_000
    seed: int = 1
    mode: str = "exact"


@dataclass(frozen=True)
class Scenario:
    """A validated scenario: source, circuit, and run defaults."""

    schema_version: str
    scenario_id: str
    description: str
    source: SourceSpec
    spec: CircuitSpec
    defaults: RunDefaults
    sweep_params: dict[str, tuple[str, str]] = field(default_factory=dict)
    trigger_terminal: Optional[str] = None

    def engine(self) -> str:
        """The engine matching the source type."""
        return {"coherent": "coherent",
                "tensor_sum": "singlephoton",
                "single_photons": "fock"}[self.source.kind]


def builtin_scenario_path(name: str) -> Path:
    return _BUILTIN_DIR / f"{name}.json"


def list_builtin_scenarios() -> list[str]:
    return sorted(p.stem for p in _BUILTIN_DIR.glob("*.json"))


def load_scenario(path_or_name: Union[str, Path]) -> Scenario:
    """Load and validate a scenario file (or a shipped scenario by name).

    Parse failures report line and column; unknown schema strings and
    references to missing element ids are rejected before any compilation.
    """
    path = Path(path_or_name)
    if not path.exists() and not path.suffix:
        candidate = builtin_scenario_path(str(path_or_name))
        if candidate.exists():
            path = candidate
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read scenario file {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg} (line {exc.lineno}, column {exc.colno})",
                         line=exc.lineno, column=exc.colno) from exc
    try:
        return _scenario_from_dict(raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed scenario: {exc}") from exc


def _scenario_from_dict(raw: dict) -> Scenario:
    schema = raw.get("schema")
    if schema != SCHEMA:
        raise UnknownSchemaVersionError(
            f"schema {schema!r} is not supported (expected {SCHEMA!r})")

    source = _parse_source(raw["pulses"])
    circuit = raw["circuit"]
    elements: list[Element] = []
    ids: set[str] = set()
    for entry in circuit["elements"]:
        e = _parse_element(entry, source)
        if e.id in ids:
            raise ParseError(f"duplicate element id {e.id!r}")
        ids.add(e.id)
        elements.append(e)

    for det in raw.get("detectors", ()):
        d = Detector(id=det["id"], wire=det["wire"], label=det.get("label", ""))
        if d.id in ids:
            raise ParseError(f"duplicate element id {d.id!r}")
        ids.add(d.id)
        elements.append(d)

    obstacle_ids = {e.id for e in elements if isinstance(e, Obstacle)}
    inserted = {}
    for oid, flag in raw.get("obstacles", {}).items():
        if oid not in obstacle_ids:
            raise UnresolvedElementIdError(
                f"obstacles block references unknown element {oid!r}")
        inserted[oid] = bool(flag)

    sweep_params: dict[str, tuple[str, str]] = {}
    for name, ref in raw.get("sweep", {}).items():
        if ref["element"] not in ids:
            raise UnresolvedElementIdError(
                f"sweep parameter {name!r} references unknown element "
                f"{ref['element']!r}")
        sweep_params[name] = (ref["element"], ref["field"])

    trigger = raw.get("analysis", {}).get("trigger")
    if trigger is not None and trigger not in ids:
        raise UnresolvedElementIdError(
            f"analysis trigger references unknown detector {trigger!r}")

    defaults_raw = raw.get("defaults", {})
    defaults = RunDefaults(
        shots=int(defaults_raw.get("shots", 100_000)),
        seed=int(defaults_raw.get("seed", 1)),
        mode=str(defaults_raw.get("mode", "exact")),
    )

    spec = CircuitSpec(
        elements=tuple(elements),
        n_bins=circuit.get("n_bins"),
    ).with_obstacles(inserted)

    return Scenario(
        schema_version=schema,
        scenario_id=str(raw.get("id", "unnamed")),
        description=str(raw.get("description", "")),
        source=source,
        spec=spec,
        defaults=defaults,
        sweep_params=sweep_params,
        trigger_terminal=trigger,
    )


def _parse_source(raw: dict) -> SourceSpec:
    kind = raw["kind"]
    if kind == "coherent":
        n = int(raw["n"])
        phases = raw.get("phases")
        if phases is None:
            phases = [0.0] * n
        if len(phases) != n:
            raise ParseError(f"pulses: {len(phases)} phases for {n} pulses")
        return CoherentSourceSpec(n_pulses=n,
                                  alpha_squared=float(raw["alpha_squared"]),
                                  phases=tuple(float(p) for p in phases))
    if kind == "tensor_sum":
        return TensorSumSourceSpec(n_pulses=int(raw["n"]))
    if kind == "single_photons":
        return FockSourceSpec(photons=tuple(
            (str(s), int(b)) for s, b in raw["photons"]))
    raise ParseError(f"unknown source kind {kind!r}")


def _parse_element(entry: dict, source: SourceSpec) -> Element:
    kind = entry["kind"]
    eid = entry["id"]
    if kind == "source":
        return Source(id=eid, out=entry["out"],
                      n_bins=_source_bins(eid, source, entry))
    if kind == "beamsplitter":
        matrix = entry.get("matrix")
        if matrix is not None:
            matrix = np.array([[complex(re, im) for re, im in row]
                               for row in matrix])
        return BeamSplitter(id=eid, inputs=tuple(entry["in"]),
                            outputs=tuple(entry["out"]), matrix=matrix)
    if kind == "delay":
        return Delay(id=eid, input=entry["in"], output=entry["out"],
                     bins=int(entry["bins"]),
                     phase=float(entry.get("phase", 0.0)))
    if kind == "phase":
        return PhaseShift(id=eid, input=entry["in"], output=entry["out"],
                          angle=_angle(entry["angle"]))
    if kind == "obstacle":
        bins = entry.get("bins")
        return Obstacle(id=eid, input=entry["in"], output=entry["out"],
                        inserted=bool(entry.get("inserted", False)),
                        bins=None if bins is None else frozenset(int(b) for b in bins))
    if kind == "absorber":
        return Absorber(id=eid, wire=entry["wire"])
    raise ParseError(f"unknown element kind {kind!r}")


def _angle(value) -> float:
    """Angles are plain numbers, or the strings 'pi', 'pi/2', '-pi', ..."""
    if isinstance(value, str):
        sign = -1.0 if value.startswith("-") else 1.0
        body = value.lstrip("+-")
        if body == "pi":
            return sign * math.pi
        if body.startswith("pi/"):
            return sign * math.pi / float(body[3:])
        raise ParseError(f"cannot parse angle {value!r}")
    return float(value)


def _source_bins(source_id: str, source: SourceSpec, entry: dict) -> int:
    if "n_bins" in entry:
        return int(entry["n_bins"])
    if isinstance(source, (CoherentSourceSpec, TensorSumSourceSpec)):
        return source.n_pulses
    bins = [b for s, b in source.photons if s == source_id]
    return (max(bins) + 1) if bins else 1
