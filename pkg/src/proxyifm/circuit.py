"""Interferometer data model and time-unrolled compilation.

A circuit is a directed acyclic graph of linear-optical elements connected
by named wires.  Sources inject pulse trains on their output wire; every
other wire is produced by exactly one element output and consumed by
exactly one element input or terminal.  Wire names beginning with ``vac``
are reserved: they denote fresh vacuum inputs and may each be consumed
once without being produced.

Time is discrete.  Amplitudes live on (wire, bin) slots; a ``Delay`` of k
bins shifts bin t to bin t+k exactly and multiplies by ``exp(i*phase)``.
``compile_circuit`` folds the element graph into a single complex matrix
from (source, bin) coordinates to (terminal, bin) coordinates.  Because
every element is unitary and obstacles reroute amplitude to loss terminals
instead of destroying it, the unrolled map is an isometry.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .errors import (
    BinOverflowError,
    CyclicGraphError,
    DanglingPortError,
    NonUnitaryBeamSplitterError,
    PortCountMismatchError,
)

UNITARITY_TOL = 1e-10

_VACUUM_PREFIX = "vac"


def default_beamsplitter() -> np.ndarray:
    """Symmetric 50:50 splitter, ``(1/sqrt2) [[1, i], [i, 1]]``.

    Port order: output slot 0 is the transmission of input slot 0 (no
    phase); the crossed path picks up the factor ``i``.  Two of these in
    sequence on the same pair of wires make a balanced Mach-Zehnder with
    one dark port.
    """
    return np.array([[1.0, 1.0j], [1.0j, 1.0]], dtype=complex) / np.sqrt(2.0)


@dataclass(frozen=True)
class Source:
    """Pulse-train input.  ``n_bins`` input bins (0 .. n_bins-1) may be fed."""

    id: str
    out: str
    n_bins: int = 1


@dataclass(frozen=True, eq=False)
class BeamSplitter:
    """Two-port splitter.  ``matrix`` defaults to :func:`default_beamsplitter`.

    Slot order follows the ``inputs``/``outputs`` tuples: outputs[0] =
    m00*inputs[0] + m01*inputs[1], outputs[1] = m10*inputs[0] + m11*inputs[1].
    """

    id: str
    inputs: tuple[str, str]
    outputs: tuple[str, str]
    matrix: Optional[np.ndarray] = None

    def resolved_matrix(self) -> np.ndarray:
        if self.matrix is None:
            return default_beamsplitter()
        return np.asarray(self.matrix, dtype=complex)


@dataclass(frozen=True)
class Delay:
    """Shift every bin by ``bins`` slots and multiply by ``exp(i*phase)``."""

    id: str
    input: str
    output: str
    bins: int
    phase: float = 0.0


@dataclass(frozen=True)
class PhaseShift:
    id: str
    input: str
    output: str
    angle: float


@dataclass(frozen=True)
class Obstacle:
    """Perfect absorber.  Inserted, it routes the wire's amplitude to a loss
    terminal named after the element; retracted, it is the identity.
    ``bins`` optionally gates absorption to the listed bins only.
    """

    id: str
    input: str
    output: str
    inserted: bool = True
    bins: Optional[frozenset[int]] = None


@dataclass(frozen=True)
class Detector:
    id: str
    wire: str
    label: str = ""


@dataclass(frozen=True)
class Absorber:
    """A deliberate beam dump; a loss terminal that is always inserted."""

    id: str
    wire: str


Element = Union[Source, BeamSplitter, Delay, PhaseShift, Obstacle, Detector, Absorber]


@dataclass(frozen=True)
class CircuitSpec:
    """Declarative interferometer description.

    ``elements`` holds everything in declaration order: sources, inner
    elements, and the detector/absorber terminals.  ``n_bins`` may be
    omitted (``None``) to use the smallest bin count that fits every
    source pulse after all delays.
    """

    elements: tuple[Element, ...]
    n_bins: Optional[int] = None
    bin_spacing: float = 1.0

    def sources(self) -> list[Source]:
        return [e for e in self.elements if isinstance(e, Source)]

    def terminals(self) -> list[Union[Detector, Absorber]]:
        return [e for e in self.elements if isinstance(e, (Detector, Absorber))]

    def element(self, element_id: str) -> Element:
        for e in self.elements:
            if e.id == element_id:
                return e
        raise KeyError(element_id)

    def with_obstacles(self, inserted: dict[str, bool]) -> "CircuitSpec":
        """Copy of the spec with obstacle ``inserted`` flags replaced."""
        new = []
        for e in self.elements:
            if isinstance(e, Obstacle) and e.id in inserted:
                e = replace(e, inserted=inserted[e.id])
            new.append(e)
        return replace(self, elements=tuple(new))

    def with_element(self, element: Element) -> "CircuitSpec":
        """Copy of the spec with the same-id element replaced."""
        new = tuple(element if e.id == element.id else e for e in self.elements)
        if all(e is not element for e in new):
            raise KeyError(element.id)
        return replace(self, elements=new)


@dataclass(frozen=True, eq=False)
class CompiledCircuit:
    """Time-unrolled linear map of a validated circuit.

    ``unrolled_map`` has one row per (terminal, bin) and one column per
    (source, bin); its columns are orthonormal.  Row blocks are laid out
    in ``terminal_order`` (detectors first, then loss terminals), bin-major
    within each block.  Immutable after build and safe to share.
    """

    unrolled_map: np.ndarray
    n_bins: int
    terminal_order: tuple[str, ...]
    terminal_index: dict[str, tuple[int, int]]
    loss_terminals: frozenset[str]
    source_order: tuple[str, ...]
    input_index: dict[str, tuple[int, int]]
    max_path_delay: int
    path_delays: frozenset[int]

    @property
    def input_dim(self) -> int:
        return self.unrolled_map.shape[1]

    def detector_ids(self) -> tuple[str, ...]:
        return tuple(t for t in self.terminal_order if t not in self.loss_terminals)

    def block(self, terminal_id: str) -> np.ndarray:
        """The (n_bins, input_dim) sub-matrix feeding one terminal."""
        lo, hi = self.terminal_index[terminal_id]
        return self.unrolled_map[lo:hi, :]

    def interior_bins(self, source_id: Optional[str] = None) -> range:
        """Output bins reached by every delay offset of a populated bin.

        For a train of N pulses on bins 0..N-1 and path delays up to D,
        these are bins D..N-1: the bins where all partial waves overlap.
        """
        src = self._source(source_id)
        return range(self.max_path_delay, src.n_bins)

    def _source(self, source_id: Optional[str]) -> Source:
        ids = dict(zip(self.source_order, self._sources))
        if source_id is None:
            if len(self._sources) != 1:
                raise ValueError("source_id required for multi-source circuits")
            return self._sources[0]
        return ids[source_id]

    # populated by compile_circuit
    _sources: tuple[Source, ...] = field(default=(), repr=False)


def _is_vacuum(wire: str) -> bool:
    return wire.startswith(_VACUUM_PREFIX)


def _element_io(e: Element) -> tuple[tuple[str, ...], tuple[str, ...]]:
    if isinstance(e, Source):
        return (), (e.out,)
    if isinstance(e, BeamSplitter):
        return tuple(e.inputs), tuple(e.outputs)
    if isinstance(e, (Delay, PhaseShift, Obstacle)):
        return (e.input,), (e.output,)
    if isinstance(e, Detector):
        return (e.wire,), ()
    if isinstance(e, Absorber):
        return (e.wire,), ()
    raise TypeError(f"unknown element type {type(e)!r}")


def validate(spec: CircuitSpec) -> list[Element]:
    """Check the wiring invariants and return elements in topological order."""
    produced: dict[str, str] = {}
    consumed: dict[str, str] = {}
    for e in spec.elements:
        ins, outs = _element_io(e)
        for w in outs:
            if _is_vacuum(w):
                raise DanglingPortError(
                    f"element {e.id!r} writes reserved vacuum wire {w!r}")
            if w in produced:
                raise DanglingPortError(
                    f"wire {w!r} produced by both {produced[w]!r} and {e.id!r}")
            produced[w] = e.id
        for w in ins:
            if w in consumed:
                raise DanglingPortError(
                    f"wire {w!r} consumed by both {consumed[w]!r} and {e.id!r}")
            consumed[w] = e.id

    for w, owner in consumed.items():
        if w not in produced and not _is_vacuum(w):
            raise DanglingPortError(
                f"wire {w!r} (input of {owner!r}) is never produced")
    for w, owner in produced.items():
        if w not in consumed:
            raise DanglingPortError(
                f"wire {w!r} (output of {owner!r}) never reaches a terminal")

    for e in spec.elements:
        if isinstance(e, BeamSplitter):
            m = e.resolved_matrix()
            if m.shape != (2, 2):
                raise NonUnitaryBeamSplitterError(f"{e.id!r}: matrix must be 2x2")
            r = np.linalg.norm(m.conj().T @ m - np.eye(2))
            if r > UNITARITY_TOL:
                raise NonUnitaryBeamSplitterError(
                    f"{e.id!r}: unitarity residual {r:.3e} exceeds {UNITARITY_TOL}")
        if isinstance(e, Delay) and (e.bins < 0 or e.bins != int(e.bins)):
            raise BinOverflowError(f"{e.id!r}: delay must be a non-negative integer")
        if isinstance(e, Source) and e.n_bins < 1:
            raise DanglingPortError(f"source {e.id!r}: n_bins must be positive")

    # Kahn's toposort, declaration order as the tiebreak so that compilation
    # is a pure function of the spec.
    ready = {w for w in consumed if _is_vacuum(w)}
    order: list[Element] = []
    pending = list(spec.elements)
    while pending:
        progressed = False
        remaining = []
        for e in pending:
            ins, outs = _element_io(e)
            if all(w in ready for w in ins):
                order.append(e)
                ready.update(outs)
                progressed = True
            else:
                remaining.append(e)
        if not progressed:
            names = ", ".join(e.id for e in remaining)
            raise CyclicGraphError(f"elements {names} form a spatial cycle")
        pending = remaining
    return order


def compile_circuit(spec: CircuitSpec) -> CompiledCircuit:
    """Compile a validated spec into its time-unrolled isometry.

    Raises ``BinOverflowError`` naming the offending delay if any populated
    source bin would be shifted past ``n_bins``.  Deterministic: the same
    spec yields a bit-identical matrix.
    """
    order = validate(spec)
    sources = [e for e in order if isinstance(e, Source)]
    if not sources:
        raise DanglingPortError("circuit has no source")

    # Input coordinates: (source, bin) blocks in declaration order.
    input_index: dict[str, tuple[int, int]] = {}
    col = 0
    for s in sources:
        input_index[s.id] = (col, col + s.n_bins)
        col += s.n_bins
    input_dim = col

    n_bins = spec.n_bins
    if n_bins is None:
        n_bins = _required_bins(order, sources)

    # Per-wire transfer matrix: amplitude on (wire, bin t) as a linear map
    # of the input coordinates.  max_bin tracks the populated extent;
    # delays the set of accumulated delay offsets of all contributing paths.
    transfer: dict[str, np.ndarray] = {}
    max_bin: dict[str, int] = {}
    delays: dict[str, frozenset[int]] = {}

    det_blocks: list[tuple[str, np.ndarray]] = []
    loss_blocks: list[tuple[str, np.ndarray]] = []
    path_delays: set[int] = set()

    for e in order:
        if isinstance(e, Source):
            t = np.zeros((n_bins, input_dim), dtype=complex)
            lo, _ = input_index[e.id]
            if e.n_bins > n_bins:
                raise BinOverflowError(
                    f"source {e.id!r}: {e.n_bins} pulse bins exceed n_bins={n_bins}")
            for b in range(e.n_bins):
                t[b, lo + b] = 1.0
            transfer[e.out] = t
            max_bin[e.out] = e.n_bins - 1
            delays[e.out] = frozenset({0})
        elif isinstance(e, BeamSplitter):
            t0, t1 = (_take(transfer, max_bin, delays, w, n_bins, input_dim)
                      for w in e.inputs)
            m = e.resolved_matrix()
            transfer[e.outputs[0]] = m[0, 0] * t0[0] + m[0, 1] * t1[0]
            transfer[e.outputs[1]] = m[1, 0] * t0[0] + m[1, 1] * t1[0]
            mb = max(t0[1], t1[1])
            ds = t0[2] | t1[2]
            for w in e.outputs:
                max_bin[w] = mb
                delays[w] = ds
        elif isinstance(e, Delay):
            t, mb, ds = _take(transfer, max_bin, delays, e.input, n_bins, input_dim)
            if mb >= 0 and mb + e.bins >= n_bins:
                raise BinOverflowError(
                    f"delay {e.id!r}: bin {mb}+{e.bins} exceeds n_bins={n_bins}")
            out = np.zeros_like(t)
            if e.bins:
                out[e.bins:, :] = t[:-e.bins, :]
            else:
                out[:, :] = t
            if e.phase:
                out = out * np.exp(1j * e.phase)
            transfer[e.output] = out
            max_bin[e.output] = mb + e.bins
            delays[e.output] = frozenset(d + e.bins for d in ds)
        elif isinstance(e, PhaseShift):
            t, mb, ds = _take(transfer, max_bin, delays, e.input, n_bins, input_dim)
            transfer[e.output] = t * np.exp(1j * e.angle)
            max_bin[e.output] = mb
            delays[e.output] = ds
        elif isinstance(e, Obstacle):
            t, mb, ds = _take(transfer, max_bin, delays, e.input, n_bins, input_dim)
            if not e.inserted:
                transfer[e.output] = t
                max_bin[e.output] = mb
                delays[e.output] = ds
                continue
            if e.bins is None:
                loss_blocks.append((e.id, t))
                transfer[e.output] = np.zeros_like(t)
            else:
                gate = np.zeros((n_bins, 1))
                for b in e.bins:
                    gate[b, 0] = 1.0
                loss_blocks.append((e.id, t * gate))
                transfer[e.output] = t * (1.0 - gate)
            max_bin[e.output] = mb
            delays[e.output] = ds
        elif isinstance(e, Detector):
            t, mb, ds = _take(transfer, max_bin, delays, e.wire, n_bins, input_dim)
            det_blocks.append((e.id, t))
            path_delays.update(ds)
        elif isinstance(e, Absorber):
            t, mb, ds = _take(transfer, max_bin, delays, e.wire, n_bins, input_dim)
            loss_blocks.append((e.id, t))
            path_delays.update(ds)

    blocks = det_blocks + loss_blocks
    rows = np.vstack([b for _, b in blocks]) if blocks else np.zeros((0, input_dim))
    terminal_index = {}
    for k, (tid, _) in enumerate(blocks):
        terminal_index[tid] = (k * n_bins, (k + 1) * n_bins)

    return CompiledCircuit(
        unrolled_map=rows,
        n_bins=n_bins,
        terminal_order=tuple(tid for tid, _ in blocks),
        terminal_index=terminal_index,
        loss_terminals=frozenset(tid for tid, _ in loss_blocks),
        source_order=tuple(s.id for s in sources),
        input_index=input_index,
        max_path_delay=max(path_delays) if path_delays else 0,
        path_delays=frozenset(path_delays),
        _sources=tuple(sources),
    )


def _take(transfer, max_bin, delays, wire, n_bins, input_dim):
    if _is_vacuum(wire):
        return np.zeros((n_bins, input_dim), dtype=complex), -1, frozenset()
    return transfer[wire], max_bin[wire], delays[wire]


def _required_bins(order: Sequence[Element], sources: Sequence[Source]) -> int:
    """Smallest n_bins with room for every pulse after every delay chain."""
    depth: dict[str, int] = {}
    for e in order:
        if isinstance(e, Source):
            depth[e.out] = e.n_bins - 1
        elif isinstance(e, BeamSplitter):
            d = max(depth.get(w, 0) for w in e.inputs)
            for w in e.outputs:
                depth[w] = d
        elif isinstance(e, Delay):
            depth[e.output] = depth.get(e.input, 0) + e.bins
        elif isinstance(e, (PhaseShift, Obstacle)):
            depth[e.output] = depth.get(e.input, 0)
    return max(depth.values(), default=0) + 1


def circuit_spatial_unitary(spec: CircuitSpec) -> np.ndarray:
    """Collapse the delay-ignored spatial part of a cascade into one matrix.

    Each source or vacuum input claims a port slot in order of first
    appearance; beam splitters and phase shifters act on those slots;
    delays (including their propagation phase, which is temporal) and
    retracted or inserted obstacles are the identity.  The result is the
    product of element matrices in topological order, hence unitary.
    """
    order = validate(spec)
    slot: dict[str, int] = {}
    n = 0
    for e in order:
        ins, outs = _element_io(e)
        for w in ins:
            if _is_vacuum(w) and w not in slot:
                slot[w] = n
                n += 1
        if isinstance(e, Source):
            slot[e.out] = n
            n += 1
    n_out = len([e for e in order if isinstance(e, (Detector, Absorber))])
    if n_out != n:
        raise PortCountMismatchError(
            f"{n} spatial input ports vs {n_out} terminals")

    u = np.eye(n, dtype=complex)
    for e in order:
        if isinstance(e, BeamSplitter):
            i, j = slot[e.inputs[0]], slot[e.inputs[1]]
            m = e.resolved_matrix()
            step = np.eye(n, dtype=complex)
            step[i, i], step[i, j] = m[0, 0], m[0, 1]
            step[j, i], step[j, j] = m[1, 0], m[1, 1]
            u = step @ u
            slot[e.outputs[0]], slot[e.outputs[1]] = i, j
        elif isinstance(e, PhaseShift):
            i = slot[e.input]
            step = np.eye(n, dtype=complex)
            step[i, i] = np.exp(1j * e.angle)
            u = step @ u
            slot[e.output] = i
        elif isinstance(e, (Delay, Obstacle)):
            slot[e.output] = slot[e.input]
    return u
