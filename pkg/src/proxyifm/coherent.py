"""Coherent-state propagation, threshold-click statistics, and Monte Carlo.

A train of weak coherent pulses stays coherent under any passive linear
circuit: the per-(terminal, bin) amplitudes are just the unrolled map
applied to the per-pulse input amplitudes.  Detection uses a threshold
(click / no-click) model, so each output cell clicks independently with
probability ``1 - exp(-|amplitude|^2)``.

The conditional no-interaction figure quantifies how counterfactual a
click is: given a click on a trigger cell, the probability that the
delayed partial waves it proxies carried no photon at all.  See
:func:`interaction_free_probability` for the window convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .circuit import CircuitSpec, CompiledCircuit, Delay, Obstacle, compile_circuit
from .errors import BinOverflowError, NoLossTerminalError, ZeroPulsesError

# Fixed Monte-Carlo chunk size: results are a pure function of (seed, shot
# index, cell index), independent of how a caller batches or parallelises.
_MC_CHUNK = 1 << 17


@dataclass(frozen=True)
class CoherentTrain:
    """N identical pulses ``|alpha * exp(i phase_j)>`` on bins 0..N-1."""

    alpha: complex
    phases: tuple[float, ...]

    def __post_init__(self):
        if len(self.phases) < 1:
            raise ZeroPulsesError("a train needs at least one pulse")

    @classmethod
    def uniform(cls, n_pulses: int, alpha_squared: float,
                phase: float = 0.0) -> "CoherentTrain":
        if n_pulses < 1:
            raise ZeroPulsesError("a train needs at least one pulse")
        return cls(alpha=complex(math.sqrt(alpha_squared)),
                   phases=(phase,) * n_pulses)

    @property
    def n_pulses(self) -> int:
        return len(self.phases)

    @property
    def mean_photons(self) -> float:
        return self.n_pulses * abs(self.alpha) ** 2

    def amplitudes(self) -> np.ndarray:
        return self.alpha * np.exp(1j * np.asarray(self.phases))


@dataclass(frozen=True, eq=False)
class FieldConfiguration:
    """Coherent amplitude per (terminal, bin) after propagation.

    ``amplitudes[t]`` is a length-n_bins complex array for terminal ``t``
    (detectors and loss terminals alike).  The summed mean photon number
    over every cell equals ``source_energy``.
    """

    amplitudes: dict[str, np.ndarray]
    source_energy: float
    loss_terminals: frozenset[str]
    n_bins: int

    def mean_photons(self, terminal: str) -> np.ndarray:
        return np.abs(self.amplitudes[terminal]) ** 2

    def total_output_energy(self) -> float:
        return float(sum(np.sum(np.abs(a) ** 2) for a in self.amplitudes.values()))


@dataclass(frozen=True, eq=False)
class ClickDistribution:
    """Per-cell click probability under the threshold-detector model."""

    p_click: dict[str, np.ndarray]
    model: str = "threshold"

    def cells(self) -> list[tuple[str, int]]:
        out = []
        for t in self.p_click:
            out.extend((t, b) for b in range(len(self.p_click[t])))
        return out


@dataclass(frozen=True, eq=False)
class EventLog:
    """Monte-Carlo click records; replaying the seed reproduces it exactly."""

    shots: int
    seed: int
    shot_idx: np.ndarray
    terminal: np.ndarray      # indices into terminal_order
    bin_idx: np.ndarray
    terminal_order: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.shot_idx)

    def records(self) -> Iterable[dict]:
        for s, t, b in zip(self.shot_idx, self.terminal, self.bin_idx):
            yield {"shot": int(s), "terminal": self.terminal_order[t], "bin": int(b)}

    def counts(self) -> dict[tuple[str, int], int]:
        out: dict[tuple[str, int], int] = {}
        for t, b in zip(self.terminal, self.bin_idx):
            key = (self.terminal_order[t], int(b))
            out[key] = out.get(key, 0) + 1
        return out


def propagate_coherent(circuit: CompiledCircuit, train: CoherentTrain,
                       source_id: Optional[str] = None) -> FieldConfiguration:
    """Push a coherent train through the unrolled map.

    The train feeds the circuit's sole source (or ``source_id``); the
    other input coordinates stay vacuum.  Linear, energy conserving.
    """
    if source_id is None:
        if len(circuit.source_order) != 1:
            raise ValueError("source_id required for multi-source circuits")
        source_id = circuit.source_order[0]
    lo, hi = circuit.input_index[source_id]
    if train.n_pulses > hi - lo:
        raise BinOverflowError(
            f"train of {train.n_pulses} pulses exceeds the {hi - lo} input bins "
            f"of source {source_id!r}")
    x = np.zeros(circuit.input_dim, dtype=complex)
    x[lo:lo + train.n_pulses] = train.amplitudes()
    y = circuit.unrolled_map @ x
    amps = {t: y[circuit.terminal_index[t][0]:circuit.terminal_index[t][1]]
            for t in circuit.terminal_order}
    return FieldConfiguration(
        amplitudes=amps,
        source_energy=train.mean_photons,
        loss_terminals=circuit.loss_terminals,
        n_bins=circuit.n_bins,
    )


def click_distribution(field: FieldConfiguration) -> ClickDistribution:
    """Threshold-model click probability ``1 - exp(-mean)`` per cell.

    Coherent states factorise over cells, so clicks are independent
    across terminals and bins.
    """
    p = {t: -np.expm1(-np.abs(a) ** 2) for t, a in field.amplitudes.items()}
    return ClickDistribution(p_click=p)


def sample_clicks(dist: ClickDistribution, shots: int, seed: int) -> EventLog:
    """Sample independent per-cell clicks for ``shots`` repetitions.

    Uses a counter-based Philox stream keyed on (seed, chunk); output is
    bit-identical for a given seed no matter how the work is batched.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    terminals = tuple(dist.p_click)
    pvec = np.concatenate([dist.p_click[t] for t in terminals]) if terminals \
        else np.zeros(0)
    bins_per = [len(dist.p_click[t]) for t in terminals]
    cell_terminal = np.repeat(np.arange(len(terminals)), bins_per)
    cell_bin = np.concatenate([np.arange(n) for n in bins_per]) if terminals \
        else np.zeros(0, dtype=int)

    shot_parts, term_parts, bin_parts = [], [], []
    for start in range(0, shots, _MC_CHUNK):
        count = min(_MC_CHUNK, shots - start)
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=(start,))))
        u = rng.random((count, len(pvec)))
        hit_shot, hit_cell = np.nonzero(u < pvec)
        shot_parts.append(hit_shot + start)
        term_parts.append(cell_terminal[hit_cell])
        bin_parts.append(cell_bin[hit_cell])

    return EventLog(
        shots=shots,
        seed=seed,
        shot_idx=np.concatenate(shot_parts) if shot_parts else np.zeros(0, int),
        terminal=np.concatenate(term_parts) if term_parts else np.zeros(0, int),
        bin_idx=np.concatenate(bin_parts) if bin_parts else np.zeros(0, int),
        terminal_order=terminals,
    )


def conditional_no_interaction(field: FieldConfiguration,
                               trigger: tuple[str, int],
                               window: Sequence[tuple[str, int]]) -> float:
    """P(no click on the window's loss cells | click on the trigger cell).

    Output cells carry independent Poisson statistics, so the conditional
    equals ``exp(-sum of window cell means)`` in closed form.  The trigger
    must be a detector cell.  Window cells naming a retracted obstacle
    (absent from the field) carry no loss amplitude and contribute zero,
    so with the obstacle out the figure is exactly 1.
    """
    t_term, _ = trigger
    if t_term in field.loss_terminals:
        raise ValueError(f"trigger {t_term!r} is a loss terminal, not a detector")
    if not window:
        raise NoLossTerminalError("empty no-interaction window")
    mu = 0.0
    for term, b in window:
        if term not in field.amplitudes:
            continue
        if term not in field.loss_terminals:
            raise ValueError(f"window cell ({term!r}, {b}) is not a loss cell")
        mu += float(np.abs(field.amplitudes[term][b]) ** 2)
    return math.exp(-mu)


def partner_pulses(circuit: CompiledCircuit, trigger_bin: int) -> tuple[int, ...]:
    """Input pulses proxied by a click at ``trigger_bin``.

    A click at output bin j interferes the direct pulse j with the pulse
    j-d arriving through each delayed path; the proxied partners are the
    j-d for every distinct positive path delay d.
    """
    return tuple(sorted(trigger_bin - d for d in circuit.path_delays if d > 0))


def delay_stage_probe(spec: CircuitSpec) -> CircuitSpec:
    """Variant of ``spec`` with an absorber in front of every delay.

    Compiling the probe exposes, per input pulse, the mean photon number
    the pulse sends into each delayed arm (counted once, at the first
    delay on the path).  Existing obstacles are retracted so the probe
    measures the splitting stage alone.
    """
    elements = []
    k = 0
    for e in spec.elements:
        if isinstance(e, Obstacle):
            e = replace(e, inserted=False)
        if isinstance(e, Delay) and e.bins > 0:
            probe_wire = f"__probe_w{k}"
            elements.append(Obstacle(f"__probe_{e.id}", e.input, probe_wire))
            elements.append(replace(e, input=probe_wire))
            k += 1
        else:
            elements.append(e)
    return replace(spec, elements=tuple(elements))


def interaction_free_probability(spec: CircuitSpec, train: CoherentTrain,
                                 trigger_bin: int) -> float:
    """Exact windowed no-interaction probability for an interior trigger.

    Window convention: a click at bin j proxies one earlier pulse per
    delayed path (bin j-d for each path delay d > 0).  The figure is the
    probability that the delayed partial waves of all proxied pulses were
    empty, ``exp(-mu)`` with mu the summed mean photon number those pulses
    route into the delay stage.  For the two-pulse interferometer this is
    exactly the single blocked slice feeding the trigger's interference
    event; for deeper cascades it covers every delayed arm of every
    proxied pulse, whether or not that arm currently hosts the obstacle.
    """
    probe = compile_circuit(delay_stage_probe(spec))
    field = propagate_coherent(probe, train)
    partners = partner_pulses(probe, trigger_bin)
    if not partners or not probe.loss_terminals:
        raise NoLossTerminalError("circuit has no delayed arm to probe")
    mu = 0.0
    for term in probe.loss_terminals:
        means = field.mean_photons(term)
        for p in partners:
            if 0 <= p < len(means):
                mu += float(means[p])
    return math.exp(-mu)


def fringe_sweep(spec: CircuitSpec, phase_values: Sequence[float],
                 source: Optional[CoherentTrain] = None,
                 ) -> list[tuple[float, float, float]]:
    """Sweep the delay's propagation phase and record both output fringes.

    ``spec`` must contain exactly one delay and two detectors.  For each
    phase the train is re-propagated and the middle interior bin's mean
    photon number at each detector, normalised to the per-pulse mean, is
    reported; on the matched two-pulse interferometer this traces
    ``(1 + cos(phase)) / 2`` and ``(1 - cos(phase)) / 2``.
    """
    delays = [e for e in spec.elements if isinstance(e, Delay)]
    if len(delays) != 1:
        raise ValueError("fringe_sweep needs a spec with exactly one delay")
    delay = delays[0]
    if source is None:
        n = spec.sources()[0].n_bins
        source = CoherentTrain.uniform(n, 1.0)
    per_pulse = abs(source.alpha) ** 2

    out = []
    for phi in phase_values:
        compiled = compile_circuit(spec.with_element(replace(delay, phase=float(phi))))
        d1, d2 = compiled.detector_ids()[:2]
        field = propagate_coherent(compiled, source)
        interior = compiled.interior_bins()
        mid = interior[len(interior) // 2]
        out.append((float(phi),
                    float(field.mean_photons(d1)[mid] / per_pulse),
                    float(field.mean_photons(d2)[mid] / per_pulse)))
    return out


def coherent_overlap(a: complex, b: complex) -> complex:
    """Inner product <a|b> of two coherent states.

    ``exp(-(|a|^2 + |b|^2)/2 + conj(a)*b)``; opposite-sign amplitudes give
    magnitude ``exp(-2|a|^2)``.
    """
    a = complex(a)
    b = complex(b)
    return np.exp(-(abs(a) ** 2 + abs(b) ** 2) / 2.0 + np.conj(a) * b)
