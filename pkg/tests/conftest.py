import math

import numpy as np
import pytest

from proxyifm.circuit import (
    BeamSplitter,
    CircuitSpec,
    Delay,
    Detector,
    Obstacle,
    PhaseShift,
    Source,
)

ALPHA_SQ = 0.1
ALPHA = math.sqrt(ALPHA_SQ)


def fig2_spec(n_pulses=10, inserted=False, mismatch=0.0):
    """Two-pulse delay interferometer (same topology as the fig2_* scenarios)."""
    return CircuitSpec(elements=(
        Source("src", "a", n_pulses),
        BeamSplitter("bs1", ("a", "vac1"), ("s", "l0")),
        Obstacle("obstacle_l", "l0", "l1", inserted=inserted),
        Delay("delay_l", "l1", "l2", bins=1, phase=mismatch),
        PhaseShift("arm_l_matched", "l2", "l3", angle=math.pi),
        BeamSplitter("bs2", ("s", "l3"), ("c", "d")),
        Detector("D1", "c"),
        Detector("D2", "d"),
    ))


def fig3_spec(n_pulses=4, blocked=None):
    """Three-pulse cascade (same topology as the fig3_* scenarios).

    blocked: None, "l", or "m".
    """
    return CircuitSpec(elements=(
        Source("src", "a", n_pulses),
        BeamSplitter("bs1", ("a", "vac1"), ("s", "w")),
        BeamSplitter("bs2", ("w", "vac2"), ("arm_l0", "arm_m0")),
        Obstacle("obstacle_l", "arm_l0", "arm_l1", inserted=blocked == "l"),
        Obstacle("obstacle_m", "arm_m0", "arm_m1", inserted=blocked == "m"),
        Delay("delay_l", "arm_l1", "arm_l2", bins=2),
        Delay("delay_m", "arm_m1", "arm_m2", bins=1),
        BeamSplitter("bs3", ("arm_m2", "arm_l2"), ("e", "b")),
        PhaseShift("phase_s", "s", "s1", angle=math.pi / 2),
        BeamSplitter("bs4", ("s1", "e"), ("c", "d")),
        Detector("D1", "d"),
        Detector("D2", "c"),
        Detector("D3", "b"),
    ))


def hom_spec(disjoint=False):
    """Two single-photon sources meeting at one balanced splitter."""
    bins = 2 if disjoint else 1
    return CircuitSpec(elements=(
        Source("src_a", "a", bins),
        Source("src_b", "b", bins),
        BeamSplitter("bs", ("a", "b"), ("c", "d")),
        Detector("D1", "c"),
        Detector("D2", "d"),
    ), n_bins=bins)


def poisson_cdf(k: int, mu: float) -> float:
    return sum(math.exp(-mu) * mu**j / math.factorial(j) for j in range(k + 1))


def poisson_tail(k: int, mu: float) -> float:
    """P(Poisson(mu) > k)."""
    return 1.0 - poisson_cdf(k, mu)


def poisson_pmf(k: int, mu: float) -> float:
    return math.exp(-mu) * mu**k / math.factorial(k)


def truncated_poisson_pmf(n: int, mu_cell: float, mu_total: float, cutoff: int) -> float:
    """Marginal of one cell of independent Poissons conditioned on a total
    photon cap: pmf(n) * P(rest <= cutoff - n) / P(all <= cutoff)."""
    if n > cutoff:
        return 0.0
    rest = max(mu_total - mu_cell, 0.0)
    return (poisson_pmf(n, mu_cell) * poisson_cdf(cutoff - n, rest)
            / poisson_cdf(cutoff, mu_total))


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)
