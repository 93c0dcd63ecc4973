"""
Baseline Module
The conventional random-access discovery scheme used as the reference:
closed-form discovery probability and a slotted Monte-Carlo simulator in
which a listener learns a neighbor only when that neighbor is the sole
in-range transmitter of the slot.
"""

import logging
from dataclasses import dataclass

import numpy as np

from errors import OutOfRangeError
from protocol import DiscoveryRun, Topology

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineParams:
    p: float
    L: int
    t: int

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise OutOfRangeError(f"p must be in [0, 1], got {self.p}")
        if self.L < 1:
            raise OutOfRangeError(f"L must be >= 1, got {self.L}")
        if self.t < 0:
            raise OutOfRangeError(f"t must be >= 0, got {self.t}")


def discovery_factor(p: float, L: int) -> float:
    """Per-slot probability that one given neighbor out of L is heard alone."""
    return p * (1.0 - p) ** (L - 1)


def p_discover(p: float, L: int, t: int) -> float:
    """P(device i discovers neighbor j within t discovery slots)."""
    params = BaselineParams(p, L, t)
    return 1.0 - (1.0 - discovery_factor(params.p, params.L)) ** params.t


def p_discover_opt(L: int, t: int) -> float:
    """Upper bound over p, reached at p = 1/L."""
    if L < 1:
        raise OutOfRangeError(f"L must be >= 1, got {L}")
    return p_discover(1.0 / L, L, t)


def auto_probability(mean_degree: float) -> float:
    """1/(L+1): maximizes p(1-p)^L, the mutual-discovery factor with the listener counted."""
    return 1.0 / (mean_degree + 1.0)


def star_topology(L: int) -> Topology:
    """Node 0 at the origin with L leaves spread over the unit circle around it."""
    angles = 2 * np.pi * np.arange(L) / L
    leaves = np.column_stack([np.cos(angles), np.sin(angles)])
    return Topology(np.vstack([np.zeros((1, 2)), leaves]), radius=1.0 + 1e-9)


def star_discovery_rate(p: float, L: int, slots: int, rng: np.random.Generator) -> float:
    """
    Monte-Carlo estimate of discovery_factor(p, L): run simulate_baseline on a
    star and count, over the slots in which the center listened, how often it
    heard leaf 1 alone.
    """
    run = simulate_baseline(star_topology(L), p, slots, rng)
    listening = run.slots - run.transmissions[0]
    if listening == 0:
        return 0.0
    return float(run.receptions[0, 1]) / listening


def simulate_baseline(topology: Topology, p: float, horizon: int, rng: np.random.Generator,
                      stop_when_complete: bool = False) -> DiscoveryRun:
    """Each slot every node transmits w.p. p; a listener hearing exactly one neighbor discovers it."""
    if not 0 <= p <= 1:
        raise OutOfRangeError(f"p must be in [0, 1], got {p}")
    nodes = topology.size
    adjacency = topology.adjacency
    degree = adjacency.sum(axis=1)
    discovered = [{} for _ in range(nodes)]
    found = np.zeros((nodes, nodes), dtype=bool)
    completion = np.where(degree == 0, 0, -1)
    transmissions = np.zeros(nodes, dtype=np.int64)
    receptions = np.zeros((nodes, nodes), dtype=np.int64)

    slot = 0
    for slot in range(horizon):
        on_air = rng.random(nodes) < p
        transmissions += on_air
        heard = adjacency & on_air[None, :]
        sole = (~on_air) & (heard.sum(axis=1) == 1)
        for i in np.flatnonzero(sole):
            j = int(np.flatnonzero(heard[i])[0])
            receptions[i, j] += 1
            if not found[i, j]:
                found[i, j] = True
                discovered[i][j] = slot + 1
                if found[i].sum() == degree[i]:
                    completion[i] = slot + 1
        if stop_when_complete and np.all(completion >= 0):
            break

    completion = np.where(completion < 0, horizon, completion)
    logger.debug("baseline run: p=%.3f, %d nodes, %d slots", p, nodes, slot + 1)
    return DiscoveryRun(
        discovered=discovered,
        completion=[int(c) for c in completion],
        transmissions=[int(t) for t in transmissions],
        slots=slot + 1,
        receptions=receptions,
    )
