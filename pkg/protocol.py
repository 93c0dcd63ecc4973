"""
Protocol Module
Per-node discovery state machine (TNID acquisition, probabilistic
transmission, collision monitoring, hidden-device jamming) and the slotted
multi-node simulation that drives it.

Only discovery slots are simulated; the T-1 slots between them are sleep.
Every node picks its action for slot s from what it heard up to slot s-1, so
all nodes advance synchronously. Radios are half-duplex: a node that
transmits or jams in a slot hears nothing in it.
"""

import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, FrozenSet, List, Mapping, Optional, Tuple

import numpy as np

from channel import ChannelModel, Transmission, detect_tones, link_gain, synthesize_slot
from codec import DecodeResult, codebook, decode_multi, decode_with_offset_search, default_tau
from errors import OutOfRangeError
from gfield import FieldParams

logger = logging.getLogger(__name__)


class Phase(Enum):
    ACQUIRING = "acquiring"
    DISCOVERING = "discovering"


class ActionKind(Enum):
    TRANSMIT = "transmit"
    LISTEN = "listen"
    JAM = "jam"
    REACQUIRE = "reacquire"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    tnid: Optional[int] = None

    @property
    def on_air(self) -> bool:
        return self.kind in (ActionKind.TRANSMIT, ActionKind.JAM)


LISTEN = Action(ActionKind.LISTEN)
REACQUIRE = Action(ActionKind.REACQUIRE)


@dataclass(frozen=True)
class ProtocolConfig:
    p: float = 0.5
    T: int = 100
    M: int = 256
    W: int = 50
    C: int = 2
    jam_margin: Optional[float] = None
    jam_slots: int = 8
    acquire_window: int = 1
    check_stride: Optional[int] = None
    max_slots: int = 2000

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise OutOfRangeError(f"transmit probability p must be in (0, 1), got {self.p}")
        for name in ("T", "M", "W", "C", "jam_slots", "acquire_window", "max_slots"):
            if getattr(self, name) < 1:
                raise OutOfRangeError(f"protocol {name} must be >= 1, got {getattr(self, name)}")
        if self.acquire_window > self.W:
            raise OutOfRangeError(f"acquire_window must be <= W={self.W}, got {self.acquire_window}")
        if self.jam_margin is not None and self.jam_margin < 0:
            raise OutOfRangeError(f"jam_margin must be >= 0, got {self.jam_margin}")
        if self.check_stride is not None and not 1 <= self.check_stride <= self.W:
            raise OutOfRangeError(f"check_stride must lie in 1..W={self.W}, got {self.check_stride}")

    @property
    def effective_jam_margin(self) -> float:
        if self.jam_margin is not None:
            return self.jam_margin
        return 3.0 * np.sqrt(self.p * (1.0 - self.p) / self.W)

    @property
    def effective_check_stride(self) -> int:
        """Listening slots between hidden checks; by default consecutive windows overlap by half."""
        if self.check_stride is not None:
            return self.check_stride
        return (self.W + 1) // 2


@dataclass(frozen=True)
class ReceiverConfig:
    """How a listener turns a slot into TNIDs: detector gamma, score threshold, offset sweep."""

    gamma: float = 8.0
    tau: Optional[int] = None
    delta_max: int = 0
    tone_energy: float = 1.0


@dataclass(frozen=True)
class SlotObservation:
    slot: int
    channel_energy: np.ndarray
    decoded: Tuple[DecodeResult, ...]

    @property
    def tnids(self) -> FrozenSet[int]:
        return frozenset(r.tnid for r in self.decoded)


@dataclass
class NodeState:
    """Mutable protocol state of one node."""

    d: int
    phase: Phase = Phase.ACQUIRING
    tnid: Optional[int] = None
    energy_window: Deque[np.ndarray] = field(default_factory=deque)
    scan_from: int = 0
    occupancy_window: Deque[FrozenSet[int]] = field(default_factory=deque)
    occupancy_counts: Counter = field(default_factory=Counter)
    checked_at: int = 0
    neighbors: Dict[int, int] = field(default_factory=dict)
    retired: Dict[int, int] = field(default_factory=dict)
    own_hit_slots: Deque[int] = field(default_factory=deque)
    listen_count: int = 0
    jam_target: Optional[int] = None
    jam_remaining: int = 0
    first_acquired: Optional[int] = None
    transmissions: int = 0
    reacquisitions: int = 0

    @property
    def own_channel_hits(self) -> int:
        return len(self.own_hit_slots)

    @property
    def channel_energy(self) -> np.ndarray:
        """Per-TNID average energy over the listened slots still in the window (at most W)."""
        if not self.energy_window:
            return np.zeros(self.d)
        return np.mean(np.stack(self.energy_window), axis=0)

    @property
    def channel_occupancy(self) -> np.ndarray:
        """Per-TNID fraction of the last W listening slots in which that TNID was decoded."""
        occupancy = np.zeros(self.d)
        if self.occupancy_window:
            for tnid, count in self.occupancy_counts.items():
                occupancy[tnid] = count / len(self.occupancy_window)
        return occupancy

    def clear_occupancy(self, tnid: int) -> None:
        self.occupancy_counts.pop(tnid, None)
        self.occupancy_window = deque(s - {tnid} for s in self.occupancy_window)

    def is_retired(self, tnid: int, window: int) -> bool:
        """True while a TNID this node gave up is less than `window` listening slots old."""
        left = self.retired.get(tnid)
        return left is not None and self.listen_count - left < window

    def adopt(self, tnid: int, slot: int) -> None:
        self.phase = Phase.DISCOVERING
        self.tnid = tnid
        self.own_hit_slots.clear()
        self.neighbors.pop(tnid, None)
        self.retired.pop(tnid, None)
        if self.first_acquired is None:
            self.first_acquired = slot


def acquire_tnid(stats: np.ndarray, m: int, rng: np.random.Generator) -> int:
    """Uniform pick among the m channels with the lowest average energy (ties by index)."""
    if not 1 <= m <= len(stats):
        raise OutOfRangeError(f"candidate set size M={m} must lie in 1..{len(stats)}")
    candidates = np.argsort(np.asarray(stats), kind="stable")[:m]
    return int(candidates[rng.integers(m)])


def hidden_check(occupancy: np.ndarray, cfg: ProtocolConfig) -> FrozenSet[int]:
    """Channels whose detection frequency is well above p: likely shared by hidden devices."""
    threshold = cfg.p + cfg.effective_jam_margin
    return frozenset(int(k) for k in np.flatnonzero(np.asarray(occupancy) > threshold))


def collision_check(state: NodeState, cfg: ProtocolConfig) -> bool:
    """C or more own-TNID detections within the last W listening slots."""
    return state.own_channel_hits >= cfg.C


def observe(state: NodeState, obs: SlotObservation, cfg: ProtocolConfig) -> None:
    """Fold one listened slot into the node's statistics and neighbor table."""
    tnids = obs.tnids
    state.listen_count += 1

    state.energy_window.append(obs.channel_energy)
    if len(state.energy_window) > cfg.W:
        state.energy_window.popleft()

    state.occupancy_window.append(tnids)
    state.occupancy_counts.update(tnids)
    if len(state.occupancy_window) > cfg.W:
        expired = state.occupancy_window.popleft()
        state.occupancy_counts.subtract(expired)
        state.occupancy_counts += Counter()

    if state.tnid is not None and state.tnid in tnids:
        state.own_hit_slots.append(state.listen_count)
    while state.own_hit_slots and state.own_hit_slots[0] <= state.listen_count - cfg.W:
        state.own_hit_slots.popleft()

    for tnid in tnids:
        if tnid != state.tnid and not state.is_retired(tnid, cfg.W):
            state.neighbors.setdefault(tnid, obs.slot)


def choose_action(state: NodeState, slot: int, cfg: ProtocolConfig, rng: np.random.Generator) -> Action:
    if state.phase is Phase.ACQUIRING:
        # first acquisition scans acquire_window slots; re-acquisition needs a full window of W
        needed = cfg.W if state.reacquisitions else cfg.acquire_window
        if slot < state.scan_from or len(state.energy_window) < needed:
            return LISTEN
        state.adopt(acquire_tnid(state.channel_energy, cfg.M, rng), slot)

    if collision_check(state, cfg):
        _start_reacquisition(state, slot, cfg, rng)
        return REACQUIRE

    if state.jam_remaining > 0:
        return _continue_jam(state)

    if (len(state.occupancy_window) >= cfg.W
            and state.listen_count - state.checked_at >= cfg.effective_check_stride):
        state.checked_at = state.listen_count
        flagged = sorted(hidden_check(state.channel_occupancy, cfg) - {state.tnid})
        if flagged:
            state.jam_target = flagged[0]
            state.jam_remaining = cfg.jam_slots
            logger.debug("node on TNID %s jams TNID %s at slot %d", state.tnid, state.jam_target, slot)
            return _continue_jam(state)

    if rng.random() < cfg.p:
        return Action(ActionKind.TRANSMIT, state.tnid)
    return LISTEN


def node_step(state: NodeState, obs: Optional[SlotObservation], slot: int, cfg: ProtocolConfig,
              rng: np.random.Generator) -> Tuple[NodeState, Action]:
    """Absorb the previous slot's observation (None if the node was on air) and pick this slot's action."""
    if obs is not None:
        observe(state, obs, cfg)
    action = choose_action(state, slot, cfg, rng)
    if action.on_air:
        state.transmissions += 1
    return state, action


def _start_reacquisition(state: NodeState, slot: int, cfg: ProtocolConfig, rng: np.random.Generator) -> None:
    """Give up the TNID; acquire again after a 1..W backoff, from the last W listened slots."""
    state.retired[state.tnid] = state.listen_count
    state.phase = Phase.ACQUIRING
    state.tnid = None
    state.own_hit_slots.clear()
    state.jam_remaining = 0
    state.jam_target = None
    state.scan_from = slot + int(rng.integers(1, cfg.W + 1))
    state.reacquisitions += 1


def _continue_jam(state: NodeState) -> Action:
    target = state.jam_target
    state.jam_remaining -= 1
    if state.jam_remaining == 0:
        state.clear_occupancy(target)
        state.neighbors.pop(target, None)
        state.jam_target = None
    return Action(ActionKind.JAM, target)


@dataclass(frozen=True)
class Topology:
    """Node positions in a square and the disc connectivity they induce."""

    positions: np.ndarray
    radius: float

    @property
    def size(self) -> int:
        return len(self.positions)

    @property
    def distances(self) -> np.ndarray:
        delta = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt((delta ** 2).sum(axis=-1))

    @property
    def adjacency(self) -> np.ndarray:
        adjacent = self.distances <= self.radius
        np.fill_diagonal(adjacent, False)
        return adjacent

    def neighbors(self, i: int) -> List[int]:
        return [int(j) for j in np.flatnonzero(self.adjacency[i])]

    @property
    def mean_degree(self) -> float:
        if self.size == 0:
            return 0.0
        return float(self.adjacency.sum(axis=1).mean())

    @classmethod
    def drop(cls, nodes: int, area: float, radius: float, rng: np.random.Generator) -> "Topology":
        """Uniform drop of `nodes` points over a sqrt(area) x sqrt(area) square."""
        side = np.sqrt(area)
        return cls(rng.uniform(0.0, side, size=(nodes, 2)), radius)

    @classmethod
    def line(cls, nodes: int, spacing: float, radius: float) -> "Topology":
        positions = np.column_stack([np.arange(nodes) * spacing, np.zeros(nodes)])
        return cls(positions, radius)


@dataclass
class DiscoveryRun:
    """Outcome of one simulated run, shared by the coded scheme and the baseline."""

    discovered: List[Dict[int, int]]
    completion: List[int]
    transmissions: List[int]
    slots: int
    tnids: List[Optional[int]] = field(default_factory=list)
    neighbor_tables: List[Dict[int, int]] = field(default_factory=list)
    # receptions[i, j]: slots in which i heard j as the only transmitter (baseline only)
    receptions: Optional[np.ndarray] = None

    @property
    def median_completion(self) -> float:
        if not self.completion:
            return float("nan")
        return float(np.median(self.completion))

    def elapsed_slots(self, period: int) -> List[int]:
        """Completion expressed in ordinary slots, one discovery slot every `period`."""
        return [c * period for c in self.completion]


def run_discovery(topology: Topology, cfg: ProtocolConfig, params: FieldParams, model: ChannelModel,
                  rng: np.random.Generator, receiver: ReceiverConfig = None, max_offset: int = 0,
                  initial_tnids: Mapping[int, int] = None, stop_when_complete: bool = False) -> DiscoveryRun:
    """
    Simulate discovery slots until the horizon (or until every node completes).

    Listener i credits node j with discovery in slot s when it decodes j's TNID,
    j transmitted its own TNID, j is in range, and no other in-range node was on
    air with that TNID.
    """
    receiver = receiver or ReceiverConfig()
    tau = receiver.tau if receiver.tau is not None else default_tau(params.n, 1)
    table = codebook(params)
    nodes = topology.size
    adjacency = topology.adjacency
    distances = topology.distances
    true_neighbors = [set(topology.neighbors(i)) for i in range(nodes)]

    states = [NodeState(params.d) for _ in range(nodes)]
    for node, tnid in (initial_tnids or {}).items():
        states[node].adopt(int(tnid), 0)
    offsets = (rng.integers(-max_offset, max_offset + 1, size=nodes) if max_offset > 0
               else np.zeros(nodes, dtype=np.int64))

    discovered: List[Dict[int, int]] = [{} for _ in range(nodes)]
    completion: List[Optional[int]] = [None] * nodes
    observations: List[Optional[SlotObservation]] = [None] * nodes
    silent = np.zeros(params.d)

    slot = 0
    for slot in range(cfg.max_slots):
        actions = [node_step(states[i], observations[i], slot, cfg, rng)[1] for i in range(nodes)]
        on_air = {i: a.tnid for i, a in enumerate(actions) if a.on_air}
        observations = [None] * nodes

        for i, action in enumerate(actions):
            if action.on_air:
                continue
            heard = [j for j in on_air if adjacency[i, j]]
            if not heard and model.noise_var == 0:
                observations[i] = SlotObservation(slot, silent, ())
                continue
            txs = [Transmission(tuple(table[on_air[j]]), link_gain(model, distances[i, j], rng, params.d),
                                receiver.tone_energy, int(offsets[j] - offsets[i]))
                   for j in heard]
            grid = synthesize_slot(txs, model, rng, params)
            det = detect_tones(grid, receiver.gamma)
            if receiver.delta_max > 0:
                decoded = decode_with_offset_search(det, params, 1, tau, receiver.delta_max)
            else:
                decoded = decode_multi(det, params, 1, tau)
            observations[i] = SlotObservation(slot, grid.channel_energy(table), tuple(decoded))

            users = Counter(on_air[j] for j in heard)
            for result in decoded:
                if users[result.tnid] != 1:
                    continue
                j = next(j for j in heard if on_air[j] == result.tnid)
                # a jammer sends someone else's TNID, which says nothing about the jammer
                if actions[j].kind is ActionKind.TRANSMIT:
                    discovered[i].setdefault(j, slot + 1)

        for i in range(nodes):
            if completion[i] is None and states[i].first_acquired is not None \
                    and true_neighbors[i] <= discovered[i].keys():
                last = max(discovered[i].values(), default=0)
                completion[i] = max(states[i].first_acquired + 1, last)
        if stop_when_complete and all(c is not None for c in completion):
            break

    for i in range(nodes):
        if observations[i] is not None:
            observe(states[i], observations[i], cfg)

    horizon = cfg.max_slots
    finished = sum(c is not None for c in completion)
    logger.debug("discovery run: %d/%d nodes complete after %d slots", finished, nodes, slot + 1)
    return DiscoveryRun(
        discovered=discovered,
        completion=[c if c is not None else horizon for c in completion],
        transmissions=[s.transmissions for s in states],
        slots=slot + 1,
        tnids=[s.tnid for s in states],
        neighbor_tables=[dict(s.neighbors) for s in states],
    )
