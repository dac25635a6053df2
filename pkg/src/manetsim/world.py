"""Node kinematics and connectivity: random-direction mobility with wall
reflection, static per-node transmission ranges, disc-model reachability."""

import math
from dataclasses import dataclass

import numpy as np

from .engine import Engine, RngStream

TWO_PI = 2.0 * math.pi


@dataclass(slots=True)
class MobilityState:
    # Committed pose at time t0; positions between t0 and epoch_ends_at are
    # derived analytically, so queries never mutate state or consume RNG.
    x0: float
    y0: float
    t0: float
    direction: float
    speed: float
    epoch_ends_at: float


def _fold(u: float, span: float) -> tuple[float, float]:
    """Reflect an unbounded coordinate into [0, span].

    Returns (position, velocity_sign) after however many wall bounces the
    straight-line coordinate u implies.
    """
    m = u % (2.0 * span)
    if m <= span:
        return m, 1.0
    return 2.0 * span - m, -1.0


class World:
    def __init__(self, width: float, height: float, engine: Engine,
                 epoch_seconds: float = 10.0,
                 speed_range: tuple[float, float] = (0.0, 0.0),
                 mobility_model: str = "random_direction"):
        if mobility_model == "random_waypoint":
            raise NotImplementedError("random_waypoint is a config stub; use random_direction")
        if mobility_model != "random_direction":
            raise ValueError(f"unknown mobility model: {mobility_model!r}")
        self.width = width
        self.height = height
        self.engine = engine
        self.epoch_seconds = epoch_seconds
        self.speed_range = speed_range
        self._mob: dict[int, MobilityState] = {}
        self._range: dict[int, float] = {}
        self._node_ids: list[int] = []

    # -- population -------------------------------------------------------

    def add_node(self, node_id: int, x: float, y: float, range_: float,
                 direction: float = 0.0, speed: float = 0.0) -> None:
        if not (0.0 <= x <= self.width and 0.0 <= y <= self.height):
            raise ValueError(f"node {node_id} placed outside arena: ({x}, {y})")
        if range_ <= 0:
            raise ValueError(f"node {node_id} needs a positive range, got {range_}")
        self._mob[node_id] = MobilityState(x, y, 0.0, direction, speed, self.epoch_seconds)
        self._range[node_id] = range_
        self._node_ids.append(node_id)

    def populate(self, node_count: int, range_: float | dict[int, float],
                 placement: RngStream, mobility_seed_fn) -> None:
        """Scatter node_count nodes uniformly; per-node streams draw the
        initial heading/speed so trajectories replay independently."""
        for nid in range(node_count):
            x = placement.uniform(0.0, self.width)
            y = placement.uniform(0.0, self.height)
            r = range_[nid] if isinstance(range_, dict) else range_
            self.add_node(nid, x, y, r)
            stream = mobility_seed_fn(nid)
            st = self._mob[nid]
            st.direction = stream.uniform(0.0, TWO_PI)
            st.speed = stream.uniform(*self.speed_range)

    def node_ids(self) -> list[int]:
        return self._node_ids

    def range_of(self, node_id: int) -> float:
        return self._range[node_id]

    # -- kinematics -------------------------------------------------------

    def _pose_at(self, st: MobilityState, t: float) -> tuple[float, float, float]:
        # The committed pose is authoritative: queries never rewind past it.
        dt = max(t - st.t0, 0.0)
        if dt == 0.0 or st.speed == 0.0:
            return st.x0, st.y0, st.direction
        vx = st.speed * math.cos(st.direction)
        vy = st.speed * math.sin(st.direction)
        x, sx = _fold(st.x0 + vx * dt, self.width)
        y, sy = _fold(st.y0 + vy * dt, self.height)
        if sx > 0 and sy > 0:
            d = st.direction
        else:
            d = math.atan2(vy * sy, vx * sx) % TWO_PI
        return x, y, d

    def position(self, node_id: int, t: float | None = None) -> tuple[float, float]:
        st = self._mob.get(node_id)
        if st is None:
            raise KeyError(f"unknown node {node_id}")
        x, y, _ = self._pose_at(st, self.engine.now() if t is None else t)
        return x, y

    def step_mobility(self, node_id: int, dt: float,
                      stream: RngStream | None = None) -> tuple[float, float]:
        """Advance a node's committed pose by dt, re-drawing heading/speed at
        each epoch boundary crossed. Returns the new position."""
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        st = self._mob.get(node_id)
        if st is None:
            raise KeyError(f"unknown node {node_id}")
        target = st.t0 + dt
        while target >= st.epoch_ends_at and stream is not None:
            self._commit(st, st.epoch_ends_at)
            st.direction = stream.uniform(0.0, TWO_PI)
            st.speed = stream.uniform(*self.speed_range)
            st.epoch_ends_at += self.epoch_seconds
        self._commit(st, target)
        return st.x0, st.y0

    def _commit(self, st: MobilityState, t: float) -> None:
        st.x0, st.y0, st.direction = self._pose_at(st, t)
        st.t0 = t

    def advance_epoch(self, node_id: int, stream: RngStream) -> None:
        """Epoch-boundary event body: commit pose at the boundary, redraw."""
        st = self._mob[node_id]
        self._commit(st, st.epoch_ends_at)
        st.direction = stream.uniform(0.0, TWO_PI)
        st.speed = stream.uniform(*self.speed_range)
        st.epoch_ends_at += self.epoch_seconds

    def mobility_state(self, node_id: int) -> MobilityState:
        return self._mob[node_id]

    # -- connectivity -----------------------------------------------------

    def distance(self, a: int, b: int, t: float | None = None) -> float:
        ax, ay = self.position(a, t)
        bx, by = self.position(b, t)
        return math.hypot(ax - bx, ay - by)

    def can_transmit(self, a: int, b: int, t: float | None = None) -> bool:
        """True iff a's radio reaches b (boundary inclusive). Per-node ranges
        make the relation directional: a->b may hold while b->a does not."""
        if a == b:
            raise ValueError(f"can_transmit requires distinct nodes, got {a} twice")
        return self.distance(a, b, t) <= self._range[a]

    def neighbors(self, a: int, t: float | None = None) -> set[int]:
        if a not in self._mob:
            raise KeyError(f"unknown node {a}")
        return {b for b in self._node_ids if b != a and self.can_transmit(a, b, t)}

    def reach_matrix(self, t: float | None = None) -> tuple[list[int], np.ndarray]:
        """R[i, j] true iff node_ids[i] can transmit to node_ids[j].

        One vectorized pass; used by the beacon tick instead of N^2 single
        queries.
        """
        when = self.engine.now() if t is None else t
        ids = self._node_ids
        pos = np.empty((len(ids), 2))
        for i, nid in enumerate(ids):
            pos[i] = self.position(nid, when)
        delta = pos[:, None, :] - pos[None, :, :]
        dist = np.hypot(delta[..., 0], delta[..., 1])
        ranges = np.array([self._range[nid] for nid in ids])
        reach = dist <= ranges[:, None]
        np.fill_diagonal(reach, False)
        return ids, reach
