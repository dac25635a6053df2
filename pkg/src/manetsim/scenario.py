"""Scenario files: a YAML schema covering every tunable the simulator has,
plus the bundled experiment presets. Parsing then re-serializing a scenario
is lossless, and its canonical hash rides along in every CSV row."""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import yaml

PROTOCOLS = ("aodv", "dsr", "new")
SWEEP_AXES = ("speed", "bandwidth", "node_count")
PRESET_NAMES = ("fig3a", "fig3b", "fig4", "fig5")


@dataclass
class SweepSpec:
    axis: str = "speed"
    values: list = field(default_factory=lambda: [2.0])
    protocols: list = field(default_factory=list)   # empty -> scenario protocol
    seeds: list = field(default_factory=lambda: [1])
    # optional second dimension, e.g. one bandwidth-demand series per value
    series_axis: str | None = None
    series_values: list = field(default_factory=list)


@dataclass
class Scenario:
    name: str = "scenario"
    arena_width: float = 1000.0
    arena_height: float = 1000.0
    node_count: int = 50
    transmission_range: float = 250.0
    range_overrides: dict = field(default_factory=dict)   # node id -> range
    node_capacity_kbps: float = 10000.0
    speed_range: list = field(default_factory=lambda: [0.0, 0.0])
    epoch_seconds: float = 10.0
    mobility_model: str = "random_direction"
    protocol: str = "aodv"
    sim_duration: float = 300.0
    traffic_stop_margin: float = 2.0
    source_count: list = field(default_factory=lambda: [1, 1])
    connections_per_source: list = field(default_factory=lambda: [1, 1])
    flow_kind: str = "datagram"
    packet_size_bits: int = 4096
    demand_kbps: float = 256.0
    min_bw_fraction: float = 0.5
    realtime_fraction: float = 0.5
    start_window: list = field(default_factory=lambda: [1.0, 5.0])
    hello_interval: float = 1.0
    allowed_misses: int = 2
    reply_window: float = 0.5
    route_lifetime: float = 30.0
    max_discovery_attempts: int = 3
    control_latency: float = 0.001
    hop_latency: float = 0.001
    ttl: int = 32
    dsr_cache_capacity: int = 64
    reliable_window: int = 8
    reliable_max_retries: int = 5
    reliable_buffer: int = 64
    reestablish_mode: str = "serial"
    repair_initiator: str = "upstream"
    debug_checks: bool = False
    seeds: list = field(default_factory=lambda: [1])
    sweep: SweepSpec | None = None

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        if self.node_count < 2:
            raise ValueError(f"node_count must be >= 2, got {self.node_count}")
        if self.sim_duration <= 0:
            raise ValueError(f"sim_duration must be positive, got {self.sim_duration}")
        lo, hi = self.speed_range
        if lo > hi or lo < 0:
            raise ValueError(f"bad speed_range {self.speed_range}")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        if self.mobility_model not in ("random_direction", "random_waypoint"):
            raise ValueError(f"unknown mobility_model {self.mobility_model!r}")
        if self.reestablish_mode not in ("serial", "parallel"):
            raise ValueError(f"reestablish_mode must be serial|parallel, got {self.reestablish_mode!r}")
        if self.repair_initiator not in ("upstream", "downstream"):
            raise ValueError(f"repair_initiator must be upstream|downstream, got {self.repair_initiator!r}")
        if self.flow_kind not in ("datagram", "reliable"):
            raise ValueError(f"flow_kind must be datagram|reliable, got {self.flow_kind!r}")
        if not (0.0 < self.min_bw_fraction <= 1.0):
            raise ValueError(f"min_bw_fraction must be in (0, 1], got {self.min_bw_fraction}")
        for pair_name in ("source_count", "connections_per_source"):
            lo, hi = getattr(self, pair_name)
            if lo > hi or lo < 0:
                raise ValueError(f"bad {pair_name} range {[lo, hi]}")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.sweep is not None:
            if self.sweep.axis not in SWEEP_AXES:
                raise ValueError(f"sweep axis must be one of {SWEEP_AXES}, got {self.sweep.axis!r}")
            if not self.sweep.values:
                raise ValueError("sweep needs at least one axis value")
            if not self.sweep.seeds:
                raise ValueError("sweep needs at least one seed")
            for p in self.sweep.protocols:
                if p not in PROTOCOLS:
                    raise ValueError(f"unknown protocol {p!r} in sweep")
            if self.sweep.series_axis is not None:
                if self.sweep.series_axis not in SWEEP_AXES:
                    raise ValueError(
                        f"sweep series_axis must be one of {SWEEP_AXES}, "
                        f"got {self.sweep.series_axis!r}")
                if not self.sweep.series_values:
                    raise ValueError("sweep series_axis given without series_values")

    # -- (de)serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        d = asdict(self)
        if self.sweep is None:
            d.pop("sweep")
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        sweep = data.pop("sweep", None)
        sc = cls(**data)
        if sweep is not None:
            sc.sweep = SweepSpec(**sweep)
        sc.validate()
        return sc

    @classmethod
    def from_yaml(cls, path: str | Path) -> "Scenario":
        with open(path) as fh:
            data = yaml.safe_load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"scenario file {path} does not hold a mapping")
        return cls.from_dict(data)

    def to_yaml(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def load_preset(name: str) -> Scenario:
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    ref = resources.files("manetsim.presets").joinpath(f"{name}.yaml")
    with resources.as_file(ref) as path:
        return Scenario.from_yaml(path)
