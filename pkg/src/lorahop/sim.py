"""Discrete-time replay of multi-node LoRa transmission against a channel trace.

Each simulated node sends one packet per slot, walking the payload schedule
(`packets_per_size` packets per size).  Link outcomes come from the trace via
`ChannelSampler`; overlapping transmissions on the same (gateway, frequency,
slot) are resolved with a capture threshold.  The gateway feeds every node's
telemetry window after each slot, which is what the sensing and predictor
hopping strategies consume.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .telemetry import TelemetryWindow, DEFAULT_WINDOW_SLOTS
from .trace import ChannelSampler, RSSI_FLOOR_DBM, SNR_FLOOR_DB
from . import predictor as predictor_mod

DEFAULT_PAYLOAD_SCHEDULE = (30, 74, 118, 162, 206, 250)


class Strategy:
    """Chooses a frequency index before each packet (the hop opportunity)."""

    kind = "base"

    def choose(self, node, freqs, rng):
        raise NotImplementedError


class FixedStrategy(Strategy):
    kind = "fixed"

    def __init__(self, freq_mhz):
        self.freq_mhz = float(freq_mhz)

    def choose(self, node, freqs, rng):
        return freqs.index(self.freq_mhz)


class RandomHopStrategy(Strategy):
    kind = "random_hop"

    def choose(self, node, freqs, rng):
        return int(rng.integers(0, len(freqs)))


class SensingHopStrategy(Strategy):
    """Prefer channels whose last observed availability count is lowest.

    Never picks a channel with last seen count >= 2 while one with <= 1 exists.
    """

    kind = "sensing_hop"

    def choose(self, node, freqs, rng):
        window = node.window
        if len(window) == 0:
            return node.current_freq_idx if node.current_freq_idx is not None else 0
        last = window.availability[-1]
        return int(np.argmin(last))


class PredictorHopStrategy(Strategy):
    kind = "predictor_hop"

    def __init__(self, model):
        self.model = model

    def choose(self, node, freqs, rng):
        if self.model.num_channels != len(freqs):
            raise ValueError("model output width does not match the frequency set")
        return predictor_mod.predict_channel(self.model, node.window)


@dataclass(frozen=True)
class NodeSpec:
    source: str
    strategy: Strategy


@dataclass(frozen=True)
class SimConfig:
    nodes: tuple
    payload_schedule: tuple = DEFAULT_PAYLOAD_SCHEDULE
    packets_per_size: int = 50
    rng_seed: int = 0
    capture_threshold_db: float = 6.0
    rssi_jitter_db: float = 1.0
    snr_jitter_db: float = 0.5
    predictor_placement: str = "end_node"   # or "gateway"
    window_slots: int = DEFAULT_WINDOW_SLOTS

    def __post_init__(self):
        if self.packets_per_size < 1:
            raise ValueError("packets_per_size must be >= 1")
        if self.predictor_placement not in ("end_node", "gateway"):
            raise ValueError("predictor_placement must be end_node or gateway")


@dataclass
class SlotEvent:
    slot: int
    node: str
    gateway: str
    freq_mhz: float
    size: int
    rssi: float
    snr: float
    delivered: bool
    collided: bool
    hopped: bool


@dataclass
class ReportRow:
    node: str
    size: int
    strategy: str
    sent: int
    delivered: int
    collisions: int
    hops: int
    mean_rssi: float        # over delivered packets only
    mean_snr: float
    mean_rssi_all: float    # lost packets counted at the RSSI floor
    mean_snr_all: float

    @property
    def pdr(self):
        return self.delivered / self.sent if self.sent else 0.0


@dataclass
class SimReport:
    rows: list
    events: list

    def row(self, node, size):
        for r in self.rows:
            if r.node == node and r.size == size:
                return r
        raise KeyError((node, size))

    @property
    def sizes(self):
        return sorted({r.size for r in self.rows})

    def to_json(self):
        doc = {
            "rows": [dict(asdict(r), pdr=r.pdr) for r in self.rows],
            "events": [asdict(e) for e in self.events],
        }
        return json.dumps(doc, sort_keys=True)


class _NodeState:
    def __init__(self, spec, num_freqs, window_slots, seed, index):
        self.spec = spec
        self.window = TelemetryWindow(ts=window_slots, num_freqs=num_freqs)
        self.rng = np.random.default_rng([seed, 0x50, index])
        self.current_freq_idx = None
        self.hops = 0

    @property
    def source(self):
        return self.spec.source


def run(config, trace):
    """Execute the full payload schedule; deterministic given (config, trace, seed)."""
    freqs = list(trace.frequencies)
    for size in config.payload_schedule:
        if size not in trace.sizes:
            raise ValueError(f"payload size {size} not present in the trace")
    sources = [spec.source for spec in config.nodes]
    if len(set(sources)) != len(sources):
        raise ValueError("node sources must be distinct")
    nodes = [_NodeState(spec, len(freqs), config.window_slots, config.rng_seed, k)
             for k, spec in enumerate(config.nodes)]
    samplers = {
        node.source: ChannelSampler(
            trace, seed=[config.rng_seed, 0x5A, k], block_len=config.packets_per_size,
            rssi_jitter_db=config.rssi_jitter_db, snr_jitter_db=config.snr_jitter_db)
        for k, node in enumerate(nodes)
    }

    events = []
    acc = {}   # (node_name, size) -> accumulators
    slot = 0
    for size in config.payload_schedule:
        for _ in range(config.packets_per_size):
            slot += 1
            txs = []
            for node in nodes:
                f_idx = node.spec.strategy.choose(node, freqs, node.rng)
                hopped = node.current_freq_idx is not None and f_idx != node.current_freq_idx
                if hopped:
                    node.hops += 1
                node.current_freq_idx = f_idx
                delivered, rssi, snr = samplers[node.source].sample(
                    node.source, freqs[f_idx], size)
                txs.append({"node": node, "f_idx": f_idx, "delivered": delivered,
                            "rssi": rssi, "snr": snr, "hopped": hopped,
                            "collided": False})

            # capture: strongest survives with enough margin, otherwise all lost
            for f_idx in set(t["f_idx"] for t in txs):
                group = [t for t in txs if t["f_idx"] == f_idx]
                if len(group) < 2:
                    continue
                group.sort(key=lambda t: t["rssi"], reverse=True)
                margin = group[0]["rssi"] - group[1]["rssi"]
                for j, t in enumerate(group):
                    if j == 0 and margin >= config.capture_threshold_db:
                        continue
                    t["delivered"] = False
                    t["collided"] = True

            avail = np.zeros(len(freqs))
            for t in txs:
                avail[t["f_idx"]] += 1.0
            for t in txs:
                node = t["node"]
                observed_rssi = t["rssi"] if t["delivered"] else RSSI_FLOOR_DBM
                observed_snr = t["snr"] if t["delivered"] else SNR_FLOOR_DB
                if config.predictor_placement == "end_node" or t["delivered"]:
                    node.window.record(avail, observed_rssi, observed_snr)
                key = (node.source, size)
                a = acc.setdefault(key, {"sent": 0, "delivered": 0, "collisions": 0,
                                         "hops": 0, "rssi": [], "snr": [],
                                         "rssi_all": [], "snr_all": []})
                a["sent"] += 1
                a["delivered"] += int(t["delivered"])
                a["collisions"] += int(t["collided"])
                a["hops"] += int(t["hopped"])
                if t["delivered"]:
                    a["rssi"].append(t["rssi"])
                    a["snr"].append(t["snr"])
                a["rssi_all"].append(observed_rssi)
                a["snr_all"].append(observed_snr)
                events.append(SlotEvent(
                    slot=slot, node=node.source, gateway="GW0",
                    freq_mhz=freqs[t["f_idx"]], size=size,
                    rssi=round(t["rssi"], 6), snr=round(t["snr"], 6),
                    delivered=t["delivered"], collided=t["collided"],
                    hopped=t["hopped"]))

    rows = []
    for node in nodes:
        for size in config.payload_schedule:
            a = acc[(node.source, size)]
            rows.append(ReportRow(
                node=node.source, size=size, strategy=node.spec.strategy.kind,
                sent=a["sent"], delivered=a["delivered"],
                collisions=a["collisions"], hops=a["hops"],
                mean_rssi=float(np.mean(a["rssi"])) if a["rssi"] else RSSI_FLOOR_DBM,
                mean_snr=float(np.mean(a["snr"])) if a["snr"] else SNR_FLOOR_DB,
                mean_rssi_all=float(np.mean(a["rssi_all"])),
                mean_snr_all=float(np.mean(a["snr_all"])),
            ))
    return SimReport(rows=rows, events=events)


def compare_strategies(report_a, report_b):
    """Per payload size, improvement of report_a over baseline report_b.

    RSSI improvement works on dBm magnitudes (smaller |rssi| is better):
    (|rssi_b| - |rssi_a|) / |rssi_b| * 100.  Lost packets enter the means at
    the floor values, which is what makes whole-run comparisons sensitive to
    delivery, not just link quality of the delivered packets.
    """
    if report_a.sizes != report_b.sizes:
        raise ValueError("reports cover different payload size sets")

    def per_size(report, size):
        rows = [r for r in report.rows if r.size == size]
        sent = sum(r.sent for r in rows)
        rssi = sum(r.mean_rssi_all * r.sent for r in rows) / sent
        snr = sum(r.mean_snr_all * r.sent for r in rows) / sent
        pdr = sum(r.delivered for r in rows) / sent
        return rssi, snr, pdr

    table = []
    for size in report_a.sizes:
        rssi_a, snr_a, pdr_a = per_size(report_a, size)
        rssi_b, snr_b, pdr_b = per_size(report_b, size)
        rssi_impr = (abs(rssi_b) - abs(rssi_a)) / abs(rssi_b) * 100 if rssi_b else 0.0
        snr_impr = (snr_a - snr_b) / snr_b * 100 if snr_b > 0 else float("nan")
        table.append({
            "size": size,
            "rssi_a": rssi_a, "rssi_b": rssi_b, "rssi_improvement_pct": rssi_impr,
            "snr_a": snr_a, "snr_b": snr_b, "snr_improvement_pct": snr_impr,
            "pdr_a": pdr_a, "pdr_b": pdr_b, "pdr_delta": pdr_a - pdr_b,
        })
    return table
