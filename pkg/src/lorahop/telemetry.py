"""End-node telemetry: sliding windows of channel availability, RSSI and SNR.

Windows feed the channel predictor; `generate_labeled_dataset` replays a
single node against a trace once per candidate channel (shared per-row seed)
and labels each row with the channel that realized the highest RSSI.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .trace import RSSI_FLOOR_DBM, SNR_FLOOR_DB

DEFAULT_WINDOW_SLOTS = 8
RSSI_NORM_DBM = -120.0
SNR_NORM_DB = 10.0


class TelemetryWindow:
    """Ring of the last `ts` slots of per-frequency availability, RSSI and SNR."""

    def __init__(self, ts=DEFAULT_WINDOW_SLOTS, num_freqs=1):
        if ts < 1 or num_freqs < 1:
            raise ValueError("ts and num_freqs must be positive")
        self.ts = int(ts)
        self.num_freqs = int(num_freqs)
        self.availability = deque(maxlen=self.ts)
        self.rssi = deque(maxlen=self.ts)
        self.snr = deque(maxlen=self.ts)

    def __len__(self):
        return len(self.availability)

    def record(self, availability_vec, rssi, snr):
        vec = np.asarray(availability_vec, dtype=np.float64)
        if vec.shape != (self.num_freqs,):
            raise ValueError(f"availability vector must have length {self.num_freqs}")
        self.availability.append(vec.copy())
        self.rssi.append(float(rssi))
        self.snr.append(float(snr))
        return self

    def snapshot(self):
        """Flatten to ts*(F+2) features, oldest first, cold-start slots padded."""
        pad = self.ts - len(self)
        avail = [np.zeros(self.num_freqs)] * pad + list(self.availability)
        rssi = [RSSI_FLOOR_DBM] * pad + list(self.rssi)
        snr = [SNR_FLOOR_DB] * pad + list(self.snr)
        feats = np.concatenate([
            np.concatenate(avail) if avail else np.zeros(0),
            np.asarray(rssi) / RSSI_NORM_DBM,
            np.asarray(snr) / SNR_NORM_DB,
        ])
        return feats

    @staticmethod
    def feature_dim(ts, num_freqs):
        return ts * (num_freqs + 2)


@dataclass(frozen=True)
class DatasetRow:
    features: tuple
    label: int


@dataclass(frozen=True)
class DatasetConfig:
    source: str = "A"
    ts: int = DEFAULT_WINDOW_SLOTS
    payload_schedule: tuple = (30, 74, 118, 162, 206, 250)
    packets_per_size: int = 50
    rssi_jitter_db: float = 1.0
    snr_jitter_db: float = 0.5


def generate_labeled_dataset(trace, config, n_rows, seed):
    """Counterfactual replay: per row, try every channel from the same state.

    Realized RSSI of a lost packet is the floor value, so channels that fail to
    deliver rarely win the argmax.  The node then actually transmits on the
    labeled channel and its window advances with that outcome.
    """
    if n_rows <= 0:
        raise ValueError("n_rows must be positive")
    freqs = trace.frequencies
    if config.source not in trace.sources:
        raise ValueError(f"trace has no source {config.source!r}")
    window = TelemetryWindow(ts=config.ts, num_freqs=len(freqs))
    rows = []
    for r in range(n_rows):
        size = config.payload_schedule[(r // config.packets_per_size) % len(config.payload_schedule)]
        features = window.snapshot()
        realized_rssi = np.empty(len(freqs))
        realized_snr = np.empty(len(freqs))
        for f_idx, freq in enumerate(freqs):
            entry = trace.lookup(config.source, freq, size)
            rng = np.random.default_rng([seed, r, f_idx])
            delivered = rng.random() < entry.pdr
            if delivered:
                rssi = min(entry.mean_rssi + rng.normal(0.0, 1.0) * config.rssi_jitter_db, 0.0)
                snr = entry.mean_snr + rng.normal(0.0, 1.0) * config.snr_jitter_db
            else:
                rssi, snr = RSSI_FLOOR_DBM, SNR_FLOOR_DB
            realized_rssi[f_idx] = rssi
            realized_snr[f_idx] = snr
        label = int(np.argmax(realized_rssi))   # ties resolve to the lowest index
        rows.append(DatasetRow(features=tuple(features.tolist()), label=label))
        avail = np.zeros(len(freqs))
        avail[label] = 1.0   # the node's own transmission counts toward availability
        window.record(avail, realized_rssi[label], realized_snr[label])
    return rows


def dataset_to_json(rows, ts, num_freqs):
    doc = {
        "metadata": {"ts": ts, "F": num_freqs, "normalization": "v1"},
        "rows": [{"features": list(r.features), "label": r.label} for r in rows],
    }
    return json.dumps(doc, sort_keys=True)


def dataset_from_json(text):
    doc = json.loads(text)
    meta = doc["metadata"]
    rows = [DatasetRow(features=tuple(r["features"]), label=int(r["label"]))
            for r in doc["rows"]]
    expected = TelemetryWindow.feature_dim(meta["ts"], meta["F"])
    for r in rows:
        if len(r.features) != expected:
            raise ValueError("feature length does not match metadata")
        if not 0 <= r.label < meta["F"]:
            raise ValueError("label out of range")
    return rows, meta
