"""Heart-rate variability pipeline: analysis core, MQTT codec, flows and the
monolith / flow / FaaS runtimes."""

import json as _json

from . import _core
from ._core import DocStore, FlowParseError, TriplexError, decode_varint, detect_peaks, encode_publish, encode_varint, load_signal

__all__ = [
    "DocStore",
    "FlowParseError",
    "TriplexError",
    "analyze",
    "compare",
    "compute_metrics",
    "decode_packet",
    "decode_varint",
    "detect_peaks",
    "encode_publish",
    "encode_varint",
    "load_signal",
    "parse_flow",
    "run_mode",
    "store_get_all",
]


def analyze(samples, sample_rate_hz=100.0, min_bpm=40.0, max_bpm=180.0, outlier_rejection=True):
    return _json.loads(_core.analyze(list(samples), sample_rate_hz, min_bpm, max_bpm, outlier_rejection))


def compute_metrics(rr_ms):
    return _json.loads(_core.compute_metrics(list(rr_ms)))


def parse_flow(text):
    return _json.loads(_core.parse_flow(text))


def decode_packet(data):
    """Returns (packet dict, bytes consumed), or None for an incomplete packet."""
    out = _core.decode_packet(bytes(data))
    return None if out is None else (_json.loads(out[0]), out[1])


def run_mode(mode, samples, threshold=3000, flow_file="flows/health_monitor.json", sample_rate_hz=100.0):
    return _json.loads(_core.run_mode(mode, list(samples), threshold, flow_file, sample_rate_hz))


def compare(samples, threshold=3000, flow_file="flows/health_monitor.json", tamper=None):
    return _json.loads(_core.compare(list(samples), threshold, flow_file, tamper))


def store_get_all(store, collection):
    return _json.loads(store.get_all(collection))
