# SPDX-License-Identifier: Apache-2.0
"""Python access to the semfuzz codecs, mutation engine, oracle, metrics and fixtures."""

import json

from . import _core
from ._core import SCHEMA_VERSION, Fixture, SemfuzzError

__all__ = [
    "SCHEMA_VERSION",
    "Fixture",
    "SemfuzzError",
    "apply_actions",
    "classify",
    "decode",
    "encode",
    "metrics_from_counts",
    "run_pipeline",
    "score_rules",
    "verify",
]


def decode(protocol, wire, message_type=""):
    return json.loads(_core.decode(protocol, bytes(wire), message_type))


def encode(message):
    return _core.encode(json.dumps(message))


def apply_actions(message, actions):
    return json.loads(_core.apply_actions(json.dumps(message), json.dumps(actions)))


def classify(protocol, kind, data=b"", qname="", deadline_ms=0):
    """kind is one of bytes, timeout, refused, reset. Returns (class, detail)."""
    return _core.classify(protocol, kind, bytes(data), qname, deadline_ms)


def verify(expected, actual):
    return _core.verify(expected, actual)


def score_rules(extracted, benchmark, threshold=0.5):
    return json.loads(_core.score_rules(json.dumps(extracted), json.dumps(benchmark), threshold))


def metrics_from_counts(tp, fp, fn):
    return json.loads(_core.metrics_from_counts(tp, fp, fn))


def run_pipeline(config_path, out="", bugs=None):
    """Runs the whole pipeline and returns the campaign summary."""
    return json.loads(_core.run_pipeline(str(config_path), str(out), bugs))
