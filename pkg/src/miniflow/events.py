"""Structured run event log.

One line per event: `ts=<n> ev=<kind> key=value ... mono=<seconds>`. The
logical timestamp `ts` is a single shared counter, so line order within one
log is the happens-before order of control-plane events; `mono` carries the
monotonic wall clock for duration measurements.
"""

from __future__ import annotations

import threading
import time


class EventLog:
    def __init__(self):
        self._lines: list[str] = []
        self._lock = threading.Lock()
        self._counter = 0

    def emit(self, ev: str, **fields) -> None:
        mono = time.monotonic()
        with self._lock:
            ts = self._counter
            self._counter += 1
            parts = [f"ts={ts}", f"ev={ev}"]
            for key, value in fields.items():
                parts.append(f"{key}={_format(value)}")
            parts.append(f"mono={mono:.6f}")
            self._lines.append(" ".join(parts))

    def lines(self) -> list[str]:
        with self._lock:
            return list(self._lines)


def _format(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    text = str(value)
    return text.replace(" ", "_").replace("=", "~")


def parse_event(line: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for part in line.split(" "):
        key, _, value = part.partition("=")
        out[key] = value
    return out


def parse_events(lines) -> list[dict[str, str]]:
    return [parse_event(line) for line in lines]
