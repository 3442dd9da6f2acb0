"""Clocks for timing and time limits.

``WallClock`` reads ``time.perf_counter``. ``TickClock`` is a logical
clock that advances a fixed number of milliseconds per unit of solver work
(one LP solve or one greedy evaluation), so timings and time limits are
reproducible bit for bit.
"""
from __future__ import annotations

import time


class WallClock:
    logical = False

    def __init__(self):
        self._t0 = time.perf_counter()

    def now_ms(self) -> float:
        return (time.perf_counter() - self._t0) * 1000.0

    def tick(self, units: int = 1) -> None:
        pass


class TickClock:
    logical = True

    def __init__(self, ms_per_tick: float = 1.0):
        self.ms_per_tick = ms_per_tick
        self.ticks = 0

    def now_ms(self) -> float:
        return self.ticks * self.ms_per_tick

    def tick(self, units: int = 1) -> None:
        self.ticks += units


def make_clock(kind: str = "wall"):
    if kind == "wall":
        return WallClock()
    if kind == "ticks":
        return TickClock()
    raise ValueError(f"unknown clock {kind!r}")
