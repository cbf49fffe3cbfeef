"""Run statistics derived from the structured event log."""

from __future__ import annotations

from dataclasses import dataclass, field

from .events import parse_events


@dataclass
class RunStats:
    task_count: int
    per_worker: dict[str, int] = field(default_factory=dict)
    makespan: float = 0.0  # seconds, first task start to last task end
    utilization: float = 0.0  # mean fraction of makespan workers spent busy
    intervals: list[tuple[str, float, float]] = field(default_factory=list)


def summarize(event_lines, worker_count: int | None = None) -> RunStats:
    """Aggregate dispatch/done events into task counts, makespan, and mean
    worker utilization. Tasks without timing stats count but contribute no
    busy time."""
    per_worker: dict[str, int] = {}
    intervals: list[tuple[str, float, float]] = []
    registered: set[str] = set()
    for ev in parse_events(event_lines):
        kind = ev.get("ev")
        if kind == "register":
            registered.add(ev["worker"])
        elif kind == "done":
            worker = ev["worker"]
            per_worker[worker] = per_worker.get(worker, 0) + 1
            if "start" in ev and "end" in ev:
                intervals.append((worker, float(ev["start"]), float(ev["end"])))
    task_count = sum(per_worker.values())
    makespan = 0.0
    utilization = 0.0
    if intervals:
        first = min(start for _, start, _ in intervals)
        last = max(end for _, _, end in intervals)
        makespan = last - first
        busy = sum(end - start for _, start, end in intervals)
        workers = worker_count or len(registered) or len(per_worker) or 1
        if makespan > 0:
            utilization = busy / (makespan * workers)
    return RunStats(task_count, per_worker, makespan, utilization, intervals)


def format_stats(stats: RunStats) -> str:
    lines = [f"tasks: {stats.task_count}"]
    for worker in sorted(stats.per_worker):
        lines.append(f"  {worker}: {stats.per_worker[worker]} task(s)")
    lines.append(f"makespan: {stats.makespan * 1000.0:.1f} ms")
    lines.append(f"mean worker utilization: {stats.utilization * 100.0:.1f}%")
    return "\n".join(lines)


def max_overlap(intervals) -> int:
    """Largest number of intervals simultaneously open (sweep line)."""
    points = []
    for start, end in intervals:
        points.append((start, 1))
        points.append((end, -1))
    points.sort(key=lambda p: (p[0], p[1]))  # close before open at a tie
    best = current = 0
    for _, delta in points:
        current += delta
        best = max(best, current)
    return best
