"""Reported quantities: throughput, goodput, Jain fairness, queue residence.

Rates and fairness are computed over the measurement window
[warmup, duration]; queue-residence samples are windowed by their service
time. Dropped packets never contribute a delay sample, since only
transmitted packets have a service start.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple

from .qdisc import (
    Discipline,
    EnqueueDecision,
    Outcome,
    Packet,
    QdiscParams,
    drawing_factor,
    drawing_split,
)


@dataclass(slots=True)
class FlowStats:
    """Delivered-bit totals for one flow over a measurement window."""

    flow_id: int
    bits_delivered: int = 0
    bits_retransmitted_delivered: int = 0
    start: float = 0.0
    end: float = 0.0


class DelaySample(NamedTuple):
    enqueue_time: float
    service_start: float


class QueueTracePoint(NamedTuple):
    t: float
    q_c: int
    q_a: float


def throughput(stats: FlowStats, window: tuple[float, float]) -> float:
    """Delivered bits per second over the window the stats were taken in."""
    t0, t1 = window
    if t1 <= t0:
        raise ValueError(f"empty measurement window ({t0}, {t1})")
    return stats.bits_delivered / (t1 - t0)


def goodput_tcp(stats: FlowStats) -> float:
    """Delivered bits net of delivered retransmissions, per second."""
    duration = stats.end - stats.start
    if duration <= 0:
        raise ValueError(f"flow {stats.flow_id}: non-positive duration {duration}")
    return (stats.bits_delivered - stats.bits_retransmitted_delivered) / duration

def goodput_udp(stats: FlowStats) -> float:
    duration = stats.end - stats.start
    if duration <= 0:
        raise ValueError(f"flow {stats.flow_id}: non-positive duration {duration}")
    return stats.bits_delivered / duration


def jain_index(shares: list[float]) -> float:
    """(sum x)^2 / (n sum x^2); 1 = equal shares, 1/n = one flow takes all."""
    if not shares:
        raise ValueError("fairness needs at least one share")
    total = sum(shares)
    squares = sum(x * x for x in shares)
    if squares == 0:
        raise ValueError("fairness undefined for an all-zero share vector")
    return (total * total) / (len(shares) * squares)


def queuing_delay(samples: list[DelaySample]) -> float:
    """Mean queue residence time of transmitted packets."""
    if not samples:
        raise ValueError("no delay samples")
    return sum(s.service_start - s.enqueue_time for s in samples) / len(samples)


class MetricsCollector:
    """In-process observer fed synchronously by the event loop.

    Tracks full-run packet conservation counts, windowed per-flow bits,
    per-second delivery bins, queue residence samples, the periodic queue
    trace, and per-outcome decision counts with a draws histogram.
    """

    def __init__(
        self,
        warmup: float,
        duration: float,
        discipline: Discipline | None = None,
        params: QdiscParams | None = None,
    ) -> None:
        self.warmup = warmup
        self.duration = duration
        self.discipline = discipline
        self.params = params
        self.emitted: Counter[int] = Counter()
        self.delivered: Counter[int] = Counter()
        self.dropped: Counter[int] = Counter()
        self.flow_stats: dict[int, FlowStats] = {}
        self.bins: dict[int, Counter[int]] = {}
        self.delay_samples: list[DelaySample] = []
        self.queue_trace: list[QueueTracePoint] = []
        self.outcome_counts: Counter[Outcome] = Counter()
        self.draws_histogram: Counter[int] = Counter()
        self.draw_bound_violations = 0

    def register_flow(self, flow_id: int) -> FlowStats:
        stats = self.flow_stats.get(flow_id)
        if stats is None:
            stats = FlowStats(flow_id, start=self.warmup, end=self.duration)
            self.flow_stats[flow_id] = stats
            self.bins[flow_id] = Counter()
        return stats

    def _draw_bound(self, q_c: int) -> int:
        if self.discipline is Discipline.CHOKE:
            return 1
        if self.discipline is Discipline.GCHOKE:
            return self.params.maxcomp
        if self.discipline is Discipline.CHOKED:
            d_r, d_f = drawing_split(drawing_factor(q_c, self.params))
            return d_r + d_f
        return 0

    def on_emit(self, pk: Packet) -> None:
        self.emitted[pk.flow_id] += 1

    def on_arrival(
        self,
        now: float,
        pk: Packet,
        decision: EnqueueDecision,
        q_c: int,
        q_a: float,
    ) -> None:
        self.outcome_counts[decision.outcome] += 1
        self.draws_histogram[decision.draws_performed] += 1
        if decision.outcome is not Outcome.ADMIT:
            self.dropped[pk.flow_id] += 1 + len(decision.dropped_positions)
        if decision.draws_performed > self._draw_bound(q_c):
            self.draw_bound_violations += 1

    def on_service_start(self, pk: Packet, now: float) -> None:
        if now >= self.warmup:
            self.delay_samples.append(DelaySample(pk.enqueue_time, now))

    def on_delivery(self, pk: Packet, now: float) -> None:
        self.delivered[pk.flow_id] += 1
        stats = self.register_flow(pk.flow_id)
        self.bins[pk.flow_id][int(now)] += pk.size_bits
        if self.warmup <= now <= self.duration:
            stats.bits_delivered += pk.size_bits
            if pk.is_retransmission:
                stats.bits_retransmitted_delivered += pk.size_bits

    def sample_queue(self, now: float, q_c: int, q_a: float) -> None:
        self.queue_trace.append(QueueTracePoint(now, q_c, q_a))

    def mean_queuing_delay(self) -> float:
        return queuing_delay(self.delay_samples)
