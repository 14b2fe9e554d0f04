"""Run metrics derived purely from the event stream.

The builder consumes the same event tuples the simulation emits, in
emission order, and reconstructs everything reported about a run:
delivery and loss accounting, latency statistics, per-node duty cycle,
and a replica energy ledger per node driven by the charge windows the
events encode. Because nothing here peeks at simulator internals, the
identical metrics can be recomputed later from an exported trace file,
which is also how the trace format is validated.
"""

from __future__ import annotations

import csv
import math

from . import trace as tr
from .energy import EnergyLedger
from .scenario import END_DEVICE, GATEWAY, REPEATER, Scenario

_COUNT_KEYS = (
    "generated",
    "tx_start",
    "tx_end",
    "rx_ok",
    "rx_collided",
    "rx_below_sensitivity",
    "dropped_busy_tx",
    "queue_dropped",
    "standby_armed",
    "standby_fired",
    "standby_cancelled",
    "route_switched",
    "delivered",
    "dup_suppressed",
)


class MetricsBuilder:
    def __init__(self, scenario: Scenario, seed: int) -> None:
        self.scenario = scenario
        self.seed = seed
        topo = scenario.topology
        self.roles = {uid: spec.role for uid, spec in topo.nodes.items()}
        self.ledgers: dict[int, EnergyLedger] = {}
        for uid in sorted(topo.nodes):
            role = self.roles[uid]
            capacity = None
            if role == GATEWAY:
                capacity = scenario.gateway_capacity_mah
            elif role == END_DEVICE:
                capacity = scenario.ed_capacity_mah
            self.ledgers[uid] = EnergyLedger(scenario.energy, capacity)
        self.generated: dict[int, tuple[float, int]] = {}
        self.delivered: dict[int, float] = {}
        self.ingress_heard: set[int] = set()
        self.tx_s = {uid: 0.0 for uid in self.ledgers}
        self.counts = [0] * len(_COUNT_KEYS)

    def feed(self, ev: tuple) -> None:
        t, kind, node, pkt, peer, dur, _ch = ev
        self.counts[kind] += 1
        if kind == tr.TX_END:
            self.tx_s[node] += dur
            self.ledgers[node].charge_tx(t - dur, t)
        elif kind == tr.RX_OK or kind == tr.RX_COLLIDED:
            self.ledgers[node].charge_rx(t - dur, t)
            if kind == tr.RX_OK and self.roles[node] != END_DEVICE:
                gen = self.generated.get(pkt)
                if gen is not None and gen[1] == peer:
                    self.ingress_heard.add(pkt)
        elif kind == tr.GENERATED:
            self.generated[pkt] = (t, node)
        elif kind == tr.DELIVERED:
            if pkt not in self.delivered:
                self.delivered[pkt] = t

    def finalize(self, end_time: float, trace_digest: str | None = None) -> dict:
        for uid in sorted(self.ledgers):
            self.ledgers[uid].finalize(end_time)

        latencies = sorted(
            (self.delivered[pid] - self.generated[pid][0]) * 1000.0
            for pid in self.delivered
            if pid in self.generated
        )
        latency = None
        if latencies:
            n = len(latencies)
            mid = n // 2
            median = latencies[mid] if n % 2 else (latencies[mid - 1] + latencies[mid]) / 2.0
            p95 = latencies[max(0, math.ceil(0.95 * n) - 1)]
            latency = {
                "mean": sum(latencies) / n,
                "median": median,
                "p95": p95,
            }

        initial_ed = 0
        intermediate = 0
        for pid in self.generated:
            if pid in self.delivered:
                continue
            if pid in self.ingress_heard:
                intermediate += 1
            else:
                initial_ed += 1

        span = end_time if end_time > 0 else 1.0
        duty = {str(uid): self.tx_s[uid] / span * 100.0 for uid in sorted(self.tx_s)}
        energy = {str(uid): self.ledgers[uid].consumed_mah for uid in sorted(self.ledgers)}
        battery = {str(uid): self.ledgers[uid].level for uid in sorted(self.ledgers)}
        deaths = [
            ledger.death_time for ledger in self.ledgers.values() if ledger.death_time is not None
        ]

        metrics = {
            "scenario": self.scenario.name,
            "protocol": self.scenario.protocol,
            "seed": self.seed,
            "end_time_s": end_time,
            "generated": len(self.generated),
            "delivered": len(self.delivered),
            "pdr": len(self.delivered) / len(self.generated) if self.generated else None,
            "losses": {"initial_ed": initial_ed, "intermediate": intermediate},
            "latency_ms": latency,
            "duty_cycle_pct": duty,
            "energy_mah": energy,
            "battery_level": battery,
            "total_energy_mah": sum(self.ledgers[uid].consumed_mah for uid in self.ledgers),
            "repeater_energy_mah": sum(
                self.ledgers[uid].consumed_mah
                for uid in self.ledgers
                if self.roles[uid] == REPEATER
            ),
            "network_lifetime_s": min(deaths) if deaths else None,
            "throughput": {
                "offered_pkt_per_s": len(self.generated) / span,
                "delivered_pkt_per_s": len(self.delivered) / span,
            },
            "counts": dict(zip(_COUNT_KEYS, self.counts)),
        }
        if trace_digest is not None:
            metrics["trace_sha256"] = trace_digest
        return metrics


def recompute_from_trace(scenario: Scenario, seed: int, trace_path, end_time: float) -> dict:
    """Rebuild the metrics dict for a finished run from its trace file.

    Matches the live run byte for byte when serialized with sorted keys,
    digest included, because the builder sees the same events in the
    same order.
    """
    builder = MetricsBuilder(scenario, seed)
    digest = tr.TraceDigest()
    for ev in tr.read_trace(trace_path):
        builder.feed(ev)
        digest.add(ev)
    return builder.finalize(end_time, digest.hexdigest())


def write_battery_csv(path, builder: MetricsBuilder) -> None:
    """Level-change history for every node, one row per crossing."""
    rows = []
    for uid in sorted(builder.ledgers):
        for t, level in builder.ledgers[uid].history:
            rows.append((t, uid, level))
    rows.sort(key=lambda r: (r[0], r[1], -r[2]))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_s", "uid", "level"])
        for t, uid, level in rows:
            writer.writerow([repr(t), uid, level])
