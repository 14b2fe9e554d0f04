"""Neighbor discovery bookkeeping: what each repeater learns on its own.

During the beacon phase every repeater accumulates a running mean of the
received power per transmitter and inverts the path-loss law to estimate
link distances. The estimates travel to the planner inside neighbor
reports whose wire entries quantize distances to a 0.25 m fixed-point
grid, and the planner's answer comes back as table rows installed here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .channel import PathLossModel
from .model import MAX_PAYLOAD_BYTES, REPORT_ENTRY, REPORT_HEADER, report_payload_bytes

# Fixed-point grid for distances on the wire: 2 bytes at 0.25 m per step
# covers 0..16383.75 m, far beyond any underground link budget.
DISTANCE_STEP_M = 0.25
MAX_WIRE_DISTANCE_M = 65535 * DISTANCE_STEP_M


def estimate_distance(tx_power_dbm: float, prx_dbm: float, model: PathLossModel) -> float:
    """Invert the log-distance law: received power back to meters.

    Solves Ptx - Prx = L0 + 10*gamma*log10(d/d0) for d. Losses at or
    below the reference loss mean the transmitter is inside the
    calibrated range, so the estimate clamps to the reference distance.
    """
    loss_db = tx_power_dbm - prx_dbm
    excess = loss_db - model.ref_loss_db
    if excess <= 0:
        return model.ref_distance_m
    return model.ref_distance_m * 10.0 ** (excess / (10.0 * model.exponent))


def quantize_distance(distance_m: float) -> float:
    """Snap a distance onto the wire grid (nearest 0.25 m step)."""
    if distance_m < 0:
        raise ValueError("distance cannot be negative")
    if distance_m > MAX_WIRE_DISTANCE_M:
        raise ValueError(f"distance {distance_m} exceeds the wire format range")
    steps = round(distance_m / DISTANCE_STEP_M)
    return steps * DISTANCE_STEP_M


@dataclass
class NeighborRecord:
    """Running reception statistics for one overheard transmitter."""

    samples: int = 0
    avg_prx_dbm: float = 0.0
    est_distance_m: float = 0.0


class NeighborTable:
    """Per-node view of who is audible and how far away they sit."""

    def __init__(self, owner: int, model: PathLossModel) -> None:
        self.owner = owner
        self.model = model
        self.records: dict[int, NeighborRecord] = {}

    def record_beacon(self, tx_uid: int, prx_dbm: float, tx_power_dbm: float) -> NeighborRecord:
        """Fold one beacon reception into the running per-neighbor mean."""
        rec = self.records.get(tx_uid)
        if rec is None:
            rec = NeighborRecord()
            self.records[tx_uid] = rec
        rec.samples += 1
        rec.avg_prx_dbm += (prx_dbm - rec.avg_prx_dbm) / rec.samples
        rec.est_distance_m = estimate_distance(tx_power_dbm, rec.avg_prx_dbm, self.model)
        return rec

    def entries(self) -> list[tuple[int, float]]:
        """Quantized (uid, distance) pairs in uid order, ready to send."""
        return [
            (uid, quantize_distance(self.records[uid].est_distance_m))
            for uid in sorted(self.records)
        ]


def build_report_chunks(
    entries: list[tuple[int, float]],
    max_payload: int = MAX_PAYLOAD_BYTES,
) -> list[list[tuple[int, float]]]:
    """Split neighbor entries into report payloads that fit on the air.

    Each report spends REPORT_HEADER bytes plus REPORT_ENTRY per pair; a
    node with no audible neighbors still emits one empty report so the
    planner can tell silence from loss.
    """
    per_chunk = (max_payload - REPORT_HEADER) // REPORT_ENTRY
    if per_chunk < 1:
        raise ValueError("max payload too small for a single report entry")
    if not entries:
        return [[]]
    return [entries[i : i + per_chunk] for i in range(0, len(entries), per_chunk)]


def report_sizes(chunks: list[list[tuple[int, float]]]) -> list[int]:
    return [report_payload_bytes(len(chunk)) for chunk in chunks]


@dataclass
class LearnedTable:
    """Routing state a repeater extracts from disseminated table rows.

    Only the node's own row and the rows of its audible neighbors are
    retained; everything else in a chunk is scenery. ``installed`` flips
    once the own row arrives, and nodes that never see it keep flooding.
    """

    owner: int
    distance_value: float | None = None
    upstream: int | None = None
    downstream: tuple[int, ...] = ()
    neighbor_values: dict[int, float] = field(default_factory=dict)
    installed: bool = False

    def install_rows(
        self,
        rows: list[tuple[int, float, int | None, tuple[int, ...]]],
        neighbor_uids,
    ) -> None:
        """Apply one chunk: (uid, distance value, upstream, downstream) rows."""
        for uid, value, upstream, downstream in rows:
            if uid == self.owner:
                self.distance_value = value
                self.upstream = upstream
                self.downstream = tuple(downstream)
                self.installed = True
            elif uid in neighbor_uids:
                self.neighbor_values[uid] = value
