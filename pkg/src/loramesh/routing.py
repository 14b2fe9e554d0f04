"""Operational-phase repeater state: forwarding, standby recovery, and
battery-triggered route switching.

All functions here are pure decisions over :class:`RouteState`; the
simulation loop owns timers, queues and the radio. Keeping the logic
side-effect free makes the trigger conditions directly unit-testable.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

UP = "up"
DOWN = "down"

MONITOR_CAPACITY = 16
RECENT_HOP_CAPACITY = 64

# Optimistic default for neighbors whose level was never overheard.
UNKNOWN_LEVEL = 100


@dataclass
class StandbyMonitor:
    packet_id: int
    overheard_from: int
    intended_next: int
    deadline: float
    direction: str
    packet: object = None
    fired: bool = False


@dataclass
class RouteState:
    """Everything a repeater knows for next-hop decisions."""

    uid: int
    distance_value: float = float("inf")
    upstream_original: int | None = None
    upstream_current: int | None = None
    downstream_original: tuple[int, ...] = ()
    downstream_current: tuple[int, ...] = ()
    neighbor_values: dict[int, float] = field(default_factory=dict)
    neighbor_levels: dict[int, int] = field(default_factory=dict)
    last_announced_level: int = 100
    installed: bool = False
    # Addressed forwards already made, so a late duplicate copy of the
    # same packet id is not forwarded twice.
    forwarded_ids: set[int] = field(default_factory=set)
    monitors: OrderedDict[int, StandbyMonitor] = field(default_factory=OrderedDict)
    # packet id -> (tx, addressee) for overheard two-hop sequences.
    recent_hops: OrderedDict[int, tuple[int, int]] = field(default_factory=OrderedDict)
    # (announcer, level) pairs already acted on, so one announcement
    # fires at most one switch from this observer.
    switch_acted: set[tuple[int, int]] = field(default_factory=set)

    def install(
        self,
        distance_value: float,
        upstream: int | None,
        downstream: tuple[int, ...],
        neighbor_values: dict[int, float],
    ) -> None:
        self.distance_value = distance_value
        self.upstream_original = upstream
        self.upstream_current = upstream
        self.downstream_original = tuple(downstream)
        self.downstream_current = tuple(downstream)
        self.neighbor_values = dict(neighbor_values)
        self.installed = True

    def level_of(self, uid: int) -> int:
        return self.neighbor_levels.get(uid, UNKNOWN_LEVEL)

    def note_level(self, uid: int, level: int) -> None:
        self.neighbor_levels[uid] = level

    def value_of(self, uid: int) -> float | None:
        return self.neighbor_values.get(uid)


def should_arm(
    state: RouteState,
    tx_uid: int,
    addressee_uid: int,
    addressee_is_gateway: bool,
    direction: str = UP,
) -> bool:
    """Decide whether an overheard addressed forward arms a monitor.

    Uplink: the transmitter must sit farther from the gateways than both
    the addressee and this node, all values known from the learning
    phase. Gateways never forward, so hops addressed to one are not
    monitored. Downlink mirrors the ordering.
    """
    if not state.installed or tx_uid == state.uid or addressee_uid == state.uid:
        return False
    tx_value = state.value_of(tx_uid)
    addr_value = state.value_of(addressee_uid)
    if tx_value is None or addr_value is None:
        return False
    if direction == UP:
        if addressee_is_gateway:
            return False
        return tx_value > addr_value and state.distance_value < tx_value
    return tx_value < addr_value and state.distance_value > tx_value


def arm_monitor(
    state: RouteState,
    packet_id: int,
    tx_uid: int,
    addressee_uid: int,
    deadline: float,
    direction: str,
    packet,
) -> tuple[StandbyMonitor, StandbyMonitor | None]:
    """Record a monitor; returns (monitor, evicted-or-None)."""
    monitor = StandbyMonitor(
        packet_id=packet_id,
        overheard_from=tx_uid,
        intended_next=addressee_uid,
        deadline=deadline,
        direction=direction,
        packet=packet,
    )
    evicted = None
    monitors = state.monitors
    if packet_id in monitors:
        del monitors[packet_id]
    monitors[packet_id] = monitor
    if len(monitors) > MONITOR_CAPACITY:
        _pid, evicted = monitors.popitem(last=False)
    return monitor, evicted


def note_recent_hop(state: RouteState, packet_id: int, tx_uid: int, addressee_uid: int) -> None:
    """Remember an overheard uplink hop where both ends sit farther out.

    Only hops satisfying the positional precondition are worth keeping:
    the later battery check can then fire a switch toward the original
    sender without creating a loop.
    """
    tx_value = state.value_of(tx_uid)
    addr_value = state.value_of(addressee_uid)
    if tx_value is None or addr_value is None:
        return
    if not (tx_value > state.distance_value and addr_value > state.distance_value):
        return
    hops = state.recent_hops
    if packet_id in hops:
        del hops[packet_id]
    hops[packet_id] = (tx_uid, addressee_uid)
    if len(hops) > RECENT_HOP_CAPACITY:
        hops.popitem(last=False)


def case1_should_switch(level_self: int, level_next_original: int, announced: int) -> bool:
    """Depleted-addressee takeover offer by a standby observer.

    Fires only on decade announcements, and only when both this node
    and its original next hop hold strictly more than ten levels above
    the announcer.
    """
    if announced % 10 != 0:
        return False
    return level_self > announced + 10 and level_next_original > announced + 10


def case2_should_switch(level_self: int, announced: int) -> bool:
    """Depleted-relay bypass offer after watching a two-hop sequence."""
    if announced % 10 != 0:
        return False
    return level_self > announced


def apply_route_switch(state: RouteState, sender_uid: int, replace: int | None = None, direction: str = UP) -> bool:
    """Point the route at the instructing neighbor; True when changed.

    Unknown senders are ignored; repeated instructions are a no-op.
    Downlink instructions swap one member of the forwarding set.
    """
    if state.value_of(sender_uid) is None:
        return False
    if direction == UP:
        if state.upstream_current == sender_uid:
            return False
        state.upstream_current = sender_uid
        return True
    current = state.downstream_current
    if sender_uid in current:
        return False
    if replace is not None and replace in current:
        state.downstream_current = tuple(u for u in current if u != replace) + (sender_uid,)
    else:
        state.downstream_current = current + (sender_uid,)
    return True


def revert_upstream(state: RouteState) -> None:
    """Fall back to the planner-assigned next hop (after offering a
    takeover the observer must not keep any switched-in detour)."""
    state.upstream_current = state.upstream_original
