"""Event-driven execution of one scenario.

One Simulation instance owns the event queue, every node's radio and
protocol state, and the trace sinks. The flow per transmission: the
sender's MAC chain draws a wait, senses, and begins the transmission;
every linked peer gets a frame-end event at which reception is
arbitrated (sensitivity, own-transmit exclusion, capture margin over
all overlapping interferers); decoded frames are handed to the protocol
dispatch, which is where flooding, routing, standby recovery, and the
battery-triggered switches live.

Determinism: all randomness comes from named per-node streams, every
iteration over node or link collections is sorted, and simultaneous
events pop in insertion order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from . import routing as rt
from . import trace as tr
from .energy import EnergyLedger
from .engine import EventQueue, RngStreams
from .learning import LearnedTable, NeighborTable, build_report_chunks
from .mac import DedupCache, TxQueue
from .metrics import MetricsBuilder
from .model import (
    BEACON,
    BEACON_PAYLOAD,
    DATA_DOWN,
    DATA_UP,
    ED_CHANNEL,
    MESH_CHANNEL,
    NEIGHBOR_REPORT,
    ROUTE_SWITCH,
    ROUTE_SWITCH_PAYLOAD,
    ROUTE_TABLE_CHUNK,
    Packet,
    airtime,
    report_payload_bytes,
)
from .planner import PlannerError, chunk_bytes, emit_chunks, plan, plan_from_topology
from .scenario import Scenario


class Transmission:
    __slots__ = ("tx_uid", "channel", "t0", "t1", "packet")

    def __init__(self, tx_uid: int, channel: int, t0: float, t1: float, packet: Packet) -> None:
        self.tx_uid = tx_uid
        self.channel = channel
        self.t0 = t0
        self.t1 = t1
        self.packet = packet


class Node:
    __slots__ = (
        "uid",
        "is_gateway",
        "is_repeater",
        "is_ed",
        "queue",
        "dedup",
        "ledger",
        "route",
        "ntable",
        "learned",
        "chain_active",
        "tx_intervals",
    )

    def __init__(self, uid: int, role_flags: tuple[bool, bool, bool], queue: TxQueue, dedup: DedupCache, ledger: EnergyLedger, ntable: NeighborTable) -> None:
        self.uid = uid
        self.is_gateway, self.is_repeater, self.is_ed = role_flags
        self.queue = queue
        self.dedup = dedup
        self.ledger = ledger
        self.route = rt.RouteState(uid)
        self.ntable = ntable
        self.learned = LearnedTable(uid)
        self.chain_active = False
        self.tx_intervals: deque[tuple[float, float]] = deque()


@dataclass
class RunResult:
    metrics: dict
    trace_digest: str | None = None
    events: list[tuple] | None = None


class Simulation:
    def __init__(
        self,
        scenario: Scenario,
        seed: int | None = None,
        collect_events: bool = False,
        trace_writer=None,
        want_digest: bool = True,
    ) -> None:
        self.scenario = scenario
        self.seed = scenario.seed if seed is None else seed
        self.queue = EventQueue()
        self.rng = RngStreams(self.seed)
        self.radio = scenario.radio
        topo = scenario.topology
        self.topology = topo
        links = topo.links
        self.sensitivity = links.sensitivity_dbm
        self.capture = links.capture_threshold_db
        self.max_air = airtime(self.radio, 255)
        self.protocol = scenario.protocol
        self.standby_enabled = scenario.standby_enabled and self.protocol != "flooding"
        self.energy_aware = self.protocol == "routing"
        self._bootstrapped = False

        # Directed received power per linked pair; shadowing (if any) is
        # drawn once per undirected link so both directions agree.
        sigma = links.path_loss_model.shadowing_sigma_db
        self.prx: dict[tuple[int, int], float] = {}
        self.linked: dict[int, list[int]] = {uid: [] for uid in topo.nodes}
        for a, b, _d in links.link_items():
            shadow = 0.0
            if sigma > 0:
                shadow = self.rng.stream(a, f"shadow-{b}").gauss(0.0, sigma)
            p = links.rx_power(a, b, self.radio.tx_power_dbm, shadow)
            self.prx[(a, b)] = p
            self.prx[(b, a)] = p
            self.linked[a].append(b)
            self.linked[b].append(a)
        for uid in self.linked:
            self.linked[uid].sort()

        energy = scenario.energy
        self.nodes: dict[int, Node] = {}
        for uid in sorted(topo.nodes):
            spec = topo.nodes[uid]
            capacity = None
            if spec.role == "gateway":
                capacity = scenario.gateway_capacity_mah
            elif spec.role == "end_device":
                capacity = scenario.ed_capacity_mah
            ledger = EnergyLedger(energy, capacity)
            flags = (spec.role == "gateway", spec.role == "repeater", spec.role == "end_device")
            self.nodes[uid] = Node(
                uid,
                flags,
                TxQueue(scenario.mac.queue_capacity),
                DedupCache(scenario.mac.dedup_ttl_s, scenario.mac.dedup_capacity),
                ledger,
                NeighborTable(uid, links.path_loss_model),
            )

        self.active: dict[int, deque[Transmission]] = {
            MESH_CHANNEL: deque(),
            ED_CHANNEL: deque(),
        }
        self._next_pid = 0
        self.budget_left = scenario.traffic.total_packets
        self.delivered_pids: set[int] = set()
        self.report_rows: dict[int, dict[int, float]] = {}
        self.graph = None

        self.builder = MetricsBuilder(scenario, self.seed)
        self._sinks = []
        self.digest = tr.TraceDigest() if want_digest else None
        if self.digest is not None:
            self._sinks.append(self.digest)
        if trace_writer is not None:
            self._sinks.append(trace_writer)
        self.events: list[tuple] | None = [] if collect_events else None

    # ------------------------------------------------------------------
    # plumbing

    def _emit(self, kind: int, node: int, pkt=None, peer=None, dur=None, ch=None) -> None:
        ev = (self.queue.now, kind, node, pkt, peer, dur, ch)
        self.builder.feed(ev)
        for sink in self._sinks:
            sink.add(ev)
        if self.events is not None:
            self.events.append(ev)

    def _new_pid(self) -> int:
        pid = self._next_pid
        self._next_pid += 1
        return pid

    def _wait(self, uid: int) -> float:
        mac = self.scenario.mac
        return self.rng.uniform(uid, "mac", mac.wait_min_s, mac.wait_max_s)

    # ------------------------------------------------------------------
    # bootstrap

    def _install_from_tables(self, tables: dict) -> None:
        for key in sorted(tables, key=int):
            uid = int(key)
            node = self.nodes.get(uid)
            if node is None or node.is_ed:
                continue
            row = tables[key]
            node.route.install(
                float(row["distance_value"]),
                row["upstream"] if row["upstream"] is None else int(row["upstream"]),
                tuple(int(u) for u in row["downstream"]),
                {int(n): float(v) for n, v in row["neighbor_values"].items()},
            )

    def _bootstrap(self) -> None:
        if self._bootstrapped:
            return
        self._bootstrapped = True
        scenario = self.scenario
        if self.protocol != "flooding" and not scenario.learning_phase:
            if scenario.routing_tables is not None:
                tables = scenario.routing_tables.get("tables", scenario.routing_tables)
                self._install_from_tables(tables)
            else:
                from .planner import plan_to_dict

                self.graph = plan_from_topology(self.topology)
                self._install_from_tables(plan_to_dict(self.graph)["tables"])
        if scenario.learning_phase:
            self._schedule_learning()
        self._schedule_traffic()

    def _schedule_learning(self) -> None:
        ph = self.scenario.phases
        spacing = ph.beacon_end_s / ph.beacon_rounds
        for gw in sorted(self.topology.gateways):
            for r in range(ph.beacon_rounds):
                jitter = self.rng.uniform(gw, "traffic", 0.0, min(1.0, spacing / 2.0))
                self.queue.push(r * spacing + jitter, self._ev_send_beacon, (gw,))
        window = 0.6 * (ph.report_end_s - ph.beacon_end_s)
        for rp in sorted(self.topology.repeaters):
            t = ph.beacon_end_s + self.rng.uniform(rp, "report", 0.0, window)
            self.queue.push(t, self._ev_send_report, (rp,))
        self.queue.push(ph.report_end_s, self._ev_server_plan, ())
        self.queue.push(ph.dissemination_end_s, self._ev_switchover, ())

    def _traffic_start(self) -> float:
        base = self.scenario.traffic.start_s
        if self.scenario.learning_phase:
            return self.scenario.phases.dissemination_end_s + base
        return base

    def _schedule_traffic(self) -> None:
        traffic = self.scenario.traffic
        if traffic.schedule:
            for ed in sorted(traffic.schedule):
                for t in traffic.schedule[ed]:
                    self.queue.push(t, self._ev_generate, (ed, False))
            return
        if traffic.total_packets <= 0:
            return
        start = self._traffic_start()
        for ed in sorted(self.topology.end_devices):
            gap = self.rng.uniform(ed, "traffic", 0.0, 2.0 * traffic.mean_interval_s)
            self.queue.push(start + gap, self._ev_generate, (ed, True))

    # ------------------------------------------------------------------
    # traffic

    def _ev_generate(self, ed_uid: int, reschedule: bool) -> None:
        node = self.nodes[ed_uid]
        traffic = self.scenario.traffic
        if not traffic.schedule:
            if self.budget_left <= 0:
                return
            self.budget_left -= 1
        if node.ledger.dead:
            return
        pid = self._new_pid()
        packet = Packet(pid, DATA_UP, ed_uid, ed_uid, None, traffic.payload_bytes)
        self._emit(tr.GENERATED, ed_uid, pkt=pid)
        node.queue.push(packet)
        if not node.chain_active:
            node.chain_active = True
            self._begin_tx(node, node.queue.pop(), ED_CHANNEL)
        if reschedule and self.budget_left > 0:
            gap = self.rng.uniform(ed_uid, "traffic", 0.0, 2.0 * traffic.mean_interval_s)
            self.queue.push(self.queue.now + gap, self._ev_generate, (ed_uid, True))

    # ------------------------------------------------------------------
    # MAC

    def _enqueue_mesh(self, node: Node, packet: Packet) -> None:
        if node.ledger.dead:
            return
        evicted = node.queue.push(packet)
        if evicted is not None:
            self._emit(tr.QUEUE_DROPPED, node.uid, pkt=evicted.packet_id)
        if not node.chain_active:
            node.chain_active = True
            self.queue.push(self.queue.now + self._wait(node.uid), self._ev_sense, (node.uid,))

    def _mesh_busy(self, uid: int) -> bool:
        now = self.queue.now
        prx = self.prx
        sens = self.sensitivity
        for t in self.active[MESH_CHANNEL]:
            if t.t0 <= now < t.t1:
                p = prx.get((t.tx_uid, uid))
                if p is not None and p >= sens:
                    return True
        return False

    def _ev_sense(self, uid: int) -> None:
        node = self.nodes[uid]
        if node.ledger.dead or not node.queue:
            node.chain_active = False
            return
        if self._mesh_busy(uid):
            self.queue.push(self.queue.now + self._wait(uid), self._ev_sense, (uid,))
            return
        self._begin_tx(node, node.queue.pop(), MESH_CHANNEL)

    def _begin_tx(self, node: Node, packet: Packet, channel: int) -> None:
        now = self.queue.now
        dur = airtime(self.radio, packet.payload_bytes)
        t1 = now + dur
        trans = Transmission(node.uid, channel, now, t1, packet)
        chan = self.active[channel]
        horizon = now - self.max_air
        while chan and chan[0].t1 <= horizon:
            chan.popleft()
        chan.append(trans)
        intervals = node.tx_intervals
        intervals.append((now, t1))
        while intervals and intervals[0][1] <= horizon:
            intervals.popleft()
        self._emit(tr.TX_START, node.uid, pkt=packet.packet_id, dur=dur, ch=channel)
        push = self.queue.push
        for peer in self.linked[node.uid]:
            push(t1, self._ev_frame_end, (peer, trans))
        push(t1, self._ev_tx_end, (node.uid, trans))

    def _ev_tx_end(self, uid: int, trans: Transmission) -> None:
        node = self.nodes[uid]
        was_dead = node.ledger.dead
        node.ledger.charge_tx(trans.t0, trans.t1)
        if not was_dead:
            self._emit(
                tr.TX_END, uid, pkt=trans.packet.packet_id, dur=trans.t1 - trans.t0, ch=trans.channel
            )
        if node.ledger.dead:
            self._kill(node)
            return
        if node.queue:
            if node.is_ed:
                self._begin_tx(node, node.queue.pop(), ED_CHANNEL)
            else:
                self.queue.push(self.queue.now + self._wait(uid), self._ev_sense, (uid,))
        else:
            node.chain_active = False

    def _kill(self, node: Node) -> None:
        node.chain_active = False
        while node.queue:
            node.queue.pop()
        node.route.monitors.clear()
        node.route.recent_hops.clear()

    # ------------------------------------------------------------------
    # reception

    def _ev_frame_end(self, rx_uid: int, trans: Transmission) -> None:
        node = self.nodes[rx_uid]
        if node.ledger.dead:
            return
        p = self.prx[(trans.tx_uid, rx_uid)]
        pid = trans.packet.packet_id
        if p < self.sensitivity:
            self._emit(tr.RX_BELOW_SENS, rx_uid, pkt=pid, peer=trans.tx_uid, ch=trans.channel)
            return
        t0 = trans.t0
        t1 = trans.t1
        for a, b in node.tx_intervals:
            if a < t1 and b > t0:
                self._emit(tr.DROPPED_BUSY_TX, rx_uid, pkt=pid, peer=trans.tx_uid, ch=trans.channel)
                return
        strongest = None
        prx = self.prx
        sens = self.sensitivity
        for t in self.active[trans.channel]:
            if t is trans:
                continue
            if t.t0 < t1 and t.t1 > t0:
                ip = prx.get((t.tx_uid, rx_uid))
                if ip is not None and ip >= sens and (strongest is None or ip > strongest):
                    strongest = ip
        ok = strongest is None or p - strongest >= self.capture
        node.ledger.charge_rx(t0, t1)
        self._emit(
            tr.RX_OK if ok else tr.RX_COLLIDED,
            rx_uid,
            pkt=pid,
            peer=trans.tx_uid,
            dur=t1 - t0,
            ch=trans.channel,
        )
        if node.ledger.dead:
            self._kill(node)
            return
        if ok:
            self._deliver(node, trans.packet, trans.tx_uid, p)

    # ------------------------------------------------------------------
    # protocol dispatch

    def _deliver(self, node: Node, packet: Packet, tx_uid: int, prx_dbm: float) -> None:
        now = self.queue.now
        kind = packet.kind
        pid = packet.packet_id
        if packet.battery_level is not None:
            node.route.note_level(tx_uid, packet.battery_level)

        if kind == BEACON:
            if not node.is_ed:
                node.ntable.record_beacon(tx_uid, prx_dbm, self.radio.tx_power_dbm)
                if node.is_repeater and not node.dedup.seen(pid, now):
                    self._enqueue_mesh(node, packet.rehop(node.uid))
            return

        if kind == NEIGHBOR_REPORT:
            if node.is_gateway:
                if not node.dedup.seen(pid, now):
                    rows = self.report_rows.setdefault(packet.origin, {})
                    for heard, dist in packet.body:
                        rows[heard] = dist
            elif node.is_repeater and not node.dedup.seen(pid, now):
                self._enqueue_mesh(node, packet.rehop(node.uid))
            return

        if kind == ROUTE_TABLE_CHUNK:
            if node.is_repeater:
                node.learned.install_rows(packet.body, set(node.ntable.records))
                if not node.dedup.seen(pid, now):
                    self._enqueue_mesh(node, packet.rehop(node.uid))
            return

        if kind == ROUTE_SWITCH:
            if packet.next_hop == node.uid and not node.is_ed:
                direction, replace = packet.body
                if rt.apply_route_switch(node.route, tx_uid, replace, direction):
                    self._emit(tr.ROUTE_SWITCHED, node.uid, pkt=pid, peer=tx_uid)
            return

        if kind == DATA_UP:
            self._deliver_uplink(node, packet, tx_uid)
            return

        if kind == DATA_DOWN:
            self._deliver_downlink(node, packet, tx_uid)

    def _deliver_uplink(self, node: Node, packet: Packet, tx_uid: int) -> None:
        now = self.queue.now
        pid = packet.packet_id
        if node.is_gateway:
            if pid not in self.delivered_pids:
                self.delivered_pids.add(pid)
                self._emit(tr.DELIVERED, node.uid, pkt=pid)
            return
        if not node.is_repeater:
            return
        if self.protocol == "flooding" or not node.route.installed:
            if node.dedup.seen(pid, now):
                self._emit(tr.DUP_SUPPRESSED, node.uid, pkt=pid, peer=tx_uid)
            else:
                self._enqueue_mesh(node, packet.rehop(node.uid))
            return
        r = node.route
        next_hop = packet.next_hop
        if next_hop is None or next_hop == node.uid:
            if pid in r.forwarded_ids:
                self._emit(tr.DUP_SUPPRESSED, node.uid, pkt=pid, peer=tx_uid)
            else:
                self._forward(node, packet, rt.UP)
            return
        # Overheard someone else's hop.
        mon = r.monitors.get(pid)
        if mon is not None:
            if (
                self.energy_aware
                and packet.battery_level is not None
                and tx_uid == mon.intended_next
            ):
                announced = packet.battery_level
                key = (tx_uid, announced)
                if key not in r.switch_acted and rt.case1_should_switch(
                    node.ledger.level, r.level_of(r.upstream_original), announced
                ):
                    r.switch_acted.add(key)
                    self._send_switch(node, mon.overheard_from, mon.direction, mon.intended_next)
                    if mon.direction == rt.UP:
                        rt.revert_upstream(r)
                    else:
                        r.downstream_current = r.downstream_original
            if not mon.fired:
                self._emit(tr.STANDBY_CANCELLED, node.uid, pkt=pid, peer=tx_uid)
            del r.monitors[pid]
        hop = r.recent_hops.get(pid)
        if hop is not None and tx_uid == hop[1]:
            del r.recent_hops[pid]
            if self.energy_aware and packet.battery_level is not None:
                announced = packet.battery_level
                key = (tx_uid, announced)
                if key not in r.switch_acted and rt.case2_should_switch(
                    node.ledger.level, announced
                ):
                    r.switch_acted.add(key)
                    self._send_switch(node, hop[0], rt.UP, None)
        rt.note_recent_hop(r, pid, tx_uid, packet.next_hop)
        self._maybe_arm(node, packet, tx_uid, rt.UP)

    def _deliver_downlink(self, node: Node, packet: Packet, tx_uid: int) -> None:
        now = self.queue.now
        pid = packet.packet_id
        if node.is_ed:
            return
        if self.protocol == "flooding" or (node.is_repeater and not node.route.installed):
            if node.is_gateway:
                return
            if node.dedup.seen(pid, now):
                self._emit(tr.DUP_SUPPRESSED, node.uid, pkt=pid, peer=tx_uid)
            else:
                self._enqueue_mesh(node, packet.rehop(node.uid))
            return
        if node.is_gateway:
            return
        r = node.route
        targets = packet.next_hop if isinstance(packet.next_hop, tuple) else ()
        if node.uid in targets:
            # Membership in the set is the instruction to retransmit;
            # an empty set of one's own still means a coverage
            # rebroadcast so that leaf neighbors hear the payload.
            if pid in r.forwarded_ids:
                self._emit(tr.DUP_SUPPRESSED, node.uid, pkt=pid, peer=tx_uid)
            else:
                self._forward(node, packet, rt.DOWN)
            return
        mon = r.monitors.get(pid)
        if mon is not None:
            if not mon.fired:
                self._emit(tr.STANDBY_CANCELLED, node.uid, pkt=pid, peer=tx_uid)
            del r.monitors[pid]
        self._maybe_arm(node, packet, tx_uid, rt.DOWN)

    def _maybe_arm(self, node: Node, packet: Packet, tx_uid: int, direction: str) -> None:
        if not self.standby_enabled:
            return
        r = node.route
        pid = packet.packet_id
        if pid in r.forwarded_ids or pid in r.monitors:
            return
        if direction == rt.UP:
            addressee = packet.next_hop
            if not isinstance(addressee, int):
                return
            addressee_node = self.nodes.get(addressee)
            if addressee_node is None:
                return
            if not rt.should_arm(r, tx_uid, addressee, addressee_node.is_gateway, rt.UP):
                return
        else:
            targets = packet.next_hop if isinstance(packet.next_hop, tuple) else ()
            addressee = None
            for member in targets:
                if rt.should_arm(r, tx_uid, member, False, rt.DOWN):
                    addressee = member
                    break
            if addressee is None:
                return
        mac = self.scenario.mac
        deadline = self.queue.now + self.rng.uniform(
            node.uid, "standby", mac.standby_min_s, mac.standby_max_s
        )
        _mon, evicted = rt.arm_monitor(r, pid, tx_uid, addressee, deadline, direction, packet)
        if evicted is not None:
            self._emit(tr.STANDBY_CANCELLED, node.uid, pkt=evicted.packet_id)
        self._emit(tr.STANDBY_ARMED, node.uid, pkt=pid, peer=tx_uid)
        self.queue.push(deadline, self._ev_standby, (node.uid, pid, deadline))

    def _ev_standby(self, uid: int, pid: int, deadline: float) -> None:
        node = self.nodes[uid]
        if node.ledger.dead:
            return
        mon = node.route.monitors.get(pid)
        if mon is None or mon.fired or mon.deadline != deadline:
            return
        mon.fired = True
        if pid in node.route.forwarded_ids:
            return
        self._emit(tr.STANDBY_FIRED, uid, pkt=pid, peer=mon.overheard_from)
        self._forward(node, mon.packet, mon.direction)

    def _forward(self, node: Node, packet: Packet, direction: str) -> None:
        r = node.route
        r.forwarded_ids.add(packet.packet_id)
        level = node.ledger.level
        piggy = None
        if level < r.last_announced_level:
            piggy = level
            r.last_announced_level = level
        if direction == rt.UP:
            fwd = packet.rehop(node.uid, r.upstream_current, piggy)
        else:
            fwd = packet.rehop(node.uid, r.downstream_current, piggy)
        self._enqueue_mesh(node, fwd)

    def _send_switch(self, node: Node, target: int, direction: str, replace: int | None) -> None:
        pid = self._new_pid()
        packet = Packet(
            pid,
            ROUTE_SWITCH,
            node.uid,
            node.uid,
            target,
            ROUTE_SWITCH_PAYLOAD,
            None,
            0,
            (direction, replace),
        )
        self._enqueue_mesh(node, packet)

    # ------------------------------------------------------------------
    # learning phase

    def _ev_send_beacon(self, gw_uid: int) -> None:
        node = self.nodes[gw_uid]
        if node.ledger.dead:
            return
        pid = self._new_pid()
        packet = Packet(pid, BEACON, gw_uid, gw_uid, None, BEACON_PAYLOAD)
        node.dedup.seen(pid, self.queue.now)
        self._enqueue_mesh(node, packet)

    def _ev_send_report(self, rp_uid: int) -> None:
        node = self.nodes[rp_uid]
        if node.ledger.dead:
            return
        for chunk in build_report_chunks(node.ntable.entries()):
            pid = self._new_pid()
            packet = Packet(
                pid,
                NEIGHBOR_REPORT,
                rp_uid,
                rp_uid,
                None,
                report_payload_bytes(len(chunk)),
                None,
                0,
                tuple(chunk),
            )
            node.dedup.seen(pid, self.queue.now)
            self._enqueue_mesh(node, packet)

    def _ev_server_plan(self) -> None:
        reports: dict[int, list[tuple[int, float]]] = {}
        for origin in sorted(self.report_rows):
            reports[origin] = sorted(self.report_rows[origin].items())
        for gw in sorted(self.topology.gateways):
            reports[gw] = self.nodes[gw].ntable.entries()
        try:
            self.graph = plan(reports, sorted(self.topology.gateways))
        except PlannerError:
            self.graph = None
            return
        chunks = emit_chunks(self.graph)
        ph = self.scenario.phases
        spacing = (ph.dissemination_end_s - ph.report_end_s) / ph.chunk_rounds
        for gw in sorted(self.topology.gateways):
            for r in range(ph.chunk_rounds):
                jitter = self.rng.uniform(gw, "traffic", 0.0, min(1.0, spacing / 2.0))
                self.queue.push(
                    ph.report_end_s + r * spacing + jitter, self._ev_send_chunks, (gw,)
                )

    def _ev_send_chunks(self, gw_uid: int) -> None:
        node = self.nodes[gw_uid]
        if node.ledger.dead or self.graph is None:
            return
        for chunk in emit_chunks(self.graph):
            pid = self._new_pid()
            packet = Packet(
                pid,
                ROUTE_TABLE_CHUNK,
                gw_uid,
                gw_uid,
                None,
                chunk_bytes(chunk),
                None,
                0,
                tuple(chunk),
            )
            node.dedup.seen(pid, self.queue.now)
            self._enqueue_mesh(node, packet)

    def _ev_switchover(self) -> None:
        for uid in sorted(self.topology.repeaters):
            node = self.nodes[uid]
            learned = node.learned
            if learned.installed:
                node.route.install(
                    learned.distance_value,
                    learned.upstream,
                    learned.downstream,
                    learned.neighbor_values,
                )
        if self.graph is not None:
            from .planner import plan_to_dict

            tables = plan_to_dict(self.graph)["tables"]
            for gw in sorted(self.topology.gateways):
                row = tables.get(str(gw))
                if row is not None:
                    self.nodes[gw].route.install(
                        0.0,
                        None,
                        tuple(row["downstream"]),
                        {int(n): float(v) for n, v in row["neighbor_values"].items()},
                    )

    # ------------------------------------------------------------------
    # downlink injection (used by tests and the downlink smoke path)

    def inject_downlink(self, gw_uid: int, payload_bytes: int = 20) -> int:
        # route tables must exist before the forwarding set is stamped
        self._bootstrap()
        node = self.nodes[gw_uid]
        pid = self._new_pid()
        if self.protocol == "flooding":
            packet = Packet(pid, DATA_DOWN, gw_uid, gw_uid, None, payload_bytes)
            node.dedup.seen(pid, self.queue.now)
        else:
            packet = Packet(
                pid, DATA_DOWN, gw_uid, gw_uid, node.route.downstream_current, payload_bytes
            )
        self._enqueue_mesh(node, packet)
        return pid

    # ------------------------------------------------------------------
    # run loop

    def run(self) -> RunResult:
        self._bootstrap()
        horizon = self.scenario.horizon_s
        queue = self.queue
        hit_horizon = False
        while queue:
            if horizon is not None and queue.peek_time() > horizon:
                hit_horizon = True
                break
            fn, args = queue.pop()
            fn(*args)
        end = horizon if hit_horizon else queue.now
        for uid in sorted(self.nodes):
            self.nodes[uid].ledger.finalize(end)
        digest = self.digest.hexdigest() if self.digest is not None else None
        metrics = self.builder.finalize(end, digest)
        return RunResult(metrics=metrics, trace_digest=digest, events=self.events)


def run(scenario: Scenario, seed: int | None = None, **kwargs) -> RunResult:
    """Build and execute one simulation; see Simulation for the knobs."""
    return Simulation(scenario, seed, **kwargs).run()
