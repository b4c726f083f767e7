"""Wires engine, world, routing, attackers and detectors into one run."""
from __future__ import annotations

import math

from .aodv import AodvAgent
from .blackhole import BlackHoleAgent
from .engine import RandomStreams, Simulator
from .metrics import Trace, TraceRecord, finalize
from .packet import Kind
from .scenario import Scenario
from .sentinel import Sentinel
from .world import World

# Distance at which a placed attacker starts from the node it shadows.
NEAR_OFFSET_M = 50.0


class Network:
    def __init__(self, scenario: Scenario):
        sc = scenario
        self.scenario = sc
        self.sim = Simulator()
        self.streams = RandomStreams(sc.seed)
        self.trace = Trace()
        self._next_id = 0
        self.world = World(
            self.sim, sc.node_count, sc.width, sc.height,
            radio=sc.radio, mobility=sc.mobility,
            queue_capacity=sc.queue_capacity, service_rate=sc.service_rate,
            hop_latency=sc.hop_latency_s, streams=self.streams,
            positions={n: (x, y) for n, x, y in sc.positions},
        )
        profiles = {a.node: a for a in sc.attackers}
        for a in sc.attackers:
            if a.place_near is not None:
                self.world.place(a.node, self._near(a.place_near))

        self.agents: list[AodvAgent] = []
        for node in range(sc.node_count):
            if node in profiles:
                agent = BlackHoleAgent(node, self, sc.aodv, profiles[node])
            else:
                agent = AodvAgent(node, self, sc.aodv)
            Sentinel(agent, self, sc.detection)
            self.agents.append(agent)

        agents = self.agents
        w = self.world
        w.on_receive = lambda node, pkt, sender: agents[node].receive(pkt, sender)
        w.on_overhear = lambda node, pkt, sender: agents[node].overhear(pkt, sender)
        w.on_tx_fail = lambda src, pkt, dst: agents[src].handle_tx_failure(pkt, dst)
        w.on_drop = self.drop
        w.on_depart = self._departed

        for flow in sc.flows:
            times = flow.send_times(sc.sim_duration_s)
            first = next(times, None)
            if first is not None:
                self.sim.schedule(first, self._emit, flow, times, kind="traffic")

    def _near(self, anchor):
        ax, ay = self.world.position(anchor)
        cx, cy = self.world.width / 2, self.world.height / 2
        dist = math.hypot(cx - ax, cy - ay)
        offset = min(NEAR_OFFSET_M, self.world.radio.range / 2)
        if dist < 1e-9:
            ux, uy = 1.0, 0.0
        else:
            ux, uy = (cx - ax) / dist, (cy - ay) / dist
        x = min(max(ax + ux * offset, 0.0), self.world.width)
        y = min(max(ay + uy * offset, 0.0), self.world.height)
        return (x, y)

    # -- services used by agents -----------------------------------------------

    def new_id(self):
        self._next_id += 1
        return self._next_id

    def log(self, event, node, pkt=None, **fields):
        if pkt is not None:
            fields.setdefault("pkt_id", pkt.pkt_id)
            fields["pkt_kind"] = pkt.kind.value
            fields["origin"] = pkt.origin
            fields["target"] = pkt.target
            fields["size_bytes"] = pkt.payload_bytes
        self.trace.record(TraceRecord(self.sim.now, event, node, **fields))

    def drop(self, node, pkt, cause):
        self.log("Drop", node, pkt, cause=cause)

    def _departed(self, src, pkt, dst):
        if dst is not None:
            self.agents[src].on_departed(pkt, dst)

    def _emit(self, flow, times):
        self.agents[flow.src].send_data(flow.dst, flow.payload_bytes)
        t = next(times, None)
        if t is not None:
            self.sim.schedule(t, self._emit, flow, times, kind="traffic")

    # -- running ---------------------------------------------------------------

    def run(self):
        self.sim.run_until(self.scenario.sim_duration_s)
        return self.summary()

    def in_flight_ids(self) -> set:
        """Data packets still somewhere in the network, found by inspection."""
        alive = set()
        for pkt in self.world.queued_packets():
            if pkt.kind is Kind.DATA:
                alive.add(pkt.pkt_id)
        for agent in self.agents:
            alive.update(p.pkt_id for p in agent.in_flight())
        for ev in self.sim.pending():
            if ev.kind == "rx":
                _src, pkt, dst, _receivers = ev.args
                if pkt.kind is Kind.DATA and dst is not None:
                    alive.add(pkt.pkt_id)
        return alive

    def summary(self):
        return finalize(
            self.trace, self.scenario.sim_duration_s,
            self.scenario.attacker_ids, in_flight=self.in_flight_ids(),
        )


def simulate(scenario: Scenario):
    """Run one scenario in memory; returns (network, summary)."""
    net = Network(scenario)
    return net, net.run()
