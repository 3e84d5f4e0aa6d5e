"""Consumer/producer applications, the four deployment instances, campaigns."""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterable

from .config import Config
from .kernel import NS_PER_S, RngStream, Simulator, seconds
from .mac import BASIC, FULL, Frame, IdealChannel, MacCounters, PointToPointLink, WifiChannel
from .mobility import VehicleTrace
from .ndn import Data, Interest, Name
from .transports import (
    NATIVE,
    OVERLAY,
    Node,
    SetupError,
    Topology,
    build_routes,
    install_stack,
)

ROUTER_ID = 1000
PRODUCER_ID = 1001
DATA_PREFIX = Name(("data",))
SHARED_PREFIX = Name(("data", "shared"))
CBR = "cbr"
MODIFIED = "modified"
APP_ORDER = (CBR, MODIFIED)


@dataclass(frozen=True)
class ScenarioInstance:
    id: str
    deployment: str
    app_mix: str

    @property
    def scenario(self) -> int:
        return 1 if self.app_mix == "all-cbr" else 2


INSTANCES = {
    "native-1": ScenarioInstance("native-1", NATIVE, "all-cbr"),
    "native-2": ScenarioInstance("native-2", NATIVE, "half-modified"),
    "overlay-1": ScenarioInstance("overlay-1", OVERLAY, "all-cbr"),
    "overlay-2": ScenarioInstance("overlay-2", OVERLAY, "half-modified"),
}
INSTANCE_ORDER = tuple(INSTANCES)


class UnknownInstance(KeyError):
    def __str__(self) -> str:
        return f"unknown instance {self.args[0]!r}; expected one of {', '.join(INSTANCE_ORDER)}"


def get_instance(instance_id: str) -> ScenarioInstance:
    try:
        return INSTANCES[instance_id]
    except KeyError:
        raise UnknownInstance(instance_id) from None


# -- applications -----------------------------------------------------------------


class ConsumerCbr:
    """Requests ``/data/veh-<id>/<seq>`` with a sequence counter."""

    app = CBR

    def __init__(self, vehicle_id: int, rate_pps: int, nonces: RngStream, lifetime: int):
        self.prefix = DATA_PREFIX.append(f"veh-{vehicle_id}")
        self.rate_pps = rate_pps
        self.next_seq = 0
        self.nonces = nonces
        self.lifetime = lifetime

    def emit(self, t: int) -> Interest:
        seq = str(self.next_seq)
        name = Name._trusted(self.prefix.components + (seq,), self.prefix.uri + "/" + seq)
        self.next_seq += 1
        return Interest(name, self.nonces.nonce(), self.lifetime)


class ModifiedConsumerCbr:
    """Requests ``/data/shared/<floor(t * ref_hz)>``, so vehicles emitting at
    the same instant ask for the same name."""

    app = MODIFIED

    def __init__(self, vehicle_id: int, rate_pps: int, nonces: RngStream, lifetime: int, ref_hz: int = 100):
        self.prefix = SHARED_PREFIX
        self.rate_pps = rate_pps
        self.ref_hz = ref_hz
        self.nonces = nonces
        self.lifetime = lifetime

    def sequence_at(self, t: int) -> int:
        return t * self.ref_hz // NS_PER_S

    def emit(self, t: int) -> Interest:
        seq = str(t * self.ref_hz // NS_PER_S)
        name = Name._trusted(self.prefix.components + (seq,), self.prefix.uri + "/" + seq)
        return Interest(name, self.nonces.nonce(), self.lifetime)


def consumer_emit(state: ConsumerCbr, t: int) -> Interest:
    return state.emit(t)


def modified_emit(state: ModifiedConsumerCbr, t: int) -> Interest:
    return state.emit(t)


class Producer:
    """Stateless responder for a set of registered prefixes."""

    def __init__(self, prefixes: Iterable[Name] = (DATA_PREFIX,), payload_bytes: int = 1024):
        self.prefixes = tuple(prefixes)
        self.payload_bytes = payload_bytes
        self.served = 0

    def respond(self, interest: Interest) -> Data | None:
        name = interest.name
        for p in self.prefixes:
            if p.is_prefix_of(name):
                self.served += 1
                return Data(name, self.payload_bytes)
        return None


def producer_respond(interest: Interest, prefixes: Iterable[Name] = (DATA_PREFIX,)) -> Data | None:
    return Producer(prefixes).respond(interest)


def emission_times(enter_ns: int, exit_ns: int, rate_pps: int) -> Iterable[int]:
    """Emission instants ``enter + k/rate`` strictly before ``exit``."""
    k = 0
    while True:
        t = enter_ns + k * NS_PER_S // rate_pps
        if t >= exit_ns:
            return
        yield t
        k += 1


def assign_apps(trace: list[VehicleTrace], instance: ScenarioInstance, replication: int, seed: int,
                fraction: float = 0.5) -> list[VehicleTrace]:
    """Fill the app column. Scenario 2 turns ``floor(fraction * n)`` vehicles,
    chosen from the ``app-mix/<replication>`` stream, into modified consumers."""
    if instance.app_mix == "all-cbr":
        return [r.with_app(CBR) for r in trace]
    ids = sorted(r.vehicle_id for r in trace)
    RngStream(f"app-mix/{replication}", seed).shuffle(ids)
    chosen = set(ids[:int(fraction * len(ids))])
    return [r.with_app(MODIFIED if r.vehicle_id in chosen else CBR) for r in trace]


# -- metrics ----------------------------------------------------------------------------


@dataclass
class RunMetrics:
    instance: str
    replication: int
    n_bins: int
    interests_sent: dict[str, int] = field(default_factory=dict)
    data_received: dict[str, int] = field(default_factory=dict)
    sent_bins: dict[str, list[int]] = field(default_factory=dict)
    received_bins: dict[str, list[int]] = field(default_factory=dict)
    per_vehicle: dict[int, list[int]] = field(default_factory=dict)
    mac: dict[str, dict[str, int]] = field(default_factory=dict)
    wireless_frames: dict[str, int] = field(default_factory=dict)
    p2p: dict[str, int] = field(default_factory=dict)
    events: int = 0
    wall_s: float = 0.0

    def add_app(self, app: str) -> None:
        if app not in self.interests_sent:
            self.interests_sent[app] = 0
            self.data_received[app] = 0
            self.sent_bins[app] = [0] * self.n_bins
            self.received_bins[app] = [0] * self.n_bins

    def apps(self) -> list[str]:
        return [a for a in APP_ORDER if a in self.interests_sent]

    def total_sent(self) -> int:
        return sum(self.interests_sent.values())

    def total_received(self) -> int:
        return sum(self.data_received.values())

    def series(self) -> list[tuple[int, int, int]]:
        """``(second, interests_sent, data_received)`` summed over apps."""
        rows = []
        for s in range(self.n_bins):
            rows.append((s, sum(b[s] for b in self.sent_bins.values()),
                         sum(b[s] for b in self.received_bins.values())))
        return rows

    def mac_total(self) -> MacCounters:
        total = MacCounters()
        for counts in self.mac.values():
            c = MacCounters()
            for k, v in counts.items():
                setattr(c, k, v)
            total.add(c)
        return total


# -- simulation ---------------------------------------------------------------------------


class VehicleApp:
    """A vehicle's consumer plus its emission schedule and counters."""

    __slots__ = ("node", "app", "trace", "enter", "exit", "k", "sent", "received", "sent_bins", "received_bins")

    def __init__(self, node: Node, app, trace: VehicleTrace, enter: int, exit_: int, metrics: RunMetrics):
        self.node = node
        self.app = app
        self.trace = trace
        self.enter = enter
        self.exit = exit_
        self.k = 0
        self.sent = 0
        self.received = 0
        self.sent_bins = metrics.sent_bins[app.app]
        self.received_bins = metrics.received_bins[app.app]

    def next_time(self) -> int | None:
        """Advance to the next emission instant (see :func:`emission_times`)."""
        t = self.enter + self.k * NS_PER_S // self.app.rate_pps
        self.k += 1
        return t if t < self.exit else None


class Simulation:
    """One runnable instance: topology, channel, applications and metrics."""

    def __init__(self, instance: ScenarioInstance, trace: list[VehicleTrace], replication: int = 1,
                 seed: int = 0, config: Config = Config(), frame_log: Callable | None = None,
                 full_fanout: bool = False):
        self.instance = instance
        self.replication = replication
        self.seed = seed
        self.config = config
        self.sim = Simulator()
        self.horizon = seconds(config.horizon_s)
        self.lifetime = seconds(config.ndn.interest_lifetime_s)
        self.end = self.horizon + self.lifetime
        self.metrics = RunMetrics(instance.id, replication, self.end // NS_PER_S + 1)
        self._sweep_ns = NS_PER_S
        self._waiting: dict[str, list] = {}  # name URI -> [deadline, *vehicles]
        self._track = instance.deployment == NATIVE

        apps = {r.app for r in trace}
        expected = {CBR} if instance.app_mix == "all-cbr" else {CBR, MODIFIED}
        if "unassigned" in apps or not apps <= expected:
            raise SetupError(f"trace app column {sorted(apps)} inconsistent with {instance.id} ({instance.app_mix})")

        channel_cls = IdealChannel if config.channel == "ideal" else WifiChannel
        self.channel = channel_cls(self.sim, config.mac, seed=seed, label=f"mac/{replication}", frame_log=frame_log)
        wired = config.wired
        self.wired = PointToPointLink(self.sim, ROUTER_ID, PRODUCER_ID, round(wired.rate_mbps * 1e6),
                                      round(wired.delay_ms * 1e6), frame_log=frame_log)

        router = Node(ROUTER_ID, "router", config.ndn.cs_capacity)
        producer = Node(PRODUCER_ID, "producer", 0)
        self.producer_app = Producer((DATA_PREFIX,), config.ndn.payload_bytes)
        producer.add_app_face(self.producer_app)
        topo = Topology(router, producer, wireless=self.channel, wired=self.wired, deployment=instance.deployment)
        self.topology = topo

        self.vehicles: list[VehicleApp] = []
        self._vapps: dict[int, VehicleApp] = {}
        for r in sorted(trace, key=lambda r: r.vehicle_id):
            node = Node(r.vehicle_id, "vehicle", 0)
            nonces = RngStream(f"nonce/{replication}/{r.vehicle_id}", seed)
            if r.app == MODIFIED:
                app = ModifiedConsumerCbr(r.vehicle_id, r.rate_pps, nonces, self.lifetime, config.traffic.ref_hz)
            else:
                app = ConsumerCbr(r.vehicle_id, r.rate_pps, nonces, self.lifetime)
            node.add_app_face(app)
            topo.vehicles[r.vehicle_id] = node
            self.metrics.add_app(app.app)
            va = VehicleApp(node, app, r, seconds(r.enter_s), min(seconds(r.exit_s), self.horizon), self.metrics)
            self.vehicles.append(va)
            self._vapps[node.node_id] = va

        install_stack(topo, router, instance.deployment)
        install_stack(topo, producer, instance.deployment)
        for node in topo.vehicles.values():
            install_stack(topo, node, instance.deployment)
        build_routes(topo, DATA_PREFIX)

        for node in topo.nodes():
            if node.role != "producer":
                self.channel.attach(node.node_id, self._receiver(node, self.channel))
        self.wired.attach(ROUTER_ID, self._receiver(router, self.wired))
        self.wired.attach(PRODUCER_ID, self._receiver(producer, self.wired))
        if not full_fanout:
            self.channel.broadcast_sink = self._broadcast

        for va in self.vehicles:
            first = va.next_time()
            if first is not None:
                self.sim.post(first, self._emit, va)
        self.sim.schedule(self._sweep_ns, self._sweep, label="pit-sweep")

    # -- event handlers -------------------------------------------------------------------

    def _receiver(self, node: Node, medium):
        return partial(self._receive, node, medium)

    def _send(self, node: Node, face_id: int, packet) -> None:
        if face_id == node.app_face:
            self._to_app(node, packet)
            return
        face = node.faces[face_id]
        face.medium.enqueue(node.node_id, face.send(packet))

    def _receive(self, node: Node, medium, frame: Frame) -> None:
        packet = frame.payload
        udp = frame.udp
        if udp is not None:
            face = node.tunnels.get(udp[0])
        else:
            face = node.link_faces.get(id(medium))
        if face is None:
            return
        fw = node.forwarder
        if packet.is_interest:
            actions = fw.on_interest(packet, face, self.sim.now)
        else:
            actions = fw.on_data(packet, face, self.sim.now)
        for out, p in actions:
            if out == node.app_face:
                self._to_app(node, p)
            else:
                face = node.faces[out]
                face.medium.enqueue(node.node_id, face.send(p))

    def _broadcast(self, frame: Frame) -> None:
        # Vehicles only act on Data they have a PIT entry for; an overheard
        # Interest can never leave a vehicle (its sole upstream is the face it
        # came in on), so only the router needs to see vehicle Interests.
        packet = frame.payload
        medium = self.channel
        if packet.is_interest:
            if frame.src != ROUTER_ID:
                self._receive(self.topology.router, medium, frame)
            return
        if frame.src != ROUTER_ID:
            self._receive(self.topology.router, medium, frame)
        waiting = self._waiting.pop(packet.name.uri, None)
        if waiting:
            for node in waiting[1:]:
                if node.node_id != frame.src:
                    self._receive(node, medium, frame)

    def _to_app(self, node: Node, packet) -> None:
        now = self.sim.now
        if node.role == "producer":
            if packet.is_interest:
                data = self.producer_app.respond(packet)
                if data is not None:
                    for out, p in node.forwarder.on_data(data, node.app_face, now):
                        self._send(node, out, p)
            return
        if packet.is_interest:
            return
        va = self._vapps[node.node_id]
        va.received += 1
        va.received_bins[now // NS_PER_S] += 1

    def _emit(self, va: VehicleApp) -> None:
        now = self.sim.now
        node = va.node
        interest = va.app.emit(now)
        va.sent += 1
        va.sent_bins[now // NS_PER_S] += 1
        actions = node.forwarder.on_interest(interest, node.app_face, now)
        if actions and self._track:
            # a vehicle PIT entry lives at most one lifetime past its last Interest
            key = interest.name.uri
            waiting = self._waiting.get(key)
            if waiting is None:
                self._waiting[key] = [now + self.lifetime, node]
            else:
                waiting[0] = now + self.lifetime
                waiting.append(node)
        for out, p in actions:
            self._send(node, out, p)
        nxt = va.next_time()
        if nxt is not None:
            self.sim.post(nxt, self._emit, va)

    def _sweep(self) -> None:
        now = self.sim.now
        for node in self.topology.nodes():
            node.forwarder.pit_expire(now)
        stale = [name for name, w in self._waiting.items() if w[0] < now]
        for name in stale:
            del self._waiting[name]
        nxt = now + self._sweep_ns
        if nxt <= self.end:
            self.sim.schedule(nxt, self._sweep, label="pit-sweep")

    # -- driver ----------------------------------------------------------------------------

    def run(self) -> RunMetrics:
        t0 = time.perf_counter()
        m = self.metrics
        m.events = self.sim.run_until(self.end)
        for va in self.vehicles:
            app = va.app.app
            m.interests_sent[app] += va.sent
            m.data_received[app] += va.received
            m.per_vehicle[va.node.node_id] = [va.sent, va.received]
        self.channel.flush()
        self.wired.flush()
        for node in self.topology.nodes():
            node.forwarder.pit_expire(self.end + 1)
        for node in self.topology.nodes():
            if node.role != "producer":
                m.mac[str(node.node_id)] = self.channel.counters(node.node_id).as_dict()
        m.wireless_frames = {**self.channel.service_frames, **self.channel.cast_frames}
        wired_total = MacCounters()
        wired_total.add(self.wired.counters(ROUTER_ID))
        wired_total.add(self.wired.counters(PRODUCER_ID))
        m.p2p = wired_total.as_dict()
        m.wall_s = time.perf_counter() - t0
        return m


def build_instance(instance: ScenarioInstance | str, trace: list[VehicleTrace], replication: int = 1,
                   seed: int = 0, config: Config = Config(), **kwargs) -> Simulation:
    """Assign applications per the instance's app mix and wire up a simulation."""
    if isinstance(instance, str):
        instance = get_instance(instance)
    rows = assign_apps(trace, instance, replication, seed, config.traffic.modified_fraction)
    return Simulation(instance, rows, replication, seed, config, **kwargs)


def run_instance(instance: ScenarioInstance | str, trace: list[VehicleTrace], replication: int = 1,
                 seed: int = 0, config: Config = Config(), **kwargs) -> RunMetrics:
    return build_instance(instance, trace, replication, seed, config, **kwargs).run()


class CampaignError(RuntimeError):
    def __init__(self, run_id: str, cause: BaseException):
        super().__init__(f"run {run_id} failed: {cause}")
        self.run_id = run_id
        self.cause = cause


def run_id(instance: str, replication: int) -> str:
    return f"{instance}-r{replication:03d}"


def campaign_task(args: tuple) -> RunMetrics:
    instance, trace, replication, seed, config = args
    return run_instance(instance, trace, replication, seed, config)


def run_campaign(traces: list[list[VehicleTrace]], instances: Iterable[str] = INSTANCE_ORDER, seed: int = 0,
                 config: Config = Config(), jobs: int = 1,
                 on_result: Callable[[RunMetrics], None] | None = None,
                 skip: Callable[[str, int], bool] | None = None,
                 worker: Callable[[tuple], RunMetrics] = campaign_task) -> list[RunMetrics]:
    """Run every instance on every trace; replication k (1-based) uses trace k.

    ``worker`` receives ``(instance, trace, replication, seed, config)`` and
    must be a module-level function when ``jobs > 1``. Results come back
    ordered by (instance, replication) whatever ``jobs`` is.
    """
    tasks = []
    for inst in instances:
        get_instance(inst)
        for k, trace in enumerate(traces, start=1):
            if skip is not None and skip(inst, k):
                continue
            tasks.append((inst, trace, k, seed, config))
    results: list[RunMetrics] = []
    if jobs <= 1:
        for task in tasks:
            try:
                res = worker(task)
            except Exception as exc:
                raise CampaignError(run_id(task[0], task[2]), exc) from exc
            if on_result:
                on_result(res)
            results.append(res)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(worker, t) for t in tasks]
            for task, fut in zip(tasks, futures):
                try:
                    res = fut.result()
                except Exception as exc:
                    for f in futures:
                        f.cancel()
                    raise CampaignError(run_id(task[0], task[2]), exc) from exc
                if on_result:
                    on_result(res)
                results.append(res)
    order = {inst: i for i, inst in enumerate(INSTANCE_ORDER)}
    results.sort(key=lambda m: (order.get(m.instance, 99), m.replication))
    return results
