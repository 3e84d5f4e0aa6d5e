"""Shared 802.11 channel with DCF-style contention.

One collision domain. Broadcast frames go out once at the basic rate with no
ACK and no retry; unicast frames use the full rate, are acknowledged and are
retried with binary exponential backoff. Contention is resolved on a slot grid
anchored at the end of DIFS after the channel last went idle, so two stations
collide exactly when their backoff expires on the same slot.
"""

from __future__ import annotations

from collections import deque
from heapq import heappush
from dataclasses import dataclass, fields
from typing import Any, Callable

from .kernel import NS_PER_US, RngStream, Simulator

BROADCAST = -1
BROADCAST_CAST = "broadcast"
UNICAST = "unicast"
BASIC = "basic"
FULL = "full"

DELIVERED = "delivered"
COLLIDED = "collided"
QUEUE_DROPPED = "queue-dropped"
RETRY_EXHAUSTED = "retry-exhausted"
EXPIRED = "expired"
FLUSHED = "flushed"
OUTCOMES = (DELIVERED, COLLIDED, QUEUE_DROPPED, RETRY_EXHAUSTED, EXPIRED, FLUSHED)


@dataclass(frozen=True)
class MacParams:
    slot_us: float = 9.0
    sifs_us: float = 16.0
    difs_us: float = 34.0
    cw_min: int = 15
    cw_max: int = 1023
    retry_limit: int = 7
    basic_rate_mbps: float = 2.0
    full_rate_mbps: float = 143.4
    preamble_basic_us: float = 96.0
    preamble_full_us: float = 40.0
    ack_us: float = 44.0
    queue_limit: int = 1000
    max_queue_delay_ms: float = 500.0

    def __post_init__(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"mac.{f.name} must be positive")
        if self.cw_min > self.cw_max:
            raise ValueError("mac.cw_min must not exceed mac.cw_max")

    def rate_kbps(self, service: str) -> int:
        return round(1000 * (self.basic_rate_mbps if service == BASIC else self.full_rate_mbps))

    def preamble_ns(self, service: str) -> int:
        return round(NS_PER_US * (self.preamble_basic_us if service == BASIC else self.preamble_full_us))


def airtime(nbytes: int, service: str, params: MacParams = MacParams()) -> int:
    """Preamble plus payload bits at the service rate, in integer nanoseconds."""
    if nbytes <= 0:
        raise ValueError("frame must carry at least one byte")
    kbps = params.rate_kbps(service)
    bits_ns = -(-8 * nbytes * 1_000_000 // kbps)
    return params.preamble_ns(service) + bits_ns


class Frame:
    """Link-layer transmission unit."""

    __slots__ = ("src", "dest", "service", "nbytes", "payload", "wireless", "udp", "queued_at")

    def __init__(self, src: int, dest: int, service: str, nbytes: int, payload: Any, wireless: bool = True,
                 udp: tuple | None = None):
        self.src = src
        self.dest = dest
        self.service = service
        self.nbytes = nbytes
        self.payload = payload
        self.wireless = wireless
        # (source endpoint, destination endpoint) when the payload rides a UDP tunnel
        self.udp = udp
        self.queued_at = 0

    @property
    def is_broadcast(self) -> bool:
        return self.dest == BROADCAST

    def __repr__(self) -> str:
        dest = "bcast" if self.dest == BROADCAST else self.dest
        return f"Frame({self.src}->{dest}, {self.service}, {self.nbytes} B)"


class MacCounters:
    """Per-node frame accounting; every enqueued frame ends in one outcome."""

    FIELDS = ("enqueued", "delivered", "collided", "queue_dropped", "retry_exhausted", "expired", "flushed",
              "attempts")
    __slots__ = FIELDS

    def __init__(self) -> None:
        self.enqueued = self.delivered = self.collided = 0
        self.queue_dropped = self.retry_exhausted = self.expired = self.flushed = self.attempts = 0

    @property
    def dropped(self) -> int:
        return self.queue_dropped + self.retry_exhausted + self.expired + self.flushed

    def balanced(self) -> bool:
        return self.delivered + self.collided + self.dropped == self.enqueued

    def as_dict(self) -> dict[str, int]:
        return {k: getattr(self, k) for k in self.FIELDS}

    def add(self, other: "MacCounters") -> None:
        for k in self.FIELDS:
            setattr(self, k, getattr(self, k) + getattr(other, k))


FrameLog = Callable[[int, Frame, str], None]
Receiver = Callable[[Frame], None]


class _Station(MacCounters):
    __slots__ = ("node", "queue", "cw", "retries", "backoff", "k0", "tx_slot", "rng", "receive")

    def __init__(self, node: int, rng: RngStream, receive: Receiver, cw_min: int):
        super().__init__()
        self.node = node
        self.queue: deque[Frame] = deque()
        self.cw = cw_min
        self.retries = 0
        self.backoff = -1
        self.k0 = 0
        self.tx_slot = 0
        self.rng = rng
        self.receive = receive


class WifiChannel:
    """Single collision domain shared by every attached station.

    ``broadcast_sink``, when set, replaces the default broadcast fan-out. It is
    an optimization hook for callers that know which receivers would act on a
    frame; it must be observationally equivalent to calling every receiver in
    :meth:`deliver`.
    """

    def __init__(self, sim: Simulator, params: MacParams = MacParams(), seed: int = 0,
                 label: str = "mac", frame_log: FrameLog | None = None):
        self.sim = sim
        self.params = params
        self.seed = seed
        self.label = label
        self.frame_log = frame_log
        self.broadcast_sink: Callable[[Frame], None] | None = None
        self._stations: dict[int, _Station] = {}
        # stations counting down toward the planned transmission, and
        # stations that joined while the medium was busy
        self._contenders: list[_Station] = []
        self._deferred: list[_Station] = []
        self._winners: list[_Station] = []
        self._start = 0
        self._tx_slot = 0
        self._idle_since = 0
        self._pending: list | None = None
        self._slot = round(params.slot_us * NS_PER_US)
        self._difs = round(params.difs_us * NS_PER_US)
        self._ack_tail = round((params.sifs_us + params.ack_us) * NS_PER_US)
        self._max_delay = round(params.max_queue_delay_ms * 1_000_000)
        self._air_cache: dict[str, dict[int, int]] = {BASIC: {}, FULL: {}}
        self._heap = sim._heap
        self._seq = sim._seq
        # one count per finished frame, whatever its outcome
        self.service_frames = {BASIC: 0, FULL: 0}
        self.cast_frames = {BROADCAST_CAST: 0, UNICAST: 0}
        self.busy_ns = 0

    # -- attachment -------------------------------------------------------------

    def attach(self, node: int, receive: Receiver) -> None:
        if node in self._stations:
            raise ValueError(f"node {node} already attached")
        rng = RngStream(f"{self.label}/backoff/{node}", self.seed)
        self._stations[node] = _Station(node, rng, receive, self.params.cw_min)

    def attached(self) -> list[int]:
        return list(self._stations)

    def counters(self, node: int) -> MacCounters:
        return self._stations[node]

    def total_counters(self) -> MacCounters:
        total = MacCounters()
        for st in self._stations.values():
            total.add(st)
        return total

    def queue_length(self, node: int) -> int:
        return len(self._stations[node].queue)

    # -- frame path -------------------------------------------------------------

    def airtime(self, frame: Frame) -> int:
        cache = self._air_cache[frame.service]
        t = cache.get(frame.nbytes)
        if t is None:
            t = cache[frame.nbytes] = airtime(frame.nbytes, frame.service, self.params)
        return t

    def enqueue(self, node: int, frame: Frame) -> None:
        st = self._stations[node]
        st.enqueued += 1
        queue = st.queue
        if len(queue) >= self.params.queue_limit:
            st.queue_dropped += 1
            self._outcome(frame, QUEUE_DROPPED)
            return
        now = self.sim.now
        frame.queued_at = now
        queue.append(frame)
        if len(queue) == 1:
            self._join(st, now)

    def deliver(self, frame: Frame) -> list[int]:
        """Receiver set for a frame that went through without collision."""
        if frame.dest == BROADCAST:
            return [n for n in self._stations if n != frame.src]
        return [frame.dest] if frame.dest in self._stations else []

    def flush(self) -> int:
        """Account every frame still queued (including one on the air) as dropped."""
        n = 0
        for st in self._stations.values():
            while st.queue:
                frame = st.queue.popleft()
                st.flushed += 1
                self._outcome(frame, FLUSHED)
                n += 1
            st.backoff = -1
        if self._pending is not None:
            self._pending[2] = None
            self._pending = None
        self._contenders.clear()
        self._deferred.clear()
        return n

    # -- contention -------------------------------------------------------------

    def _outcome(self, frame: Frame, outcome: str) -> None:
        self.service_frames[frame.service] += 1
        self.cast_frames[UNICAST if frame.dest != BROADCAST else BROADCAST_CAST] += 1
        if self.frame_log is not None:
            self.frame_log(self.sim.now, frame, outcome)

    def _fresh_head(self, st: _Station, now: int) -> bool:
        """Drop head-of-line frames that waited longer than the sojourn limit."""
        queue = st.queue
        limit = now - self._max_delay
        while queue and queue[0].queued_at < limit:
            frame = queue.popleft()
            st.expired += 1
            self._outcome(frame, EXPIRED)
        return bool(queue)

    def _join(self, st: _Station, now: int) -> None:
        if st.backoff < 0:
            st.backoff = st.rng.uniform_int(0, st.cw)
        pending = self._pending
        if pending is not None and now >= self._start:
            # medium busy: the countdown starts at the next idle instant
            self._deferred.append(st)
            return
        self._contenders.append(st)
        idle = self._idle_since
        k0 = -((idle - now) // self._slot) if now > idle else 0
        st.k0 = k0
        st.tx_slot = tx = k0 + st.backoff
        if pending is None or tx < self._tx_slot:
            if pending is not None:
                pending[2] = None
            self._plan([st], tx)
        elif tx == self._tx_slot:
            pending[2] = None
            self._plan(self._winners + [st], tx)

    def _plan(self, winners: list[_Station], slot: int) -> None:
        """Schedule the end of the transmission that starts in ``slot``."""
        start = self._idle_since + self._difs + slot * self._slot
        self._start = start
        self._tx_slot = slot
        self._winners = winners
        if len(winners) == 1:
            frame = winners[0].queue[0]
            dur = self._air_cache[frame.service].get(frame.nbytes) or self.airtime(frame)
            if frame.dest != BROADCAST:
                dur += self._ack_tail
            # same as Simulator.post; start + dur is never in the past
            self._pending = entry = [start + dur, next(self._seq), self._success, (winners[0],)]
        else:
            dur = max([self.airtime(st.queue[0]) for st in winners])
            self._pending = entry = [start + dur, next(self._seq), self._collision, (winners,)]
        heappush(self._heap, entry)

    def _end_tx(self, now: int) -> None:
        """Freeze the losers' counters and hand the medium back."""
        self._pending = None
        self.busy_ns += now - self._start
        m = self._tx_slot
        waiting = self._deferred
        for st in self._contenders:
            if st.tx_slot == m:
                st.attempts += 1
            else:
                k0 = st.k0
                st.backoff = st.tx_slot - (m if m > k0 else k0)
                waiting.append(st)
        self._contenders = waiting
        self._deferred = []
        self._idle_since = now

    def _go_idle(self) -> None:
        contenders = self._contenders
        if not contenders:
            return
        best = 1 << 62
        for st in contenders:
            st.k0 = 0
            b = st.tx_slot = st.backoff
            if b < best:
                best = b
        if len(contenders) == 1:
            self._plan(contenders[:], best)
        else:
            self._plan([st for st in contenders if st.tx_slot == best], best)

    def _success(self, st: _Station) -> None:
        now = self.sim.now
        # inline of _end_tx
        self._pending = None
        self.busy_ns += now - self._start
        contenders = self._contenders
        if len(contenders) == 1:
            st.attempts += 1
            self._contenders = self._deferred
        else:
            m = self._tx_slot
            waiting = self._deferred
            for other in contenders:
                if other is st:
                    st.attempts += 1
                else:
                    k0 = other.k0
                    other.backoff = other.tx_slot - (m if m > k0 else k0)
                    waiting.append(other)
            self._contenders = waiting
        self._deferred = []
        self._idle_since = now
        frame = st.queue.popleft()
        st.delivered += 1
        st.cw = self.params.cw_min
        st.retries = 0
        st.backoff = -1
        self.service_frames[frame.service] += 1
        self.cast_frames[UNICAST if frame.dest != BROADCAST else BROADCAST_CAST] += 1
        if self.frame_log is not None:
            self.frame_log(now, frame, DELIVERED)
        if st.queue and self._fresh_head(st, now):
            st.backoff = st.rng.uniform_int(0, st.cw)
            self._contenders.append(st)
        if self._contenders:
            self._go_idle()
        if frame.dest == BROADCAST:
            if self.broadcast_sink is not None:
                self.broadcast_sink(frame)
            else:
                for node, other in self._stations.items():
                    if node != frame.src:
                        other.receive(frame)
        else:
            self._stations[frame.dest].receive(frame)

    def _collision(self, winners: list[_Station]) -> None:
        params = self.params
        now = self.sim.now
        self._end_tx(now)
        for st in winners:
            frame = st.queue[0]
            if frame.dest == BROADCAST:
                st.queue.popleft()
                st.collided += 1
                self._outcome(frame, COLLIDED)
            else:
                st.retries += 1
                if st.retries > params.retry_limit:
                    st.queue.popleft()
                    st.retry_exhausted += 1
                    st.cw = params.cw_min
                    st.retries = 0
                    self._outcome(frame, RETRY_EXHAUSTED)
                else:
                    st.cw = min(2 * st.cw + 1, params.cw_max)
            st.backoff = -1
            if st.queue and self._fresh_head(st, now):
                st.backoff = st.rng.uniform_int(0, st.cw)
                self._contenders.append(st)
        self._go_idle()


class IdealChannel:
    """Lossless, contention-free stand-in for :class:`WifiChannel`.

    Every frame reaches its receivers one airtime after being enqueued,
    regardless of what else is on the air.
    """

    def __init__(self, sim: Simulator, params: MacParams = MacParams(), seed: int = 0,
                 label: str = "ideal", frame_log: FrameLog | None = None):
        self.sim = sim
        self.params = params
        self.frame_log = frame_log
        self.broadcast_sink: Callable[[Frame], None] | None = None
        self._receivers: dict[int, Receiver] = {}
        self._counters: dict[int, MacCounters] = {}
        # one count per finished frame, whatever its outcome
        self.service_frames = {BASIC: 0, FULL: 0}
        self.cast_frames = {BROADCAST_CAST: 0, UNICAST: 0}
        self.busy_ns = 0

    def attach(self, node: int, receive: Receiver) -> None:
        if node in self._receivers:
            raise ValueError(f"node {node} already attached")
        self._receivers[node] = receive
        self._counters[node] = MacCounters()

    def attached(self) -> list[int]:
        return list(self._receivers)

    def counters(self, node: int) -> MacCounters:
        return self._counters[node]

    def total_counters(self) -> MacCounters:
        total = MacCounters()
        for c in self._counters.values():
            total.add(c)
        return total

    def deliver(self, frame: Frame) -> list[int]:
        if frame.dest == BROADCAST:
            return [n for n in self._receivers if n != frame.src]
        return [frame.dest] if frame.dest in self._receivers else []

    def enqueue(self, node: int, frame: Frame) -> None:
        self._counters[node].enqueued += 1
        self._counters[node].attempts += 1
        self.sim.post(self.sim.now + airtime(frame.nbytes, frame.service, self.params), self._arrive, frame)

    def flush(self) -> int:
        """Account frames still on the air as dropped."""
        n = 0
        for c in self._counters.values():
            count = c.enqueued - c.delivered - c.flushed
            c.flushed += count
            n += count
        return n

    def _arrive(self, frame: Frame) -> None:
        self._counters[frame.src].delivered += 1
        self.service_frames[frame.service] += 1
        self.cast_frames[UNICAST if frame.dest != BROADCAST else BROADCAST_CAST] += 1
        if self.frame_log is not None:
            self.frame_log(self.sim.now, frame, DELIVERED)
        if frame.dest == BROADCAST:
            if self.broadcast_sink is not None:
                self.broadcast_sink(frame)
            else:
                for node in self.deliver(frame):
                    self._receivers[node](frame)
        else:
            self._receivers[frame.dest](frame)


class PointToPointLink:
    """Full-duplex wired link: FIFO serialization per direction plus fixed delay."""

    def __init__(self, sim: Simulator, a: int, b: int, rate_bps: int = 1_000_000_000,
                 delay_ns: int = 30_000_000, frame_log: FrameLog | None = None):
        self.sim = sim
        self.ends = (a, b)
        self.rate_bps = rate_bps
        self.delay_ns = delay_ns
        self.frame_log = frame_log
        self._busy_until = {a: 0, b: 0}
        self._receivers: dict[int, Receiver] = {}
        self._counters = {a: MacCounters(), b: MacCounters()}
        self._peer = {a: b, b: a}

    def attach(self, node: int, receive: Receiver) -> None:
        if node not in self.ends:
            raise ValueError(f"node {node} is not an end of this link")
        self._receivers[node] = receive

    def peer(self, node: int) -> int:
        a, b = self.ends
        return b if node == a else a

    def serialization_ns(self, nbytes: int) -> int:
        return -(-8 * nbytes * 1_000_000_000 // self.rate_bps)

    def counters(self, node: int) -> MacCounters:
        return self._counters[node]

    def enqueue(self, node: int, frame: Frame) -> None:
        self._counters[node].enqueued += 1
        now = self.sim.now
        start = self._busy_until[node]
        if now > start:
            start = now
        done = start - (-8_000_000_000 * frame.nbytes // self.rate_bps)
        self._busy_until[node] = done
        self.sim.post(done + self.delay_ns, self._arrive, node, frame)

    def flush(self) -> int:
        """Account frames still on the wire as dropped."""
        n = 0
        for c in self._counters.values():
            count = c.enqueued - c.delivered - c.flushed
            c.flushed += count
            n += count
        return n

    def _arrive(self, sender: int, frame: Frame) -> None:
        self._counters[sender].delivered += 1
        if self.frame_log is not None:
            self.frame_log(self.sim.now, frame, DELIVERED)
        self._receivers[self._peer[sender]](frame)
