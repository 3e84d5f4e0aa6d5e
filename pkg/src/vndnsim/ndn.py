"""NDN packets and the forwarder pipeline (Content Store, PIT, FIB, faces)."""

from __future__ import annotations

import enum
import struct
from collections import OrderedDict
from typing import Iterable, Union

INTEREST_HEADER = 32
DATA_HEADER = 48
DATA_PAYLOAD = 1024
DEFAULT_LIFETIME_NS = 4_000_000_000

_INTEREST_HDR = struct.Struct(">BBHIQB15x")
_DATA_HDR = struct.Struct(">BBHI40x")
_TYPE_INTEREST = 0x05
_TYPE_DATA = 0x06


class Name:
    """Hierarchical name; components are compared one by one, never as text."""

    __slots__ = ("components", "uri", "wire_len", "_hash")

    def __init__(self, components: Iterable[str] = ()):
        comps = tuple(components)
        for c in comps:
            if not c or "/" in c:
                raise ValueError(f"invalid name component {c!r}")
        self.components = comps
        self.uri = "/" + "/".join(comps)
        self.wire_len = len(self.uri.encode())
        self._hash = hash(comps)

    @classmethod
    def _trusted(cls, components: tuple, uri: str) -> "Name":
        """Build from components already known to be valid (hot path)."""
        self = object.__new__(cls)
        self.components = components
        self.uri = uri
        self.wire_len = len(uri) if uri.isascii() else len(uri.encode())
        self._hash = hash(components)
        return self

    @classmethod
    def parse(cls, text: str) -> "Name":
        if not text.startswith("/"):
            raise ValueError(f"name must start with '/': {text!r}")
        if text == "/":
            return cls(())
        return cls(text[1:].split("/"))

    def append(self, component: object) -> "Name":
        c = str(component)
        if not c or "/" in c:
            raise ValueError(f"invalid name component {c!r}")
        return Name._trusted(self.components + (c,), (self.uri if self.components else "") + "/" + c)

    def is_prefix_of(self, other: "Name") -> bool:
        n = len(self.components)
        return other.components[:n] == self.components

    def __len__(self) -> int:
        return len(self.components)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Name) and self.components == other.components

    def __hash__(self) -> int:
        return self._hash

    def __str__(self) -> str:
        return self.uri

    def __repr__(self) -> str:
        return f"Name({self.uri!r})"


def name_is_prefix(prefix: Name, name: Name) -> bool:
    return prefix.is_prefix_of(name)


class Interest:
    __slots__ = ("name", "nonce", "lifetime", "hop_count")

    is_interest = True

    def __init__(self, name: Name, nonce: int, lifetime: int = DEFAULT_LIFETIME_NS, hop_count: int = 0):
        if lifetime <= 0:
            raise ValueError("interest lifetime must be positive")
        self.name = name
        self.nonce = nonce
        self.lifetime = lifetime
        self.hop_count = hop_count

    @property
    def wire_size(self) -> int:
        return INTEREST_HEADER + self.name.wire_len

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Interest)
            and self.name == other.name
            and self.nonce == other.nonce
            and self.lifetime == other.lifetime
            and self.hop_count == other.hop_count
        )

    def __repr__(self) -> str:
        return f"Interest({self.name.uri}, nonce={self.nonce:#010x})"


class Data:
    __slots__ = ("name", "payload_len")

    is_interest = False

    def __init__(self, name: Name, payload_len: int = DATA_PAYLOAD):
        self.name = name
        self.payload_len = payload_len

    @property
    def wire_size(self) -> int:
        return DATA_HEADER + self.name.wire_len + self.payload_len

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Data) and self.name == other.name and self.payload_len == other.payload_len

    def __repr__(self) -> str:
        return f"Data({self.name.uri}, {self.payload_len} B)"


Packet = Union[Interest, Data]


def encode(packet: Packet) -> bytes:
    """Fixed-header wire encoding; ``len(encode(p)) == p.wire_size``."""
    name = packet.name.uri.encode()
    if packet.is_interest:
        hdr = _INTEREST_HDR.pack(_TYPE_INTEREST, 0, len(name), packet.nonce, packet.lifetime, packet.hop_count)
        return hdr + name
    hdr = _DATA_HDR.pack(_TYPE_DATA, 0, len(name), packet.payload_len)
    return hdr + name + bytes(packet.payload_len)


def decode(wire: bytes) -> Packet:
    kind = wire[0]
    if kind == _TYPE_INTEREST:
        _, _, nlen, nonce, lifetime, hops = _INTEREST_HDR.unpack_from(wire)
        off = _INTEREST_HDR.size
        name = Name.parse(wire[off:off + nlen].decode())
        if len(wire) != off + nlen:
            raise ValueError("trailing bytes after interest")
        return Interest(name, nonce, lifetime, hops)
    if kind == _TYPE_DATA:
        _, _, nlen, payload_len = _DATA_HDR.unpack_from(wire)
        off = _DATA_HDR.size
        name = Name.parse(wire[off:off + nlen].decode())
        if len(wire) != off + nlen + payload_len:
            raise ValueError("data length mismatch")
        return Data(name, payload_len)
    raise ValueError(f"unknown packet type {kind:#x}")


class FaceKind(enum.Enum):
    APPLICATION = "application"
    NATIVE_LINK = "native-link"
    OVERLAY_TUNNEL = "overlay-tunnel"
    POINT_TO_POINT = "point-to-point"


class PitEntry:
    __slots__ = ("name", "in_faces", "nonces", "expires_at")

    def __init__(self, name: Name, in_face: int, nonce: int, expires_at: int):
        self.name = name
        self.in_faces = [in_face]
        self.nonces = {nonce}
        self.expires_at = expires_at


class ContentStore:
    """Exact-name cache with LRU eviction. Capacity 0 disables caching."""

    def __init__(self, capacity: int):
        if capacity < 0:
            raise ValueError("capacity must be >= 0")
        self.capacity = capacity
        # keyed by URI: str hashing runs in C and the URI is canonical
        self._entries: OrderedDict[str, Data] = OrderedDict()

    def lookup(self, name: Name) -> Data | None:
        if not self.capacity:
            return None
        data = self._entries.get(name.uri)
        if data is not None:
            self._entries.move_to_end(name.uri)
        return data

    def insert(self, data: Data) -> None:
        if not self.capacity:
            return
        entries = self._entries
        key = data.name.uri
        if key in entries:
            entries.move_to_end(key)
            return
        if len(entries) >= self.capacity:
            entries.popitem(last=False)
        entries[key] = data

    def __contains__(self, name: Name) -> bool:
        return name.uri in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def names(self) -> list[Name]:
        """Names from least to most recently used."""
        return [d.name for d in self._entries.values()]


class FibTable:
    """Longest-prefix-match routing table, one route per exact prefix."""

    def __init__(self) -> None:
        self._routes: dict[tuple[str, ...], int] = {}
        self._max_len = 0

    def add_route(self, prefix: Name, face: int) -> None:
        self._routes[prefix.components] = face
        self._max_len = max(self._max_len, len(prefix))

    def lookup(self, name: Name) -> int | None:
        routes = self._routes
        comps = name.components
        k = len(comps)
        if k > self._max_len:
            k = self._max_len
        while k >= 0:
            face = routes.get(comps[:k])
            if face is not None:
                return face
            k -= 1
        return None

    def routes(self) -> list[tuple[Name, int]]:
        return [(Name(p), f) for p, f in self._routes.items()]

    def __len__(self) -> int:
        return len(self._routes)


def fib_lookup(fib: FibTable, name: Name) -> int | None:
    return fib.lookup(name)


class Forwarder:
    """Per-node forwarding state and the interest/data pipelines.

    Pipelines return a list of ``(face_id, packet)`` emissions; an empty list
    means the packet was dropped or absorbed.
    """

    def __init__(self, cs_capacity: int = 0):
        self.cs = ContentStore(cs_capacity)
        self.fib = FibTable()
        self.pit: dict[str, PitEntry] = {}  # keyed by name URI
        self.faces: dict[int, FaceKind] = {}
        self._next_face = 1
        self.unsatisfied = 0
        self.drops = {"duplicate": 0, "no-route": 0, "unsolicited": 0}
        self.cs_hits = 0
        self.aggregated = 0

    def add_face(self, kind: FaceKind) -> int:
        face = self._next_face
        self._next_face += 1
        self.faces[face] = kind
        return face

    def on_interest(self, interest: Interest, in_face: int, now: int) -> list:
        name = interest.name
        key = name.uri
        pit = self.pit
        entry = pit.get(key)
        if entry is not None:
            if entry.expires_at <= now:
                del pit[key]
                self.unsatisfied += 1
                entry = None
            elif interest.nonce in entry.nonces:
                self.drops["duplicate"] += 1
                return []
        cs = self.cs
        if cs.capacity:
            cached = cs._entries.get(key)
            if cached is not None:
                cs._entries.move_to_end(key)
                self.cs_hits += 1
                return [(in_face, cached)]
        expires = now + interest.lifetime
        if entry is not None:
            if in_face not in entry.in_faces:
                entry.in_faces.append(in_face)
            entry.nonces.add(interest.nonce)
            if expires > entry.expires_at:
                entry.expires_at = expires
            self.aggregated += 1
            return []
        out = self.fib.lookup(name)
        if out is None or out == in_face:
            self.drops["no-route"] += 1
            return []
        pit[key] = PitEntry(name, in_face, interest.nonce, expires)
        return [(out, Interest(name, interest.nonce, interest.lifetime, interest.hop_count + 1))]

    def on_data(self, data: Data, in_face: int, now: int) -> list:
        entry = self.pit.pop(data.name.uri, None)
        if entry is None:
            self.drops["unsolicited"] += 1
            return []
        if entry.expires_at <= now:
            self.unsatisfied += 1
            self.drops["unsolicited"] += 1
            return []
        if self.cs.capacity:
            self.cs.insert(data)
        faces = entry.in_faces
        if len(faces) == 1:
            return [] if faces[0] == in_face else [(faces[0], data)]
        return [(f, data) for f in faces if f != in_face]

    def pit_expire(self, now: int) -> int:
        pit = self.pit
        expired = [key for key, e in pit.items() if e.expires_at <= now]
        for key in expired:
            del pit[key]
        self.unsatisfied += len(expired)
        return len(expired)


ForwarderState = Forwarder


def on_interest(state: Forwarder, interest: Interest, in_face: int, now: int = 0) -> list:
    return state.on_interest(interest, in_face, now)


def on_data(state: Forwarder, data: Data, in_face: int, now: int = 0) -> list:
    return state.on_data(data, in_face, now)


def pit_expire(state: Forwarder, now: int) -> int:
    return state.pit_expire(now)
