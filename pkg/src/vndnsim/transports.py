"""Native (link-layer) and overlay (UDP/IPv4 tunnel) faces, and stack setup.

A native face maps each NDN packet to one link frame; on the wireless channel
that frame must be broadcast because NDN has no layer-2 address resolution.
An overlay face wraps the packet in UDP/IPv4 and sends it as a unicast frame
to the link address resolved for the remote IP.
"""

from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .mac import BASIC, BROADCAST, FULL, Frame
from .ndn import Data, FaceKind, Forwarder, Interest, Name, Packet, decode, encode

LINK_HEADER = 36
UDP_IP_OVERHEAD = 28
NDN_UDP_PORT = 6363

WIRELESS = "wireless"
POINT_TO_POINT = "point-to-point"

NATIVE = "native"
OVERLAY = "overlay"

_LINK_HDR = struct.Struct(">Hii26x")
_IPV4_HDR = struct.Struct(">BBHHHBBH4s4s")
_UDP_HDR = struct.Struct(">HHHH")


class SetupError(ValueError):
    """Stack or address configuration is inconsistent."""


class Endpoint(NamedTuple):
    ip: str
    port: int


class Datagram(NamedTuple):
    """UDP payload as carried inside an overlay frame."""

    src: Endpoint
    dst: Endpoint
    packet: Packet


class AddressTable:
    """IPv4 address to link address (node id); resolution always succeeds."""

    def __init__(self) -> None:
        self._bindings: dict[str, int] = {}

    def assign(self, ip: str, node: int) -> None:
        ipaddress.IPv4Address(ip)
        if ip in self._bindings:
            raise SetupError(f"address {ip} already assigned to node {self._bindings[ip]}")
        self._bindings[ip] = node

    def resolve(self, ip: str) -> int:
        try:
            return self._bindings[ip]
        except KeyError:
            raise SetupError(f"no link address for {ip}") from None

    def __contains__(self, ip: str) -> bool:
        return ip in self._bindings

    def __len__(self) -> int:
        return len(self._bindings)


class NativeLinkFace:
    __slots__ = ("node", "face_id", "attachment", "medium", "peer")

    kind = FaceKind.NATIVE_LINK

    def __init__(self, node: int, attachment: str, medium: Any = None, peer: int | None = None, face_id: int = 0):
        self.node = node
        self.attachment = attachment
        self.medium = medium
        self.peer = peer
        self.face_id = face_id

    def send(self, packet: Packet) -> Frame:  # replaced below by native_send
        raise NotImplementedError


class OverlayTunnelFace:
    __slots__ = ("node", "face_id", "local", "remote", "link_dest", "attachment", "medium")

    kind = FaceKind.OVERLAY_TUNNEL

    def __init__(self, node: int, local: Endpoint, remote: Endpoint, link_dest: int,
                 attachment: str, medium: Any = None, face_id: int = 0):
        self.node = node
        self.local = local
        self.remote = remote
        self.link_dest = link_dest
        self.attachment = attachment
        self.medium = medium
        self.face_id = face_id

    def send(self, packet: Packet) -> Frame:  # replaced below by overlay_send
        raise NotImplementedError


def native_send(face: NativeLinkFace, packet: Packet) -> Frame:
    nbytes = packet.wire_size + LINK_HEADER
    if face.attachment == WIRELESS:
        return Frame(face.node, BROADCAST, BASIC, nbytes, packet)
    return Frame(face.node, face.peer, FULL, nbytes, packet, wireless=False)


def overlay_send(face: OverlayTunnelFace, packet: Packet) -> Frame:
    nbytes = packet.wire_size + UDP_IP_OVERHEAD + LINK_HEADER
    return Frame(face.node, face.link_dest, FULL, nbytes, packet, face.attachment == WIRELESS,
                 (face.local, face.remote))


NativeLinkFace.send = native_send
OverlayTunnelFace.send = overlay_send


def datagram(frame: Frame) -> Datagram | None:
    """The UDP view of an overlay frame, or None for a native one."""
    if frame.udp is None:
        return None
    return Datagram(frame.udp[0], frame.udp[1], frame.payload)


# -- byte-level encapsulation -------------------------------------------------


def _checksum(header: bytes) -> int:
    total = sum(struct.unpack(f">{len(header) // 2}H", header))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def encapsulate(frame: Frame) -> bytes:
    """Serialize a frame as link header [+ IPv4 + UDP] + NDN wire bytes."""
    dg = frame.payload if isinstance(frame.payload, Datagram) else datagram(frame)
    link = _LINK_HDR.pack(0x8624 if dg is None else 0x0800, frame.src, frame.dest)
    if dg is not None:
        ndn = encode(dg.packet)
        udp_len = 8 + len(ndn)
        ip_fields = [0x45, 0, 20 + udp_len, 0, 0, 64, 17, 0,
                     ipaddress.IPv4Address(dg.src.ip).packed, ipaddress.IPv4Address(dg.dst.ip).packed]
        ip_fields[7] = _checksum(_IPV4_HDR.pack(*ip_fields))
        return link + _IPV4_HDR.pack(*ip_fields) + _UDP_HDR.pack(dg.src.port, dg.dst.port, udp_len, 0) + ndn
    return link + encode(frame.payload)


def decapsulate(wire: bytes) -> tuple[int, int, Packet | Datagram]:
    """Inverse of :func:`encapsulate`; returns ``(src, dest, payload)``."""
    ethertype, src, dest = _LINK_HDR.unpack_from(wire)
    body = wire[_LINK_HDR.size:]
    if ethertype == 0x0800:
        ip = _IPV4_HDR.unpack_from(body)
        if _checksum(body[:20]) != 0:
            raise ValueError("bad IPv4 header checksum")
        sport, dport, udp_len, _ = _UDP_HDR.unpack_from(body, 20)
        packet = decode(body[28:28 + udp_len - 8])
        src_ep = Endpoint(str(ipaddress.IPv4Address(ip[8])), sport)
        dst_ep = Endpoint(str(ipaddress.IPv4Address(ip[9])), dport)
        return src, dest, Datagram(src_ep, dst_ep, packet)
    return src, dest, decode(body)


# -- nodes and stacks -----------------------------------------------------------


class Node:
    """An NDN node: forwarder plus the faces bound to it."""

    def __init__(self, node_id: int, role: str, cs_capacity: int = 0):
        self.node_id = node_id
        self.role = role
        self.forwarder = Forwarder(cs_capacity)
        self.faces: dict[int, Any] = {}
        self.app_face: int | None = None
        self.app: Any = None
        self.link_faces: dict[int, int] = {}
        self.tunnels: dict[Endpoint, int] = {}
        self.ips: list[str] = []
        self._next_port = NDN_UDP_PORT

    def add_app_face(self, app: Any = None) -> int:
        face = self.forwarder.add_face(FaceKind.APPLICATION)
        self.app_face = face
        self.app = app
        return face

    def add_face(self, face: NativeLinkFace | OverlayTunnelFace) -> int:
        kind = face.kind
        if isinstance(face, NativeLinkFace) and face.attachment == POINT_TO_POINT:
            kind = FaceKind.POINT_TO_POINT
        fid = self.forwarder.add_face(kind)
        face.face_id = fid
        self.faces[fid] = face
        if isinstance(face, OverlayTunnelFace):
            if face.remote in self.tunnels:
                raise SetupError(f"node {self.node_id}: tunnel to {face.remote} already exists")
            self.tunnels[face.remote] = fid
        else:
            self.link_faces[id(face.medium)] = fid
        return fid

    def allocate_port(self) -> int:
        port = self._next_port
        self._next_port += 1
        return port

    def face_for(self, frame: Frame, medium: Any) -> int | None:
        """Face on which a received frame arrives."""
        if frame.udp is not None:
            return self.tunnels.get(frame.udp[0])
        return self.link_faces.get(id(medium))


@dataclass
class Topology:
    """Star topology: vehicles on one wireless channel, router, wired producer."""

    router: Node
    producer: Node
    vehicles: dict[int, Node] = field(default_factory=dict)
    wireless: Any = None
    wired: Any = None
    addresses: AddressTable = field(default_factory=AddressTable)
    deployment: str = NATIVE
    wireless_net: ipaddress.IPv4Network = ipaddress.IPv4Network("10.1.0.0/16")
    wired_net: ipaddress.IPv4Network = ipaddress.IPv4Network("10.2.0.0/30")

    def nodes(self) -> list[Node]:
        return [self.router, self.producer, *self.vehicles.values()]

    def wireless_ip(self, node: Node) -> str:
        return str(self.wireless_net.network_address + 1 + node.node_id)

    def gateway(self, node: Node) -> Node | None:
        if node.role == "vehicle":
            return self.router
        if node.role == "router":
            return self.producer
        return None


def _assign(topo: Topology, node: Node, ip: str) -> None:
    topo.addresses.assign(ip, node.node_id)
    node.ips.append(ip)


def _tunnel_pair(topo: Topology, a: Node, a_ip: str, b: Node, b_ip: str, attachment: str, medium: Any) -> tuple[int, int]:
    a_ep = Endpoint(a_ip, a.allocate_port())
    b_ep = Endpoint(b_ip, b.allocate_port())
    fa = a.add_face(OverlayTunnelFace(a.node_id, a_ep, b_ep, topo.addresses.resolve(b_ip), attachment, medium))
    fb = b.add_face(OverlayTunnelFace(b.node_id, b_ep, a_ep, topo.addresses.resolve(a_ip), attachment, medium))
    return fa, fb


def install_stack(topo: Topology, node: Node, deployment: str) -> list[int]:
    """Create the faces a node needs for the chosen deployment.

    Native: one link face per attachment. Overlay: addresses are assigned and a
    tunnel is opened toward the node's gateway peer, together with the
    reverse face on the peer. Returns the new face ids on ``node``.
    """
    if deployment not in (NATIVE, OVERLAY):
        raise SetupError(f"unknown deployment {deployment!r}")
    created: list[int] = []
    if deployment == NATIVE:
        if node.role == "vehicle":
            created.append(node.add_face(NativeLinkFace(node.node_id, WIRELESS, topo.wireless)))
        elif node.role == "router":
            created.append(node.add_face(NativeLinkFace(node.node_id, WIRELESS, topo.wireless)))
            created.append(node.add_face(NativeLinkFace(
                node.node_id, POINT_TO_POINT, topo.wired, peer=topo.producer.node_id)))
        else:
            created.append(node.add_face(NativeLinkFace(
                node.node_id, POINT_TO_POINT, topo.wired, peer=topo.router.node_id)))
        return created

    router, producer = topo.router, topo.producer
    if node.role == "vehicle":
        ip = topo.wireless_ip(node)
        _assign(topo, node, ip)
        router_ip = topo.wireless_ip(router)
        fa, _ = _tunnel_pair(topo, node, ip, router, router_ip, WIRELESS, topo.wireless)
        created.append(fa)
    elif node.role == "router":
        _assign(topo, node, topo.wireless_ip(node))
        _assign(topo, node, str(topo.wired_net.network_address + 1))
    else:
        _assign(topo, node, str(topo.wired_net.network_address + 2))
        router_ip = str(topo.wired_net.network_address + 1)
        fa, _ = _tunnel_pair(topo, node, node.ips[0], router, router_ip, POINT_TO_POINT, topo.wired)
        created.append(fa)
    return created


def build_routes(topo: Topology, prefix: Name = Name(("data",))) -> dict[int, list[tuple[Name, int]]]:
    """Install FIB routes for the star; returns each node's route list."""
    root = Name(())
    router, producer = topo.router, topo.producer

    def upstream(node: Node, peer: Node) -> int:
        for fid, face in node.faces.items():
            if isinstance(face, NativeLinkFace) and face.attachment == WIRELESS and node.role == "vehicle":
                return fid
            if isinstance(face, NativeLinkFace) and face.peer == peer.node_id:
                return fid
            if isinstance(face, OverlayTunnelFace) and face.link_dest == peer.node_id:
                return fid
        raise SetupError(f"node {node.node_id} has no face toward node {peer.node_id}")

    for v in topo.vehicles.values():
        v.forwarder.fib.add_route(root, upstream(v, router))
    router.forwarder.fib.add_route(prefix, upstream(router, producer))
    if producer.app_face is None:
        raise SetupError("producer has no application face")
    producer.forwarder.fib.add_route(prefix, producer.app_face)
    return {n.node_id: n.forwarder.fib.routes() for n in topo.nodes()}


__all__ = [
    "AddressTable", "Datagram", "Endpoint", "LINK_HEADER", "NATIVE", "NativeLinkFace", "Node", "OVERLAY",
    "OverlayTunnelFace", "POINT_TO_POINT", "SetupError", "Topology", "UDP_IP_OVERHEAD", "WIRELESS",
    "build_routes", "datagram", "decapsulate", "encapsulate", "install_stack", "native_send", "overlay_send",
    "Data", "Interest",
]
