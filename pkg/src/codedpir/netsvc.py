"""Networked servers and remote retrieval over a framed TCP protocol.

Frame layout: 4-byte big-endian length (covering tag plus body), 1-byte
tag, body. Tags: 0x01 HELLO, 0x02 QUERY, 0x03 ANSWER, 0x7F ERROR.

HELLO body is one protocol-version byte plus the 2-byte big-endian server
id; the server echoes its own HELLO or answers ERROR on a mismatch. Each
QUERY frame gets exactly one ANSWER frame. Query body: sum count (4B),
then per sum a term count (2B) and per term the 1-based record (2B) and
0-based stored position (4B). Answer body: value count (4B) then each
value as 8 bytes (field elements, so anything below 2^64 fits).

Servers are stateless: answers depend only on the stored share and the
query, and per-connection answers come back in query order.
"""

from __future__ import annotations

import socket
import socketserver
import struct
import threading

from .algebra import Field
from .mds import Generator, ShareTable
from .params import SchemeParams
from .plan import WireQuery, build_plan, canonicalize
from .protocol import BadQuery, Transcript, answer, decode, gen_permutations, observed_metrics

TAG_HELLO = 0x01
TAG_QUERY = 0x02
TAG_ANSWER = 0x03
TAG_ERROR = 0x7F

PROTOCOL_VERSION = 1

_MAX_FRAME = 1 << 26


class EncodeError(ValueError):
    """Query does not fit the wire field widths."""


class ConnectError(OSError):
    """A specific server could not be reached."""


class ProtocolError(RuntimeError):
    """Peer sent something outside the framing contract."""


def encode_query(q: WireQuery) -> bytes:
    parts = [struct.pack(">I", len(q.sums))]
    for terms in q.sums:
        if len(terms) > 0xFFFF:
            raise EncodeError("too many terms in one sum")
        parts.append(struct.pack(">H", len(terms)))
        for rec, pos in terms:
            if not 1 <= rec <= 0xFFFF:
                raise EncodeError(f"record index {rec} does not fit 2 bytes")
            if not 0 <= pos < 1 << 32:
                raise EncodeError(f"position {pos} does not fit 4 bytes")
            parts.append(struct.pack(">HI", rec, pos))
    return b"".join(parts)


def decode_query(body: bytes) -> WireQuery:
    view = memoryview(body)
    off = 0

    def take(fmt: str):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(view):
            raise ProtocolError("truncated query body")
        vals = struct.unpack_from(fmt, view, off)
        off += size
        return vals

    (n_sums,) = take(">I")
    sums = []
    for _ in range(n_sums):
        (n_terms,) = take(">H")
        terms = tuple(tuple(take(">HI")) for _ in range(n_terms))
        sums.append(terms)
    if off != len(view):
        raise ProtocolError("trailing bytes after query body")
    return WireQuery(sums=tuple(sums))


def encode_answer(values: list[int]) -> bytes:
    parts = [struct.pack(">I", len(values))]
    for v in values:
        if not 0 <= v < 1 << 64:
            raise EncodeError(f"value {v} does not fit 8 bytes")
        parts.append(struct.pack(">Q", v))
    return b"".join(parts)


def decode_answer(body: bytes) -> list[int]:
    if len(body) < 4:
        raise ProtocolError("truncated answer body")
    (count,) = struct.unpack_from(">I", body, 0)
    if len(body) != 4 + 8 * count:
        raise ProtocolError("answer body length mismatch")
    return [struct.unpack_from(">Q", body, 4 + 8 * i)[0] for i in range(count)]


def _read_exact(rfile, size: int) -> bytes:
    buf = b""
    while len(buf) < size:
        chunk = rfile.read(size - len(buf))
        if not chunk:
            raise EOFError("connection closed mid-frame")
        buf += chunk
    return buf


def write_frame(wfile, tag: int, body: bytes) -> None:
    wfile.write(struct.pack(">IB", 1 + len(body), tag) + body)
    wfile.flush()


def read_frame(rfile) -> tuple[int, bytes]:
    (length,) = struct.unpack(">I", _read_exact(rfile, 4))
    if length < 1 or length > _MAX_FRAME:
        raise ProtocolError(f"bad frame length {length}")
    tag = _read_exact(rfile, 1)[0]
    body = _read_exact(rfile, length - 1)
    return tag, body


class _ShareHandler(socketserver.StreamRequestHandler):
    def handle(self):
        server: ShareServer = self.server  # type: ignore[assignment]
        try:
            tag, body = read_frame(self.rfile)
            if tag != TAG_HELLO or len(body) != 3:
                raise ProtocolError("expected HELLO")
            version, peer_id = struct.unpack(">BH", body)
            if version != PROTOCOL_VERSION:
                raise ProtocolError(f"unsupported protocol version {version}")
            if peer_id != server.share.server_id:
                raise ProtocolError(
                    f"this is server {server.share.server_id}, not {peer_id}"
                )
            write_frame(
                self.wfile,
                TAG_HELLO,
                struct.pack(">BH", PROTOCOL_VERSION, server.share.server_id),
            )
            while True:
                try:
                    tag, body = read_frame(self.rfile)
                except EOFError:
                    return
                if tag != TAG_QUERY:
                    raise ProtocolError(f"unexpected frame tag 0x{tag:02x}")
                values = answer(server.share, decode_query(body))
                write_frame(self.wfile, TAG_ANSWER, encode_answer(values))
        except (ProtocolError, BadQuery, struct.error) as exc:
            try:
                write_frame(self.wfile, TAG_ERROR, str(exc).encode("utf-8"))
            except OSError:
                pass
        except EOFError:
            pass


class ShareServer(socketserver.ThreadingTCPServer):
    """TCP server answering queries over one share table."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, share: ShareTable, field: Field, address=("127.0.0.1", 0)):
        if share.field != field:
            raise ValueError("share and field moduli differ")
        self.share = share
        super().__init__(address, _ShareHandler)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start_background(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t


def serve(share: ShareTable, field: Field, port: int, host: str = "127.0.0.1") -> None:
    """Run one share server until interrupted."""
    with ShareServer(share, field, (host, port)) as srv:
        srv.serve_forever()


def _parse_address(addr) -> tuple[str, int]:
    if isinstance(addr, tuple):
        return addr
    host, _, port = addr.rpartition(":")
    return host, int(port)


class _Connection:
    def __init__(self, index: int, addr, server_id: int):
        host, port = _parse_address(addr)
        try:
            self.sock = socket.create_connection((host, port), timeout=10)
        except OSError as exc:
            raise ConnectError(f"server {index} at {host}:{port} unreachable: {exc}") from exc
        self.rfile = self.sock.makefile("rb")
        self.wfile = self.sock.makefile("wb")
        write_frame(self.wfile, TAG_HELLO, struct.pack(">BH", PROTOCOL_VERSION, server_id))
        tag, body = read_frame(self.rfile)
        if tag == TAG_ERROR:
            raise ProtocolError(f"server {index}: {body.decode('utf-8', 'replace')}")
        if tag != TAG_HELLO:
            raise ProtocolError(f"server {index}: expected HELLO back")

    def ask(self, q: WireQuery) -> list[int]:
        write_frame(self.wfile, TAG_QUERY, encode_query(q))
        tag, body = read_frame(self.rfile)
        if tag == TAG_ERROR:
            raise ProtocolError(body.decode("utf-8", "replace"))
        if tag != TAG_ANSWER:
            raise ProtocolError(f"unexpected frame tag 0x{tag:02x}")
        return decode_answer(body)

    def close(self):
        for f in (self.rfile, self.wfile):
            try:
                f.close()
            except OSError:
                pass
        self.sock.close()


def remote_retrieve(
    addresses, theta: int, seed: int, p: SchemeParams, G: Generator
) -> Transcript:
    """Retrieve over the network; transcript matches the in-process one.

    addresses lists the N servers in id order (host:port strings or
    (host, port) tuples). No partial decode is attempted: an unreachable
    server aborts the whole retrieval.
    """
    if len(addresses) != p.N:
        raise ValueError(f"need {p.N} addresses, got {len(addresses)}")
    perms = gen_permutations(seed, p.M, p.Ltilde)
    plan = build_plan(theta, p, perms)
    queries = tuple(canonicalize(plan, i) for i in range(1, p.N + 1))
    conns = []
    try:
        for i, addr in enumerate(addresses, start=1):
            conns.append(_Connection(i, addr, i))
        answers = tuple(tuple(conns[i - 1].ask(queries[i - 1])) for i in range(1, p.N + 1))
    finally:
        for c in conns:
            c.close()
    decoded = decode(plan, [list(a) for a in answers], G)
    m = observed_metrics(queries, answers, decoded)
    rate = m["rate"]
    m["rate"] = (rate.numerator, rate.denominator)
    return Transcript(
        theta=theta,
        seed=seed,
        params=p,
        queries=queries,
        answers=answers,
        decoded=decoded,
        metrics=m,
    )
