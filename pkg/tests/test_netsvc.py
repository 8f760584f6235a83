import io
import random
import socket
import struct

import pytest

from codedpir.algebra import Field
from codedpir.mds import encode, make_generator, random_database
from codedpir.netsvc import (
    PROTOCOL_VERSION,
    TAG_ANSWER,
    TAG_ERROR,
    TAG_HELLO,
    TAG_QUERY,
    ConnectError,
    EncodeError,
    ProtocolError,
    ShareServer,
    decode_answer,
    decode_query,
    encode_answer,
    encode_query,
    read_frame,
    remote_retrieve,
    write_frame,
)
from codedpir.params import derive_params
from codedpir.plan import Permutations, WireQuery, build_plan, canonicalize
from codedpir.protocol import answer, retrieve

F257 = Field(257)


def start_servers(db, G):
    servers = []
    addrs = []
    for share in encode(db, G):
        srv = ShareServer(share, db.field)
        srv.start_background()
        servers.append(srv)
        addrs.append(("127.0.0.1", srv.port))
    return servers, addrs


def stop_servers(servers):
    for s in servers:
        s.shutdown()
        s.server_close()


# ---------------------------------------------------------------------------
# wire codecs
# ---------------------------------------------------------------------------


def test_encode_empty_query():
    assert encode_query(WireQuery(sums=())) == b"\x00\x00\x00\x00"


def test_encode_single_term_bytes():
    wq = WireQuery(sums=(((1, 0),),))
    assert encode_query(wq) == bytes(
        [0, 0, 0, 1, 0, 1, 0, 1, 0, 0, 0, 0]
    )


def test_query_roundtrip_random():
    rng = random.Random(0)
    for _ in range(500):
        sums = []
        for _ in range(rng.randrange(0, 6)):
            terms = tuple(
                sorted(
                    {(rng.randrange(1, 9), rng.randrange(0, 50)) for _ in range(rng.randrange(1, 4))}
                )
            )
            sums.append(terms)
        wq = WireQuery(sums=tuple(sums))
        assert decode_query(encode_query(wq)) == wq


def test_answer_roundtrip_random():
    rng = random.Random(1)
    for _ in range(200):
        values = [rng.randrange(0, 1 << 60) for _ in range(rng.randrange(0, 8))]
        assert decode_answer(encode_answer(values)) == values


def test_encode_overflow_errors():
    with pytest.raises(EncodeError):
        encode_query(WireQuery(sums=(((0, 0),),)))
    with pytest.raises(EncodeError):
        encode_query(WireQuery(sums=(((1 << 16, 0),),)))
    with pytest.raises(EncodeError):
        encode_answer([1 << 64])


def test_decode_query_trailing_garbage():
    body = encode_query(WireQuery(sums=())) + b"\x00"
    with pytest.raises(ProtocolError):
        decode_query(body)


def test_frame_roundtrip():
    buf = io.BytesIO()
    write_frame(buf, TAG_QUERY, b"abc")
    buf.seek(0)
    assert read_frame(buf) == (TAG_QUERY, b"abc")


# ---------------------------------------------------------------------------
# server behaviour
# ---------------------------------------------------------------------------


def _hello(sock_file_r, sock_file_w, server_id):
    write_frame(sock_file_w, TAG_HELLO, struct.pack(">BH", PROTOCOL_VERSION, server_id))
    return read_frame(sock_file_r)


def test_server_rejects_wrong_id():
    p = derive_params(2, 3, 2)
    G = make_generator(3, 2, F257)
    db = random_database(2, 3, 2, p.Ltilde, F257, random.Random(2))
    servers, addrs = start_servers(db, G)
    try:
        with socket.create_connection(addrs[0], timeout=5) as s:
            r, w = s.makefile("rb"), s.makefile("wb")
            tag, body = _hello(r, w, server_id=3)  # talking to server 1
            assert tag == TAG_ERROR
            assert b"server 1" in body
    finally:
        stop_servers(servers)


def test_server_answers_match_in_process():
    p = derive_params(2, 3, 2)
    G = make_generator(3, 2, F257)
    db = random_database(2, 3, 2, p.Ltilde, F257, random.Random(3))
    shares = encode(db, G)
    plan = build_plan(1, p, Permutations.identity(2, p.Ltilde))
    wq = canonicalize(plan, 2)
    servers, addrs = start_servers(db, G)
    try:
        with socket.create_connection(addrs[1], timeout=5) as s:
            r, w = s.makefile("rb"), s.makefile("wb")
            tag, _ = _hello(r, w, server_id=2)
            assert tag == TAG_HELLO
            write_frame(w, TAG_QUERY, encode_query(wq))
            tag, body = read_frame(r)
            assert tag == TAG_ANSWER
            assert decode_answer(body) == answer(shares[1], wq)
            # zero-length query gets an empty answer
            write_frame(w, TAG_QUERY, encode_query(WireQuery(sums=())))
            tag, body = read_frame(r)
            assert tag == TAG_ANSWER and decode_answer(body) == []
    finally:
        stop_servers(servers)


def test_server_error_on_bad_query():
    p = derive_params(2, 3, 2)
    G = make_generator(3, 2, F257)
    db = random_database(2, 3, 2, p.Ltilde, F257, random.Random(4))
    servers, addrs = start_servers(db, G)
    try:
        with socket.create_connection(addrs[0], timeout=5) as s:
            r, w = s.makefile("rb"), s.makefile("wb")
            tag, _ = _hello(r, w, server_id=1)
            assert tag == TAG_HELLO
            bad = encode_query(WireQuery(sums=(((7, 0),),)))  # no record 7
            write_frame(w, TAG_QUERY, bad)
            tag, _ = read_frame(r)
            assert tag == TAG_ERROR
    finally:
        stop_servers(servers)


def test_server_stateless_under_interleaving():
    p = derive_params(2, 3, 2)
    G = make_generator(3, 2, F257)
    db = random_database(2, 3, 2, p.Ltilde, F257, random.Random(5))
    shares = encode(db, G)
    plan = build_plan(1, p, Permutations.identity(2, p.Ltilde))
    wq = canonicalize(plan, 1)
    servers, addrs = start_servers(db, G)
    try:
        c1 = socket.create_connection(addrs[0], timeout=5)
        c2 = socket.create_connection(addrs[0], timeout=5)
        r1, w1 = c1.makefile("rb"), c1.makefile("wb")
        r2, w2 = c2.makefile("rb"), c2.makefile("wb")
        assert _hello(r1, w1, 1)[0] == TAG_HELLO
        assert _hello(r2, w2, 1)[0] == TAG_HELLO
        write_frame(w1, TAG_QUERY, encode_query(wq))
        write_frame(w2, TAG_QUERY, encode_query(wq))
        expect = answer(shares[0], wq)
        assert decode_answer(read_frame(r2)[1]) == expect
        assert decode_answer(read_frame(r1)[1]) == expect
        c1.close()
        c2.close()
    finally:
        stop_servers(servers)


# ---------------------------------------------------------------------------
# remote retrieval
# ---------------------------------------------------------------------------


def test_remote_matches_in_process_transcript():
    p = derive_params(2, 3, 2)
    G = make_generator(3, 2, F257)
    db = random_database(2, 3, 2, p.Ltilde, F257, random.Random(6))
    servers, addrs = start_servers(db, G)
    try:
        remote = remote_retrieve(addrs, 2, 31337, p, G)
        local = retrieve(db, 2, 31337, p, G)
        assert remote.to_json() == local.to_json()
        again = remote_retrieve(addrs, 2, 31337, p, G)
        assert again.to_json() == remote.to_json()
    finally:
        stop_servers(servers)


def test_remote_unreachable_server_named():
    p = derive_params(2, 3, 2)
    G = make_generator(3, 2, F257)
    db = random_database(2, 3, 2, p.Ltilde, F257, random.Random(7))
    servers, addrs = start_servers(db, G)
    stop_servers(servers[1:2])
    addrs[1] = ("127.0.0.1", 1)  # nothing listens there
    try:
        with pytest.raises(ConnectError, match="server 2"):
            remote_retrieve(addrs, 1, 1, p, G)
    finally:
        stop_servers([servers[0], servers[2]])
