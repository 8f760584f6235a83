import random
from collections import Counter
from dataclasses import replace
from fractions import Fraction

import pytest

from codedpir.algebra import Field, Matrix, dot
from codedpir.mds import Database, encode, make_generator, random_database
from codedpir.params import derive_params
from codedpir.plan import Permutations, WireQuery, build_plan, canonicalize
from codedpir.protocol import (
    BadQuery,
    Undecodable,
    answer,
    decode,
    gen_permutations,
    metrics,
    observed_metrics,
    retrieve,
)

F257 = Field(257)


def setup_instance(M, N, K, db_seed=0):
    p = derive_params(M, N, K)
    G = make_generator(N, K, F257)
    db = random_database(M, N, K, p.Ltilde, F257, random.Random(db_seed))
    return p, G, db


# ---------------------------------------------------------------------------
# permutation sampling
# ---------------------------------------------------------------------------


def test_gen_permutations_trivial_when_one_column():
    perms = gen_permutations(123, 4, 1)
    assert perms.maps == ((0,),) * 4


def test_gen_permutations_deterministic():
    assert gen_permutations(7, 3, 5) == gen_permutations(7, 3, 5)
    assert gen_permutations(7, 3, 5) != gen_permutations(8, 3, 5)


def test_gen_permutations_uniform_chi_square():
    # 60000 draws of a 3-element permutation: each of the 6 outcomes should
    # land within 3 sigma of 10000 (sigma ~ 91.3)
    perms = gen_permutations(2024, 60000, 3)
    counts = Counter(perms.maps)
    assert set(counts) == {
        (0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)
    }
    expected = 60000 / 6
    sigma = (60000 * (1 / 6) * (5 / 6)) ** 0.5
    for c in counts.values():
        assert abs(c - expected) <= 3 * sigma


# ---------------------------------------------------------------------------
# answers
# ---------------------------------------------------------------------------


def test_answer_empty_query():
    _, G, db = setup_instance(2, 3, 2)
    share = encode(db, G)[0]
    assert answer(share, WireQuery(sums=())) == []


def test_answer_single_term():
    _, G, db = setup_instance(2, 3, 2)
    share = encode(db, G)[1]
    assert answer(share, WireQuery(sums=(((1, 0),),))) == [share.rows[0][0]]


def test_answer_out_of_range():
    _, G, db = setup_instance(2, 3, 2)
    share = encode(db, G)[0]
    with pytest.raises(BadQuery):
        answer(share, WireQuery(sums=(((3, 0),),)))
    with pytest.raises(BadQuery):
        answer(share, WireQuery(sums=(((1, 9),),)))


def test_answer_matches_plaintext_projections():
    # server 2 of the reference (2,3,2) layout answers g2.a1, g2.b1, g2.(a3+b2)
    p, G, db = setup_instance(2, 3, 2, db_seed=5)
    share = encode(db, G)[1]
    plan = build_plan(1, p, Permutations.identity(2, p.Ltilde))
    wq = canonicalize(plan, 2)
    got = answer(share, wq)
    g2 = G.column(2)
    W1, W2 = db.records
    expect = {
        dot(F257, g2, W1.col(0)),
        dot(F257, g2, W2.col(0)),
        (dot(F257, g2, W1.col(2)) + dot(F257, g2, W2.col(1))) % 257,
    }
    assert set(got) == expect and len(got) == 3


# ---------------------------------------------------------------------------
# decode and retrieve
# ---------------------------------------------------------------------------


def test_decode_recovers_record_232():
    p, G, db = setup_instance(2, 3, 2, db_seed=1)
    for seed in range(10):
        t = retrieve(db, 1, seed, p, G)
        assert t.decoded == db.records[0]


def test_decode_zero_database():
    p = derive_params(2, 3, 2)
    G = make_generator(3, 2, F257)
    db = Database(
        field=F257, M=2, N=3, K=2, Ltilde=3,
        records=[Matrix.zeros(F257, 2, 3)] * 2,
    )
    t = retrieve(db, 2, 9, p, G)
    assert t.decoded == Matrix.zeros(F257, 2, 3)


def test_decode_all_seeds_332_theta2():
    p, G, db = setup_instance(3, 3, 2, db_seed=2)
    for seed in range(20):
        t = retrieve(db, 2, seed, p, G)
        assert t.decoded == db.records[1]


def test_decode_missing_answers_raises():
    p, G, db = setup_instance(2, 3, 2)
    shares = encode(db, G)
    perms = gen_permutations(0, 2, p.Ltilde)
    plan = build_plan(1, p, perms)
    queries = [canonicalize(plan, i) for i in (1, 2, 3)]
    answers = [answer(shares[i - 1], queries[i - 1]) for i in (1, 2, 3)]
    with pytest.raises(Undecodable):
        decode(plan, answers[:2], G)
    answers[0] = answers[0][:-1]
    with pytest.raises(Undecodable):
        decode(plan, answers, G)


def test_retrieve_metrics_examples():
    expect = {
        (2, 3, 2): (10, 12, Fraction(3, 5)),
        (3, 3, 2): (38, 54, Fraction(9, 19)),
        (2, 5, 2): (14, 20, Fraction(5, 7)),
    }
    for (M, N, K), (D, omega, rate) in expect.items():
        p, G, db = setup_instance(M, N, K, db_seed=3)
        t = retrieve(db, 1, 11, p, G)
        assert t.metrics["D"] == D
        assert t.metrics["omega"] == omega
        assert Fraction(*t.metrics["rate"]) == rate


def test_metrics_report_matches_theory():
    p, G, db = setup_instance(3, 4, 2)
    t = retrieve(db, 3, 5, p, G)
    report = metrics(t, p)
    assert report["all_match"]


def test_metrics_flags_missing_answer_symbol():
    p, G, db = setup_instance(2, 3, 2)
    t = retrieve(db, 1, 5, p, G)
    broken = replace(t, answers=(t.answers[0][:-1],) + t.answers[1:])
    report = metrics(broken, p)
    assert not report["D"]["match"]
    assert not report["all_match"]


def test_metrics_sweep_point_443():
    p, G, db = setup_instance(4, 4, 3)
    t = retrieve(db, 2, 7, p, G)
    assert metrics(t, p)["all_match"]
    assert t.decoded == db.records[1]


def test_cancellation_soundness():
    # for every mixed sum, value minus the interference projection equals
    # the projection of the plaintext desired column
    p, G, db = setup_instance(3, 3, 2, db_seed=8)
    shares = encode(db, G)
    perms = gen_permutations(21, 3, p.Ltilde)
    plan = build_plan(1, p, perms)
    queries = [canonicalize(plan, i) for i in (1, 2, 3)]
    answers = [answer(shares[i - 1], queries[i - 1]) for i in (1, 2, 3)]
    W = db.records
    for i in range(1, 4):
        gi = G.column(i)
        order = plan.wire_orders[i]
        for pos, idx in enumerate(order):
            s = plan.per_server[i - 1][idx]
            if s.interference is None:
                continue
            lam, h = s.interference
            q_vec = [0] * p.K
            for rec, col in s.terms:
                if rec == 1:
                    continue
                stored = perms.stored(rec, col)
                for r in range(p.K):
                    q_vec[r] = (q_vec[r] + W[rec - 1].at(r, stored)) % 257
            stored_des = perms.stored(1, s.desired_col)
            want = dot(F257, gi, W[0].col(stored_des))
            got = (answers[i - 1][pos] - dot(F257, gi, q_vec)) % 257
            assert got == want


def test_transcript_deterministic():
    p, G, db = setup_instance(2, 4, 2)
    t1 = retrieve(db, 1, 99, p, G)
    t2 = retrieve(db, 1, 99, p, G)
    assert t1.to_json() == t2.to_json()


def test_observed_metrics_from_transcript_parts():
    p, G, db = setup_instance(2, 3, 2)
    t = retrieve(db, 1, 3, p, G)
    m = observed_metrics(t.queries, t.answers, t.decoded)
    assert m["L"] == 6 and m["D"] == 10 and m["omega"] == 12
