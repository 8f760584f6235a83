"""End-to-end retrieval: permutation sampling, server answers, decoding.

Servers only ever see the wire form of a query and evaluate each sum over
their stored rows. The client decodes in two passes: first it rebuilds
every pure interference sum from its K projections, then it cancels those
inside the mixed sums, leaving K projections of every desired column,
each of which a single MDS solve turns back into plaintext.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction

from .algebra import Matrix, dot
from .mds import Database, Generator, ShareTable, encode, erasure_decode
from .params import SchemeParams
from .plan import Permutations, QueryPlan, WireQuery, build_plan, canonicalize


class BadQuery(ValueError):
    """Wire query references records or positions outside the share."""


class Undecodable(RuntimeError):
    """Answers do not cover some sum with K servers; the plan is broken."""


def gen_permutations(seed: int, M: int, Ltilde: int) -> Permutations:
    """M independent uniform permutations, reproducible from the seed.

    Fisher-Yates over a seeded Mersenne Twister, so every one of the
    (Ltilde!)^M outcomes is equally likely and the same seed always
    yields the same tuple.
    """
    rng = random.Random(seed)
    maps = []
    for _ in range(M):
        m = list(range(Ltilde))
        rng.shuffle(m)
        maps.append(tuple(m))
    return Permutations(tuple(maps))


def answer(share: ShareTable, q: WireQuery) -> list[int]:
    """Evaluate each sum of the query over the server's stored rows."""
    p = share.field.p
    n_records = len(share.rows)
    out = []
    for sum_terms in q.sums:
        acc = 0
        for rec, pos in sum_terms:
            if not 1 <= rec <= n_records:
                raise BadQuery(f"record {rec} out of range 1..{n_records}")
            row = share.rows[rec - 1]
            if not 0 <= pos < len(row):
                raise BadQuery(f"position {pos} out of range for record {rec}")
            acc += row[pos]
        out.append(acc % p)
    return out


def decode(plan: QueryPlan, answers: list[list[int]], G: Generator) -> Matrix:
    """Recover the wanted record from per-server answers.

    Answers must be aligned with each server's canonical wire query (the
    order produced by canonicalize, which the plan remembers).
    """
    p = plan.params
    field = G.field
    if len(answers) != p.N:
        raise Undecodable(f"expected {p.N} answer lists, got {len(answers)}")

    value_of: list[dict[int, int]] = [{} for _ in range(p.N)]
    for i in range(1, p.N + 1):
        order = plan.wire_orders.get(i)
        if order is None:
            canonicalize(plan, i)
            order = plan.wire_orders[i]
        if len(answers[i - 1]) != len(order):
            raise Undecodable(f"server {i}: answer count does not match query")
        for pos, idx in enumerate(order):
            value_of[i - 1][idx] = answers[i - 1][pos]

    # pass 1: rebuild every pure interference sum from its K projections
    pool_proj: dict[tuple, dict[int, int]] = {}
    desired_proj: dict[int, dict[int, int]] = {}
    for i in range(1, p.N + 1):
        for idx, s in enumerate(plan.per_server[i - 1]):
            if s.pool is not None:
                pool_proj.setdefault(s.pool, {})[i] = value_of[i - 1][idx]
            elif s.interference is None:
                desired_proj.setdefault(s.desired_col, {})[i] = value_of[i - 1][idx]

    pool_vec: dict[tuple, list[int]] = {}
    for key, projs in pool_proj.items():
        if len(projs) != p.K:
            raise Undecodable(f"interference sum {key} covered by {len(projs)} servers")
        servers = sorted(projs)
        pool_vec[key] = erasure_decode(G, servers, [projs[i] for i in servers])

    # pass 2: cancel interference inside mixed sums
    for i in range(1, p.N + 1):
        gi = G.column(i)
        for idx, s in enumerate(plan.per_server[i - 1]):
            if s.interference is None:
                continue
            vec = pool_vec.get(s.interference)
            if vec is None:
                raise Undecodable(f"mixed sum references unknown pool {s.interference}")
            cancelled = (value_of[i - 1][idx] - dot(field, gi, vec)) % field.p
            desired_proj.setdefault(s.desired_col, {})[i] = cancelled

    if set(desired_proj) != set(range(1, p.Ltilde + 1)):
        raise Undecodable("desired columns do not cover the whole record")

    result = Matrix.zeros(field, p.K, p.Ltilde)
    for c, projs in desired_proj.items():
        if len(projs) != p.K:
            raise Undecodable(f"desired column {c} covered by {len(projs)} servers")
        servers = sorted(projs)
        u = erasure_decode(G, servers, [projs[i] for i in servers])
        stored = plan.perms.stored(plan.theta, c)
        for r in range(p.K):
            result.data[r * p.Ltilde + stored] = u[r]
    return result


@dataclass
class Transcript:
    """Everything one retrieval produced, plus the observed metrics."""

    theta: int
    seed: int
    params: SchemeParams
    queries: tuple[WireQuery, ...]
    answers: tuple[tuple[int, ...], ...]
    decoded: Matrix
    metrics: dict

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "seed": self.seed,
            "queries": [
                [[list(term) for term in s] for s in q.sums] for q in self.queries
            ],
            "answers": [list(a) for a in self.answers],
            "decoded": self.decoded.to_rows(),
            "metrics": {
                "L": self.metrics["L"],
                "D": self.metrics["D"],
                "omega": self.metrics["omega"],
                "rate": list(self.metrics["rate"]),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def observed_metrics(
    queries: tuple[WireQuery, ...], answers: tuple[tuple[int, ...], ...], decoded: Matrix
) -> dict:
    """Metrics read off the transcript contents, not off the parameter theory."""
    L = decoded.rows * decoded.cols
    D = sum(len(a) for a in answers)
    omega = 0
    for q in queries:
        refs = set()
        for s in q.sums:
            refs.update(s)
        omega += len(refs)
    return {"L": L, "D": D, "omega": omega, "rate": (Fraction(L, D) if D else Fraction(0))}


def retrieve(db: Database, theta: int, seed: int, p: SchemeParams, G: Generator) -> Transcript:
    """Run one full in-process retrieval and return its transcript."""
    shares = encode(db, G)
    perms = gen_permutations(seed, p.M, p.Ltilde)
    plan = build_plan(theta, p, perms)
    queries = tuple(canonicalize(plan, i) for i in range(1, p.N + 1))
    answers = tuple(tuple(answer(shares[i - 1], queries[i - 1])) for i in range(1, p.N + 1))
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


def metrics(t: Transcript, p: SchemeParams) -> dict:
    """Compare a transcript's observed metrics against the theory values."""
    obs = observed_metrics(t.queries, t.answers, t.decoded)
    rate = obs["rate"]
    report = {
        "L": {"observed": obs["L"], "expected": p.L, "match": obs["L"] == p.L},
        "D": {"observed": obs["D"], "expected": p.D, "match": obs["D"] == p.D},
        "omega": {
            "observed": obs["omega"],
            "expected": p.omega,
            "match": obs["omega"] == p.omega,
        },
        "rate": {
            "observed": [rate.numerator, rate.denominator],
            "expected": [p.capacity.numerator, p.capacity.denominator],
            "match": rate == p.capacity,
        },
    }
    report["all_match"] = all(v["match"] for v in report.values() if isinstance(v, dict))
    return report
