"""Construction of the client's private query plan.

A plan assigns every server an ordered list of sums. Each sum combines at
most one column per record; a sum's type is the set of records it touches.
The layout obeys four rules:

  * within a server, every record appears in the same number of sums of
    each size (record symmetry), with per-size counts alpha_j on the first
    N-K servers and beta_j on the last K;
  * within a server, no column of any record is referenced twice;
  * the interference part of a mixed sum is always one of the pure
    interference sums already queried somewhere, so the client can cancel
    it after rebuilding that sum's full vector;
  * every pure interference sum and every desired column is referenced by
    exactly K distinct servers, enough to invert the MDS projection.

Sums of one type draw their column indices from a fresh consecutive block
per record (initial_columns); the distribution over servers is a fixed
round-robin (distribute_fresh), and interference parts are assigned by
complement (distribute_complement). Logical column indices are 1-based;
the wire form replaces them with 0-based stored positions and sorts the
sums so the transmitted order carries no trace of the wanted record.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

from .params import SchemeParams


class BadCall(ValueError):
    """initial_columns invoked with an unsupported (type, context) shape."""


class InternalInvariant(RuntimeError):
    """A structural property of the construction failed; indicates a bug."""


@dataclass(frozen=True, slots=True)
class Permutations:
    """Per-record bijections from logical columns to stored positions.

    maps[j-1][t-1] is the 0-based stored position of logical column t of
    record j.
    """

    maps: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for m in self.maps:
            if sorted(m) != list(range(len(m))):
                raise ValueError("each map must be a bijection onto 0..Ltilde-1")

    @classmethod
    def identity(cls, M: int, Ltilde: int) -> "Permutations":
        return cls(tuple(tuple(range(Ltilde)) for _ in range(M)))

    def stored(self, record: int, logical: int) -> int:
        return self.maps[record - 1][logical - 1]


@dataclass(frozen=True, slots=True)
class SumSpec:
    """One queried sum: a column from each record in its typeset.

    terms are (record, logical column) pairs, columns 1-based. For pure
    interference sums `pool` identifies the sum within its type's pool;
    for sums containing the wanted record, `desired_col` is its logical
    column and `interference` names the cancelled pure sum (if any).
    """

    typeset: tuple[int, ...]
    terms: tuple[tuple[int, int], ...]
    desired_col: int | None = None
    interference: tuple[tuple[int, ...], int] | None = None
    pool: tuple[tuple[int, ...], int] | None = None


@dataclass(frozen=True, slots=True)
class WireQuery:
    """Canonical server-facing form: sums of (record, stored position) terms."""

    sums: tuple[tuple[tuple[int, int], ...], ...]


@dataclass
class QueryPlan:
    """Full private plan: per-server sums plus the client-side bookkeeping."""

    theta: int
    params: SchemeParams
    perms: Permutations
    per_server: list[list[SumSpec]]
    wire_orders: dict[int, tuple[int, ...]] = field(default_factory=dict)


def type_order(M: int, theta: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Processing order of sum types, as (interference set, same + theta) pairs.

    For j = 0..M-1 lists all size-j subsets of the other records in
    lexicographic order; each round first handles the pure subset, then
    the mixed type extending it with the wanted record.
    """
    if not 1 <= theta <= M:
        raise ValueError(f"theta {theta} out of range 1..{M}")
    others = [j for j in range(1, M + 1) if j != theta]
    out = []
    for j in range(M):
        for lam in combinations(others, j):
            out.append((lam, tuple(sorted(lam + (theta,)))))
    return out


def initial_columns(lam, context, p: SchemeParams, theta: int):
    """Start of the fresh column block consumed by one type's sum pool.

    Two shapes are supported. For a pure interference type (lam == context,
    theta not in lam) it returns {record: start} over the members: each
    record's start skips every column that record already contributed to
    earlier pools. For the desired part of a context type (lam == {theta})
    it returns a single int: the wanted record's columns are consumed
    round by round across all contexts, in context order.
    """
    lam = tuple(sorted(lam))
    context = tuple(sorted(context))
    others = [j for j in range(1, p.M + 1) if j != theta]

    if lam == context and theta not in lam:
        if not set(lam) <= set(others):
            raise BadCall(f"pure type {lam} must avoid record {theta}")
        nu = len(lam)
        if nu == 0:
            return {}
        sized = list(combinations(others, nu))
        h = sized.index(lam) + 1
        starts = {}
        for j in lam:
            used = 0
            for s in range(1, nu):
                for t in combinations(others, s):
                    if j in t:
                        used += p.pool_size(s)
            for t in sized[: h - 1]:
                if j in t:
                    used += p.pool_size(nu)
            starts[j] = used + 1
        return starts

    if lam == (theta,) and theta in context:
        under = tuple(j for j in context if j != theta)
        if not set(under) <= set(others):
            raise BadCall(f"context {context} contains unknown records")
        nu = len(under)
        if nu == 0:
            return 1
        sized = list(combinations(others, nu))
        h = sized.index(under) + 1
        start = sum(comb(p.M - 1, s) * p.pool_size(s + 1) for s in range(nu))
        start += (h - 1) * p.pool_size(nu + 1)
        return start + 1

    raise BadCall(f"unsupported shape: lam={lam}, context={context}")


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def distribute_fresh(lam, context, p: SchemeParams) -> list[tuple[int, ...]]:
    """Assign one type's pool of sums to servers, K copies of each sum.

    Returns N tuples of 1-based pool indices, in per-server query order.
    When the first group is at least as large as the second (N >= 2K), the
    first group shares the leading sums in a round-robin that puts each on
    K distinct servers, and the last K servers all take the remaining
    fresh sums. When the first group is smaller (N < 2K), it repeats the
    leading sums verbatim, the missing 2K-N copies of each ride the same
    round-robin over the last K servers, and whatever count remains is
    fresh sums sent to all K of them.
    """
    N, K = p.N, p.K
    size = len(context)
    a = p.alpha[size - 1]
    b = p.beta[size - 1]
    tuples: list[tuple[int, ...]] = []
    if N >= 2 * K:
        shared, rem = divmod((N - K) * a, K)
        if rem:
            raise InternalInvariant("first-group copy count not divisible by K")
        for i in range(1, N - K + 1):
            tuples.append(tuple(_ceil_div((h - 1) * (N - K) + i, K) for h in range(1, a + 1)))
        fresh = tuple(range(shared + 1, shared + b + 1))
        tuples.extend([fresh] * K)
    else:
        head = tuple(range(1, a + 1))
        tuples.extend([head] * (N - K))
        extra = 2 * K - N
        slots, rem = divmod(extra * a, K)
        if rem:
            raise InternalInvariant("extra copy count not divisible by K")
        n_fresh = b - slots
        if n_fresh < 0:
            raise InternalInvariant("negative fresh-sum count")
        fresh = tuple(range(a + 1, a + n_fresh + 1))
        for i in range(1, K + 1):
            copies = tuple(_ceil_div((h - 1) * K + i, extra) for h in range(1, slots + 1))
            tuples.append(copies + fresh)
    return tuples


def distribute_complement(lam, p: SchemeParams, q_pool: list[tuple[int, ...]]) -> list[tuple[int, ...]]:
    """Interference assignment: each server gets the pool sums it does NOT hold.

    q_pool must be the full per-server assignment of the lam-type pool
    (the output of distribute_fresh(lam, lam, .)); the complement sizes
    then match the next round's per-server counts automatically.
    """
    pool = p.pool_size(len(lam))
    full = set(range(1, pool + 1))
    seen: set[int] = set()
    for tp in q_pool:
        seen.update(tp)
    if seen != full:
        raise InternalInvariant(f"pool of type {tuple(lam)} does not cover 1..{pool}")
    out = []
    for i, tp in enumerate(q_pool, start=1):
        rest = tuple(sorted(full - set(tp)))
        if len(rest) != p.gamma(i, len(lam) + 1):
            raise InternalInvariant("complement size does not match next-round count")
        out.append(rest)
    return out


def build_plan(theta: int, p: SchemeParams, perms: Permutations) -> QueryPlan:
    """Assemble the complete per-server sum lists for retrieving record theta."""
    if not 1 <= theta <= p.M:
        raise ValueError(f"theta {theta} out of range 1..{p.M}")
    if len(perms.maps) != p.M or any(len(m) != p.Ltilde for m in perms.maps):
        raise ValueError("permutations do not match scheme dimensions")

    per_server: list[list[SumSpec]] = [[] for _ in range(p.N)]
    for lam, under in type_order(p.M, theta):
        j = len(lam)
        if j:
            starts = initial_columns(lam, lam, p, theta)
            pure = distribute_fresh(lam, lam, p)
            for i, tp in enumerate(pure):
                for h in tp:
                    terms = tuple((rec, starts[rec] + h - 1) for rec in lam)
                    per_server[i].append(SumSpec(typeset=lam, terms=terms, pool=(lam, h)))
            inter = distribute_complement(lam, p, pure)
        else:
            inter = [()] * p.N

        dstart = initial_columns((theta,), under, p, theta)
        des = distribute_fresh((theta,), under, p)
        for i in range(p.N):
            dcols = sorted(dstart + h - 1 for h in des[i])
            if j == 0:
                for c in dcols:
                    per_server[i].append(
                        SumSpec(typeset=(theta,), terms=((theta, c),), desired_col=c)
                    )
                continue
            isums = sorted(inter[i])
            if len(dcols) != len(isums):
                raise InternalInvariant("desired and interference counts differ")
            for c, h in zip(dcols, isums):
                terms = tuple(
                    sorted(((theta, c),) + tuple((rec, starts[rec] + h - 1) for rec in lam))
                )
                per_server[i].append(
                    SumSpec(
                        typeset=under,
                        terms=terms,
                        desired_col=c,
                        interference=(lam, h),
                    )
                )
    return QueryPlan(theta=theta, params=p, perms=perms, per_server=per_server)


def wire_sums(
    sums: list[SumSpec], maps: tuple[tuple[int, ...], ...], canonical: bool = True
) -> tuple[tuple[tuple[tuple[int, int], ...], int], ...]:
    """Map sums to wire terms; returns ((terms, original index), ...).

    With canonical=True the sums are sorted by (record set, position
    tuple), which is the transmitted order; otherwise construction order
    is kept (useful only as a negative control, since that order depends
    on the wanted record).
    """
    wired = []
    for idx, s in enumerate(sums):
        terms = tuple(sorted((rec, maps[rec - 1][t - 1]) for rec, t in s.terms))
        wired.append((terms, idx))
    if canonical:
        wired.sort(key=lambda w: (tuple(r for r, _ in w[0]), tuple(c for _, c in w[0])))
    return tuple(wired)


def canonicalize(plan: QueryPlan, server: int) -> WireQuery:
    """Wire form for one server (1-based); records the order for decoding."""
    if not 1 <= server <= plan.params.N:
        raise ValueError(f"server {server} out of range")
    wired = wire_sums(plan.per_server[server - 1], plan.perms.maps)
    plan.wire_orders[server] = tuple(idx for _, idx in wired)
    return WireQuery(sums=tuple(terms for terms, _ in wired))
