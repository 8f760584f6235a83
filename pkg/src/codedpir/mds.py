"""[N,K] MDS storage layer: generator construction, encoding, erasure decoding.

Records are K x Ltilde matrices; server i stores the projection
g_i^T W_j of every record, one row per record. Any K servers' rows
determine the records column by column, which is exactly what the PIR
client exploits when it rebuilds vectors from K projections.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

from .algebra import DimError, Field, Matrix, dot, rank, solve_square


class FieldTooSmall(ValueError):
    """The field has too few points for N distinct evaluation points."""


class BadIndexSet(ValueError):
    """Server index set is not K distinct in-range indices."""


@dataclass(frozen=True)
class Generator:
    """K x N generator matrix whose every K columns are invertible."""

    matrix: Matrix

    @property
    def field(self) -> Field:
        return self.matrix.field

    @property
    def K(self) -> int:
        return self.matrix.rows

    @property
    def N(self) -> int:
        return self.matrix.cols

    def column(self, i: int) -> list[int]:
        """Column for server i (1-based)."""
        if not 1 <= i <= self.N:
            raise BadIndexSet(f"server {i} out of range 1..{self.N}")
        return self.matrix.col(i - 1)


def make_generator(N: int, K: int, field: Field) -> Generator:
    """Vandermonde generator on points 1..N: column i is (1, i, ..., i^(K-1))."""
    if not 1 <= K <= N:
        raise ValueError(f"need 1 <= K <= N, got K={K}, N={N}")
    if N >= field.p:
        raise FieldTooSmall(f"need N < p for distinct points, got N={N}, p={field.p}")
    data = [pow(x, r, field.p) for r in range(K) for x in range(1, N + 1)]
    return Generator(Matrix(field, K, N, data))


def check_mds(G: Generator) -> bool:
    """True iff every K-subset of columns forms an invertible K x K matrix."""
    K = G.K
    for subset in combinations(range(1, G.N + 1), K):
        cols = [G.column(i) for i in subset]
        sq = Matrix(G.field, K, K, [cols[c][r] for r in range(K) for c in range(K)])
        if rank(sq) != K:
            return False
    return True


@dataclass
class Database:
    """M records, each a K x Ltilde matrix, plus the storage shape (N)."""

    field: Field
    M: int
    N: int
    K: int
    Ltilde: int
    records: list[Matrix]

    def __post_init__(self):
        if len(self.records) != self.M:
            raise DimError(f"expected {self.M} records, got {len(self.records)}")
        for W in self.records:
            if W.rows != self.K or W.cols != self.Ltilde:
                raise DimError("record has wrong shape")
            if W.field != self.field:
                raise DimError("record in wrong field")


def random_database(M: int, N: int, K: int, Ltilde: int, field: Field, rng) -> Database:
    records = [Matrix.random(field, K, Ltilde, rng) for _ in range(M)]
    return Database(field=field, M=M, N=N, K=K, Ltilde=Ltilde, records=records)


@dataclass
class ShareTable:
    """One server's stored rows: row j is g_i^T W_j, of length Ltilde."""

    server_id: int
    field: Field
    rows: list[list[int]]


def encode(db: Database, G: Generator) -> list[ShareTable]:
    """Produce all N share tables for the database."""
    if G.field != db.field or G.K != db.K or G.N != db.N:
        raise DimError("generator does not match database shape")
    shares = []
    for i in range(1, db.N + 1):
        gi = G.column(i)
        rows = []
        for W in db.records:
            rows.append([dot(db.field, gi, W.col(c)) for c in range(db.Ltilde)])
        shares.append(ShareTable(server_id=i, field=db.field, rows=rows))
    return shares


def erasure_decode(G: Generator, servers: list[int], proj: list[int]) -> list[int]:
    """Recover the K-vector v with g_i^T v = proj_i for each listed server.

    The K servers' columns form an invertible matrix by the MDS property,
    so v is unique.
    """
    K = G.K
    if len(servers) != K or len(set(servers)) != K:
        raise BadIndexSet(f"need {K} distinct server indices, got {servers}")
    if len(proj) != K:
        raise BadIndexSet("one projection per server required")
    rows = [G.column(i) for i in servers]
    A = Matrix.from_rows(G.field, rows)
    b = Matrix(G.field, K, 1, list(proj))
    return solve_square(A, b).col(0)


# --- file formats ---------------------------------------------------------
#
# database: {"p","M","N","K","Ltilde","records": M x K x Ltilde ints}
# share:    {"server","p","rows": M x Ltilde ints}
# generator: {"p","rows": K x N ints}


def save_database(db: Database, path: str | Path) -> None:
    doc = {
        "p": db.field.p,
        "M": db.M,
        "N": db.N,
        "K": db.K,
        "Ltilde": db.Ltilde,
        "records": [W.to_rows() for W in db.records],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_database(path: str | Path) -> Database:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    field = Field(doc["p"])
    records = [Matrix.from_rows(field, rows) for rows in doc["records"]]
    return Database(
        field=field,
        M=doc["M"],
        N=doc["N"],
        K=doc["K"],
        Ltilde=doc["Ltilde"],
        records=records,
    )


def save_share(share: ShareTable, path: str | Path) -> None:
    doc = {"server": share.server_id, "p": share.field.p, "rows": share.rows}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_share(path: str | Path) -> ShareTable:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return ShareTable(server_id=doc["server"], field=Field(doc["p"]), rows=doc["rows"])


def save_generator(G: Generator, path: str | Path) -> None:
    doc = {"p": G.field.p, "rows": G.matrix.to_rows()}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def load_generator(path: str | Path) -> Generator:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    field = Field(doc["p"])
    G = Generator(Matrix.from_rows(field, doc["rows"]))
    if not check_mds(G):
        raise ValueError(f"{path}: matrix is not MDS")
    return G
