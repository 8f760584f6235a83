"""Capacity-achieving private information retrieval over MDS-coded storage.

The pieces, bottom up:

- algebra: prime fields and dense F_p matrices (rank, solve, kron, vec)
- mds: [N,K] Vandermonde storage code, share encoding, erasure decoding
- params: all derived integers of a scheme instance and their constraints
- plan: the client's private query plan and its wire canonicalization
- protocol: answers, layered decoding, full retrievals with transcripts
- audit: rank identities and query-distribution privacy checks
- netsvc: framed TCP servers and remote retrieval
- cli: one entry point over all of the above
"""

from .algebra import Field, Matrix, smallest_prime_gt
from .mds import Database, Generator, ShareTable, check_mds, encode, erasure_decode, make_generator, random_database
from .params import SchemeParams, UnsupportedRegime, capacity, derive_params, verify_constraints
from .plan import Permutations, QueryPlan, SumSpec, WireQuery, build_plan, canonicalize
from .protocol import Transcript, answer, decode, gen_permutations, metrics, retrieve
from .audit import assemble_query_matrices, privacy_exhaustive, privacy_structural, verify_rank_conditions
from .netsvc import ShareServer, remote_retrieve, serve

__version__ = "0.1.0"

__all__ = [
    "Field",
    "Matrix",
    "smallest_prime_gt",
    "Database",
    "Generator",
    "ShareTable",
    "check_mds",
    "encode",
    "erasure_decode",
    "make_generator",
    "random_database",
    "SchemeParams",
    "UnsupportedRegime",
    "capacity",
    "derive_params",
    "verify_constraints",
    "Permutations",
    "QueryPlan",
    "SumSpec",
    "WireQuery",
    "build_plan",
    "canonicalize",
    "Transcript",
    "answer",
    "decode",
    "gen_permutations",
    "metrics",
    "retrieve",
    "assemble_query_matrices",
    "privacy_exhaustive",
    "privacy_structural",
    "verify_rank_conditions",
    "ShareServer",
    "remote_retrieve",
    "serve",
]
