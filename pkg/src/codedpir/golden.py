"""Golden query tables for the three reference configurations.

The expected per-server sums are stored as data files (record index,
1-based logical column), so the structural comparison is table-driven.
Plans are compared sum-for-sum after canonical sorting.
"""

from __future__ import annotations

import json
from importlib import resources

from .plan import QueryPlan

GOLDEN_NAMES = ("example1", "example2", "example3")


def load_golden(name: str) -> dict:
    text = resources.files("codedpir").joinpath(f"data/{name}.json").read_text("utf-8")
    return json.loads(text)


def _normalize(servers) -> list[list[tuple[tuple[int, int], ...]]]:
    out = []
    for sums in servers:
        norm = [tuple(sorted((int(r), int(c)) for r, c in s)) for s in sums]
        out.append(sorted(norm))
    return out


def plan_signature(plan: QueryPlan) -> list[list[tuple[tuple[int, int], ...]]]:
    return _normalize([[s.terms for s in server] for server in plan.per_server])


def matches_golden(plan: QueryPlan, golden: dict) -> bool:
    p = plan.params
    if (p.M, p.N, p.K, plan.theta) != (
        golden["M"],
        golden["N"],
        golden["K"],
        golden["theta"],
    ):
        return False
    return plan_signature(plan) == _normalize(golden["servers"])
