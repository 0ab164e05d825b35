"""Constrained assignment of training cases to ensemble base learners.

Every case is trained by exactly ``replication`` of the ``n_learners`` base
models, while keeping each learner's training load and the per-pair training
overlap below bounds that force diversity:

    load(learner)    <= floor(N * R / L) + 1
    overlap(a, b)    <= floor(N * R^2 / L^2) + 1

For the reference configuration (L=8, R=4) these are the familiar
``N/2 + 1`` and ``N/4 + 1`` caps.

Construction
------------
For ``R == L/2`` the R-subsets of the learner pool split into complementary
pairs (a subset and its complement partition the pool). Emitting both halves
of a partition back to back keeps every learner's running load within one of
``r/2`` for every prefix length ``r``, so the load bound holds by
construction for any case count. The order and orientation of the partitions
is found by a seeded depth-first search that also keeps every pair of
learners under its overlap cap; the search space is tiny (35 partitions for
L=8) and backtracking rarely exceeds a handful of nodes.

A small set of case counts is mathematically infeasible: for L=8, R=4 there
is no 3-case assignment with all pairwise overlaps <= 1 (any three 4-subsets
of an 8-pool force two of them to share two learners). Such configurations
raise :class:`InfeasibleConfig` rather than returning an invalid plan.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import CaseOutOfRange, InfeasibleConfig, IoFailure, ValidationError

_DFS_NODE_BUDGET = 200_000
_GENERAL_RETRIES = 16
_MAX_ENUMERATION = 20_000


def load_bound(n_cases: int, n_learners: int, replication: int) -> int:
    return n_cases * replication // n_learners + 1


def overlap_bound(n_cases: int, n_learners: int, replication: int) -> int:
    return n_cases * replication * replication // (n_learners * n_learners) + 1


@dataclass(frozen=True)
class PartitionPlan:
    """Assignment of cases to learner subsets.

    ``membership`` is an ``(n_cases, replication)`` array; row ``c`` holds the
    sorted, distinct learner indices that train on case ``c``. Structural
    invariants are enforced here; the load/overlap bounds are checked
    separately by :func:`verify_plan` so that hand-built (possibly invalid)
    plans can still be represented and audited.
    """

    n_cases: int
    n_learners: int
    replication: int
    membership: np.ndarray = field(repr=False)
    seed: int | None = None

    def __post_init__(self):
        if self.n_learners < 1 or self.replication < 1:
            raise ValidationError("n_learners and replication must be positive")
        if self.replication > self.n_learners:
            raise ValidationError("replication cannot exceed n_learners")
        if self.n_cases < 0:
            raise ValidationError("n_cases must be non-negative")
        m = np.asarray(self.membership, dtype=np.int64)
        if m.size == 0:
            m = m.reshape(self.n_cases, self.replication)
        if m.shape != (self.n_cases, self.replication):
            raise ValidationError(
                f"membership shape {m.shape} != ({self.n_cases}, {self.replication})"
            )
        if m.size:
            if int(m.min()) < 0 or int(m.max()) >= self.n_learners:
                raise ValidationError("learner indices out of range")
            m = np.sort(m, axis=1)
            if np.any(m[:, 1:] == m[:, :-1]):
                raise ValidationError("membership rows must hold distinct learners")
        m.flags.writeable = False
        object.__setattr__(self, "membership", m)

    def members(self, case_id: int) -> frozenset[int]:
        if not 0 <= case_id < self.n_cases:
            raise CaseOutOfRange(f"case {case_id} outside 0..{self.n_cases - 1}")
        return frozenset(int(v) for v in self.membership[case_id])


def holdout_learners(plan: PartitionPlan, case_id: int) -> frozenset[int]:
    """Learners whose training set excludes the case (the conservative set)."""
    return frozenset(range(plan.n_learners)) - plan.members(case_id)


@dataclass(frozen=True)
class PlanReport:
    """verify_plan output: per-constraint observations and verdicts."""

    n_cases: int
    membership_sizes_ok: bool
    loads: tuple[int, ...]
    max_load: int
    load_bound: int
    max_overlap: int
    overlap_bound: int

    @property
    def load_ok(self) -> bool:
        return self.max_load <= self.load_bound

    @property
    def overlap_ok(self) -> bool:
        return self.max_overlap <= self.overlap_bound

    @property
    def passed(self) -> bool:
        return self.membership_sizes_ok and self.load_ok and self.overlap_ok

    def summary(self) -> str:
        mark = lambda ok: "pass" if ok else "FAIL"
        return (
            f"membership {mark(self.membership_sizes_ok)}; "
            f"load {self.max_load}/{self.load_bound} {mark(self.load_ok)}; "
            f"overlap {self.max_overlap}/{self.overlap_bound} {mark(self.overlap_ok)}"
        )


def verify_plan(plan: PartitionPlan) -> PlanReport:
    """Check membership sizes, learner loads, and pairwise overlaps.

    An empty plan passes vacuously.
    """
    L, R, m = plan.n_learners, plan.replication, plan.membership
    loads = np.bincount(m.ravel(), minlength=L) if m.size else np.zeros(L, dtype=np.int64)
    max_overlap = 0
    if m.size and R >= 2:
        counts = np.zeros(L * L, dtype=np.int64)
        for i, j in itertools.combinations(range(R), 2):
            np.add.at(counts, m[:, i] * L + m[:, j], 1)
        max_overlap = int(counts.max())
    return PlanReport(
        n_cases=plan.n_cases,
        membership_sizes_ok=True,  # enforced structurally by PartitionPlan
        loads=tuple(int(v) for v in loads),
        max_load=int(loads.max()) if plan.n_cases else 0,
        load_bound=load_bound(plan.n_cases, L, R),
        max_overlap=max_overlap,
        overlap_bound=overlap_bound(plan.n_cases, L, R),
    )


def _pair_ids(subset: tuple[int, ...], n_learners: int) -> tuple[int, ...]:
    return tuple(a * n_learners + b for a, b in itertools.combinations(subset, 2))


@lru_cache(maxsize=64)
def _balanced_cycle(n_learners: int, replication: int, seed: int) -> tuple[tuple[int, ...], ...]:
    """Order all R-subsets (R = L/2) so that every prefix meets both bounds.

    Subsets are emitted as oriented complementary partitions; the DFS keeps
    every learner pair's running co-occurrence under the overlap cap for each
    prefix length. The odd prefix of length 3 is skipped: it is unsatisfiable
    whenever R >= 2 (see module docstring).
    """
    L, R = n_learners, replication
    partitions = []
    for s in itertools.combinations(range(L), R):
        if 0 in s:
            comp = tuple(sorted(set(range(L)) - set(s)))
            partitions.append((s, comp))
    rng = np.random.default_rng(seed)
    order = [partitions[i] for i in rng.permutation(len(partitions))]
    flip = rng.integers(0, 2, size=len(order))
    pair_cap = lambda r: (r * R * R) // (L * L) + 1

    counts: dict[int, int] = {}
    sequence: list[tuple[int, ...]] = []
    used = [False] * len(order)
    nodes = 0

    def dfs(t: int) -> bool:
        nonlocal nodes
        nodes += 1
        if nodes > _DFS_NODE_BUDGET:
            return False
        if t == len(order):
            return True
        even_cap = pair_cap(2 * (t + 1))
        odd_cap = pair_cap(2 * t + 1)
        for i, part in enumerate(order):
            if used[i]:
                continue
            pair_sets = (_pair_ids(part[0], L), _pair_ids(part[1], L))
            together = pair_sets[0] + pair_sets[1]
            if any(counts.get(p, 0) + 1 > even_cap for p in together):
                continue
            sides = (0, 1) if not flip[i] else (1, 0)
            for lead in sides:
                if t != 1 and any(counts.get(p, 0) + 1 > odd_cap for p in pair_sets[lead]):
                    continue
                used[i] = True
                sequence.append(part[lead])
                sequence.append(part[1 - lead])
                for p in together:
                    counts[p] = counts.get(p, 0) + 1
                if dfs(t + 1):
                    return True
                for p in together:
                    counts[p] -= 1
                sequence.pop()
                sequence.pop()
                used[i] = False
                break  # alternate orientation cannot relax the even cap
        return False

    if not dfs(0):
        raise InfeasibleConfig(
            f"could not order learner subsets for L={L}, R={R}, seed={seed}"
        )
    return tuple(sequence)


def _greedy_general(n_cases, n_learners, replication, rng) -> np.ndarray:
    """Fallback for R != L/2: per case, fill with least-loaded learners,
    breaking ties toward low pairwise overlap and then a seeded order."""
    L, R = n_learners, replication
    loads = np.zeros(L, dtype=np.int64)
    overlaps = np.zeros((L, L), dtype=np.int64)
    tiebreak = rng.permutation(L)
    membership = np.empty((n_cases, R), dtype=np.int64)
    for c in range(n_cases):
        chosen: list[int] = []
        for _ in range(R):
            best = None
            for cand in range(L):
                if cand in chosen:
                    continue
                pair_cost = max((overlaps[min(cand, o), max(cand, o)] for o in chosen), default=0)
                key = (loads[cand], pair_cost, tiebreak[cand])
                if best is None or key < best[0]:
                    best = (key, cand)
            chosen.append(best[1])
        chosen.sort()
        membership[c] = chosen
        loads[chosen] += 1
        for a, b in itertools.combinations(chosen, 2):
            overlaps[a, b] += 1
        tiebreak = rng.permutation(L)
    return membership


def plan_partition(
    n_cases: int, n_learners: int, replication: int, seed: int
) -> PartitionPlan:
    """Build a case-to-learners assignment meeting both diversity bounds.

    Deterministic for fixed arguments. Raises :class:`InfeasibleConfig` when
    ``replication > n_learners`` or when no assignment can satisfy the bounds
    (e.g. three cases with L=8, R=4).
    """
    if n_learners < 2:
        raise InfeasibleConfig(f"need at least 2 learners, got {n_learners}")
    if replication < 1 or replication > n_learners:
        raise InfeasibleConfig(
            f"replication {replication} not in 1..{n_learners} (n_learners)"
        )
    if n_cases < 0:
        raise ValidationError("n_cases must be non-negative")
    seed = int(seed)
    if seed < 0:
        raise ValidationError("seed must be unsigned")

    if 2 * replication == n_learners:
        cycle = _balanced_cycle(n_learners, replication, seed)
        membership = np.array(
            [cycle[i % len(cycle)] for i in range(n_cases)], dtype=np.int64
        ).reshape(n_cases, replication)
        plan = PartitionPlan(n_cases, n_learners, replication, membership, seed)
        report = verify_plan(plan)
        if not report.passed:
            raise InfeasibleConfig(
                f"bounds unsatisfiable for n_cases={n_cases}, n_learners={n_learners}, "
                f"replication={replication}: {report.summary()}"
            )
        return plan

    # general configuration: greedy with seeded retries, verified at the end
    last_report = None
    for attempt in range(_GENERAL_RETRIES):
        rng = np.random.default_rng((seed, attempt))
        membership = _greedy_general(n_cases, n_learners, replication, rng)
        plan = PartitionPlan(n_cases, n_learners, replication, membership, seed)
        report = verify_plan(plan)
        if report.passed:
            return plan
        last_report = report
    raise InfeasibleConfig(
        f"no valid assignment found for n_cases={n_cases}, n_learners={n_learners}, "
        f"replication={replication}: {last_report.summary()}"
    )


def save_plan(plan: PartitionPlan, path: str | Path) -> None:
    doc = {
        "n_cases": plan.n_cases,
        "n_learners": plan.n_learners,
        "replication": plan.replication,
        "seed": plan.seed,
        "membership": plan.membership.tolist(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, indent=1) + "\n")
    tmp.replace(path)


def load_plan(path: str | Path) -> PartitionPlan:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise IoFailure(f"reading plan {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise IoFailure(f"plan {path} is not valid JSON: {exc}") from exc
    try:
        return PartitionPlan(
            n_cases=int(doc["n_cases"]),
            n_learners=int(doc["n_learners"]),
            replication=int(doc["replication"]),
            membership=np.asarray(doc["membership"], dtype=np.int64),
            seed=None if doc.get("seed") is None else int(doc["seed"]),
        )
    except KeyError as exc:
        raise IoFailure(f"plan {path} missing field {exc}") from exc
