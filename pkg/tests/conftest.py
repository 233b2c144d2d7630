"""Shared oracles and generators.

The brute-force functions here deliberately ignore the library's counting
shortcuts: they enumerate ordered pairs (of stance indices weighted by
counts, or of actual people) so the fast paths have something independent
to agree with.
"""

from __future__ import annotations

import random
from fractions import Fraction

from contention.model import AssignmentSet, StanceCounts, StanceSpace


def brute_force_counts_raw(counts: StanceCounts) -> Fraction:
    """P(conflict) by summing over all ordered stance-index pairs."""
    n = counts.total
    matrix = counts.space.conflicts
    hits = 0
    size = len(counts.counts)
    for i in range(size):
        for j in range(size):
            if matrix[i][j]:
                hits += counts.counts[i] * counts.counts[j]
    return Fraction(hits, n * n)


def brute_force_assignments_raw(assignments: AssignmentSet) -> Fraction:
    """P(conflict) by enumerating every ordered person pair, O(n^2 k^2)."""
    matrix = assignments.space.conflicts
    people = assignments.assignments
    hits = 0
    for held_a in people:
        for held_b in people:
            if any(matrix[i][j] for i in held_a for j in held_b):
                hits += 1
    n = len(people)
    return Fraction(hits, n * n)


def random_exclusive_counts(rng: random.Random, max_k: int = 6, max_count: int = 200) -> StanceCounts:
    k = rng.randint(1, max_k)
    space = StanceSpace.exclusive([f"s{i}" for i in range(1, k + 1)])
    while True:
        counts = tuple(rng.randint(0, max_count) for _ in range(k + 1))
        if sum(counts):
            return StanceCounts(space, counts)


def random_single_stance_assignments(rng: random.Random, max_n: int = 200, max_k: int = 6) -> AssignmentSet:
    """Everyone holds exactly one stance over a mutually exclusive space."""
    k = rng.randint(1, max_k)
    space = StanceSpace.exclusive([f"s{i}" for i in range(1, k + 1)])
    n = rng.randint(1, max_n)
    held = [frozenset({rng.randint(0, k)}) for _ in range(n)]
    return AssignmentSet(space, tuple(held))


def random_overlapping_assignments(rng: random.Random, max_n: int = 50, max_k: int = 6) -> AssignmentSet:
    """Arbitrary conflict relation, people holding 1..3 explicit stances or none."""
    k = rng.randint(1, max_k)
    ids = [f"s{i}" for i in range(1, k + 1)]
    pairs = [
        (ids[i], ids[j])
        for i in range(k)
        for j in range(i + 1, k)
        if rng.random() < 0.5
    ]
    space = StanceSpace.from_conflict_pairs(ids, pairs)
    n = rng.randint(1, max_n)
    held = []
    for _ in range(n):
        if rng.random() < 0.2:
            held.append(frozenset({0}))
        else:
            size = rng.randint(1, min(3, k))
            held.append(frozenset(rng.sample(range(1, k + 1), size)))
    return AssignmentSet(space, tuple(held))
