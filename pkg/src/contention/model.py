"""Stance/population data model and contention scoring.

Conventions used throughout:

- A stance space holds k explicit stances plus one implicit "no stance"
  sentinel at index 0.  Counts and assignments are indexed 0..k, index 0
  being the people with no stance on the topic.
- The conflict relation is a symmetric boolean matrix over all k+1 stances
  with a zero diagonal and an all-false row/column 0 (holding no stance
  conflicts with nobody).
- Contention is the probability that two people drawn uniformly *with
  replacement* hold conflicting stances; drawing the same person twice is
  allowed, so a person holding two conflicting stances conflicts with
  themselves.
- Raw scores live in [0, (k-1)/k] for mutually exclusive stances and are
  normalized to [0, 1] by dividing by that maximum.  With k <= 1 the raw
  score is provably 0 and the normalized score is defined as 0.

All types are frozen; every operation is a pure function, so values are
safe to share across threads.

Counts are Python ints, so numerator products are exact at any population
size; the single final float division carries relative error ~1e-16.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from .errors import EmptyPopulation, NonExclusiveSpace, UnknownAttribute

#: Stance id reserved for the no-stance sentinel (index 0 in every space).
NO_STANCE = "__none__"

Method = Literal["exclusive-closed-form", "general-exact", "general-sampled"]
KMode = Literal["declared", "observed"]


@dataclass(frozen=True)
class Stance:
    """One explicit stance: a stable id plus a human-readable label."""

    id: str
    label: str = ""

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("stance id must be non-empty")
        if self.id == NO_STANCE:
            raise ValueError(f"{NO_STANCE!r} is reserved for the no-stance sentinel")
        if not self.label:
            object.__setattr__(self, "label", self.id)


@dataclass(frozen=True)
class StanceSpace:
    """The set of explicit stances plus the implicit no-stance sentinel.

    ``conflicts`` is a dense (k+1) x (k+1) boolean matrix indexed like the
    counts: row/column 0 is the sentinel.  Construction validates symmetry
    and rejects asymmetric input rather than silently symmetrizing.
    """

    stances: tuple[Stance, ...]
    conflicts: tuple[tuple[bool, ...], ...]

    def __post_init__(self) -> None:
        ids = [s.id for s in self.stances]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate stance ids: {ids}")
        size = self.k + 1
        matrix = tuple(tuple(bool(c) for c in row) for row in self.conflicts)
        if len(matrix) != size or any(len(row) != size for row in matrix):
            raise ValueError(f"conflict matrix must be {size}x{size} (index 0 = no stance)")
        for i in range(size):
            if matrix[i][i]:
                raise ValueError("a stance cannot conflict with itself")
            if matrix[0][i] or matrix[i][0]:
                raise ValueError("the no-stance sentinel conflicts with nothing")
            for j in range(i):
                if matrix[i][j] != matrix[j][i]:
                    raise ValueError(
                        f"conflict matrix is asymmetric at ({i},{j}); "
                        "fix the input instead of relying on symmetrization"
                    )
        object.__setattr__(self, "conflicts", matrix)

    @classmethod
    def exclusive(cls, stance_ids: Sequence[str], labels: Mapping[str, str] | None = None) -> StanceSpace:
        """Space where every explicit stance conflicts with every other one."""
        labels = labels or {}
        stances = tuple(Stance(sid, labels.get(sid, "")) for sid in stance_ids)
        k = len(stances)
        matrix = tuple(
            tuple(i != j and i != 0 and j != 0 for j in range(k + 1))
            for i in range(k + 1)
        )
        return cls(stances, matrix)

    @classmethod
    def from_conflict_pairs(
        cls,
        stance_ids: Sequence[str],
        conflicting: Iterable[tuple[str, str]],
        labels: Mapping[str, str] | None = None,
    ) -> StanceSpace:
        """Space with an explicit list of conflicting stance-id pairs."""
        labels = labels or {}
        stances = tuple(Stance(sid, labels.get(sid, "")) for sid in stance_ids)
        index = {s.id: i + 1 for i, s in enumerate(stances)}
        k = len(stances)
        rows = [[False] * (k + 1) for _ in range(k + 1)]
        for a, b in conflicting:
            if a not in index or b not in index:
                raise ValueError(f"unknown stance in conflict pair ({a!r}, {b!r})")
            if a == b:
                raise ValueError("a stance cannot conflict with itself")
            rows[index[a]][index[b]] = True
            rows[index[b]][index[a]] = True
        return cls(stances, tuple(tuple(r) for r in rows))

    @property
    def k(self) -> int:
        """Number of explicit stances (the sentinel not included)."""
        return len(self.stances)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.stances)

    @property
    def all_ids(self) -> tuple[str, ...]:
        """Sentinel first, then explicit stance ids, in index order."""
        return (NO_STANCE,) + self.ids

    def index_of(self, stance_id: str) -> int:
        if stance_id == NO_STANCE:
            return 0
        try:
            return self.ids.index(stance_id) + 1
        except ValueError:
            raise KeyError(f"unknown stance id {stance_id!r}") from None

    def is_exclusive(self) -> bool:
        """True when the matrix is exactly the mutually-exclusive pattern."""
        return all(
            self.conflicts[i][j] == (i != j and i != 0 and j != 0)
            for i in range(self.k + 1)
            for j in range(self.k + 1)
        )

    def conflict_row_mask(self, i: int) -> int:
        """Bitmask of stance indices conflicting with stance index ``i``."""
        mask = 0
        for j, c in enumerate(self.conflicts[i]):
            if c:
                mask |= 1 << j
        return mask


@dataclass(frozen=True)
class SubpopulationFilter:
    """Named attribute -> allowed values, used to slice a population.

    An empty filter is always-true and selects the full population.  The
    attribute ``"stance"`` is always resolvable and matches stance ids
    (``__none__`` selects the no-stance group).  Filters are carried on
    sliced values and results for provenance.
    """

    criteria: tuple[tuple[str, frozenset[str]], ...] = ()

    @classmethod
    def of(cls, **criteria: Iterable[str]) -> SubpopulationFilter:
        return cls(tuple(sorted((k, frozenset(v)) for k, v in criteria.items())))

    @property
    def is_always_true(self) -> bool:
        return not self.criteria

    def attributes(self) -> tuple[str, ...]:
        return tuple(attr for attr, _ in self.criteria)

    def describe(self) -> str:
        if self.is_always_true:
            return "all"
        return ";".join(f"{attr}={','.join(sorted(vals))}" for attr, vals in self.criteria)


@dataclass(frozen=True)
class StanceCounts:
    """Per-stance population counts for one topic/population slice.

    ``counts[0]`` is the no-stance group; ``counts[i]`` for i >= 1 follow
    ``space.stances`` order.  The population size is the sum of all counts.
    """

    space: StanceSpace
    counts: tuple[int, ...]
    filter: SubpopulationFilter | None = None

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if len(counts) != self.space.k + 1:
            raise ValueError(
                f"expected {self.space.k + 1} counts (index 0 = no stance), got {len(counts)}"
            )
        if any(c < 0 for c in counts):
            raise ValueError(f"counts must be non-negative: {counts}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_mapping(
        cls,
        space: StanceSpace,
        by_id: Mapping[str, int],
        no_stance: int = 0,
    ) -> StanceCounts:
        row = [no_stance] + [0] * space.k
        for sid, count in by_id.items():
            row[space.index_of(sid)] = count
        return cls(space, tuple(row))

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def no_stance(self) -> int:
        return self.counts[0]

    @property
    def explicit(self) -> tuple[int, ...]:
        return self.counts[1:]

    @property
    def observed_k(self) -> int:
        """Explicit stances with a nonzero count."""
        return sum(1 for c in self.explicit if c)

    def with_no_stance(self, g0: int) -> StanceCounts:
        return StanceCounts(self.space, (g0,) + self.explicit, self.filter)

    def scaled(self, m: int) -> StanceCounts:
        if m <= 0:
            raise ValueError("scale factor must be a positive integer")
        return StanceCounts(self.space, tuple(c * m for c in self.counts), self.filter)

    def __add__(self, other: StanceCounts) -> StanceCounts:
        if other.space is not self.space and other.space != self.space:
            raise ValueError("cannot add counts over different stance spaces")
        return StanceCounts(self.space, tuple(a + b for a, b in zip(self.counts, other.counts)))


@dataclass(frozen=True)
class AssignmentSet:
    """Per-person sets of held stance indices (the general model).

    People may hold several explicit stances at once; holding nothing is
    encoded as the singleton {0}, never jointly with an explicit stance.
    ``attributes`` optionally carries per-person metadata for filtering.
    """

    space: StanceSpace
    assignments: tuple[frozenset[int], ...]
    attributes: tuple[Mapping[str, str], ...] | None = None
    filter: SubpopulationFilter | None = None

    def __post_init__(self) -> None:
        k = self.space.k
        cleaned = []
        for held in self.assignments:
            held = frozenset(held)
            if not held:
                raise ValueError("every person holds at least the no-stance sentinel")
            if 0 in held and len(held) > 1:
                raise ValueError("no explicit stance can be held jointly with no-stance")
            if any(i < 0 or i > k for i in held):
                raise ValueError(f"stance index out of range in {sorted(held)}")
            cleaned.append(held)
        object.__setattr__(self, "assignments", tuple(cleaned))
        if self.attributes is not None and len(self.attributes) != len(cleaned):
            raise ValueError("attributes must align one-to-one with assignments")

    @classmethod
    def from_stance_ids(
        cls,
        space: StanceSpace,
        held_ids: Iterable[Iterable[str]],
        attributes: Sequence[Mapping[str, str]] | None = None,
    ) -> AssignmentSet:
        assignments = tuple(
            frozenset(space.index_of(sid) for sid in held) or frozenset({0})
            for held in held_ids
        )
        attrs = tuple(attributes) if attributes is not None else None
        return cls(space, assignments, attrs)

    @property
    def n(self) -> int:
        return len(self.assignments)

    @property
    def observed_k(self) -> int:
        held = set().union(*self.assignments) if self.assignments else set()
        return len(held - {0})

    def to_counts(self) -> StanceCounts:
        """Derive StanceCounts; requires every person to hold exactly one stance."""
        row = [0] * (self.space.k + 1)
        for held in self.assignments:
            if len(held) != 1:
                raise ValueError("counts are only derivable when everyone holds exactly one stance")
            row[next(iter(held))] += 1
        return StanceCounts(self.space, tuple(row), self.filter)


@dataclass(frozen=True)
class ContentionResult:
    """Raw and normalized contention plus the complement scores.

    ``k`` is the stance count used for normalization: the declared k of the
    stance space by default, or the observed nonzero count under
    ``k_mode="observed"``.  ``samples``/``seed`` are set only for the
    sampled estimator.
    """

    raw: float
    normalized: float
    non_contention_raw: float
    non_contention_normalized: float
    k: int
    population: int
    method: Method
    samples: int | None = None
    seed: int | None = None
    filter: SubpopulationFilter | None = field(default=None, compare=False)


def max_contention(k: int) -> float:
    """Largest reachable raw contention for k mutually exclusive stances."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if k < 2:
        return 0.0
    return (k - 1) / k


def normalize_contention(raw: float, k: int) -> float:
    """Map a raw score onto [0, 1] by dividing by the k-stance maximum.

    For k <= 1 the raw score is necessarily 0 and the quotient is defined
    as 0 rather than 0/0.
    """
    if k < 2:
        return 0.0
    return raw * k / (k - 1)


def _norm_k(declared: int, observed: int, k_mode: KMode) -> int:
    if k_mode == "observed":
        return observed
    if k_mode == "declared":
        return declared
    raise ValueError(f"k_mode must be 'declared' or 'observed', got {k_mode!r}")


def _result_from_ratio(
    num: int,
    den: int,
    *,
    k: int,
    population: int,
    method: Method,
    samples: int | None = None,
    seed: int | None = None,
    flt: SubpopulationFilter | None = None,
) -> ContentionResult:
    # One division per score keeps the integer arithmetic exact up to the
    # final rounding, and makes the closed form and the general path agree
    # bit-for-bit on identical populations.
    raw = num / den
    normalized = (num * k) / (den * (k - 1)) if k >= 2 else 0.0
    return ContentionResult(
        raw=raw,
        normalized=normalized,
        non_contention_raw=1.0 - raw,
        non_contention_normalized=1.0 - normalized,
        k=k,
        population=population,
        method=method,
        samples=samples,
        seed=seed,
        filter=flt,
    )


def contention_exclusive(counts: StanceCounts, *, k_mode: KMode = "declared") -> ContentionResult:
    """Closed-form contention for mutually exclusive stances.

    raw = sum over unordered explicit pairs of 2*g_i*g_j, divided by the
    squared population size (selection with replacement).  The stance
    space must carry the all-pairs-conflict pattern; anything else has to
    go through :func:`contention_general`.
    """
    if not counts.space.is_exclusive():
        raise NonExclusiveSpace(
            "conflict matrix is not the mutually-exclusive pattern; use contention_general"
        )
    n = counts.total
    if n == 0:
        raise EmptyPopulation("contention is undefined for an empty population")
    g = counts.explicit
    num = 0
    for i in range(1, len(g)):
        for j in range(i):
            num += g[i] * g[j]
    num *= 2
    k = _norm_k(counts.space.k, counts.observed_k, k_mode)
    return _result_from_ratio(
        num, n * n, k=k, population=n, method="exclusive-closed-form", flt=counts.filter
    )


def _signature_groups(assignments: AssignmentSet) -> tuple[list[int], list[int]]:
    """Group people by held-stance bitmask; returns (masks, counts)."""
    tally: dict[int, int] = {}
    for held in assignments.assignments:
        mask = 0
        for i in held:
            mask |= 1 << i
        tally[mask] = tally.get(mask, 0) + 1
    masks = sorted(tally)
    return masks, [tally[m] for m in masks]


def _opposing_masks(space: StanceSpace, masks: Sequence[int]) -> list[int]:
    """For each held-stance mask, the mask of stances conflicting with it."""
    out = []
    for mask in masks:
        opp = 0
        for i in range(space.k + 1):
            if mask >> i & 1:
                opp |= space.conflict_row_mask(i)
        out.append(opp)
    return out


def _conflicting_ordered_pairs(assignments: AssignmentSet) -> int:
    """Exact count of ordered person pairs holding any conflicting stances.

    People are grouped by their held-stance signature, so each distinct
    combination of stances is checked once against each other; this keeps
    multi-stance holders exact (a pair conflicting through several stance
    pairs is still one pair) and costs O(n*k + m^2) for m signatures
    instead of O(n^2) person pairs.
    """
    masks, sizes = _signature_groups(assignments)
    opposing = _opposing_masks(assignments.space, masks)
    total = 0
    for a in range(len(masks)):
        if masks[a] & opposing[a]:
            total += sizes[a] * sizes[a]
        for b in range(a + 1, len(masks)):
            if masks[b] & opposing[a]:
                total += 2 * sizes[a] * sizes[b]
    return total


def contention_general(assignments: AssignmentSet, *, k_mode: KMode = "declared") -> ContentionResult:
    """Exact contention for the general (possibly overlapping) stance model.

    Counts ordered pairs drawn with replacement, so the diagonal (p, p) is
    included: a person holding two conflicting stances is an intrapersonal
    conflict and contributes.  The self-pair counts once no matter how many
    conflicting stance combinations the pair realizes.
    """
    n = assignments.n
    if n == 0:
        raise EmptyPopulation("contention is undefined for an empty population")
    num = _conflicting_ordered_pairs(assignments)
    k = _norm_k(assignments.space.k, assignments.observed_k, k_mode)
    return _result_from_ratio(
        num, n * n, k=k, population=n, method="general-exact", flt=assignments.filter
    )


def contention_sampled(
    assignments: AssignmentSet,
    samples: int,
    seed: int,
    *,
    k_mode: KMode = "declared",
) -> ContentionResult:
    """Monte Carlo estimate of the general model for very large inputs.

    Draws ``samples`` ordered pairs uniformly with replacement from a
    seeded PCG64 generator; the same seed and inputs always reproduce the
    same estimate.
    """
    n = assignments.n
    if n == 0:
        raise EmptyPopulation("contention is undefined for an empty population")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    space = assignments.space
    masks, _ = _signature_groups(assignments)
    sig_index = {m: i for i, m in enumerate(masks)}
    person_sig = np.empty(n, dtype=np.int64)
    for p, held in enumerate(assignments.assignments):
        mask = 0
        for i in held:
            mask |= 1 << i
        person_sig[p] = sig_index[mask]
    opposing = _opposing_masks(space, masks)
    conflict = np.zeros((len(masks), len(masks)), dtype=bool)
    for a in range(len(masks)):
        for b in range(len(masks)):
            conflict[a, b] = bool(masks[b] & opposing[a])

    rng = np.random.default_rng(seed)
    first = person_sig[rng.integers(0, n, size=samples)]
    second = person_sig[rng.integers(0, n, size=samples)]
    hits = int(conflict[first, second].sum())

    raw = hits / samples
    k = _norm_k(space.k, assignments.observed_k, k_mode)
    normalized = normalize_contention(raw, k)
    return ContentionResult(
        raw=raw,
        normalized=normalized,
        non_contention_raw=1.0 - raw,
        non_contention_normalized=1.0 - normalized,
        k=k,
        population=n,
        method="general-sampled",
        samples=samples,
        seed=seed,
        filter=assignments.filter,
    )


def sampled_from_counts(
    counts: StanceCounts,
    samples: int,
    seed: int,
    *,
    k_mode: KMode = "declared",
) -> ContentionResult:
    """Sampled estimator over counts, without materializing the people.

    Drawing a person uniformly and reading off their stance is the same as
    drawing a stance index with probability proportional to its count, so
    huge populations sample in O(samples) regardless of size.
    """
    n = counts.total
    if n == 0:
        raise EmptyPopulation("contention is undefined for an empty population")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    space = counts.space
    matrix = np.array(space.conflicts, dtype=bool)
    weights = np.array(counts.counts, dtype=np.float64) / n
    rng = np.random.default_rng(seed)
    first = rng.choice(space.k + 1, size=samples, p=weights)
    second = rng.choice(space.k + 1, size=samples, p=weights)
    raw = float(matrix[first, second].mean())
    k = _norm_k(space.k, counts.observed_k, k_mode)
    normalized = normalize_contention(raw, k)
    return ContentionResult(
        raw=raw,
        normalized=normalized,
        non_contention_raw=1.0 - raw,
        non_contention_normalized=1.0 - normalized,
        k=k,
        population=n,
        method="general-sampled",
        samples=samples,
        seed=seed,
        filter=counts.filter,
    )


def restrict(data, flt: SubpopulationFilter):
    """Slice a population to the sub-group matched by ``flt``.

    StanceCounts resolve the single attribute ``"stance"``: counts whose
    stance id is not allowed drop to zero, shrinking the population while
    preserving the stance structure.  AssignmentSets additionally resolve
    any per-person attribute; a person is kept when every criterion holds
    ("stance" matches if any held stance id is allowed).  The filter is
    recorded on the returned value for provenance.
    """
    if isinstance(data, StanceCounts):
        return _restrict_counts(data, flt)
    if isinstance(data, AssignmentSet):
        return _restrict_assignments(data, flt)
    raise TypeError(f"cannot restrict {type(data).__name__}")


def _restrict_counts(counts: StanceCounts, flt: SubpopulationFilter) -> StanceCounts:
    unknown = [attr for attr in flt.attributes() if attr != "stance"]
    if unknown:
        raise UnknownAttribute(f"counts only resolve the 'stance' attribute, not {unknown}")
    if flt.is_always_true:
        return StanceCounts(counts.space, counts.counts, flt)
    allowed = dict(flt.criteria)["stance"]
    kept = tuple(
        c if sid in allowed else 0
        for sid, c in zip(counts.space.all_ids, counts.counts)
    )
    return StanceCounts(counts.space, kept, flt)


def _restrict_assignments(assignments: AssignmentSet, flt: SubpopulationFilter) -> AssignmentSet:
    person_attrs = assignments.attributes or tuple({} for _ in assignments.assignments)
    known = {"stance"}
    for attrs in person_attrs:
        known.update(attrs)
    unknown = [attr for attr in flt.attributes() if attr not in known]
    if unknown:
        raise UnknownAttribute(f"no person carries attribute(s) {unknown}")

    space = assignments.space
    kept_held = []
    kept_attrs = []
    for held, attrs in zip(assignments.assignments, person_attrs):
        ok = True
        for attr, allowed in flt.criteria:
            if attr == "stance":
                held_ids = {space.all_ids[i] for i in held}
                if not held_ids & allowed:
                    ok = False
                    break
            elif attrs.get(attr) not in allowed:
                ok = False
                break
        if ok:
            kept_held.append(held)
            kept_attrs.append(attrs)
    return AssignmentSet(
        space,
        tuple(kept_held),
        tuple(kept_attrs) if assignments.attributes is not None else None,
        flt,
    )
