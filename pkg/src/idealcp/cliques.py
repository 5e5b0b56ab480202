"""Maximal cliques of the support multi-hypergraph of a symmetric tensor.

A clique is a vertex set ``J`` such that every size-``m`` multiset drawn from
``J`` indexes a positive entry.  Equivalently, the maximal cliques are the
maximal subsets of ``{1..n}`` that contain the distinct-index set of no zero
entry.  Sets are handled internally as integer bitmasks (bit ``i-1`` for
vertex ``i``), which works for any ``n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionTooLarge
from .tensor import SymmetricTensor

BRUTE_FORCE_MAX_DIM = 20


def to_mask(vertices) -> int:
    mask = 0
    for i in vertices:
        mask |= 1 << (i - 1)
    return mask


def from_mask(mask: int) -> tuple[int, ...]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def _sort_key(clique):
    return (-len(clique), clique)


@dataclass(frozen=True)
class CliqueSet:
    """Antichain of nonempty vertex sets (1-based, each sorted)."""

    cliques: tuple[tuple[int, ...], ...]
    n: int

    def __post_init__(self):
        cl = tuple(sorted((tuple(sorted(c)) for c in self.cliques), key=_sort_key))
        object.__setattr__(self, "cliques", cl)

    @classmethod
    def from_masks(cls, masks, n: int) -> "CliqueSet":
        return cls(tuple(from_mask(s) for s in masks if s), n)

    def __len__(self) -> int:
        return len(self.cliques)

    def __iter__(self):
        return iter(self.cliques)

    def __getitem__(self, k):
        return self.cliques[k]

    @property
    def max_size(self) -> int:
        return max((len(c) for c in self.cliques), default=0)

    def containing(self, vertices) -> list[int]:
        """Positions of the cliques that contain every vertex in ``vertices``."""
        vs = set(vertices)
        return [k for k, c in enumerate(self.cliques) if vs <= set(c)]

    def is_antichain(self) -> bool:
        sets = [set(c) for c in self.cliques]
        return not any(i != j and a <= b for i, a in enumerate(sets) for j, b in enumerate(sets))


@dataclass
class NecessaryConditionReport:
    passed: bool
    uncovered: list[tuple[int, ...]] = field(default_factory=list)


def _zero_masks_in_order(a: SymmetricTensor):
    """Yield ``(index, mask)`` for each zero entry in lexicographic order."""
    stored = a.entries
    for idx in a.all_indices():
        if stored.get(idx, 0.0) == 0.0:
            yield idx, to_mask(idx)


def maximal_cliques(a: SymmetricTensor, trace: list | None = None) -> CliqueSet:
    """Generate the maximal cliques by repeated splitting of candidate sets.

    Starting from the single candidate ``{1..n}``, every zero entry (visited in
    lexicographic order of canonical indices) removes each candidate that
    contains its distinct-index set ``D`` and proposes ``S - {k}`` for
    ``k in D``; a proposal is kept only if no surviving candidate contains it.

    Parameters
    ----------
    a : SymmetricTensor
        Nonnegative tensor.
    trace : list, optional
        If given, receives one ``(zero_index, candidates_before, proposals)``
        tuple per zero entry, with sets as sorted tuples.
    """
    a.check_nonnegative()
    cands = [(1 << a.dim) - 1]
    done: set[int] = set()
    for idx, z in _zero_masks_in_order(a):
        if z in done:
            # a repeated distinct set cannot split anything any more
            if trace is not None:
                trace.append((idx, [from_mask(s) for s in cands], []))
            continue
        done.add(z)
        before = list(cands) if trace is not None else None
        hit = [s for s in cands if s & z == z]
        proposals = []
        if hit:
            cands = [s for s in cands if s & z != z]
            for s in hit:
                k = z
                while k:
                    low = k & -k
                    proposals.append(s & ~low)
                    k ^= low
            for s_new in proposals:
                if not any(s_new & s == s_new for s in cands):
                    cands.append(s_new)
        if trace is not None:
            trace.append((idx, [from_mask(s) for s in before], [from_mask(s) for s in proposals]))
    return CliqueSet.from_masks(cands, a.dim)


def necessary_condition(a: SymmetricTensor, c: CliqueSet) -> NecessaryConditionReport:
    """Check that every positive entry's index set lies inside some clique."""
    masks = [to_mask(cl) for cl in c.cliques]
    uncovered = []
    covered: dict[int, bool] = {}
    for idx, val in a.items():
        if val <= 0:
            continue
        z = to_mask(idx)
        ok = covered.get(z)
        if ok is None:
            ok = covered[z] = any(z & s == z for s in masks)
        if not ok:
            uncovered.append(idx)
    return NecessaryConditionReport(not uncovered, uncovered)


def brute_force_cliques(a: SymmetricTensor) -> CliqueSet:
    """Maximal zero-free vertex sets by enumerating all ``2^n`` subsets."""
    n = a.dim
    if n > BRUTE_FORCE_MAX_DIM:
        raise DimensionTooLarge(f"brute force limited to n <= {BRUTE_FORCE_MAX_DIM}, got {n}")
    a.check_nonnegative()
    zero_sets = {to_mask(idx) for idx in a.all_indices() if a.entries.get(idx, 0.0) == 0.0}
    subsets = np.arange(1 << n, dtype=np.int64)
    valid = np.ones(1 << n, dtype=bool)
    for z in zero_sets:
        valid &= (subsets & z) != z
    maximal = valid.copy()
    for j in range(n):
        bit = 1 << j
        lacks = (subsets & bit) == 0
        grown = valid[subsets | bit]
        maximal &= ~(lacks & grown)
    return CliqueSet.from_masks(subsets[maximal].tolist(), n)
