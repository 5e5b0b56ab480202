"""Sparse symmetric tensors keyed by sorted multi-indices.

Indices are 1-based and a canonical index is the non-decreasing tuple
``(i_1, ..., i_m)``.  Only nonzero values are stored; a value whose absolute
size is at most :data:`ZERO_TOL` is treated as an exact zero, so the zero
pattern seen by the clique code is never polluted by round-off.
"""
from __future__ import annotations

import math
from fractions import Fraction
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import DuplicateIndex, InvalidIndex, NotNonnegative, ShapeError

ZERO_TOL = 1e-12
UNIT_NORM_TOL = 1e-8


def canonical_index(raw, dim: int | None = None, order: int | None = None) -> tuple[int, ...]:
    """Return the sorted representative of a raw 1-based index tuple.

    >>> canonical_index((3, 1, 2), dim=3)
    (1, 2, 3)
    """
    idx = tuple(sorted(int(i) for i in raw))
    if order is not None and len(idx) != order:
        raise InvalidIndex(f"index {tuple(raw)} has length {len(idx)}, expected {order}")
    if not idx:
        raise InvalidIndex("empty index")
    if idx[0] < 1 or (dim is not None and idx[-1] > dim):
        raise InvalidIndex(f"index {tuple(raw)} out of range 1..{dim}")
    return idx


def distinct(idx: Iterable[int]) -> frozenset[int]:
    """The set of distinct elements ``[{i_1, ..., i_m}]`` of an index."""
    return frozenset(idx)


def orbit_size(idx: tuple[int, ...]) -> int:
    """Number of distinct permutations of ``idx``."""
    size = math.factorial(len(idx))
    for c in Counter(idx).values():
        size //= math.factorial(c)
    return size


def num_canonical(dim: int, order: int) -> int:
    return math.comb(dim + order - 1, order)


def iter_canonical(dim: int, order: int) -> Iterator[tuple[int, ...]]:
    """All canonical indices in lexicographic order."""
    return combinations_with_replacement(range(1, dim + 1), order)


class SymmetricTensor:
    """Immutable sparse symmetric tensor of a given order and dimension.

    Parameters
    ----------
    order, dim : int
        Tensor order ``m >= 2`` and dimension ``n >= 1``.
    entries : mapping or iterable of (index, value) pairs
        Raw indices are canonicalized.  Two raw indices that canonicalize to
        the same key raise :class:`DuplicateIndex`.
    """

    __slots__ = ("order", "dim", "_entries")

    def __init__(self, order: int, dim: int, entries=None):
        if order < 2:
            raise ShapeError(f"order must be >= 2, got {order}")
        if dim < 1:
            raise ShapeError(f"dim must be >= 1, got {dim}")
        self.order = int(order)
        self.dim = int(dim)
        data: dict[tuple[int, ...], float] = {}
        if entries is not None:
            pairs = entries.items() if isinstance(entries, Mapping) else entries
            seen = set()
            for raw, val in pairs:
                key = canonical_index(raw, self.dim, self.order)
                if key in seen:
                    raise DuplicateIndex(f"duplicate entry for index {key}")
                seen.add(key)
                val = float(val)
                if not math.isfinite(val):
                    raise ValueError(f"non-finite value at {key}")
                if abs(val) > ZERO_TOL:
                    data[key] = val
        self._entries = dict(sorted(data.items()))

    @classmethod
    def zeros(cls, order: int, dim: int) -> "SymmetricTensor":
        return cls(order, dim)

    @classmethod
    def _from_accumulated(cls, order, dim, acc: dict) -> "SymmetricTensor":
        # acc is already canonical; skips the duplicate check
        out = cls(order, dim)
        out._entries = {k: v for k, v in sorted(acc.items()) if abs(v) > ZERO_TOL}
        return out

    @property
    def entries(self) -> Mapping[tuple[int, ...], float]:
        """Read-only view of the stored (nonzero) entries."""
        return MappingProxyType(self._entries)

    @property
    def nnz(self) -> int:
        return len(self._entries)

    def __getitem__(self, raw) -> float:
        return self._entries.get(canonical_index(raw, self.dim, self.order), 0.0)

    def items(self):
        return self._entries.items()

    def all_indices(self) -> Iterator[tuple[int, ...]]:
        return iter_canonical(self.dim, self.order)

    def is_nonnegative(self) -> bool:
        return all(v >= 0 for v in self._entries.values())

    def check_nonnegative(self) -> None:
        for k, v in self._entries.items():
            if v < 0:
                raise NotNonnegative(f"entry {k} = {v} is negative")

    def negative_entries(self) -> list[tuple[tuple[int, ...], float]]:
        return [(k, v) for k, v in self._entries.items() if v < 0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, SymmetricTensor):
            return NotImplemented
        return (self.order, self.dim, self._entries) == (other.order, other.dim, other._entries)

    def __repr__(self) -> str:
        return f"SymmetricTensor(order={self.order}, dim={self.dim}, nnz={self.nnz})"


@dataclass(frozen=True)
class Atom:
    """One weighted rank-one term ``weight * vector^{(x) m}``."""

    weight: float
    vector: np.ndarray
    clique: tuple[int, ...] | None = None


@dataclass
class Decomposition:
    """A nonnegative decomposition ``A = sum_r w_r v_r^{(x) m}`` with unit ``v_r``.

    Clique tags, when present, are 1-based and must contain the support of
    the tagged vector.
    """

    order: int
    dim: int
    atoms: list[Atom] = field(default_factory=list)

    def __post_init__(self):
        for a in self.atoms:
            v = np.asarray(a.vector, dtype=float)
            if v.shape != (self.dim,):
                raise ShapeError(f"atom vector has shape {v.shape}, expected ({self.dim},)")
            if not a.weight > 0:
                raise ValueError(f"atom weight must be positive, got {a.weight}")
            if np.any(v < 0):
                raise ValueError("atom vector has negative components")
            if abs(np.linalg.norm(v) - 1.0) > UNIT_NORM_TOL:
                raise ValueError(f"atom vector norm {np.linalg.norm(v)} is not 1")
            if a.clique is not None:
                outside = set((np.flatnonzero(v) + 1).tolist()) - set(a.clique)
                if outside:
                    raise ValueError(f"atom support {sorted(outside)} outside clique {a.clique}")

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.atoms])

    @property
    def vectors(self) -> np.ndarray:
        return np.array([a.vector for a in self.atoms]).reshape(len(self.atoms), self.dim)

    def absorbed(self) -> np.ndarray:
        """Rows ``w_r^{1/m} v_r`` giving the unweighted form ``A = sum_r u_r^{(x) m}``."""
        return self.weights[:, None] ** (1.0 / self.order) * self.vectors


def _accumulate_outer(acc: dict, v: np.ndarray, m: int, scale: float) -> None:
    support = [int(i) for i in np.flatnonzero(v)]
    for combo in combinations_with_replacement(support, m):
        key = tuple(i + 1 for i in combo)
        acc[key] = acc.get(key, 0.0) + scale * float(np.prod(v[list(combo)]))


def outer_power(v, m: int) -> SymmetricTensor:
    """The symmetric tensor ``v^{(x) m}`` with entries ``v_{i_1} ... v_{i_m}``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ShapeError("v must be a vector")
    if m < 2:
        raise ShapeError(f"order must be >= 2, got {m}")
    acc: dict = {}
    _accumulate_outer(acc, v, m, 1.0)
    return SymmetricTensor._from_accumulated(m, v.size, acc)


def from_decomposition(d: Decomposition) -> SymmetricTensor:
    acc: dict = {}
    for a in d.atoms:
        _accumulate_outer(acc, np.asarray(a.vector, dtype=float), d.order, float(a.weight))
    return SymmetricTensor._from_accumulated(d.order, d.dim, acc)


def add(a: SymmetricTensor, b: SymmetricTensor) -> SymmetricTensor:
    _check_same_shape(a, b)
    acc = dict(a.items())
    for k, v in b.items():
        acc[k] = acc.get(k, 0.0) + v
    return SymmetricTensor._from_accumulated(a.order, a.dim, acc)


def _check_same_shape(a, b):
    if (a.order, a.dim) != (b.order, b.dim):
        raise ShapeError(f"shape mismatch: (m={a.order}, n={a.dim}) vs (m={b.order}, n={b.dim})")


def l1_distance(a: SymmetricTensor, b: SymmetricTensor) -> float:
    """Entrywise 1-norm of ``a - b`` over the full ``n^m`` array.

    Each canonical index is weighted by the size of its permutation orbit.
    """
    _check_same_shape(a, b)
    total = 0.0
    for k in set(a.entries) | set(b.entries):
        total += orbit_size(k) * abs(a.entries.get(k, 0.0) - b.entries.get(k, 0.0))
    return total


@dataclass(frozen=True)
class DominanceViolation:
    zero_index: tuple[int, ...]
    positive_index: tuple[int, ...]


def dominance_violations(a: SymmetricTensor) -> list[DominanceViolation]:
    """Pairs breaking the zero-entry dominance property of CP tensors.

    A zero entry whose distinct-index set is contained in that of a positive
    entry cannot occur in a completely positive tensor.  An empty result is
    necessary, not sufficient, for complete positivity.
    """
    a.check_nonnegative()
    by_set: dict[frozenset, list] = {}
    for k in a.entries:
        by_set.setdefault(distinct(k), []).append(k)
    out = []
    for z in a.all_indices():
        if z in a.entries:
            continue
        dz = distinct(z)
        for ds, positives in by_set.items():
            if dz <= ds:
                out.extend(DominanceViolation(z, p) for p in positives)
    return out


def random_cp(n: int, m: int, num_atoms: int, max_support: int, seed=None):
    """Random CP tensor together with the decomposition that built it.

    Each atom has a uniformly random support of size ``1..max_support``,
    entries uniform in (0, 1] on the support, unit 2-norm, and a weight
    uniform in (0.5, 2).  Randomness comes from ``numpy.random.default_rng``
    (PCG64) seeded with ``seed``.

    Returns
    -------
    tensor : SymmetricTensor
    witness : Decomposition
    """
    if not 1 <= max_support <= n:
        raise ValueError(f"max_support must be in 1..{n}, got {max_support}")
    rng = np.random.default_rng(seed)
    atoms = []
    for _ in range(num_atoms):
        size = int(rng.integers(1, max_support + 1))
        support = np.sort(rng.choice(n, size=size, replace=False))
        v = np.zeros(n)
        v[support] = 1.0 - rng.random(size)
        v /= np.linalg.norm(v)
        w = float(rng.uniform(0.5, 2.0))
        atoms.append(Atom(w, v, tuple(int(i) + 1 for i in support)))
    d = Decomposition(m, n, atoms)
    return from_decomposition(d), d


def binary_sparse_count(n: int, m: int, nzd: float) -> int:
    """Number of ones in :func:`random_binary_sparse` output."""
    off = num_canonical(n, m) - n
    # exact decimal product, so 0.6 * 10 is 6 and not 6.000000000000001
    return math.ceil(Fraction(repr(float(nzd))) * off) + n


def random_binary_sparse(n: int, m: int, nzd: float, seed=None) -> SymmetricTensor:
    """Symmetric 0/1 tensor with unit diagonal and a random off-diagonal pattern.

    Exactly ``ceil(nzd * (C(n+m-1, m) - n))`` off-diagonal canonical indices
    are set to one, drawn uniformly without replacement.
    """
    if not 0 <= nzd <= 1:
        raise ValueError(f"nzd must be in [0, 1], got {nzd}")
    rng = np.random.default_rng(seed)
    off = [k for k in iter_canonical(n, m) if k[0] != k[-1]]
    count = binary_sparse_count(n, m, nzd) - n
    chosen = rng.choice(len(off), size=count, replace=False) if count else []
    entries = {(i,) * m: 1.0 for i in range(1, n + 1)}
    for j in chosen:
        entries[off[int(j)]] = 1.0
    return SymmetricTensor(m, n, entries)
