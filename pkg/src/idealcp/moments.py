"""Monomial bookkeeping and the moment relaxations as block conic problems.

Monomials are exponent tuples and are listed in graded lexicographic order
(constant first, then ``x1 > x2 > ...`` within each degree), so the basis of
degree ``s`` is a prefix of the basis of any degree ``d >= s``.  A truncated
moment sequence is stored as a vector aligned with that basis.

Two relaxations are assembled:

* the dense one over a single moment sequence in ``n`` variables, with an
  equality ``z_alpha = A_idx`` for every canonical index;
* the clique-sparse one with one moment sequence per maximal clique, coupled
  only through the equalities of the positive entries.

Each group of variables carries a moment block, one localizing block per
coordinate (nonnegativity), and a zero-constrained localizing block for the
unit sphere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .cliques import CliqueSet
from .errors import InvalidDegree, LevelTooLow, ParseError, UncoveredPositiveEntry
from .tensor import SymmetricTensor


# ---------------------------------------------------------------- monomials

def _exponents_of_degree(k: int, d: int):
    if k == 1:
        yield (d,)
        return
    for first in range(d, -1, -1):
        for rest in _exponents_of_degree(k - 1, d - first):
            yield (first,) + rest


class MonomialBasis:
    """All exponent vectors in ``k`` variables of degree at most ``degree``."""

    def __init__(self, nvars: int, degree: int):
        if nvars < 1 or degree < 0:
            raise ValueError(f"invalid basis parameters k={nvars}, t={degree}")
        self.nvars = nvars
        self.degree = degree
        exps = [e for d in range(degree + 1) for e in _exponents_of_degree(nvars, d)]
        self.exponents = np.array(exps, dtype=np.int64).reshape(len(exps), nvars)
        self.exponents.setflags(write=False)
        self._index = {e: i for i, e in enumerate(exps)}
        base = degree + 1
        if base ** nvars < 2 ** 62:
            self._weights = base ** np.arange(nvars, dtype=np.int64)
            keys = self.exponents @ self._weights
            self._order = np.argsort(keys)
            self._sorted_keys = keys[self._order]
        else:
            self._weights = None

    def __len__(self) -> int:
        return self.exponents.shape[0]

    def __iter__(self):
        return (tuple(int(x) for x in e) for e in self.exponents)

    def position(self, alpha) -> int:
        return self._index[tuple(int(x) for x in alpha)]

    def __contains__(self, alpha) -> bool:
        return tuple(int(x) for x in alpha) in self._index

    def size_upto(self, s: int) -> int:
        """Number of monomials of degree at most ``s``."""
        return math.comb(self.nvars + s, s)

    def positions(self, exps: np.ndarray) -> np.ndarray:
        """Vectorized :meth:`position` for an array of exponent rows."""
        exps = np.asarray(exps, dtype=np.int64)
        shape = exps.shape[:-1]
        flat = exps.reshape(-1, self.nvars)
        if self._weights is None:
            out = np.array([self._index[tuple(int(x) for x in e)] for e in flat], dtype=np.int64)
        else:
            keys = flat @ self._weights
            loc = np.searchsorted(self._sorted_keys, keys)
            out = self._order[loc]
        return out.reshape(shape)


@lru_cache(maxsize=None)
def monomial_basis(k: int, t: int) -> MonomialBasis:
    """Graded lexicographic monomial basis of ``k`` variables up to degree ``t``.

    >>> [tuple(e) for e in monomial_basis(2, 1)]
    [(0, 0), (1, 0), (0, 1)]
    """
    return MonomialBasis(k, t)


# ---------------------------------------------------------------- polynomials

@dataclass
class Polynomial:
    """Sparse polynomial: exponent tuple -> coefficient (no zero coefficients)."""

    nvars: int
    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for alpha, c in self.terms.items():
            alpha = tuple(int(x) for x in alpha)
            if len(alpha) != self.nvars:
                raise ValueError(f"exponent {alpha} does not have {self.nvars} entries")
            if c != 0:
                clean[alpha] = clean.get(alpha, 0.0) + float(c)
        self.terms = {a: c for a, c in clean.items() if c != 0}

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(sum(c * np.prod(x ** np.array(a)) for a, c in self.terms.items()))

    def coefficients(self, basis: MonomialBasis) -> np.ndarray:
        c = np.zeros(len(basis))
        for alpha, v in self.terms.items():
            c[basis.position(alpha)] += v
        return c

    def __add__(self, other: "Polynomial") -> "Polynomial":
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = terms.get(a, 0.0) + c
        return Polynomial(self.nvars, terms)


def variable(k: int, j: int) -> Polynomial:
    """The coordinate polynomial ``x_j`` (0-based ``j``) in ``k`` variables."""
    e = [0] * k
    e[j] = 1
    return Polynomial(k, {tuple(e): 1.0})


def sphere(k: int) -> Polynomial:
    """``x_1^2 + ... + x_k^2 - 1``."""
    terms = {(0,) * k: -1.0}
    for j in range(k):
        e = [0] * k
        e[j] = 2
        terms[tuple(e)] = 1.0
    return Polynomial(k, terms)


def restrict(f: Polynomial, vertices) -> Polynomial:
    """Set every variable outside ``vertices`` (1-based) to zero and re-index.

    The remaining variables are numbered by position in sorted ``vertices``.
    """
    keep = sorted(vertices)
    if not keep:
        raise ValueError("restriction set must be nonempty")
    cols = [v - 1 for v in keep]
    outside = np.ones(f.nvars, dtype=bool)
    outside[cols] = False
    terms = {}
    for alpha, c in f.terms.items():
        a = np.array(alpha)
        if np.any(a[outside]):
            continue
        terms[tuple(int(x) for x in a[cols])] = c
    return Polynomial(len(keep), terms)


def gram_polynomial(gram: np.ndarray, k: int, half_degree: int) -> Polynomial:
    """``[x]_h^T Q [x]_h`` for a Gram matrix ``Q`` over the degree-``h`` basis."""
    basis = monomial_basis(k, half_degree)
    gram = np.asarray(gram, dtype=float)
    if gram.shape != (len(basis), len(basis)):
        raise ValueError(f"Gram matrix must be {len(basis)}x{len(basis)}")
    E = basis.exponents
    full = monomial_basis(k, 2 * half_degree)
    pos = full.positions(E[:, None, :] + E[None, :, :])
    coef = np.bincount(pos.ravel(), weights=gram.ravel(), minlength=len(full))
    return Polynomial(k, {tuple(int(x) for x in full.exponents[i]): coef[i]
                          for i in np.flatnonzero(coef)})


def random_sos_objective(k: int, d: int, seed=None, eps: float = 1e-2,
                         G: np.ndarray | None = None) -> Polynomial:
    """Random polynomial in the interior of the SOS cone of degree ``d``.

    Built as ``[x]^T (G^T G + eps I) [x]`` with ``G`` square standard normal.
    Every principal submatrix of the Gram matrix is positive definite, so all
    restrictions to coordinate subsets stay interior as well.  Pass ``G`` to
    fix the factor instead of drawing it.
    """
    if d < 2 or d % 2:
        raise InvalidDegree(f"objective degree must be even and >= 2, got {d}")
    h = d // 2
    size = math.comb(k + h, h)
    if G is None:
        G = np.random.default_rng(seed).standard_normal((size, size))
    G = np.asarray(G, dtype=float)
    return gram_polynomial(G.T @ G + eps * np.eye(size), k, h)


# ---------------------------------------------------------------- moment sequences

@dataclass
class Tms:
    """Truncated moment sequence indexed by ``monomial_basis(nvars, degree)``."""

    nvars: int
    degree: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        n = math.comb(self.nvars + self.degree, self.degree)
        if self.values.shape != (n,):
            raise ValueError(f"tms of degree {self.degree} in {self.nvars} vars needs {n} values")

    @property
    def basis(self) -> MonomialBasis:
        return monomial_basis(self.nvars, self.degree)

    @property
    def mass(self) -> float:
        return float(self.values[0])

    def __getitem__(self, alpha) -> float:
        return float(self.values[self.basis.position(alpha)])

    def truncate(self, degree: int) -> "Tms":
        return Tms(self.nvars, degree, self.values[:math.comb(self.nvars + degree, degree)])

    def moment_matrix(self, s: int) -> np.ndarray:
        return self.values[moment_matrix_structure(self.nvars, s)]

    @classmethod
    def from_measure(cls, points, weights, degree: int) -> "Tms":
        """Exact moments ``sum_i w_i [u_i]_degree`` of an atomic measure."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        weights = np.asarray(weights, dtype=float)
        k = points.shape[1]
        E = monomial_basis(k, degree).exponents
        vals = np.zeros(len(E))
        for w, u in zip(weights, points):
            vals += w * np.prod(u[None, :] ** E, axis=1)
        return cls(k, degree, vals)


def monomial_vector(u, degree: int) -> np.ndarray:
    """``[u]_degree``: every monomial of degree at most ``degree`` evaluated at ``u``."""
    u = np.asarray(u, dtype=float)
    E = monomial_basis(u.size, degree).exponents
    return np.prod(u[None, :] ** E, axis=1)


# ---------------------------------------------------------------- block structures

@lru_cache(maxsize=None)
def moment_matrix_structure(k: int, t: int) -> np.ndarray:
    """Index map of ``M_t``: cell ``(b, c)`` holds the position of ``b + c``.

    Positions refer to ``monomial_basis(k, 2t)``.
    """
    rows = monomial_basis(k, t).exponents
    full = monomial_basis(k, 2 * t)
    out = full.positions(rows[:, None, :] + rows[None, :, :])
    out.setflags(write=False)
    return out


@dataclass
class LinearMatrix:
    """Symmetric matrix whose cells are linear forms of a variable vector.

    Only cells with ``row <= col`` are listed; one cell may have several
    terms.  ``vars`` index the variable vector the matrix is evaluated on.
    """

    dim: int
    rows: np.ndarray
    cols: np.ndarray
    vars: np.ndarray
    coefs: np.ndarray

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        M = np.zeros((self.dim, self.dim))
        np.add.at(M, (self.rows, self.cols), self.coefs * z[self.vars])
        return M + np.triu(M, 1).T

    def cell(self, i: int, j: int) -> dict:
        i, j = min(i, j), max(i, j)
        sel = (self.rows == i) & (self.cols == j)
        out: dict = {}
        for v, c in zip(self.vars[sel], self.coefs[sel]):
            out[int(v)] = out.get(int(v), 0.0) + float(c)
        return out

    def shifted(self, offset: int) -> "LinearMatrix":
        return LinearMatrix(self.dim, self.rows, self.cols, self.vars + offset, self.coefs)


def localizing_structure(q: Polynomial, t: int) -> LinearMatrix:
    """The localizing matrix of ``q`` at level ``t``.

    Rows and columns run over monomials of degree at most
    ``t - ceil(deg q / 2)``; cell ``(b, c)`` is ``sum_a q_a z_{a+b+c}`` with
    variables positioned in ``monomial_basis(k, 2t)``.
    """
    k = q.nvars
    h = t - math.ceil(q.degree / 2)
    if h < 0:
        raise LevelTooLow(f"deg(q) = {q.degree} exceeds 2t = {2 * t}")
    rows = monomial_basis(k, h).exponents
    full = monomial_basis(k, 2 * t)
    iu, ju = np.triu_indices(len(rows))
    pair = rows[iu] + rows[ju]
    R, C, V, W = [], [], [], []
    for alpha, coef in q.terms.items():
        R.append(iu)
        C.append(ju)
        V.append(full.positions(pair + np.array(alpha)))
        W.append(np.full(iu.size, coef))
    return LinearMatrix(len(rows), np.concatenate(R), np.concatenate(C),
                        np.concatenate(V), np.concatenate(W))


def _moment_linear_matrix(k: int, t: int) -> LinearMatrix:
    idx = moment_matrix_structure(k, t)
    iu, ju = np.triu_indices(idx.shape[0])
    return LinearMatrix(idx.shape[0], iu, ju, idx[iu, ju].astype(np.int64), np.ones(iu.size))


# ---------------------------------------------------------------- conic problems

@dataclass
class Block:
    matrix: LinearMatrix
    group: int
    label: str

    @property
    def dim(self) -> int:
        return self.matrix.dim


@dataclass
class BlockGroup:
    """One moment sequence: ``nvars`` local variables for ``clique`` (1-based)."""

    clique: tuple[int, ...]
    offset: int
    degree: int

    @property
    def nvars(self) -> int:
        return len(self.clique)

    @property
    def size(self) -> int:
        return math.comb(self.nvars + self.degree, self.degree)

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.size)


@dataclass
class ConicProblem:
    """Minimize ``objective @ x`` subject to ``eq_matrix @ x = eq_rhs``,
    every PSD block ``>= 0`` and every zero block ``= 0``.

    ``x`` is the concatenation of one moment sequence per group.
    """

    kind: str
    order: int
    level: int
    nvars: int
    objective: np.ndarray
    eq_matrix: sp.csr_matrix
    eq_rhs: np.ndarray
    eq_labels: list
    psd_blocks: list[Block]
    zero_blocks: list[Block]
    groups: list[BlockGroup]

    @property
    def max_psd_block(self) -> int:
        return max((b.dim for b in self.psd_blocks), default=0)

    @property
    def num_equalities(self) -> int:
        return self.eq_matrix.shape[0]

    def group_tms(self, x) -> list[Tms]:
        x = np.asarray(x, dtype=float)
        return [Tms(g.nvars, g.degree, x[g.slice]) for g in self.groups]

    def objective_value(self, x) -> float:
        return float(self.objective @ np.asarray(x, dtype=float))

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "level": self.level,
            "variables": self.nvars,
            "groups": len(self.groups),
            "equalities": self.num_equalities,
            "psd_blocks": len(self.psd_blocks),
            "max_psd_block": self.max_psd_block,
        }


def _check_level(a: SymmetricTensor, f: Polynomial, t: int):
    if 2 * t < a.order:
        raise LevelTooLow(f"level t={t} too low for order m={a.order} (need 2t >= m)")
    if 2 * t < f.degree:
        raise LevelTooLow(f"level t={t} too low for objective degree {f.degree}")


def _group_blocks(k: int, t: int, offset: int, g: int):
    psd = [Block(_moment_linear_matrix(k, t).shifted(offset), g, "moment")]
    for j in range(k):
        psd.append(Block(localizing_structure(variable(k, j), t).shifted(offset), g, f"loc_x{j + 1}"))
    zero = [Block(localizing_structure(sphere(k), t).shifted(offset), g, "sphere")]
    return psd, zero


def _counts(idx, vertices) -> tuple[int, ...]:
    pos = {v: p for p, v in enumerate(vertices)}
    e = [0] * len(vertices)
    for i in idx:
        e[pos[i]] += 1
    return tuple(e)


def assemble_dense(a: SymmetricTensor, f: Polynomial, t: int) -> ConicProblem:
    """Dense level-``t`` moment relaxation over one sequence in ``n`` variables.

    Every canonical index, zeros included, fixes its moment to the tensor
    entry.
    """
    _check_level(a, f, t)
    n = a.dim
    basis = monomial_basis(n, 2 * t)
    verts = tuple(range(1, n + 1))
    labels = list(a.all_indices())
    cols = np.array([basis.position(_counts(idx, verts)) for idx in labels], dtype=np.int64)
    rhs = np.array([a.entries.get(idx, 0.0) for idx in labels])
    eq = sp.csr_matrix((np.ones(len(labels)), (np.arange(len(labels)), cols)),
                       shape=(len(labels), len(basis)))
    psd, zero = _group_blocks(n, t, 0, 0)
    if f.nvars != n:
        raise ValueError(f"objective has {f.nvars} variables, tensor dimension is {n}")
    c = f.coefficients(basis)
    return ConicProblem("dense", a.order, t, len(basis), c, eq, rhs, labels, psd, zero,
                        [BlockGroup(verts, 0, 2 * t)])


def assemble_sparse(a: SymmetricTensor, f: Polynomial, c: CliqueSet, t: int) -> ConicProblem:
    """Clique-sparse level-``t`` relaxation with one moment sequence per clique.

    Each positive entry gives one coupling equality summing the matching
    moment of every clique that contains its index set, in clique order.
    """
    _check_level(a, f, t)
    groups, psd, zero = [], [], []
    offset = 0
    objective = []
    for g, clique in enumerate(c.cliques):
        grp = BlockGroup(tuple(clique), offset, 2 * t)
        groups.append(grp)
        p, z = _group_blocks(grp.nvars, t, offset, g)
        psd += p
        zero += z
        objective.append(restrict(f, clique).coefficients(monomial_basis(grp.nvars, 2 * t)))
        offset += grp.size
    clique_sets = [set(cl) for cl in c.cliques]
    rows, cols, labels, rhs, uncovered = [], [], [], [], []
    for idx, val in a.items():
        if val <= 0:
            continue
        ds = set(idx)
        hosts = [g for g, s in enumerate(clique_sets) if ds <= s]
        if not hosts:
            uncovered.append(idx)
            continue
        r = len(labels)
        for g in hosts:
            grp = groups[g]
            rows.append(r)
            cols.append(grp.offset + monomial_basis(grp.nvars, 2 * t).position(_counts(idx, grp.clique)))
        labels.append(idx)
        rhs.append(val)
    if uncovered:
        raise UncoveredPositiveEntry(uncovered)
    eq = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(labels), offset))
    obj = np.concatenate(objective) if objective else np.zeros(0)
    return ConicProblem("sparse", a.order, t, offset, obj, eq, np.array(rhs, dtype=float),
                        labels, psd, zero, groups)


# ---------------------------------------------------------------- text format

PROBLEM_FORMAT_DOC = """\
Conic problem text format (one record per line, '#' starts a comment):

  conic <kind> <order> <level> <nvars>
  group <g> <offset> <degree> <v_1> ... <v_k>      clique vertices, 1-based
  obj <var> <coef>                                  nonzero objective terms
  eq <r> <rhs> <i_1> ... <i_m>                      equality r, labelled by its index
  eqc <r> <var> <coef>                              term of equality r
  psd <b> <group> <dim> <label>                     PSD block b
  zero <b> <group> <dim> <label>                    zero-constrained block b
  cell <b> <row> <col> <var> <coef>                 term of upper-triangle cell

Variables, rows, columns, blocks and groups are 0-based.  Zero blocks and
PSD blocks share the block counter; a cell belongs to the block of that
number.
"""


def write_problem(p: ConicProblem, fh) -> None:
    fh.write(f"conic {p.kind} {p.order} {p.level} {p.nvars}\n")
    for g, grp in enumerate(p.groups):
        fh.write(f"group {g} {grp.offset} {grp.degree} {' '.join(map(str, grp.clique))}\n")
    for j in np.flatnonzero(p.objective):
        fh.write(f"obj {j} {float(p.objective[j])!r}\n")
    coo = p.eq_matrix.tocoo()
    for r, (rhs, lab) in enumerate(zip(p.eq_rhs, p.eq_labels)):
        fh.write(f"eq {r} {float(rhs)!r} {' '.join(map(str, lab))}\n")
    for r, j, v in zip(coo.row, coo.col, coo.data):
        fh.write(f"eqc {r} {j} {float(v)!r}\n")
    b = 0
    for kind, blocks in (("psd", p.psd_blocks), ("zero", p.zero_blocks)):
        for blk in blocks:
            fh.write(f"{kind} {b} {blk.group} {blk.dim} {blk.label}\n")
            M = blk.matrix
            for i, j, v, c in zip(M.rows, M.cols, M.vars, M.coefs):
                fh.write(f"cell {b} {i} {j} {v} {float(c)!r}\n")
            b += 1


def read_problem(fh) -> ConicProblem:
    header = None
    groups, obj, eqs, eqc, blocks, cells = [], {}, {}, [], {}, {}
    for lineno, line in enumerate(fh, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            tag = tok[0]
            if tag == "conic":
                header = (tok[1], int(tok[2]), int(tok[3]), int(tok[4]))
            elif tag == "group":
                groups.append(BlockGroup(tuple(int(v) for v in tok[4:]), int(tok[2]), int(tok[3])))
            elif tag == "obj":
                obj[int(tok[1])] = float(tok[2])
            elif tag == "eq":
                eqs[int(tok[1])] = (float(tok[2]), tuple(int(v) for v in tok[3:]))
            elif tag == "eqc":
                eqc.append((int(tok[1]), int(tok[2]), float(tok[3])))
            elif tag in ("psd", "zero"):
                blocks[int(tok[1])] = (tag, int(tok[2]), int(tok[3]), tok[4] if len(tok) > 4 else "")
            elif tag == "cell":
                cells.setdefault(int(tok[1]), []).append(
                    (int(tok[2]), int(tok[3]), int(tok[4]), float(tok[5])))
            else:
                raise ParseError(f"unknown record {tag!r}", lineno)
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed record: {exc}", lineno) from None
    if header is None:
        raise ParseError("missing 'conic' header")
    kind, order, level, nvars = header
    c = np.zeros(nvars)
    for j, v in obj.items():
        c[j] = v
    neq = len(eqs)
    eq = sp.csr_matrix(([v for _, _, v in eqc], ([r for r, _, _ in eqc], [j for _, j, _ in eqc])),
                       shape=(neq, nvars))
    rhs = np.array([eqs[r][0] for r in range(neq)])
    labels = [eqs[r][1] for r in range(neq)]
    psd, zero = [], []
    for b in sorted(blocks):
        tag, g, dim, label = blocks[b]
        cl = cells.get(b, [])
        arr = np.array(cl, dtype=float).reshape(len(cl), 4)
        M = LinearMatrix(dim, arr[:, 0].astype(np.int64), arr[:, 1].astype(np.int64),
                         arr[:, 2].astype(np.int64), arr[:, 3])
        (psd if tag == "psd" else zero).append(Block(M, g, label))
    return ConicProblem(kind, order, level, nvars, c, eq, rhs, labels, psd, zero, groups)
