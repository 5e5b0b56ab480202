"""Flatness checks, atom extraction and sparse-to-dense lifting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .cliques import CliqueSet
from .errors import ExtractionFailed
from .moments import Tms, monomial_basis

DEFAULT_RANK_TOL = 1e-6


def numerical_rank(matrix, tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above ``tol * max(1, sigma_max)``."""
    s = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    if s.size == 0:
        return 0
    return int(np.sum(s > tol * max(1.0, s[0])))


@dataclass
class FlatnessReport:
    ranks: list[int]
    flat: bool
    rank: int | None = None
    level: int | None = None
    tol: float = DEFAULT_RANK_TOL


def check_flatness(z: Tms, t: int, t0: int = 1, d_K: int = 1,
                   tol: float = DEFAULT_RANK_TOL) -> FlatnessReport:
    """Find the first ``s`` in ``t0..t`` with ``rank M_s == rank M_{s - d_K}``.

    ``ranks[s]`` is the numerical rank of ``M_s`` for ``s = 0..t``.
    """
    if z.degree < 2 * t:
        raise ValueError(f"tms of degree {z.degree} cannot give M_{t}")
    ranks = [numerical_rank(z.moment_matrix(s), tol) for s in range(t + 1)]
    for s in range(max(t0, d_K), t + 1):
        if ranks[s] == ranks[s - d_K]:
            return FlatnessReport(ranks, True, ranks[s], s, tol)
    return FlatnessReport(ranks, False, tol=tol)


@dataclass
class AtomicMeasure:
    weights: np.ndarray
    points: np.ndarray
    residual: float = 0.0

    def __len__(self) -> int:
        return len(self.weights)

    def tms(self, degree: int) -> Tms:
        return Tms.from_measure(self.points, self.weights, degree)


def extract_atoms(z: Tms, r: int, s: int | None = None, d_K: int = 1,
                  seed=0, retries: int = 5, rel_tol: float = 1e-6) -> AtomicMeasure:
    """Recover an ``r``-atomic measure from a flat moment sequence.

    Factor ``M_s = V V^T`` with ``V`` of rank ``r``; the rows of ``V`` for
    monomials of degree ``< s`` span the evaluation space, and multiplying by
    ``x_j`` maps them to the rows of ``x_j * monomial``.  Solving for these
    shift operators gives ``r x r`` symmetric matrices that share the
    eigenvectors; a random positive combination separates the atoms, whose
    coordinates are then read off as Rayleigh quotients.  Weights come from a
    nonnegative least-squares fit to the moments of degree up to
    ``2 (s - d_K)``.

    Raises
    ------
    ExtractionFailed
        If eigenvalues stay clustered over ``retries`` random combinations,
        or the fitted measure does not reproduce the moments to ``rel_tol``.
    """
    k = z.nvars
    s = z.degree // 2 if s is None else s
    low = s - d_K
    if r == 0:
        return AtomicMeasure(np.zeros(0), np.zeros((0, k)))
    if low < 0 or math.comb(k + low, low) < r:
        raise ExtractionFailed(f"level s={s} too small for rank {r}")
    M = z.moment_matrix(s)
    w, U = np.linalg.eigh(0.5 * (M + M.T))
    w, U = w[::-1][:r], U[:, ::-1][:, :r]
    if w[-1] <= 0:
        raise ExtractionFailed(f"moment matrix has fewer than {r} positive eigenvalues")
    V = U * np.sqrt(w)
    basis_s = monomial_basis(k, s)
    E_low = basis_s.exponents[: math.comb(k + low, low)]
    V_low = V[: E_low.shape[0]]
    pinv = np.linalg.pinv(V_low)
    shifts = []
    for j in range(k):
        shifted = E_low.copy()
        shifted[:, j] += 1
        N = pinv @ V[basis_s.positions(shifted)]
        shifts.append(0.5 * (N + N.T))

    rng = np.random.default_rng(seed)
    Q = None
    for _ in range(retries + 1):
        c = rng.dirichlet(np.ones(k))
        ev, vec = np.linalg.eigh(sum(ci * Nj for ci, Nj in zip(c, shifts)))
        spread = max(1.0, float(np.max(np.abs(ev))))
        if r == 1 or np.min(np.diff(ev)) > 1e-6 * spread:
            Q = vec
            break
    if Q is None:
        raise ExtractionFailed("eigenvalues of the multiplication matrices are not separated")
    points = np.column_stack([np.einsum("ir,ij,jr->r", Q, Nj, Q) for Nj in shifts])

    target = z.truncate(2 * low).values
    E = monomial_basis(k, 2 * low).exponents
    cols = np.prod(points[:, None, :] ** E[None, :, :], axis=2).T
    weights, _ = nnls(cols, target)
    residual = float(np.linalg.norm(cols @ weights - target) / max(1.0, np.linalg.norm(target)))
    if residual > rel_tol:
        raise ExtractionFailed(f"extracted measure misses the moments by {residual:.2e}")
    return AtomicMeasure(weights, points, residual)


def lift_sparse(zs, c: CliqueSet, n: int, degree: int) -> Tms:
    """Ambient moment sequence ``z_a = sum_k <x^a restricted to V_k, z_k>``.

    A monomial whose support is outside every clique gets zero.
    """
    basis = monomial_basis(n, degree)
    out = np.zeros(len(basis))
    for z, clique in zip(zs, c.cliques):
        local = monomial_basis(len(clique), degree).exponents
        emb = np.zeros((local.shape[0], n), dtype=np.int64)
        emb[:, [v - 1 for v in clique]] = local
        np.add.at(out, basis.positions(emb), np.asarray(z.values, dtype=float)[: local.shape[0]])
    return Tms(n, degree, out)


@dataclass
class CliqueExtraction:
    clique: tuple[int, ...]
    flatness: FlatnessReport
    measure: AtomicMeasure | None = None
    error: str | None = None
    extra: dict = field(default_factory=dict)
