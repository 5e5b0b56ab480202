"""Decide complete positivity and produce a decomposition.

The pipeline screens the zero pattern with the clique cover, then climbs the
clique-sparse moment hierarchy: an infeasible level proves the tensor is not
completely positive, a flat optimal level yields atoms per clique, and the
assembled decomposition is accepted only if it reconstructs the tensor.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import least_squares

from .cliques import CliqueSet, maximal_cliques, necessary_condition
from .errors import ExtractionFailed
from .extraction import (DEFAULT_RANK_TOL, AtomicMeasure, CliqueExtraction, FlatnessReport,
                         check_flatness, extract_atoms)
from .moments import (ConicProblem, assemble_dense, assemble_sparse, monomial_basis,
                      random_sos_objective)
from .sdp import (CertificateReport, InfeasibilityCertificate, SolveOptions, Status, solve,
                  verify_certificate)
from .tensor import Atom, Decomposition, SymmetricTensor, from_decomposition, l1_distance

D_K = 1
WEIGHT_DROP = 1e-8
NEG_CLAMP = 1e-6
SPHERE_TOL = 1e-6
MERGE_TOL = 1e-6


def default_level(m: int) -> int:
    return math.ceil((m + 1) / 2)


def default_objective_degree(m: int) -> int:
    """Smallest even degree strictly above ``m``."""
    return 2 * math.ceil((m + 1) / 2)


@dataclass
class DecomposeOptions:
    level: int | None = None
    max_level: int | None = None
    objective_degree: int | None = None
    seed: int = 0
    rank_tol: float = DEFAULT_RANK_TOL
    recon_tol: float = 1e-5
    dense: bool = False
    force_extract: bool = False
    merge_atoms: bool = True
    retry_seed: bool = True
    refine: bool = True
    approx_tol: float = 1e-5
    moment_tol: float = 1e-4
    jobs: int = 1
    solve: SolveOptions = field(default_factory=SolveOptions)
    backend: object = None


class VerdictKind(str, Enum):
    CP = "CompletelyPositive"
    NOT_CP = "NotCompletelyPositive"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class NegativeEntry:
    entries: list


@dataclass
class CliqueViolation:
    cliques: CliqueSet
    uncovered: list


@dataclass
class SdpInfeasibility:
    level: int
    kind: str
    cliques: CliqueSet
    certificate: InfeasibilityCertificate
    report: CertificateReport


@dataclass
class LevelDiagnostics:
    level: int
    seed: int
    objective_degree: int
    status: str
    message: str = ""
    objective: float | None = None
    problem: dict = field(default_factory=dict)
    flatness: list[FlatnessReport] = field(default_factory=list)
    errors: list[str] = field(default_factory=list)
    solve_time: float = 0.0


@dataclass
class CpVerdict:
    kind: VerdictKind
    decomposition: Decomposition | None = None
    certificate: object = None
    cliques: CliqueSet | None = None
    levels: list[int] = field(default_factory=list)
    reconstruction_error: float | None = None
    diagnostics: list[LevelDiagnostics] = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def is_cp(self) -> bool:
        return self.kind is VerdictKind.CP


def _clean_measure(mu: AtomicMeasure, clique, n: int, m: int) -> list[Atom]:
    atoms = []
    for w, u in zip(mu.weights, mu.points):
        if w < WEIGHT_DROP:
            continue
        if np.min(u) < -NEG_CLAMP:
            raise ExtractionFailed(f"atom has component {np.min(u):.2e} below zero")
        u = np.clip(u, 0.0, None)
        norm = float(np.linalg.norm(u))
        if norm < SPHERE_TOL:
            continue
        # keep the atom's tensor contribution w u^(x)m while moving u onto the sphere
        w = w * norm ** m
        v = np.zeros(n)
        v[[i - 1 for i in clique]] = u / norm
        atoms.append(Atom(float(w), v, tuple(clique)))
    return atoms


def merge_atoms(atoms: list[Atom], tol: float = MERGE_TOL) -> list[Atom]:
    """Combine atoms whose points coincide within ``tol``, summing weights."""
    out: list[Atom] = []
    for a in atoms:
        for j, b in enumerate(out):
            if np.max(np.abs(a.vector - b.vector)) <= tol:
                out[j] = Atom(b.weight + a.weight, b.vector, b.clique)
                break
        else:
            out.append(a)
    return out


def _covered_exponents(order: int, n: int, cliques) -> np.ndarray:
    """Exponents of all degree-``order`` monomials supported inside some clique."""
    rows = []
    for cl in cliques:
        basis = monomial_basis(len(cl), order)
        local = basis.exponents[basis.size_upto(order - 1):]
        e = np.zeros((local.shape[0], n), dtype=np.int64)
        e[:, [v - 1 for v in cl]] = local
        rows.append(e)
    return np.unique(np.vstack(rows), axis=0)


def refine_atoms(a: SymmetricTensor, atoms: list[Atom]) -> list[Atom]:
    """Polish atoms by nonnegative least squares on the tensor entries.

    Each atom is carried as ``u = w^(1/m) v`` restricted to its clique, so the
    model entry at exponent ``alpha`` is ``sum_r u_r^alpha`` and the sphere
    constraint disappears.  Residuals are weighted by the square root of the
    orbit size, which makes the objective the squared Frobenius distance.
    """
    if not atoms:
        return atoms
    m, n = a.order, a.dim
    E = _covered_exponents(m, n, [at.clique for at in atoms])
    fact = [math.factorial(k) for k in range(m + 1)]
    orbit = np.array([fact[m] / np.prod([fact[k] for k in e]) for e in E])
    sw = np.sqrt(orbit)
    target = np.array([a[tuple(np.repeat(np.arange(1, n + 1), e))] for e in E])
    supports = [np.array([v - 1 for v in at.clique]) for at in atoms]
    offsets = np.cumsum([0] + [len(s) for s in supports])

    def unpack(x):
        U = np.zeros((len(atoms), n))
        for r, s in enumerate(supports):
            U[r, s] = x[offsets[r]:offsets[r + 1]]
        return U

    def resid(x):
        U = unpack(x)
        return sw * (np.prod(U[:, None, :] ** E[None], axis=2).sum(axis=0) - target)

    def jac(x):
        U = unpack(x)
        J = np.zeros((len(E), offsets[-1]))
        for r, s in enumerate(supports):
            for col, j in enumerate(s):
                Ej = E.copy()
                Ej[:, j] -= 1
                ok = Ej[:, j] >= 0
                Ej[~ok, j] = 0
                J[:, offsets[r] + col] = np.where(ok, E[:, j] * np.prod(U[r] ** Ej, axis=1), 0.0)
        return sw[:, None] * J

    x0 = np.concatenate([(at.weight ** (1.0 / m)) * at.vector[s] for at, s in zip(atoms, supports)])
    sol = least_squares(resid, x0, jac=jac, bounds=(0.0, np.inf), method="trf",
                        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200)
    out = []
    for at, u in zip(atoms, unpack(sol.x)):
        norm = float(np.linalg.norm(u))
        if norm ** m < WEIGHT_DROP:
            continue
        out.append(Atom(norm ** m, u / norm, at.clique))
    return out


def _extract_group(z, clique, t, t0_flat, opts: DecomposeOptions) -> CliqueExtraction:
    rep = check_flatness(z, t, t0_flat, D_K, opts.rank_tol)
    out = CliqueExtraction(tuple(clique), rep)
    if not rep.flat and not opts.force_extract:
        out.error = "not flat"
        return out
    s = rep.level if rep.flat else t
    r = rep.rank if rep.flat else rep.ranks[t - D_K]
    try:
        out.measure = extract_atoms(z, r, s, D_K, seed=opts.seed, rel_tol=opts.moment_tol)
    except ExtractionFailed as exc:
        out.error = str(exc)
    return out


def _build_problem(a, f, cliques, t, dense) -> ConicProblem:
    return assemble_dense(a, f, t) if dense else assemble_sparse(a, f, cliques, t)


def decompose(a: SymmetricTensor, opts: DecomposeOptions | None = None) -> CpVerdict:
    """Decide whether ``a`` is completely positive.

    Returns a :class:`CpVerdict`: ``CompletelyPositive`` with a verified
    decomposition, ``NotCompletelyPositive`` with a negative-entry, clique
    or SDP-infeasibility certificate, or ``Inconclusive`` when the level cap
    is reached without either.
    """
    opts = opts or DecomposeOptions()
    timings = {"cliques": 0.0, "assembly": 0.0, "sdp": 0.0, "extraction": 0.0}
    t_start = time.perf_counter()

    neg = a.negative_entries()
    if neg:
        return CpVerdict(VerdictKind.NOT_CP, certificate=NegativeEntry(neg), timings=timings)

    tic = time.perf_counter()
    cliques = maximal_cliques(a)
    screen = necessary_condition(a, cliques)
    timings["cliques"] = time.perf_counter() - tic
    if not screen.passed:
        timings["total"] = time.perf_counter() - t_start
        return CpVerdict(VerdictKind.NOT_CP, certificate=CliqueViolation(cliques, screen.uncovered),
                         cliques=cliques, timings=timings)

    m, n = a.order, a.dim
    base_degree = opts.objective_degree or default_objective_degree(m)
    first = opts.level or default_level(m)
    first = max(first, math.ceil(m / 2))
    last = opts.max_level or first + 2
    seeds = [opts.seed] + ([opts.seed + 1] if opts.retry_seed else [])
    verdict = CpVerdict(VerdictKind.INCONCLUSIVE, cliques=cliques, timings=timings)
    full = CliqueSet(((tuple(range(1, n + 1))),), n)

    for seed in seeds:
        for t in range(first, last + 1):
            degree = min(base_degree, 2 * t)
            diag = LevelDiagnostics(t, seed, degree, "")
            verdict.diagnostics.append(diag)
            verdict.levels.append(t)

            tic = time.perf_counter()
            f = random_sos_objective(n, degree, seed=seed)
            p = _build_problem(a, f, cliques, t, opts.dense)
            timings["assembly"] += time.perf_counter() - tic
            diag.problem = p.summary()

            tic = time.perf_counter()
            res = solve(p, opts.solve, opts.backend)
            diag.solve_time = time.perf_counter() - tic
            timings["sdp"] += diag.solve_time
            diag.status, diag.message = res.status.value, res.message

            if res.status is Status.PRIMAL_INFEASIBLE:
                report = verify_certificate(p, res.certificate, tol=max(opts.solve.eps_feas, 1e-8))
                verdict.kind = VerdictKind.NOT_CP
                verdict.certificate = SdpInfeasibility(t, p.kind, full if opts.dense else cliques,
                                                       res.certificate, report)
                timings["total"] = time.perf_counter() - t_start
                return verdict
            usable = res.status is Status.OPTIMAL or (
                res.approximate and res.residuals is not None and res.residuals.ok(opts.approx_tol))
            if not usable:
                continue
            diag.objective = res.objective

            tic = time.perf_counter()
            t0_flat = max(math.ceil(degree / 2), math.ceil(m / 2), 1)
            groups = full.cliques if opts.dense else cliques.cliques
            work = list(zip(res.tms, groups))
            if opts.jobs > 1 and len(work) > 1:
                with ThreadPoolExecutor(opts.jobs) as pool:
                    parts = list(pool.map(lambda zc: _extract_group(zc[0], zc[1], t, t0_flat, opts), work))
            else:
                parts = [_extract_group(z, c, t, t0_flat, opts) for z, c in work]
            diag.flatness = [e.flatness for e in parts]
            diag.errors = [f"{e.clique}: {e.error}" for e in parts if e.error]
            decomposition, err = None, None
            if not diag.errors:
                try:
                    atoms = []
                    for e in parts:
                        atoms += _clean_measure(e.measure, e.clique, n, m)
                    if opts.merge_atoms:
                        atoms = merge_atoms(atoms)
                    decomposition = Decomposition(m, n, atoms)
                    err = l1_distance(from_decomposition(decomposition), a)
                    if opts.refine and err > 0:
                        polished = Decomposition(m, n, refine_atoms(a, atoms))
                        err2 = l1_distance(from_decomposition(polished), a)
                        if err2 < err:
                            decomposition, err = polished, err2
                except (ExtractionFailed, ValueError) as exc:
                    diag.errors.append(str(exc))
            timings["extraction"] += time.perf_counter() - tic
            if decomposition is not None:
                verdict.reconstruction_error = err
                if err <= opts.recon_tol:
                    verdict.kind = VerdictKind.CP
                    verdict.decomposition = decomposition
                    timings["total"] = time.perf_counter() - t_start
                    return verdict
                diag.errors.append(f"reconstruction error {err:.2e} above {opts.recon_tol:.0e}")
    timings["total"] = time.perf_counter() - t_start
    return verdict


# ---------------------------------------------------------------- serialization and re-checks

def certificate_to_dict(cert) -> dict:
    if isinstance(cert, NegativeEntry):
        return {"type": "NegativeEntry", "entries": [[list(k), v] for k, v in cert.entries]}
    if isinstance(cert, CliqueViolation):
        return {"type": "CliqueViolation", "cliques": [list(c) for c in cert.cliques],
                "uncovered": [list(i) for i in cert.uncovered]}
    if isinstance(cert, SdpInfeasibility):
        return {"type": "SdpInfeasibility", "level": cert.level, "kind": cert.kind,
                "cliques": [list(c) for c in cert.cliques], **cert.certificate.to_dict(),
                "report": {"valid": cert.report.valid,
                           "dual_objective": cert.report.dual_objective,
                           "stationarity_residual": cert.report.stationarity_residual,
                           "min_eigenvalue": cert.report.min_eigenvalue}}
    raise TypeError(f"unknown certificate {type(cert).__name__}")


def recheck_certificate(a: SymmetricTensor, d: dict, tol: float = 1e-8) -> bool:
    """Re-verify a serialized certificate against ``a`` from scratch.

    SDP certificates only involve the constraints, so the relaxation is
    rebuilt from the stored level and cliques with an arbitrary objective.
    """
    kind = d["type"]
    if kind == "NegativeEntry":
        return bool(d["entries"]) and all(a[tuple(k)] < 0 for k, _ in d["entries"])
    if kind == "CliqueViolation":
        cliques = [set(c) for c in maximal_cliques(a).cliques]
        return bool(d["uncovered"]) and all(
            a[tuple(i)] > 0 and not any(set(i) <= c for c in cliques) for i in d["uncovered"])
    if kind == "SdpInfeasibility":
        t = int(d["level"])
        f = random_sos_objective(a.dim, min(default_objective_degree(a.order), 2 * t), seed=0)
        cl = CliqueSet(tuple(tuple(c) for c in d["cliques"]), a.dim)
        p = assemble_dense(a, f, t) if d["kind"] == "dense" else assemble_sparse(a, f, cl, t)
        return verify_certificate(p, InfeasibilityCertificate.from_dict(d), tol).valid
    raise ValueError(f"unknown certificate type {kind!r}")


def verdict_to_dict(v: CpVerdict, timings: bool = True) -> dict:
    """Machine-readable verdict; with ``timings=False`` it is deterministic per seed."""
    from .io import decomposition_to_dict

    out = {
        "verdict": v.kind.value,
        "levels": v.levels,
        "cliques": None if v.cliques is None else [list(c) for c in v.cliques],
        "reconstruction_error": v.reconstruction_error,
        "decomposition": None if v.decomposition is None
        else decomposition_to_dict(v.decomposition, v.reconstruction_error),
        "certificate": None if v.certificate is None else certificate_to_dict(v.certificate),
        "diagnostics": [{
            "level": d.level, "seed": d.seed, "objective_degree": d.objective_degree,
            "status": d.status, "message": d.message, "objective": d.objective,
            "problem": d.problem, "errors": d.errors,
            "flatness": [{"ranks": f.ranks, "flat": f.flat, "rank": f.rank, "level": f.level}
                         for f in d.flatness],
        } for d in v.diagnostics],
    }
    if timings:
        out["timings"] = v.timings
    return out
