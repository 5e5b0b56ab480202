"""Solving assembled conic problems and classifying the outcome.

Every solve ends in one of three statuses:

``Optimal``
    a point whose equality residuals and PSD-block eigenvalues were
    re-checked by :func:`verify_result`;
``PrimalInfeasible``
    only with a Farkas ray that :func:`verify_certificate` accepts;
``Unknown``
    everything else (iteration or time limits, numerical trouble,
    unverifiable output).

The default backend is Clarabel, an interior-point solver with native PSD
cones.  Any object with a ``solve(problem, options)`` method returning a
:class:`SolveResult` can be registered in :data:`BACKENDS`; the
:class:`ExternalBackend` bridges to a separate solver process through the
text formats in :mod:`idealcp.moments` and :func:`write_result`.
"""
from __future__ import annotations

import logging
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ParseError
from .moments import Block, ConicProblem, LinearMatrix, read_problem, write_problem

log = logging.getLogger(__name__)


class Status(str, Enum):
    OPTIMAL = "Optimal"
    PRIMAL_INFEASIBLE = "PrimalInfeasible"
    UNKNOWN = "Unknown"


@dataclass
class SolveOptions:
    max_iterations: int = 200
    eps_feas: float = 1e-8
    eps_gap: float = 1e-9
    time_limit: float | None = None
    backend: str = "clarabel"
    max_memory_mb: float = 2048.0
    facial_reduction: bool = True

    def __post_init__(self):
        if not (self.eps_feas > 0 and self.eps_gap > 0):
            raise ValueError("tolerances must be positive")


@dataclass
class InfeasibilityCertificate:
    """Farkas ray for the constraint system of a :class:`ConicProblem`.

    With ``A`` the stacked equalities (tensor equalities, then zero-block
    cells in :func:`equality_system` order) and ``b`` their right-hand side,
    the ray satisfies ``A^T y = sum_b L_b^*(Y_b)``, ``Y_b >= 0`` and
    ``b^T y = -1``.  For any feasible ``x`` this would give
    ``-1 = b^T y = sum_b <Y_b, L_b(x)> >= 0``.
    """

    y: np.ndarray
    psd_duals: list[np.ndarray]

    def to_dict(self) -> dict:
        return {"y": self.y.tolist(), "psd_duals": [Y.tolist() for Y in self.psd_duals]}

    @classmethod
    def from_dict(cls, d: dict) -> "InfeasibilityCertificate":
        return cls(np.array(d["y"], dtype=float), [np.array(Y, dtype=float) for Y in d["psd_duals"]])


@dataclass
class ResidualReport:
    eq_residual: float
    zero_residual: float
    min_eigenvalues: list[float]

    @property
    def min_eigenvalue(self) -> float:
        return min(self.min_eigenvalues, default=0.0)

    @property
    def max_residual(self) -> float:
        return max(self.eq_residual, self.zero_residual)

    def ok(self, tol: float) -> bool:
        return self.max_residual <= tol and self.min_eigenvalue >= -tol


@dataclass
class CertificateReport:
    valid: bool
    dual_objective: float
    stationarity_residual: float
    min_eigenvalue: float


@dataclass
class SolveResult:
    status: Status
    objective: float | None = None
    x: np.ndarray | None = None
    tms: list = field(default_factory=list)
    certificate: InfeasibilityCertificate | None = None
    wall_time: float = 0.0
    message: str = ""
    residuals: ResidualReport | None = None
    approximate: bool = False   # Unknown, but ``x`` is an unverified primal point

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


# ---------------------------------------------------------------- model-side algebra

def equality_system(p: ConicProblem):
    """Stack tensor equalities and zero-block cells into ``(A, b)``."""
    rows = [p.eq_matrix.tocsr()]
    rhs = [p.eq_rhs]
    for blk in p.zero_blocks:
        M = blk.matrix
        cell_id = M.rows * M.dim + M.cols
        uniq, inv = np.unique(cell_id, return_inverse=True)
        rows.append(sp.csr_matrix((M.coefs, (inv, M.vars)), shape=(uniq.size, p.nvars)))
        rhs.append(np.zeros(uniq.size))
    return sp.vstack(rows, format="csr"), np.concatenate(rhs)


def adjoint(blk, Y: np.ndarray, nvars: int) -> np.ndarray:
    """``L^*(Y)``: the vector ``g`` with ``g @ x == <Y, L(x)>``."""
    M = blk.matrix
    w = np.where(M.rows == M.cols, 1.0, 2.0) * Y[M.rows, M.cols] * M.coefs
    return np.bincount(M.vars, weights=w, minlength=nvars)


def verify_result(p: ConicProblem, r: SolveResult | np.ndarray) -> ResidualReport:
    """Recompute feasibility of a primal point without trusting the backend."""
    x = r.x if isinstance(r, SolveResult) else np.asarray(r, dtype=float)
    eq = p.eq_matrix @ x - p.eq_rhs
    zero = 0.0
    for blk in p.zero_blocks:
        zero = max(zero, float(np.max(np.abs(blk.matrix.evaluate(x)), initial=0.0)))
    eigs = [float(np.linalg.eigvalsh(blk.matrix.evaluate(x))[0]) for blk in p.psd_blocks]
    return ResidualReport(float(np.max(np.abs(eq), initial=0.0)), zero, eigs)


def verify_certificate(p: ConicProblem, cert: InfeasibilityCertificate,
                       tol: float = 1e-8) -> CertificateReport:
    """Check a Farkas ray after projecting its PSD parts onto the PSD cone."""
    A, b = equality_system(p)
    y = np.asarray(cert.y, dtype=float)
    if y.shape != (A.shape[0],) or len(cert.psd_duals) != len(p.psd_blocks):
        return CertificateReport(False, float("nan"), float("inf"), float("nan"))
    dual_obj = -float(b @ y)
    if not dual_obj > 0:
        return CertificateReport(False, dual_obj, float("inf"), float("nan"))
    scale = 1.0 / dual_obj
    g = A.T @ (y * scale)
    min_eig = np.inf
    for blk, Y in zip(p.psd_blocks, cert.psd_duals):
        Y = 0.5 * (Y + Y.T) * scale
        w, V = np.linalg.eigh(Y)
        min_eig = min(min_eig, float(w[0]))
        Yp = (V * np.clip(w, 0, None)) @ V.T
        g = g - adjoint(blk, Yp, p.nvars)
    res = float(np.max(np.abs(g), initial=0.0))
    return CertificateReport(res <= tol, dual_obj, res, float(min_eig))


# ---------------------------------------------------------------- presolve

@dataclass
class _Presolved:
    A: sp.csr_matrix
    b: np.ndarray
    rep: np.ndarray        # original row of each kept row
    scale: np.ndarray      # kept row = original row / scale
    trivial: InfeasibilityCertificate | None = None


def _presolve(p: ConicProblem, A: sp.csr_matrix, b: np.ndarray) -> _Presolved:
    """Drop empty rows and exact duplicates; scale rows to unit inf-norm."""
    A = A.tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    seen: dict = {}
    keep, scales = [], []
    nrows = A.shape[0]
    for i in range(nrows):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        idx, val = A.indices[lo:hi], A.data[lo:hi]
        if idx.size == 0:
            if abs(b[i]) > 0:
                y = np.zeros(nrows)
                y[i] = -1.0 / b[i]
                return _Presolved(A, b, np.array([]), np.array([]),
                                  InfeasibilityCertificate(y, [np.zeros((k.dim, k.dim)) for k in p.psd_blocks]))
            continue
        order = np.argsort(idx)
        idx, val = idx[order], val[order]
        s = val[np.argmax(np.abs(val))]
        key = (idx.tobytes(), (val / s).tobytes())
        j = seen.get(key)
        if j is not None:
            jr, js = keep[j], scales[j]
            if abs(b[i] / s - b[jr] / js) > 1e-12 * max(1.0, abs(b[i] / s)):
                y = np.zeros(nrows)
                gap = b[i] / s - b[jr] / js
                y[i], y[jr] = -1.0 / (s * gap), 1.0 / (js * gap)
                return _Presolved(A, b, np.array([]), np.array([]),
                                  InfeasibilityCertificate(y, [np.zeros((k.dim, k.dim)) for k in p.psd_blocks]))
            continue
        seen[key] = len(keep)
        keep.append(i)
        scales.append(s)
    keep = np.array(keep, dtype=np.int64)
    scales = np.array(scales, dtype=float)
    As = sp.diags(1.0 / scales) @ A[keep]
    return _Presolved(As.tocsr(), b[keep] / scales, keep, scales)


# ---------------------------------------------------------------- Clarabel backend

def _svec_rows(blk, nvars: int, row0: int):
    M = blk.matrix
    pos = M.cols * (M.cols + 1) // 2 + M.rows
    scale = np.where(M.rows == M.cols, 1.0, np.sqrt(2.0))
    return row0 + pos, M.vars, -M.coefs * scale


def _smat(v: np.ndarray, dim: int) -> np.ndarray:
    Y = np.zeros((dim, dim))
    iu = np.triu_indices(dim)
    # column-major upper triangle: position of (i, j) is j(j+1)/2 + i
    pos = iu[1] * (iu[1] + 1) // 2 + iu[0]
    vals = v[pos] / np.where(iu[0] == iu[1], 1.0, np.sqrt(2.0))
    Y[iu] = vals
    return Y + np.triu(Y, 1).T


def kkt_memory_mb(p: ConicProblem) -> float:
    """Rough size of the dense per-cone blocks an interior-point KKT system holds."""
    # factor and workspace copies measured at roughly four times the raw blocks
    return 8 * 8 * sum((b.dim * (b.dim + 1) // 2) ** 2 for b in p.psd_blocks) / 2 ** 20


def _cells(M: LinearMatrix) -> dict:
    out: dict = {}
    for i, j, v, c in zip(M.rows.tolist(), M.cols.tolist(), M.vars.tolist(), M.coefs.tolist()):
        cell = out.setdefault((i, j), {})
        cell[v] = cell.get(v, 0.0) + c
    return {k: {v: c for v, c in cell.items() if c != 0.0} for k, cell in out.items()}


def facial_reduction(p: ConicProblem) -> tuple[ConicProblem, int]:
    """Drop PSD rows whose diagonal cell is forced to zero.

    A PSD matrix with a zero diagonal entry has a zero row, so each
    off-diagonal cell of that row becomes an equality and the row leaves the
    block.  Variables fixed to zero this way can empty further diagonals;
    the pass repeats until nothing changes.  The feasible set is unchanged,
    but the reduced problem may have a strictly feasible point where the
    original has none, which interior-point methods need for full accuracy.
    Returns the reduced problem and the number of rows dropped.
    """
    A = p.eq_matrix.tocsr()
    zero = set()
    for i in range(A.shape[0]):
        lo, hi = A.indptr[i], A.indptr[i + 1]
        if hi - lo == 1 and A.data[lo] != 0 and p.eq_rhs[i] == 0:
            zero.add(int(A.indices[lo]))
    for blk in p.zero_blocks:
        for cell in _cells(blk.matrix).values():
            if len(cell) == 1:
                zero.update(cell)
    cells = [_cells(blk.matrix) for blk in p.psd_blocks]
    alive = [set(range(blk.dim)) for blk in p.psd_blocks]
    new_zero, new_rows = [], []
    changed = True
    while changed:
        changed = False
        for b, cb in enumerate(cells):
            for i in sorted(alive[b]):
                if any(v not in zero for v in cb.get((i, i), {})):
                    continue
                alive[b].discard(i)
                changed = True
                for j in sorted(alive[b]):
                    terms = {v: c for v, c in cb.get((min(i, j), max(i, j)), {}).items()
                             if v not in zero}
                    if len(terms) == 1:
                        zero.update(terms)
                        new_zero.extend(terms)
                    elif terms:
                        new_rows.append(terms)
    dropped = sum(blk.dim - len(k) for blk, k in zip(p.psd_blocks, alive))
    if not dropped:
        return p, 0
    blocks = []
    for blk, keep in zip(p.psd_blocks, alive):
        if not keep:
            continue
        M = blk.matrix
        remap = -np.ones(M.dim, dtype=np.int64)
        idx = np.array(sorted(keep))
        remap[idx] = np.arange(idx.size)
        sel = (remap[M.rows] >= 0) & (remap[M.cols] >= 0)
        blocks.append(Block(LinearMatrix(idx.size, remap[M.rows[sel]], remap[M.cols[sel]],
                                         M.vars[sel], M.coefs[sel]), blk.group, blk.label))
    rows = [{v: 1.0} for v in new_zero] + new_rows
    R = [r for r, terms in enumerate(rows) for _ in terms]
    C = [v for terms in rows for v in terms]
    V = [c for terms in rows for c in terms.values()]
    extra = sp.csr_matrix((V, (R, C)), shape=(len(rows), p.nvars))
    return replace(p, eq_matrix=sp.vstack([A, extra], format="csr"),
                   eq_rhs=np.concatenate([p.eq_rhs, np.zeros(len(rows))]),
                   eq_labels=list(p.eq_labels) + [("face",)] * len(rows),
                   psd_blocks=blocks), dropped


class ClarabelBackend:
    name = "clarabel"

    def solve(self, p: ConicProblem, o: SolveOptions) -> SolveResult:
        if not o.facial_reduction:
            return self._solve(p, o)
        q, dropped = facial_reduction(p)
        if not dropped:
            return self._solve(p, o)
        r = self._solve(q, o)
        if r.status is Status.PRIMAL_INFEASIBLE:
            # a ray for the reduced system is not a certificate for the original one
            return self._solve(p, o)
        if r.x is not None:
            r.objective = p.objective_value(r.x)
            r.tms = p.group_tms(r.x)
            r.residuals = verify_result(p, r)
            ok = r.residuals.ok(10 * o.eps_feas)
            if r.status is Status.OPTIMAL and not ok:
                r.status, r.approximate = Status.UNKNOWN, True
                r.message += " (failed verification on the unreduced problem)"
        r.message += f" [facial reduction dropped {dropped} rows]"
        return r

    def _solve(self, p: ConicProblem, o: SolveOptions) -> SolveResult:
        import clarabel

        t0 = time.perf_counter()
        need = kkt_memory_mb(p)
        if need > o.max_memory_mb:
            # the native solver aborts the process on allocation failure
            return SolveResult(Status.UNKNOWN, message=f"estimated KKT memory {need:.0f} MB "
                                                       f"exceeds limit {o.max_memory_mb:.0f} MB")
        A_eq, b_eq = equality_system(p)
        pre = _presolve(p, A_eq, b_eq)
        if pre.trivial is not None:
            return SolveResult(Status.PRIMAL_INFEASIBLE, certificate=pre.trivial,
                               wall_time=time.perf_counter() - t0,
                               message="presolve: inconsistent equalities")
        n_eq = pre.A.shape[0]
        R, C, V = [], [], []
        coo = pre.A.tocoo()
        R.append(coo.row)
        C.append(coo.col)
        V.append(coo.data)
        row0 = n_eq
        starts = []
        cones = [clarabel.ZeroConeT(n_eq)] if n_eq else []
        for blk in p.psd_blocks:
            r, c, v = _svec_rows(blk, p.nvars, row0)
            R.append(r)
            C.append(c)
            V.append(v)
            starts.append(row0)
            row0 += blk.dim * (blk.dim + 1) // 2
            cones.append(clarabel.PSDTriangleConeT(blk.dim))
        A = sp.csc_matrix((np.concatenate(V), (np.concatenate(R), np.concatenate(C))),
                          shape=(row0, p.nvars))
        A.sum_duplicates()
        b = np.zeros(row0)
        b[:n_eq] = pre.b
        P = sp.csc_matrix((p.nvars, p.nvars))
        # a unit-size objective keeps the iterates much closer to the PSD cone
        q = np.asarray(p.objective, dtype=float)
        q = q / max(1.0, float(np.max(np.abs(q), initial=0.0)))

        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.max_iter = o.max_iterations
        settings.tol_feas = o.eps_feas
        settings.tol_gap_abs = o.eps_gap
        settings.tol_gap_rel = o.eps_gap
        settings.tol_infeas_abs = o.eps_feas
        settings.tol_infeas_rel = o.eps_feas
        settings.max_threads = 1
        settings.presolve_enable = False
        settings.chordal_decomposition_enable = False
        if o.time_limit is not None:
            settings.time_limit = float(o.time_limit)
        try:
            sol = clarabel.DefaultSolver(P, q, A, b, cones,
                                         settings).solve()
        except Exception as exc:  # backend crash or resource exhaustion
            log.warning("clarabel failed: %s", exc)
            return SolveResult(Status.UNKNOWN, wall_time=time.perf_counter() - t0,
                               message=f"backend error: {exc}")
        status = str(sol.status)
        wall = time.perf_counter() - t0
        if status in ("Solved", "AlmostSolved"):
            x = np.array(sol.x)
            out = SolveResult(Status.OPTIMAL, p.objective_value(x), x, p.group_tms(x),
                              wall_time=wall, message=status)
            out.residuals = verify_result(p, out)
            if not out.residuals.ok(10 * o.eps_feas):
                out.status, out.approximate = Status.UNKNOWN, True
                out.message = (f"{status} but verification failed "
                               f"(residual {out.residuals.max_residual:.2e}, "
                               f"min eig {out.residuals.min_eigenvalue:.2e})")
            return out
        if status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            z = np.array(sol.z)
            y = np.zeros(A_eq.shape[0])
            y[pre.rep] = z[:n_eq] / pre.scale
            duals = [_smat(z[s:s + blk.dim * (blk.dim + 1) // 2], blk.dim)
                     for s, blk in zip(starts, p.psd_blocks)]
            bty = float(b_eq @ y)
            if bty < 0:
                y, duals = y / -bty, [Y / -bty for Y in duals]
            cert = InfeasibilityCertificate(y, duals)
            rep = verify_certificate(p, cert, tol=max(o.eps_feas, 1e-8))
            if rep.valid:
                return SolveResult(Status.PRIMAL_INFEASIBLE, certificate=cert, wall_time=wall,
                                   message=status)
            return SolveResult(Status.UNKNOWN, wall_time=wall,
                               message=f"{status} but certificate rejected "
                                       f"(residual {rep.stationarity_residual:.2e})")
        return SolveResult(Status.UNKNOWN, wall_time=wall, message=status)


# ---------------------------------------------------------------- external bridge

EXIT_OPTIMAL, EXIT_INFEASIBLE = 0, 1

RESULT_FORMAT_DOC = """\
Result text format:

  status <Optimal|PrimalInfeasible|Unknown>
  objective <value>                    when Optimal
  x <value_0> <value_1> ...            primal point, when Optimal
  y <value_0> ...                      certificate multipliers, when PrimalInfeasible
  dual <b> <dim> <row-major values>    PSD dual of block b, when PrimalInfeasible

Solver processes exit 0 for Optimal, 1 for PrimalInfeasible and any other
code for Unknown.
"""


def write_result(r: SolveResult, fh) -> None:
    fh.write(f"status {r.status.value}\n")
    if r.status is Status.OPTIMAL:
        fh.write(f"objective {float(r.objective)!r}\n")
        fh.write("x " + " ".join(repr(float(v)) for v in r.x) + "\n")
    elif r.status is Status.PRIMAL_INFEASIBLE and r.certificate is not None:
        fh.write("y " + " ".join(repr(float(v)) for v in r.certificate.y) + "\n")
        for b, Y in enumerate(r.certificate.psd_duals):
            fh.write(f"dual {b} {Y.shape[0]} " + " ".join(repr(float(v)) for v in Y.ravel()) + "\n")


def read_result(fh) -> SolveResult:
    status, objective, x, y, duals = None, None, None, None, {}
    for lineno, line in enumerate(fh, 1):
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        try:
            if tok[0] == "status":
                status = Status(tok[1])
            elif tok[0] == "objective":
                objective = float(tok[1])
            elif tok[0] == "x":
                x = np.array([float(v) for v in tok[1:]])
            elif tok[0] == "y":
                y = np.array([float(v) for v in tok[1:]])
            elif tok[0] == "dual":
                dim = int(tok[2])
                duals[int(tok[1])] = np.array([float(v) for v in tok[3:]]).reshape(dim, dim)
            else:
                raise ParseError(f"unknown record {tok[0]!r}", lineno)
        except (IndexError, ValueError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(f"malformed record: {exc}", lineno) from None
    if status is None:
        raise ParseError("missing status line")
    cert = None
    if y is not None:
        cert = InfeasibilityCertificate(y, [duals[b] for b in sorted(duals)])
    return SolveResult(status, objective, x, certificate=cert)


class ExternalBackend:
    """Run ``command + [problem_path, result_path]`` as a separate solver.

    The returned point or ray is re-verified here exactly as for the
    in-process backend.
    """

    name = "external"

    def __init__(self, command):
        self.command = list(command)

    def solve(self, p: ConicProblem, o: SolveOptions) -> SolveResult:
        t0 = time.perf_counter()
        with tempfile.TemporaryDirectory() as tmp:
            prob, res = Path(tmp) / "problem.txt", Path(tmp) / "result.txt"
            with open(prob, "w") as fh:
                write_problem(p, fh)
            try:
                proc = subprocess.run(self.command + [str(prob), str(res)],
                                      timeout=o.time_limit, capture_output=True, text=True)
            except subprocess.TimeoutExpired:
                return SolveResult(Status.UNKNOWN, wall_time=time.perf_counter() - t0,
                                   message="external solver timed out")
            wall = time.perf_counter() - t0
            if proc.returncode not in (EXIT_OPTIMAL, EXIT_INFEASIBLE) or not res.exists():
                return SolveResult(Status.UNKNOWN, wall_time=wall,
                                   message=f"external solver exit {proc.returncode}")
            with open(res) as fh:
                r = read_result(fh)
        r.wall_time = wall
        if proc.returncode == EXIT_OPTIMAL and r.status is Status.OPTIMAL and r.x is not None:
            r.objective = p.objective_value(r.x)
            r.tms = p.group_tms(r.x)
            r.residuals = verify_result(p, r)
            if not r.residuals.ok(10 * o.eps_feas):
                r.status, r.approximate = Status.UNKNOWN, True
                r.message = "external point failed verification"
            return r
        if (proc.returncode == EXIT_INFEASIBLE and r.status is Status.PRIMAL_INFEASIBLE
                and r.certificate is not None
                and verify_certificate(p, r.certificate, tol=max(o.eps_feas, 1e-8)).valid):
            return r
        return SolveResult(Status.UNKNOWN, wall_time=wall, message="external result rejected")


BACKENDS = {"clarabel": ClarabelBackend()}


def solve(p: ConicProblem, o: SolveOptions | None = None, backend=None) -> SolveResult:
    """Solve ``p`` with the named (or given) backend."""
    o = o or SolveOptions()
    if backend is None:
        backend = BACKENDS[o.backend]
    elif isinstance(backend, str):
        backend = BACKENDS[backend]
    return backend.solve(p, o)


def main(argv=None) -> int:
    """Reference external solver: ``python -m idealcp.sdp PROBLEM RESULT``."""
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m idealcp.sdp PROBLEM RESULT", file=sys.stderr)
        return 2
    with open(argv[0]) as fh:
        p = read_problem(fh)
    r = ClarabelBackend().solve(p, SolveOptions())
    with open(argv[1], "w") as fh:
        write_result(r, fh)
    return {Status.OPTIMAL: EXIT_OPTIMAL, Status.PRIMAL_INFEASIBLE: EXIT_INFEASIBLE}.get(r.status, 4)


if __name__ == "__main__":
    sys.exit(main())
