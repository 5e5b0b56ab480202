"""Text and JSON formats for tensors, decompositions, cliques and certificates.

Tensor text format::

    # comments and blank lines are ignored
    m n
    i_1 i_2 ... i_m value
    ...

Indices are 1-based; unlisted entries are zero.  Indices are expected
sorted, but any permutation is accepted and canonicalized; two lines naming
the same canonical index are an error.  The JSON form is
``{"order": m, "dim": n, "entries": [{"idx": [...], "val": v}, ...]}``.

Decomposition text format::

    m n R
    lambda v_1 ... v_n      # clique: i_1 ... i_s
    ...

followed by a comment line with the l1 reconstruction error when known.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .cliques import CliqueSet
from .errors import DuplicateIndex, InvalidIndex, ParseError, ShapeError
from .tensor import Atom, Decomposition, SymmetricTensor


def _fmt(x: float) -> str:
    return repr(float(x))


def _data_lines(text: str):
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if body:
            yield lineno, body.split(), line


# ---------------------------------------------------------------- tensors

def parse_tensor(text: str) -> SymmetricTensor:
    """Parse the tensor text format; errors carry the offending line number."""
    lines = _data_lines(text)
    try:
        lineno, head, _ = next(lines)
    except StopIteration:
        raise ParseError("missing header 'm n'", 1) from None
    if len(head) != 2:
        raise ParseError(f"header must be 'm n', got {' '.join(head)!r}", lineno)
    try:
        m, n = int(head[0]), int(head[1])
    except ValueError:
        raise ParseError(f"header must be two integers, got {' '.join(head)!r}", lineno) from None
    if m < 2 or n < 1:
        raise ParseError(f"need m >= 2 and n >= 1, got m={m} n={n}", lineno)
    entries = {}
    where = {}
    for lineno, tok, _ in lines:
        if len(tok) != m + 1:
            raise ParseError(f"expected {m} indices and a value, got {len(tok)} fields", lineno)
        try:
            raw = [int(t) for t in tok[:m]]
            val = float(tok[m])
        except ValueError:
            raise ParseError(f"cannot parse {' '.join(tok)!r}", lineno) from None
        if not np.isfinite(val):
            raise ParseError(f"non-finite value {tok[m]!r}", lineno)
        key = tuple(sorted(raw))
        if key[0] < 1 or key[-1] > n:
            raise ParseError(f"index {tuple(raw)} out of range 1..{n}", lineno)
        if key in entries:
            raise ParseError(f"duplicate index {key} (first on line {where[key]})", lineno)
        entries[key], where[key] = val, lineno
    return SymmetricTensor(m, n, entries)


def format_tensor(a: SymmetricTensor) -> str:
    out = [f"{a.order} {a.dim}"]
    out += [" ".join(map(str, k)) + " " + _fmt(v) for k, v in a.items()]
    return "\n".join(out) + "\n"


def tensor_to_dict(a: SymmetricTensor) -> dict:
    return {"order": a.order, "dim": a.dim,
            "entries": [{"idx": list(k), "val": v} for k, v in a.items()]}


def tensor_from_dict(d: dict) -> SymmetricTensor:
    try:
        return SymmetricTensor(int(d["order"]), int(d["dim"]),
                               [(tuple(e["idx"]), e["val"]) for e in d["entries"]])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed tensor record: {exc}") from None
    except (InvalidIndex, DuplicateIndex, ShapeError) as exc:
        raise ParseError(str(exc)) from None


def load_tensor(path) -> SymmetricTensor:
    """Read a tensor file, choosing JSON or text by the first character."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno) from None
        return tensor_from_dict(d)
    return parse_tensor(text)


def save_tensor(a: SymmetricTensor, path, fmt: str = "text") -> None:
    body = format_tensor(a) if fmt == "text" else json.dumps(tensor_to_dict(a), indent=1) + "\n"
    Path(path).write_text(body)


# ---------------------------------------------------------------- decompositions

def format_decomposition(d: Decomposition, error: float | None = None,
                         absorbed: bool = False) -> str:
    """Weighted form by default; ``absorbed=True`` writes ``w^(1/m) v`` with weight 1."""
    out = [f"{d.order} {d.dim} {len(d)}"]
    rows = d.absorbed() if absorbed else d.vectors
    for at, row in zip(d.atoms, rows):
        w = 1.0 if absorbed else at.weight
        line = " ".join(_fmt(x) for x in [w, *row])
        if at.clique is not None:
            line += "  # clique: " + " ".join(map(str, at.clique))
        out.append(line)
    if error is not None:
        out.append(f"# l1 reconstruction error: {error:.3e}")
    return "\n".join(out) + "\n"


def parse_decomposition(text: str) -> Decomposition:
    lines = list(_data_lines(text))
    if not lines:
        raise ParseError("missing header 'm n R'", 1)
    lineno, head, _ = lines[0]
    try:
        m, n, r = (int(t) for t in head)
    except ValueError:
        raise ParseError(f"header must be 'm n R', got {' '.join(head)!r}", lineno) from None
    if len(lines) - 1 != r:
        raise ParseError(f"header announces {r} atoms, found {len(lines) - 1}", lineno)
    atoms = []
    for lineno, tok, raw in lines[1:]:
        if len(tok) != n + 1:
            raise ParseError(f"expected weight and {n} coordinates", lineno)
        try:
            vals = [float(t) for t in tok]
        except ValueError:
            raise ParseError(f"cannot parse {' '.join(tok)!r}", lineno) from None
        clique = None
        if "# clique:" in raw:
            clique = tuple(int(t) for t in raw.split("# clique:", 1)[1].split())
        v = np.array(vals[1:])
        w = vals[0]
        norm = float(np.linalg.norm(v))
        if norm > 0 and abs(norm - 1.0) > 1e-8:
            # absorbed rows: fold the length back into the weight
            w, v = w * norm ** m, v / norm
        atoms.append(Atom(w, v, clique))
    try:
        return Decomposition(m, n, atoms)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def decomposition_to_dict(d: Decomposition, error: float | None = None) -> dict:
    return {
        "order": d.order, "dim": d.dim,
        "atoms": [{"weight": a.weight, "vector": a.vector.tolist(),
                   "clique": None if a.clique is None else list(a.clique)} for a in d.atoms],
        "absorbed": d.absorbed().tolist(),
        "reconstruction_error": error,
    }


def decomposition_from_dict(d: dict) -> Decomposition:
    atoms = [Atom(a["weight"], np.array(a["vector"], dtype=float),
                  None if a.get("clique") is None else tuple(a["clique"])) for a in d["atoms"]]
    return Decomposition(int(d["order"]), int(d["dim"]), atoms)


# ---------------------------------------------------------------- cliques

def format_cliques(c: CliqueSet) -> str:
    return "".join(f"{k}: {' '.join(map(str, cl))}\n" for k, cl in enumerate(c.cliques, 1))


def parse_cliques(text: str, n: int) -> CliqueSet:
    out = []
    for lineno, _, raw in _data_lines(text):
        label, sep, rest = raw.partition(":")
        if not sep:
            raise ParseError("expected 'k: i_1 ... i_s'", lineno)
        try:
            out.append(tuple(int(t) for t in rest.split("#", 1)[0].split()))
        except ValueError:
            raise ParseError(f"bad vertex list {rest.strip()!r}", lineno) from None
    return CliqueSet(tuple(out), n)


def cliques_to_dict(c: CliqueSet) -> dict:
    return {"n": c.n, "cliques": [list(cl) for cl in c.cliques]}


def cliques_from_dict(d: dict) -> CliqueSet:
    return CliqueSet(tuple(tuple(cl) for cl in d["cliques"]), int(d["n"]))
