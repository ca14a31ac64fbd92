"""JSON round-trip for Hermitian matrices and state vectors.

Layout::

    {"kind": "hermitian", "dim": N, "format": "dense" | "coo",
     "entries": [[row, col, re, im], ...]}
    {"kind": "state", "dim": N, "amplitudes": [[re, im], ...]}

``coo`` stores the upper triangle plus diagonal and the loader mirrors it;
``dense`` lists every nonzero entry.  Every real is written with 17 significant
digits, enough to round-trip IEEE doubles exactly.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .matrix import HermitianMatrix, StateVector


def _f(x: float) -> float:
    return float(x)


def _encode(obj) -> str:
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return format(obj, ".16e")  # 17 significant digits
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(k)}:{_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj) -> str:
    """Deterministic compact JSON with 17-digit reals and a trailing newline."""
    return _encode(obj) + "\n"


def matrix_to_dict(h: HermitianMatrix, fmt: str | None = None) -> dict:
    fmt = fmt or ("coo" if h.is_sparse else "dense")
    if fmt not in ("dense", "coo"):
        raise ValidationError(f"unknown format {fmt!r}")
    entries = []
    for j in range(h.dim):
        cols, vals = h.row(j)
        for c, v in zip(cols, vals):
            if fmt == "coo" and c < j:
                continue
            entries.append([int(j), int(c), _f(v.real), _f(v.imag)])
    return {"kind": "hermitian", "dim": h.dim, "format": fmt, "entries": entries}


def matrix_from_dict(d: dict) -> HermitianMatrix:
    if d.get("kind") != "hermitian":
        raise ValidationError(f"expected kind 'hermitian', got {d.get('kind')!r}")
    dim = int(d["dim"])
    fmt = d.get("format", "dense")
    triples = [(int(r), int(c), complex(re, im)) for r, c, re, im in d["entries"]]
    if fmt == "coo":
        return HermitianMatrix.from_coo(dim, triples, mirror=True, sparse=True)
    if fmt == "dense":
        a = np.zeros((dim, dim), dtype=complex)
        for r, c, v in triples:
            a[r, c] = v
        return HermitianMatrix.from_dense(a)
    raise ValidationError(f"unknown format {fmt!r}")


def state_to_dict(psi: StateVector) -> dict:
    amps = [[_f(a.real), _f(a.imag)] for a in psi.amplitudes]
    return {"kind": "state", "dim": psi.dim, "amplitudes": amps}


def state_from_dict(d: dict) -> StateVector:
    if d.get("kind") != "state":
        raise ValidationError(f"expected kind 'state', got {d.get('kind')!r}")
    amps = np.array([complex(re, im) for re, im in d["amplitudes"]])
    if amps.size != int(d["dim"]):
        raise ValidationError("amplitude count does not match dim")
    return StateVector(amps)


def save(obj, path) -> None:
    if isinstance(obj, HermitianMatrix):
        d = matrix_to_dict(obj)
    elif isinstance(obj, StateVector):
        d = state_to_dict(obj)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    Path(path).write_text(dumps(d))


def load(path):
    d = json.loads(Path(path).read_text())
    kind = d.get("kind")
    if kind == "hermitian":
        return matrix_from_dict(d)
    if kind == "state":
        return state_from_dict(d)
    raise ValidationError(f"unknown kind {kind!r} in {path}")


def load_matrix(path) -> HermitianMatrix:
    obj = load(path)
    if not isinstance(obj, HermitianMatrix):
        raise ValidationError(f"{path} does not hold a matrix")
    return obj


def load_state(path) -> StateVector:
    obj = load(path)
    if not isinstance(obj, StateVector):
        raise ValidationError(f"{path} does not hold a state")
    return obj
