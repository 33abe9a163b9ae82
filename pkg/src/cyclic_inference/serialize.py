"""JSON and CSV interchange.

Matrices travel as row-major JSON arrays of arrays; a complex matrix is a
depth-3 array whose entries are [re, im] pairs.  Grids, potentials, caliber
specs, chains and cycles are small keyword objects.  CSV output is plain
comma/period text with floats printed as 17-significant-digit scientific
notation, so identical runs produce identical bytes.

Malformed external input raises ValueError with a readable message; the
command-line driver turns that into its "bad configuration" exit code.
"""

from __future__ import annotations

import csv
import json
import numbers
from typing import Any, Callable, Optional

import numpy as np

from . import caliber, kernelprop
from .factors import FactorChain, FactorCycle

__all__ = [
    "FLOAT_FORMAT",
    "load_matrix",
    "dump_matrix",
    "load_vector",
    "load_grid",
    "load_potential",
    "load_caliber",
    "load_chain",
    "load_cycle",
    "read_json",
    "write_table",
    "write_report",
]

FLOAT_FORMAT = "%.16e"


# --- matrices and vectors ----------------------------------------------------


def load_matrix(obj) -> np.ndarray:
    """Nested lists -> 2-D array; depth 3 with [re, im] leaves -> complex."""
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"matrix is ragged or non-numeric: {exc}") from None
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    raise ValueError(
        "matrix must be a list of rows (real) or a list of rows of "
        f"[re, im] pairs (complex); got shape {arr.shape}"
    )


def dump_matrix(m) -> list:
    a = np.asarray(m)
    if a.ndim != 2:
        raise ValueError(f"can only dump 2-D matrices, got shape {a.shape}")
    if np.iscomplexobj(a):
        return np.stack([a.real, a.imag], axis=-1).tolist()
    return a.astype(float).tolist()


def load_vector(obj) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"vector is ragged or non-numeric: {exc}") from None
    if arr.ndim != 1:
        raise ValueError(f"vector must be flat, got shape {arr.shape}")
    return arr


# --- grids and potentials ----------------------------------------------------


def load_grid(obj) -> kernelprop.Grid1D:
    """{"delta": d, "n": n, "origin": x0} -> periodic grid."""
    try:
        return kernelprop.Grid1D(
            delta=float(obj["delta"]),
            n=int(obj["n"]),
            origin=float(obj.get("origin", 0.0)),
        )
    except KeyError as exc:
        raise ValueError(f"grid spec missing field {exc}") from None


def load_potential(obj, grid: Optional[kernelprop.Grid1D] = None) -> Callable:
    """Potential spec -> callable of position.

    Kinds: {"kind": "zero"} | {"kind": "constant", "value": v}
    | {"kind": "harmonic", "k": k, "center": c} | {"kind": "table",
    "values": [...]}.  Tables are bound to a grid and interpolated
    periodically so gauge kernels can sample between points.
    """
    kind = obj.get("kind") if isinstance(obj, dict) else None
    if kind == "zero":
        return kernelprop.zero_potential
    if kind == "constant":
        v = float(obj["value"])
        return lambda x: np.full(np.shape(x), v)
    if kind == "harmonic":
        k = float(obj["k"])
        c = float(obj.get("center", 0.0))
        return lambda x: 0.5 * k * (np.asarray(x, dtype=float) - c) ** 2
    if kind == "table":
        if grid is None:
            raise ValueError("table potentials need a grid to bind to")
        values = load_vector(obj["values"])
        if values.shape != (grid.n,):
            raise ValueError(
                f"table has {values.shape[0]} entries for a {grid.n}-point grid"
            )
        xs, x0, length = grid.points, grid.origin, grid.length
        # periodic linear interpolation: pad one wrapped point on each side
        xpad = np.concatenate([[x0 - grid.delta], xs, [x0 + length]])
        vpad = np.concatenate([[values[-1]], values, [values[0]]])

        def table(x):
            rel = np.mod(np.asarray(x, dtype=float) - x0, length) + x0
            return np.interp(rel, xpad, vpad)

        return table
    raise ValueError(f"unknown potential kind {kind!r}")


# --- model specs ---------------------------------------------------------------


def load_caliber(obj) -> caliber.CaliberSpec:
    try:
        h = obj["hamiltonian"]
        ham = load_matrix(h) if not isinstance(h, numbers.Number) else float(h)
        return caliber.CaliberSpec(
            hamiltonian=ham,
            lam=float(obj["lam"]),
            epsilon=float(obj["epsilon"]),
            n=int(obj["n"]),
            T=None if obj.get("T") is None else float(obj["T"]),
            mass=None if obj.get("mass") is None else float(obj["mass"]),
        )
    except KeyError as exc:
        raise ValueError(f"caliber spec missing field {exc}") from None


def load_chain(obj) -> FactorChain:
    """Chain spec: factor tables inline, or a caliber spec plus states."""
    if "caliber" in obj:
        spec = load_caliber(obj["caliber"])
        states = load_vector(obj.get("states", []))
        if states.size == 0:
            raise ValueError("caliber-built chains need a states array")
        return caliber.maxcal_chain(spec, states)
    try:
        mats = tuple(load_matrix(f) for f in obj["factors"])
    except KeyError as exc:
        raise ValueError(f"chain spec missing field {exc}") from None
    if any(np.iscomplexobj(m) for m in mats):
        raise ValueError("chain factors must be real tables")
    sites = obj.get("sites")
    if sites is not None and int(sites) != len(mats) + 1:
        raise ValueError(
            f"spec says {sites} sites but {len(mats)} factors imply {len(mats) + 1}"
        )
    left = obj.get("boundary_left")
    right = obj.get("boundary_right")
    return FactorChain(
        factors=mats,
        weight=float(obj.get("weight", 1.0)),
        boundary_left=None if left is None else load_vector(left),
        boundary_right=None if right is None else load_vector(right),
    )


def load_cycle(obj) -> FactorCycle:
    try:
        mats = tuple(load_matrix(f) for f in obj["factors"])
    except KeyError as exc:
        raise ValueError(f"cycle spec missing field {exc}") from None
    if any(np.iscomplexobj(m) for m in mats):
        raise ValueError("cycle factors must be real tables")
    n = obj.get("n")
    if n is not None and int(n) != len(mats):
        raise ValueError(f"spec says n={n} but carries {len(mats)} factors")
    q = obj.get("q")
    if q is not None and any(m.shape != (int(q), int(q)) for m in mats):
        raise ValueError(f"spec says q={q} but factor shapes disagree")
    roles = obj.get("roles")
    return FactorCycle(factors=mats, roles=None if roles is None else tuple(roles))


# --- files -------------------------------------------------------------------


def read_json(path) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed JSON in {path}: {exc}") from None


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return FLOAT_FORMAT % float(value)
    return str(value)


def write_table(path, columns, rows) -> None:
    """Comma/period CSV; floats as %.16e so reruns are byte-identical."""
    columns = list(columns)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(
                    f"row width {len(row)} != header width {len(columns)}"
                )
            writer.writerow([_format_cell(v) for v in row])


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value).__name__}")


def write_report(path, payload: dict) -> None:
    """Sorted-key, indented JSON with a trailing newline; no timestamps."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
