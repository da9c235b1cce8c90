"""Problem-file parsing and canonical report emission (schema ccx/1).

Complex numbers travel as [re, im] pairs, matrices as nested lists, and all
shapes are checked before any computation.  Reports are emitted through a
canonical writer: sorted object keys and floats at 17 significant digits, so
identical inputs produce byte-identical output that re-parses losslessly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .algebra import StarAlgebra
from .cpmaps import CPMap
from .errors import ParseError
from .groups import FiniteGroup, GroupAction
from .linalg import DEFAULT_TOL, Tolerances

__all__ = [
    "SCHEMA",
    "Problem",
    "parse_problem",
    "load_problem",
    "parse_matrix",
    "encode_matrix",
    "encode_matrices",
    "dumps_canonical",
]

SCHEMA = "ccx/1"


def _expect(cond, path, msg):
    if not cond:
        raise ParseError(f"{path}: {msg}")


def _get(obj, key, path, required=True, default=None):
    if key not in obj:
        _expect(not required, path, f"missing field '{key}'")
        return default
    return obj[key]


def parse_matrix(obj, path, rows=None, cols=None):
    """Parse a nested list of [re, im] pairs into a complex ndarray."""
    _expect(isinstance(obj, list) and obj, path, "expected a non-empty matrix (list of rows)")
    out = []
    width = None
    for i, row in enumerate(obj):
        _expect(isinstance(row, list) and row, f"{path}[{i}]", "expected a non-empty row")
        if width is None:
            width = len(row)
        _expect(len(row) == width, f"{path}[{i}]", "ragged rows")
        entries = []
        for j, cell in enumerate(row):
            _expect(
                isinstance(cell, list) and len(cell) == 2,
                f"{path}[{i}][{j}]",
                "expected an [re, im] pair",
            )
            re, im = cell
            _expect(
                isinstance(re, (int, float)) and isinstance(im, (int, float)),
                f"{path}[{i}][{j}]",
                "expected numeric [re, im]",
            )
            _expect(
                math.isfinite(re) and math.isfinite(im),
                f"{path}[{i}][{j}]",
                "entries must be finite",
            )
            entries.append(complex(re, im))
        out.append(entries)
    mat = np.array(out, dtype=complex)
    if rows is not None:
        _expect(mat.shape[0] == rows, path, f"expected {rows} rows, got {mat.shape[0]}")
    if cols is not None:
        _expect(mat.shape[1] == cols, path, f"expected {cols} columns, got {mat.shape[1]}")
    return mat


def encode_matrix(m):
    m = np.asarray(m, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def encode_matrices(ms):
    return [encode_matrix(m) for m in ms]


@dataclass
class Problem:
    algebra: StarAlgebra
    hilbert_dim: int
    group: FiniteGroup
    action: GroupAction
    maps: dict
    tolerances: Tolerances
    seed: int
    map_domains: dict = field(default_factory=dict)


def _parse_tolerances(obj, path):
    if obj is None:
        return DEFAULT_TOL
    _expect(isinstance(obj, dict), path, "expected an object")
    kwargs = {}
    for key in ("psd_floor", "rank_cut", "eq_tol", "herm_tol"):
        if key in obj:
            _expect(isinstance(obj[key], (int, float)), f"{path}.{key}", "expected a number")
            kwargs[key] = float(obj[key])
    unknown = set(obj) - {"psd_floor", "rank_cut", "eq_tol", "herm_tol"}
    _expect(not unknown, path, f"unknown tolerance fields {sorted(unknown)}")
    try:
        return Tolerances(**kwargs)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _parse_map(name, obj, default_alg, d, tol):
    path = f"maps.{name}"
    _expect(isinstance(obj, dict), path, "expected an object")
    alg = default_alg
    if "domain" in obj:
        dom = obj["domain"]
        _expect(
            isinstance(dom, dict) and "block_dims" in dom, f"{path}.domain", "expected block_dims"
        )
        alg = StarAlgebra(tuple(int(n) for n in dom["block_dims"]))
    dd = int(obj.get("hilbert_dim", d))
    kind = _get(obj, "kind", path)
    data = _get(obj, "data", path)
    if kind == "choi":
        _expect(
            isinstance(data, list) and len(data) == len(alg.block_dims),
            f"{path}.data",
            f"expected {len(alg.block_dims)} Choi blocks",
        )
        blocks = [
            parse_matrix(blk, f"{path}.data[{b}]", rows=n * dd, cols=n * dd)
            for b, (blk, n) in enumerate(zip(data, alg.block_dims))
        ]
        try:
            return CPMap.from_choi_blocks(alg, dd, blocks, tol), alg
        except Exception as exc:
            raise ParseError(f"{path}: {exc}") from exc
    if kind == "kraus":
        _expect(
            isinstance(data, list) and len(data) == len(alg.block_dims),
            f"{path}.data",
            f"expected {len(alg.block_dims)} Kraus lists (one per block)",
        )
        kraus = []
        for b, (ops, n) in enumerate(zip(data, alg.block_dims)):
            _expect(isinstance(ops, list), f"{path}.data[{b}]", "expected a list of operators")
            kraus.append(
                [
                    parse_matrix(k, f"{path}.data[{b}][{j}]", rows=n, cols=dd)
                    for j, k in enumerate(ops)
                ]
            )
        try:
            return CPMap.from_kraus(alg, dd, kraus, tol), alg
        except Exception as exc:
            raise ParseError(f"{path}: {exc}") from exc
    raise ParseError(f"{path}.kind: expected 'choi' or 'kraus', got {kind!r}")


def parse_problem(obj):
    """Parse a problem dictionary (schema ccx/1) into validated objects."""
    _expect(isinstance(obj, dict), "$", "expected a JSON object")
    schema = _get(obj, "schema", "$")
    _expect(schema == SCHEMA, "schema", f"expected '{SCHEMA}', got {schema!r}")

    alg_obj = _get(obj, "algebra", "$")
    _expect(
        isinstance(alg_obj, dict) and "block_dims" in alg_obj,
        "algebra",
        "expected an object with block_dims",
    )
    dims = alg_obj["block_dims"]
    _expect(
        isinstance(dims, list) and dims and all(isinstance(n, int) and n > 0 for n in dims),
        "algebra.block_dims",
        "expected a non-empty list of positive integers",
    )
    algebra = StarAlgebra(tuple(dims))

    d = _get(obj, "hilbert_dim", "$")
    _expect(isinstance(d, int) and d > 0, "hilbert_dim", "expected a positive integer")

    grp_obj = _get(obj, "group", "$")
    _expect(isinstance(grp_obj, dict), "group", "expected an object")
    order = _get(grp_obj, "order", "group")
    table = _get(grp_obj, "table", "group")
    _expect(isinstance(order, int) and order > 0, "group.order", "expected a positive integer")
    _expect(
        isinstance(table, list) and len(table) == order,
        "group.table",
        f"expected {order} rows",
    )
    for i, row in enumerate(table):
        _expect(
            isinstance(row, list) and len(row) == order,
            f"group.table[{i}]",
            f"expected {order} entries",
        )
        for j, x in enumerate(row):
            _expect(
                isinstance(x, int) and 0 <= x < order,
                f"group.table[{i}][{j}]",
                f"expected an index in 0..{order - 1}",
            )
    group = FiniteGroup(np.array(table, dtype=int))

    act_obj = _get(obj, "action", "$")
    _expect(isinstance(act_obj, dict), "action", "expected an object")
    kind = _get(act_obj, "kind", "action")
    if kind == "inner":
        us = _get(act_obj, "unitaries", "action")
        _expect(
            isinstance(us, list) and len(us) == order,
            "action.unitaries",
            f"expected {order} unitaries",
        )
        n = algebra.ambient_dim
        unitaries = [
            parse_matrix(u, f"action.unitaries[{g}]", rows=n, cols=n) for g, u in enumerate(us)
        ]
        action = GroupAction(group=group, algebra=algebra, unitaries=unitaries)
    elif kind == "general":
        ls = _get(act_obj, "coordinate_maps", "action")
        _expect(
            isinstance(ls, list) and len(ls) == order,
            "action.coordinate_maps",
            f"expected {order} coordinate maps",
        )
        m = algebra.num_units
        maps = [
            parse_matrix(l, f"action.coordinate_maps[{g}]", rows=m, cols=m)
            for g, l in enumerate(ls)
        ]
        action = GroupAction(group=group, algebra=algebra, coordinate_maps=maps)
    else:
        raise ParseError(f"action.kind: expected 'inner' or 'general', got {kind!r}")

    tol = _parse_tolerances(obj.get("tolerances"), "tolerances")

    maps_obj = obj.get("maps", {})
    _expect(isinstance(maps_obj, dict), "maps", "expected an object of named maps")
    maps, map_domains = {}, {}
    for name in sorted(maps_obj):
        cp_map, dom = _parse_map(name, maps_obj[name], algebra, d, tol)
        maps[name] = cp_map
        map_domains[name] = dom

    seed = obj.get("seed", 0)
    _expect(isinstance(seed, int), "seed", "expected an integer")

    return Problem(
        algebra=algebra,
        hilbert_dim=d,
        group=group,
        action=action,
        maps=maps,
        tolerances=tol,
        seed=seed,
        map_domains=map_domains,
    )


def load_problem(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_problem(raw)


# -- canonical emission -------------------------------------------------------


def _emit(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        if not math.isfinite(float(obj)):
            raise ValueError("cannot emit non-finite float")
        text = f"{float(obj):.17g}"
        if "." not in text and "e" not in text:
            text += ".0"  # keep floats typed as floats across round trips
        out.append(text)
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for k, item in enumerate(obj):
            if k:
                out.append(",")
            _emit(item, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for k, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise ValueError("object keys must be strings")
            if k:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=True))
            out.append(":")
            _emit(obj[key], out)
        out.append("}")
    else:
        raise ValueError(f"cannot emit object of type {type(obj)!r}")


def dumps_canonical(obj):
    """Deterministic JSON: sorted keys, floats at 17 significant digits."""
    out = []
    _emit(obj, out)
    return "".join(out) + "\n"
