"""Morse decompositions at the two boundary slices.

A connection block ``(p, q, n)`` maps ``CH_n(M_q)`` to ``CH_{n-1}(M_p)``
and may be nonzero only when ``p < q``.  Generators of the direct sum are
laid out per degree in the slice's element order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .errors import InputError
from .gf2 import ChainComplexG, GradedMap, GradedSpace, Matrix, is_boundary
from .posets import IntervalSet, Poset, is_adjacent_pair
from .report import VerificationReport

SCHEMA = "conley-transit/1"

Block = tuple[str, str, int]


def block_key(p: str, q: str, n: int) -> str:
    return f"{p}|{q}|{n}"


def parse_block_key(key: str, where: str) -> Block:
    parts = key.split("|")
    if len(parts) != 3:
        raise InputError(f"{where}: block key {key!r} is not of the form 'p|q|n'")
    try:
        n = int(parts[2])
    except ValueError:
        raise InputError(f"{where}: block key {key!r} has a non-integer degree") from None
    return parts[0], parts[1], n


def layout(elements: Sequence[str], index: Mapping[str, GradedSpace], n: int) -> dict[str, tuple[int, int]]:
    """Offset and dimension of each element's generators at degree n."""
    out, off = {}, 0
    for e in elements:
        d = index[e].dim(n)
        out[e] = (off, d)
        off += d
    return out


def assemble(
    elements: Sequence[str],
    index: Mapping[str, GradedSpace],
    blocks: Mapping[Block, Matrix],
    degree: int = -1,
) -> GradedMap:
    """Place (p, q, n) blocks into a degree-``degree`` self-map of ⊕ index[e]."""
    space = GradedSpace({})
    for e in elements:
        space = space + index[e]
    keep = set(elements)
    per_degree: dict[int, list[int]] = {}
    for (p, q, n), m in blocks.items():
        if p not in keep or q not in keep or m.is_zero():
            continue
        rows_at = layout(elements, index, n + degree)
        cols_at = layout(elements, index, n)
        (r0, rd), (c0, cd) = rows_at[p], cols_at[q]
        if m.shape != (rd, cd):
            raise InputError(f"block {block_key(p, q, n)} has shape {m.shape}, expected {(rd, cd)}")
        acc = per_degree.setdefault(n, [0] * space.dim(n + degree))
        for i, r in enumerate(m.rows):
            acc[r0 + i] ^= r << c0
    mats = {n: Matrix(space.dim(n + degree), space.dim(n), tuple(rows)) for n, rows in per_degree.items()}
    return GradedMap(space, space, degree, mats)


@dataclass(frozen=True)
class MorseSlice:
    slice_label: int
    order: Poset
    conley_index: dict[str, GradedSpace]
    connection: dict[Block, Matrix] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for e in self.order.elements:
            if e not in self.conley_index:
                raise InputError(f"slice {self.slice_label}: element {e!r} has no conley_index")
        for e in self.conley_index:
            if e not in self.order:
                raise InputError(f"slice {self.slice_label}: conley_index names unknown element {e!r}")
        for p, q, n in self.connection:
            self.order.index(p)
            self.order.index(q)

    @property
    def elements(self) -> tuple[str, ...]:
        return self.order.elements

    def space(self) -> GradedSpace:
        out = GradedSpace({})
        for e in self.elements:
            out = out + self.conley_index[e]
        return out

    def block(self, p: str, q: str, n: int) -> Matrix:
        m = self.connection.get((p, q, n))
        if m is None:
            return Matrix.zeros(self.conley_index[p].dim(n - 1), self.conley_index[q].dim(n))
        return m

    def nonzero_blocks(self) -> list[Block]:
        idx = self.order.index
        keys = [k for k, m in self.connection.items() if not m.is_zero()]
        return sorted(keys, key=lambda k: (idx(k[0]), idx(k[1]), k[2]))

    def boundary(self) -> GradedMap:
        return assemble(self.elements, self.conley_index, self.connection)

    def complex(self) -> ChainComplexG:
        space = self.space()
        return ChainComplexG(space, self.boundary())


@dataclass(frozen=True)
class MorseModel:
    slice0: MorseSlice
    slice1: MorseSlice
    continuable_pairs: tuple[tuple[frozenset[str], frozenset[str]], ...] = ()
    lambda0: float | None = None
    extended_order: Any = "product"
    transition_fixed: dict[Block, tuple[str, ...]] = field(default_factory=dict)
    theta: dict[str, dict[tuple[str, int], Matrix]] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self) -> None:
        clash = set(self.slice0.elements) & set(self.slice1.elements)
        if clash:
            raise InputError(f"element ids shared by both slices: {sorted(clash)}")
        for k, (j0, j1) in enumerate(self.continuable_pairs):
            where = f"continuable_pairs[{k}]"
            if not j0 and not j1:
                raise InputError(f"{where}: both sides empty")
            for side, sl, members in ((0, self.slice0, j0), (1, self.slice1, j1)):
                for e in members:
                    if e not in sl.order:
                        raise InputError(f"{where}: {e!r} is not an element of slice {side}")
                if not sl.order.is_convex_mask(sl.order.mask(members)):
                    raise InputError(f"{where}: side {side} {sorted(members)} is not an interval")

    def slice(self, k: int) -> MorseSlice:
        if k not in (0, 1):
            raise InputError(f"slice label must be 0 or 1, got {k}")
        return self.slice0 if k == 0 else self.slice1

    @property
    def trivial_pair(self) -> tuple[frozenset[str], frozenset[str]]:
        return frozenset(self.slice0.elements), frozenset(self.slice1.elements)


def verify_connection_matrix(slice_: MorseSlice) -> VerificationReport:
    """Structural axioms: degree -1 shapes, d² = 0, triangularity."""
    rep = VerificationReport(f"slice {slice_.slice_label} connection matrix")
    ci = slice_.conley_index
    bad_shape = []
    for (p, q, n), m in sorted(slice_.connection.items(), key=lambda kv: _block_sort(slice_, kv[0])):
        if m.shape != (ci[p].dim(n - 1), ci[q].dim(n)):
            bad_shape.append((p, q, n))
    rep.add("degree -1", bad_shape, "" if not bad_shape else "block shape does not map degree n to n-1")

    if bad_shape:
        rep.add("d^2 = 0", [], "skipped: block shapes invalid")
        rep.checks[-1].passed = False
    else:
        els = slice_.elements
        fails = []
        for p in els:
            for r in els:
                for n in sorted({k[2] for k in slice_.connection}):
                    acc = Matrix.zeros(ci[p].dim(n - 2), ci[r].dim(n))
                    for q in els:
                        acc = acc + slice_.block(p, q, n - 1) @ slice_.block(q, r, n)
                    if not acc.is_zero():
                        fails.append((p, r, n))
        rep.add("d^2 = 0", fails)

    tri = [
        (p, q, n)
        for (p, q, n) in slice_.nonzero_blocks()
        if not slice_.order.less(p, q)
    ]
    rep.add("triangular", tri, "" if not tri else "nonzero block (p,q) without p < q")
    return rep


def _block_sort(slice_: MorseSlice, key: Block):
    idx = slice_.order.index
    return idx(key[0]), idx(key[1]), key[2]


def restrict(slice_: MorseSlice, interval: IntervalSet | Iterable[str]) -> ChainComplexG:
    members = interval.members if isinstance(interval, IntervalSet) else frozenset(interval)
    mask = slice_.order.mask(members)
    if not slice_.order.is_convex_mask(mask):
        raise InputError(f"restrict needs an interval, got {sorted(members)}")
    elements = [e for e in slice_.elements if e in members]
    bd = assemble(elements, slice_.conley_index, slice_.connection)
    return ChainComplexG(bd.source, bd)


def infer_connections(slice_: MorseSlice) -> list[Block]:
    rep = verify_connection_matrix(slice_)
    if not rep.passed:
        raise InputError("infer_connections needs a verified connection matrix")
    return [
        (p, q, n)
        for (p, q, n) in slice_.nonzero_blocks()
        if is_adjacent_pair(slice_.order, [p], [q])
    ]


# ---------------------------------------------------------------- model files


def _need(obj: Any, kind: type | tuple, where: str) -> Any:
    if not isinstance(obj, kind):
        name = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise InputError(f"{where}: expected {name}, got {type(obj).__name__}")
    return obj


def parse_space(obj: Any, where: str) -> GradedSpace:
    _need(obj, dict, where)
    dims = {}
    for k, v in obj.items():
        try:
            n = int(k)
        except ValueError:
            raise InputError(f"{where}: degree key {k!r} is not an integer") from None
        if not isinstance(v, int) or isinstance(v, bool) or v < 0 or n < 0:
            raise InputError(f"{where}[{k!r}]: dimension must be a non-negative integer")
        dims[n] = v
    try:
        return GradedSpace.checked(dims)
    except Exception as exc:
        raise InputError(f"{where}: {exc}") from None


def parse_rows(obj: Any, shape: tuple[int, int], where: str, allow_unknown: bool = False) -> tuple[str, ...]:
    _need(obj, list, where)
    if len(obj) != shape[0]:
        raise InputError(f"{where}: {len(obj)} rows, expected {shape[0]} for shape {shape}")
    ok = "01?" if allow_unknown else "01"
    for i, s in enumerate(obj):
        _need(s, str, f"{where}[{i}]")
        if len(s) != shape[1] or any(c not in ok for c in s):
            raise InputError(f"{where}[{i}]: row {s!r} must have {shape[1]} characters from {ok!r}")
    return tuple(obj)


def _parse_slice(obj: Any, label: int) -> MorseSlice:
    where = f"slice{label}"
    _need(obj, dict, where)
    for k in obj:
        if k not in ("elements", "order", "conley_index", "connection", "tables"):
            raise InputError(f"{where}: unknown key {k!r}")
    ci_obj = _need(obj.get("conley_index"), dict, f"{where}.conley_index")
    conley_index = {e: parse_space(v, f"{where}.conley_index[{e!r}]") for e, v in ci_obj.items()}
    elements = obj.get("elements", list(conley_index))
    _need(elements, list, f"{where}.elements")
    covers = []
    for i, pair in enumerate(_need(obj.get("order", []), list, f"{where}.order")):
        if not (isinstance(pair, list) and len(pair) == 2 and all(isinstance(x, str) for x in pair)):
            raise InputError(f"{where}.order[{i}]: expected a [lower, upper] pair of ids")
        covers.append((pair[0], pair[1]))
    try:
        order = Poset.from_covers(elements, covers)
    except InputError as exc:
        raise InputError(f"{where}.order: {exc}") from None
    for e in elements:
        if e not in conley_index:
            raise InputError(f"{where}.conley_index: missing entry for {e!r}")

    connection: dict[Block, Matrix] = {}
    for key, rows in _need(obj.get("connection", {}), dict, f"{where}.connection").items():
        sub = f"{where}.connection[{key!r}]"
        p, q, n = parse_block_key(key, sub)
        for e in (p, q):
            if e not in conley_index:
                raise InputError(f"{sub}: unknown element id {e!r}")
        # shapes are taken as written so that verification can report degree errors
        _need(rows, list, sub)
        width = len(rows[0]) if rows and isinstance(rows[0], str) else conley_index[q].dim(n)
        rows = parse_rows(rows, (len(rows), width), sub)
        m = Matrix.from_bits(rows, width)
        connection[(p, q, n)] = m if (p, q, n) not in connection else connection[(p, q, n)] + m

    for deg, table in _need(obj.get("tables", {}), dict, f"{where}.tables").items():
        sub = f"{where}.tables[{deg!r}]"
        try:
            n = int(deg)
        except ValueError:
            raise InputError(f"{sub}: degree key is not an integer") from None
        rows = parse_rows(table, (len(elements), len(elements)), sub)
        for i, p in enumerate(elements):
            for j, q in enumerate(elements):
                if rows[i][j] != "1":
                    continue
                if conley_index[p].dim(n - 1) != 1 or conley_index[q].dim(n) != 1:
                    raise InputError(
                        f"{sub}[{i}][{j}]: table entries need 1-dimensional indices at ({p}, degree {n - 1}) and ({q}, degree {n})"
                    )
                connection[(p, q, n)] = Matrix(1, 1, (1,))
    return MorseSlice(label, order, conley_index, connection)


def _parse_pairs(obj: Any) -> tuple[tuple[frozenset[str], frozenset[str]], ...]:
    out = []
    for k, pair in enumerate(_need(obj, list, "continuable_pairs")):
        where = f"continuable_pairs[{k}]"
        if not (isinstance(pair, list) and len(pair) == 2):
            raise InputError(f"{where}: expected [[slice-0 ids], [slice-1 ids]]")
        sides = []
        for s, side in enumerate(pair):
            _need(side, list, f"{where}[{s}]")
            for e in side:
                _need(e, str, f"{where}[{s}]")
            sides.append(frozenset(side))
        out.append((sides[0], sides[1]))
    return tuple(out)


def parse_model(obj: Any, name: str = "") -> MorseModel:
    _need(obj, dict, "model")
    known = {"schema", "name", "slice0", "slice1", "continuable_pairs", "lambda0", "extended_order",
             "transition_fixed", "theta", "notes"}
    for k in obj:
        if k not in known:
            raise InputError(f"model: unknown top-level key {k!r}")
    for k in ("slice0", "slice1"):
        if k not in obj:
            raise InputError(f"model: missing required key {k!r}")
    s0 = _parse_slice(obj["slice0"], 0)
    s1 = _parse_slice(obj["slice1"], 1)
    pairs = _parse_pairs(obj.get("continuable_pairs", []))
    lam0 = obj.get("lambda0")
    if lam0 is not None:
        _need(lam0, (int, float), "lambda0")
        if not 0.0 < lam0 < 1.0:
            raise InputError("lambda0: must lie in (0, 1)")

    ext = obj.get("extended_order", "product")
    if isinstance(ext, list):
        pairs_ext = []
        for i, pr in enumerate(ext):
            if not (isinstance(pr, list) and len(pr) == 2 and all(isinstance(x, str) for x in pr)):
                raise InputError(f"extended_order[{i}]: expected a [lower, upper] pair of ids")
            pairs_ext.append((pr[0], pr[1]))
        ext = tuple(pairs_ext)
    elif ext not in ("product", "support"):
        raise InputError("extended_order: expected 'product', 'support' or a list of covering pairs")

    fixed: dict[Block, tuple[str, ...]] = {}
    for key, rows in _need(obj.get("transition_fixed", {}), dict, "transition_fixed").items():
        where = f"transition_fixed[{key!r}]"
        i, j, nh = parse_block_key(key, where)
        if i not in s0.conley_index:
            raise InputError(f"{where}: {i!r} is not a slice-0 element")
        if j not in s1.conley_index:
            raise InputError(f"{where}: {j!r} is not a slice-1 element")
        # T-hat block at extended degree nh: CH_{nh-1}(M_j) (shifted to nh) -> CH_{nh-1}(M_i)
        shape = (s0.conley_index[i].dim(nh - 1), s1.conley_index[j].dim(nh - 1))
        fixed[(i, j, nh)] = parse_rows(rows, shape, where, allow_unknown=True)

    theta: dict[str, dict[tuple[str, int], Matrix]] = {}
    th = _need(obj.get("theta", {}), dict, "theta")
    for side, sl in (("slice0", s0), ("slice1", s1)):
        entries = _need(th.get(side, {}), dict, f"theta.{side}")
        out = {}
        for key, rows in entries.items():
            where = f"theta.{side}[{key!r}]"
            parts = key.split("|")
            if len(parts) != 2:
                raise InputError(f"{where}: key must be 'id|degree'")
            e, deg = parts[0], parts[1]
            if e not in sl.conley_index:
                raise InputError(f"{where}: unknown element {e!r}")
            try:
                m = int(deg)
            except ValueError:
                raise InputError(f"{where}: degree is not an integer") from None
            d = sl.conley_index[e].dim(m - (1 if side == "slice1" else 0))
            mat = Matrix.from_bits(parse_rows(rows, (d, d), where), d)
            if not mat.is_invertible():
                raise InputError(f"{where}: matrix is not invertible")
            out[(e, m)] = mat
        theta[side] = out
    for k in th:
        if k not in ("slice0", "slice1"):
            raise InputError(f"theta: unknown key {k!r}")

    return MorseModel(s0, s1, pairs, lam0, ext, fixed, theta, obj.get("name", name))


def load_model(path: str | Path) -> MorseModel:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read model file ({exc.strerror})") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return parse_model(obj, name=path.stem)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def slice_to_json(s: MorseSlice) -> dict:
    return {
        "elements": list(s.elements),
        "order": [list(c) for c in s.order.covers()],
        "conley_index": {e: {str(n): d for n, d in s.conley_index[e].items()} for e in s.elements},
        "connection": {block_key(*k): s.connection[k].to_bits() for k in s.nonzero_blocks()},
    }


def model_to_json(model: MorseModel) -> dict:
    out: dict[str, Any] = {"schema": SCHEMA}
    if model.name:
        out["name"] = model.name
    out["slice0"] = slice_to_json(model.slice0)
    out["slice1"] = slice_to_json(model.slice1)
    out["continuable_pairs"] = [
        [[e for e in model.slice0.elements if e in a], [e for e in model.slice1.elements if e in b]]
        for a, b in model.continuable_pairs
    ]
    if model.lambda0 is not None:
        out["lambda0"] = model.lambda0
    if model.extended_order != "product":
        eo = model.extended_order
        out["extended_order"] = eo if isinstance(eo, str) else [list(p) for p in eo]
    if model.transition_fixed:
        out["transition_fixed"] = {block_key(*k): list(v) for k, v in model.transition_fixed.items()}
    return out
