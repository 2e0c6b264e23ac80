"""Transition matrices between the two boundary slices.

Conventions
-----------
* ``T`` has degree 0 and maps the slice-1 complex to the slice-0 complex.
  Block ``(i, j, n)`` maps ``CH_n(M_j^1)`` to ``CH_n(M_i^0)``.
* In the extended complex slice-1 generators sit one degree higher.  The
  off-diagonal block ``T̂`` at extended source degree ``m`` maps
  ``CH_m(M_j × 1)`` to ``CH_{m-1}(M_i × 0)``, and
  ``T_n(i, j) = θ⁰_n(i) T̂_{n+1}(i, j) θ¹_{n+1}(j)^{-1}``.
* ``θ¹_m(j)`` maps ``CH_m(M_j × 1)`` to ``CH_{m-1}(M_j)``; ``θ⁰_n(i)`` keeps
  the degree.  Both default to identities.
* (A2) is checked as acyclicity of the mapping cone, using
  ``sum_n rank(D_n) == dim(cone) / 2`` (each homology dimension is
  non-negative, so equality forces all of them to vanish).
"""

from __future__ import annotations

import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .conley import Block, MorseModel, MorseSlice, assemble, block_key, layout, restrict
from .continuation import ContinuabilityOracle, Decomposition, finest_decomposition
from .errors import InputError, ResourceError, TruncationError
from .gf2 import (
    ChainComplexG,
    GradedMap,
    GradedSpace,
    Matrix,
    compose,
    is_acyclic,
    is_boundary,
    is_chain_map,
    mapping_cone,
)
from .posets import Poset, is_adjacent_pair, product_order
from .report import VerificationReport

DEFAULT_MAX_FREE = 40
DEFAULT_CAP = 10000
LOW_BITS = 16

Pair = tuple[frozenset[str], frozenset[str]]


# ------------------------------------------------------------------ θ shifts


@dataclass(frozen=True)
class ThetaShift:
    """Per Morse set, per degree invertible matrices; missing entries are identities.

    ``theta0[(i, n)]`` acts on ``CH_n(M_i^0)``; ``theta1[(j, m)]`` maps the
    shifted ``CH_m(M_j × 1)`` down to ``CH_{m-1}(M_j^1)``.
    """

    theta0: dict[tuple[str, int], Matrix] = field(default_factory=dict)
    theta1: dict[tuple[str, int], Matrix] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for key, m in list(self.theta0.items()) + list(self.theta1.items()):
            if not m.is_invertible():
                raise InputError(f"theta matrix at {key} is not square invertible")

    @classmethod
    def identity(cls) -> "ThetaShift":
        return cls()

    @classmethod
    def from_model(cls, model: MorseModel) -> "ThetaShift":
        return cls(dict(model.theta.get("slice0", {})), dict(model.theta.get("slice1", {})))

    @classmethod
    def random(cls, model: MorseModel, rng: random.Random) -> "ThetaShift":
        def rand_inv(d: int) -> Matrix:
            while True:
                m = Matrix(d, d, tuple(rng.getrandbits(d) for _ in range(d)))
                if m.is_invertible():
                    return m

        t0 = {(e, n): rand_inv(d) for e, sp in model.slice0.conley_index.items() for n, d in sp.items()}
        t1 = {(e, n + 1): rand_inv(d) for e, sp in model.slice1.conley_index.items() for n, d in sp.items()}
        return cls(t0, t1)

    def t0(self, i: str, n: int, dim: int) -> Matrix:
        m = self.theta0.get((i, n))
        if m is None:
            return Matrix.identity(dim)
        if m.nrows != dim:
            raise InputError(f"theta0 at ({i}, {n}) has size {m.nrows}, expected {dim}")
        return m

    def t1(self, j: str, m: int, dim: int) -> Matrix:
        mat = self.theta1.get((j, m))
        if mat is None:
            return Matrix.identity(dim)
        if mat.nrows != dim:
            raise InputError(f"theta1 at ({j}, {m}) has size {mat.nrows}, expected {dim}")
        return mat

    def is_identity(self) -> bool:
        return all(m == Matrix.identity(m.nrows) for m in list(self.theta0.values()) + list(self.theta1.values()))


# ------------------------------------------------------------ transition data


@dataclass(frozen=True)
class TransitionMatrix:
    blocks: dict[Block, Matrix]
    provenance: str = "enumerated"

    def block(self, model: MorseModel, i: str, j: str, n: int) -> Matrix:
        m = self.blocks.get((i, j, n))
        if m is None:
            return Matrix.zeros(model.slice0.conley_index[i].dim(n), model.slice1.conley_index[j].dim(n))
        return m

    def nonzero_blocks(self, model: MorseModel) -> list[Block]:
        i0, i1 = model.slice0.order.index, model.slice1.order.index
        keys = [k for k, m in self.blocks.items() if not m.is_zero()]
        return sorted(keys, key=lambda k: (k[2], i0(k[0]), i1(k[1])))

    def graded_map(self, model: MorseModel, rows: Iterable[str] | None = None, cols: Iterable[str] | None = None) -> GradedMap:
        """The map ⊕_{j∈cols} CH(M_j^1) → ⊕_{i∈rows} CH(M_i^0)."""
        s0, s1 = model.slice0, model.slice1
        rows = [e for e in s0.elements if rows is None or e in set(rows)]
        cols = [e for e in s1.elements if cols is None or e in set(cols)]
        return cross_assemble(rows, s0.conley_index, cols, s1.conley_index, self.blocks)

    def restricted(self, model: MorseModel, pair: Pair) -> GradedMap:
        return self.graded_map(model, pair[0], pair[1])

    def table(self, model: MorseModel, n: int, empty: str = "0") -> list[str]:
        """Morse-set-level table at degree n; cells with an empty block print ``empty``."""
        out = []
        for i in model.slice0.elements:
            cells = []
            for j in model.slice1.elements:
                m = self.block(model, i, j, n)
                if m.nrows == 0 or m.ncols == 0:
                    cells.append(empty)
                elif m.shape == (1, 1):
                    cells.append(str(m.rows[0] & 1))
                else:
                    cells.append("[" + ";".join(m.to_bits()) + "]")
            out.append("".join(cells) if all(len(c) == 1 for c in cells) else " ".join(cells))
        return out

    def degrees(self, model: MorseModel) -> list[int]:
        d0 = set(model.slice0.space().degrees())
        d1 = set(model.slice1.space().degrees())
        return sorted(d0 & d1)

    def to_json(self, model: MorseModel) -> dict:
        return {
            "provenance": self.provenance,
            "blocks": {block_key(*k): self.blocks[k].to_bits() for k in self.nonzero_blocks(model)},
            "tables": {str(n): self.table(model, n) for n in self.degrees(model)},
        }

    def same_as(self, other: "TransitionMatrix") -> bool:
        keys = set(self.blocks) | set(other.blocks)
        for k in keys:
            a, b = self.blocks.get(k), other.blocks.get(k)
            za = a is None or a.is_zero()
            zb = b is None or b.is_zero()
            if za and zb:
                continue
            if a != b:
                return False
        return True


def cross_assemble(
    rows: Sequence[str],
    idx0: Mapping[str, GradedSpace],
    cols: Sequence[str],
    idx1: Mapping[str, GradedSpace],
    blocks: Mapping[Block, Matrix],
) -> GradedMap:
    src = GradedSpace({})
    for e in cols:
        src = src + idx1[e]
    tgt = GradedSpace({})
    for e in rows:
        tgt = tgt + idx0[e]
    rset, cset = set(rows), set(cols)
    per_degree: dict[int, list[int]] = {}
    for (i, j, n), m in blocks.items():
        if i not in rset or j not in cset or m.is_zero():
            continue
        r0, rd = layout(rows, idx0, n)[i]
        c0, cd = layout(cols, idx1, n)[j]
        if m.shape != (rd, cd):
            raise InputError(f"transition block {block_key(i, j, n)} has shape {m.shape}, expected {(rd, cd)}")
        acc = per_degree.setdefault(n, [0] * tgt.dim(n))
        for k, r in enumerate(m.rows):
            acc[r0 + k] ^= r << c0
    mats = {n: Matrix(tgt.dim(n), src.dim(n), tuple(r)) for n, r in per_degree.items()}
    return GradedMap(src, tgt, 0, mats)


# ---------------------------------------------------------- extended complex


@dataclass(frozen=True)
class ExtendedComplex:
    order: Poset
    index: dict[str, GradedSpace]
    blocks: dict[Block, Matrix]
    unknown: frozenset[Block] = frozenset()
    slice0_ids: tuple[str, ...] = ()
    slice1_ids: tuple[str, ...] = ()

    @property
    def elements(self) -> tuple[str, ...]:
        return self.order.elements

    def space(self) -> GradedSpace:
        out = GradedSpace({})
        for e in self.elements:
            out = out + self.index[e]
        return out

    def boundary(self) -> GradedMap:
        return assemble(self.elements, self.index, self.blocks)

    def complex(self) -> ChainComplexG:
        return ChainComplexG(self.space(), self.boundary())

    def as_slice(self) -> MorseSlice:
        return MorseSlice(2, self.order, dict(self.index), dict(self.blocks))

    def verify(self) -> VerificationReport:
        from .conley import verify_connection_matrix

        rep = verify_connection_matrix(self.as_slice())
        rep.subject = "extended connection matrix"
        return rep

    def morse_table(self) -> list[str]:
        """Morse-set-level table over all degrees; '?' marks symbolic T̂ blocks.

        Meaningful when every Morse set has a one-dimensional index; a cell
        is 1 when the unique block between the two sets is [1].
        """
        unknown_pairs = {(i, j) for i, j, _ in self.unknown}
        out = []
        for p in self.elements:
            cells = []
            for q in self.elements:
                if (p, q) in unknown_pairs:
                    cells.append("?")
                    continue
                val = any(not m.is_zero() for (a, b, _), m in self.blocks.items() if a == p and b == q)
                cells.append("1" if val else "0")
            out.append("".join(cells))
        return out


def _extended_index(model: MorseModel) -> dict[str, GradedSpace]:
    idx = dict(model.slice0.conley_index)
    for e, sp in model.slice1.conley_index.items():
        idx[e] = sp.shift(1)
    return idx


def build_extended(
    model: MorseModel,
    theta: ThetaShift | None = None,
    tblock: Mapping[Block, Matrix | None] | None = None,
    order: Poset | None = None,
) -> ExtendedComplex:
    """Assemble [[X̂(0), T̂], [0, X̂(1)]] on the extended index set.

    ``tblock`` keys are ``(i, j, m)`` with m the extended source degree; a
    value of ``None`` leaves that block symbolic (treated as zero in the
    boundary and shown as '?' in :meth:`ExtendedComplex.morse_table`).
    """
    theta = theta or ThetaShift.identity()
    s0, s1 = model.slice0, model.slice1
    ci0, ci1 = s0.conley_index, s1.conley_index
    blocks: dict[Block, Matrix] = {}
    # X̂_n(0)(i,j) = θ⁰_{n-1}(i)^{-1} X_n(0)(i,j) θ⁰_n(j)
    for (p, q, n), x in s0.connection.items():
        if x.is_zero():
            continue
        left = theta.t0(p, n - 1, ci0[p].dim(n - 1)).inverse()
        right = theta.t0(q, n, ci0[q].dim(n))
        blocks[(p, q, n)] = left @ x @ right
    # slice 1 at extended source degree m = n + 1
    for (p, q, n), x in s1.connection.items():
        if x.is_zero():
            continue
        m = n + 1
        left = theta.t1(p, m - 1, ci1[p].dim(m - 2)).inverse()
        right = theta.t1(q, m, ci1[q].dim(m - 1))
        blocks[(p, q, m)] = left @ x @ right
    unknown = set()
    for (i, j, m), val in (tblock or {}).items():
        if i not in ci0 or j not in ci1:
            raise InputError(f"T-hat block {block_key(i, j, m)} must map a slice-1 set to a slice-0 set")
        shape = (ci0[i].dim(m - 1), ci1[j].dim(m - 1))
        if val is None:
            if shape[0] and shape[1]:
                unknown.add((i, j, m))
            continue
        if val.shape != shape:
            raise InputError(f"T-hat block {block_key(i, j, m)} has shape {val.shape}, expected {shape}")
        if not val.is_zero():
            blocks[(i, j, m)] = val
    if order is None:
        order = product_order(s0.order, s1.order)
    return ExtendedComplex(order, _extended_index(model), blocks, frozenset(unknown), s0.elements, s1.elements)


def shift_to_transition(ext: ExtendedComplex, theta: ThetaShift | None = None) -> TransitionMatrix:
    theta = theta or ThetaShift.identity()
    if ext.unknown:
        raise InputError("extended complex still has symbolic T-hat blocks")
    if not is_boundary(ext.boundary()):
        raise InputError("extended boundary does not square to zero")
    s0, s1 = set(ext.slice0_ids), set(ext.slice1_ids)
    out = {}
    for (i, j, m), th in ext.blocks.items():
        if i in s0 and j in s1:
            n = m - 1
            left = theta.t0(i, n, th.nrows)
            right = theta.t1(j, m, th.ncols).inverse()
            out[(i, j, n)] = left @ th @ right
    return TransitionMatrix(out, provenance="assembled")


def to_hat(model: MorseModel, t: TransitionMatrix, theta: ThetaShift | None = None) -> dict[Block, Matrix]:
    """Inverse of the shift: T̂_{n+1}(i,j) = θ⁰_n(i)^{-1} T_n(i,j) θ¹_{n+1}(j)."""
    theta = theta or ThetaShift.identity()
    out = {}
    for (i, j, n), m in t.blocks.items():
        left = theta.t0(i, n, m.nrows).inverse()
        right = theta.t1(j, n + 1, m.ncols)
        out[(i, j, n + 1)] = left @ m @ right
    return out


# ------------------------------------------------------------- (A1) / (A2)


def _pairs_for_scope(model: MorseModel, d: Decomposition | None, scope: str) -> list[Pair]:
    if scope == "finest":
        d = d if d is not None else finest_decomposition(model)
        pairs = list(d.pairs)
        if model.trivial_pair not in pairs:
            pairs.append(model.trivial_pair)
        return pairs
    if scope == "closure":
        return ContinuabilityOracle(model).pairs()
    raise InputError(f"unknown A2 scope {scope!r} (expected 'finest' or 'closure')")


def _pair_label(model: MorseModel, pair: Pair) -> str:
    a = ",".join(e for e in model.slice0.elements if e in pair[0])
    b = ",".join(e for e in model.slice1.elements if e in pair[1])
    return f"({{{a}}},{{{b}}})"


def is_axiomatic(
    model: MorseModel, d: Decomposition | None, t: TransitionMatrix, scope: str = "finest"
) -> VerificationReport:
    rep = VerificationReport("axiomatic transition matrix")
    c0, c1 = model.slice0.complex(), model.slice1.complex()
    tm = t.graded_map(model)
    rep.add("A1 chain map", [] if is_chain_map(tm, c1, c0) else ["global"])
    for pair in _pairs_for_scope(model, d, scope):
        label = _pair_label(model, pair)
        src = restrict(model.slice1, pair[1])
        dst = restrict(model.slice0, pair[0])
        tr = t.restricted(model, pair)
        if not is_chain_map(tr, src, dst):
            rep.add(f"A2 chain map {label}", [label])
            rep.add(f"A2 iso {label}", [label], "skipped: restriction is not a chain map")
            continue
        rep.add(f"A2 chain map {label}", [])
        acyclic = is_acyclic(mapping_cone(tr, src, dst))
        rep.add(f"A2 iso {label}", [] if acyclic else [label], "" if acyclic else "mapping cone has homology")
    return rep


# ---------------------------------------------------------------- enumeration


@dataclass
class _Layout:
    """Generator bookkeeping for one slice: per degree, list of (element, k)."""

    gens: dict[int, list[tuple[str, int]]]
    pos: dict[tuple[str, int, int], int]

    @classmethod
    def of(cls, slice_: MorseSlice) -> "_Layout":
        gens: dict[int, list[tuple[str, int]]] = {}
        pos = {}
        for n in slice_.space().degrees():
            lst = []
            for e in slice_.elements:
                for k in range(slice_.conley_index[e].dim(n)):
                    pos[(e, n, k)] = len(lst)
                    lst.append((e, k))
            gens[n] = lst
        return cls(gens, pos)

    def at(self, n: int) -> list[tuple[str, int]]:
        return self.gens.get(n, [])


def _solve_affine(rows: Iterable[int], nvars: int) -> tuple[dict[int, int], list[int]] | None:
    """RREF over GF(2) with lowest-index pivots.

    Each row is a bitset over variables with bit ``nvars`` as the constant
    (row means sum of vars = constant).  Returns ``(pivot_rows, free_vars)``
    where ``pivot_rows[v]`` is the fully reduced row of pivot variable v, or
    ``None`` when the system is inconsistent.
    """
    cbit = 1 << nvars
    var_mask = cbit - 1
    piv: dict[int, int] = {}
    for r in rows:
        for v, pr in piv.items():
            if r >> v & 1:
                r ^= pr
        if not r & var_mask:
            if r & cbit:
                return None
            continue
        p = (r & -r).bit_length() - 1
        for v in list(piv):
            if piv[v] >> p & 1:
                piv[v] ^= r
        piv[p] = r
    free = [v for v in range(nvars) if v not in piv]
    return piv, free


@dataclass
class EnumerationResult:
    matrices: list[TransitionMatrix]
    truncated: bool
    free_dim: int
    unknowns: int
    fixed: int
    codes: list[int]
    backend: str
    checks: int

    def __len__(self) -> int:
        return len(self.matrices)

    def __iter__(self):
        return iter(self.matrices)

    def __getitem__(self, k: int) -> TransitionMatrix:
        return self.matrices[k]


@dataclass
class _Problem:
    """Affine parametrisation of T entries plus the packed cone checks."""

    model: MorseModel
    lay0: _Layout
    lay1: _Layout
    entries: dict[tuple[int, int, int], tuple[int, int]]  # (n, r, c) -> (const, free-mask)
    nfree: int
    nvars: int
    nfixed: int
    base: list[int] = field(default_factory=list)
    deltas: list[list[int]] = field(default_factory=list)
    mat_off: list[int] = field(default_factory=lambda: [0])
    mat_cols: list[int] = field(default_factory=list)
    check_start: list[int] = field(default_factory=lambda: [0])
    check_target: list[int] = field(default_factory=list)
    infeasible: bool = False

    def entry_value(self, key: tuple[int, int, int], code: int) -> int:
        const, mask = self.entries.get(key, (0, 0))
        bits = 0
        for f in _bit_iter(mask):
            bits ^= code >> (self.nfree - 1 - f) & 1
        return const ^ bits

    def materialize(self, code: int) -> TransitionMatrix:
        blocks: dict[Block, list[int]] = {}
        shapes: dict[Block, tuple[int, int]] = {}
        ci0, ci1 = self.model.slice0.conley_index, self.model.slice1.conley_index
        for n in sorted(set(self.lay0.gens) & set(self.lay1.gens)):
            g0, g1 = self.lay0.at(n), self.lay1.at(n)
            for r, (i, ki) in enumerate(g0):
                for c, (j, kj) in enumerate(g1):
                    key = (i, j, n)
                    if key not in blocks:
                        blocks[key] = [0] * ci0[i].dim(n)
                        shapes[key] = (ci0[i].dim(n), ci1[j].dim(n))
                    if self.entry_value((n, r, c), code):
                        blocks[key][ki] |= 1 << kj
        out = {k: Matrix(shapes[k][0], shapes[k][1], tuple(v)) for k, v in blocks.items() if any(v)}
        return TransitionMatrix(out, provenance="enumerated")


def _bit_iter(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _fixed_entries(model: MorseModel, theta: ThetaShift, lay0: _Layout, lay1: _Layout) -> dict[tuple[int, int, int], int]:
    """T-level fixed entries from the model's T̂-level constraints."""
    out: dict[tuple[int, int, int], int] = {}
    ident = theta.is_identity()
    for (i, j, m), rows in model.transition_fixed.items():
        n = m - 1
        if not rows or not rows[0]:
            continue
        if not ident:
            if any("?" in r for r in rows):
                raise InputError(f"partially fixed block {block_key(i, j, m)} needs identity theta")
            th = Matrix.from_bits(list(rows), len(rows[0]))
            tm = theta.t0(i, n, th.nrows) @ th @ theta.t1(j, m, th.ncols).inverse()
            rows = tuple(tm.to_bits())
        for ki, s in enumerate(rows):
            for kj, ch in enumerate(s):
                if ch == "?":
                    continue
                r = lay0.pos[(i, n, ki)]
                c = lay1.pos[(j, n, kj)]
                out[(n, r, c)] = int(ch)
    return out


def _sub_block(slice_: MorseSlice, lay: _Layout, n: int, rows_keep: set[str] | None, cols_keep: set[str] | None):
    """Boundary out of degree n restricted to generators of the given elements.

    Returns (row generator indices, col generator indices, matrix rows as
    bitsets over the kept columns).
    """
    full = slice_.boundary().block(n)
    ridx = [k for k, (e, _) in enumerate(lay.at(n - 1)) if rows_keep is None or e in rows_keep]
    cidx = [k for k, (e, _) in enumerate(lay.at(n)) if cols_keep is None or e in cols_keep]
    return ridx, cidx, full.submatrix(ridx, cidx) if ridx and cidx else Matrix.zeros(len(ridx), len(cidx))


def _build_problem(
    model: MorseModel,
    pairs: Sequence[Pair],
    theta: ThetaShift,
    max_free: int,
) -> _Problem:
    s0, s1 = model.slice0, model.slice1
    lay0, lay1 = _Layout.of(s0), _Layout.of(s1)
    degrees = sorted(set(lay0.gens) & set(lay1.gens))
    var_of: dict[tuple[int, int, int], int] = {}
    fixed = _fixed_entries(model, theta, lay0, lay1)
    for n in degrees:
        for r in range(len(lay0.at(n))):
            for c in range(len(lay1.at(n))):
                if (n, r, c) not in fixed:
                    var_of[(n, r, c)] = len(var_of)
    nvars = len(var_of)
    cbit = 1 << nvars

    def form(n: int, r: int, c: int) -> int:
        """Affine form of entry T_n[r, c] as var bitset with constant bit."""
        v = var_of.get((n, r, c))
        if v is not None:
            return 1 << v
        return cbit if fixed.get((n, r, c), 0) else 0

    # chain-map equations, globally and for each checked pair
    equations: list[int] = []
    scopes: list[tuple[set[str] | None, set[str] | None]] = [(None, None)]
    scopes += [(set(a), set(b)) for a, b in pairs]
    for keep0, keep1 in scopes:
        for n in sorted(set(lay1.gens)):
            # X0_n T_n + T_{n-1} X1_n : C1_n -> C0_{n-1}
            r0, k0, x0 = _sub_block(s0, lay0, n, keep0, keep0)
            r1, k1, x1 = _sub_block(s1, lay1, n, keep1, keep1)
            rows_a = [k for k, (e, _) in enumerate(lay0.at(n - 1)) if keep0 is None or e in keep0]
            cols_b = [k for k, (e, _) in enumerate(lay1.at(n)) if keep1 is None or e in keep1]
            for a in rows_a:
                for b in cols_b:
                    eq = 0
                    if a in r0:
                        xa = x0.rows[r0.index(a)]
                        for t, kk in enumerate(k0):
                            if xa >> t & 1:
                                eq ^= form(n, kk, b)
                    if b in k1:
                        bcol = k1.index(b)
                        for t, kk in enumerate(r1):
                            if x1.rows[t] >> bcol & 1:
                                eq ^= form(n - 1, a, kk)
                    if eq:
                        equations.append(eq)
    solved = _solve_affine(equations, nvars)
    if solved is None:
        prob = _Problem(model, lay0, lay1, {}, 0, nvars, len(fixed))
        prob.infeasible = True
        return prob
    piv, free = solved
    nfree = len(free)
    if nfree > max_free:
        raise ResourceError(
            f"transition enumeration has {nfree} free bits after linear reduction (cap {max_free})"
        )
    free_index = {v: f for f, v in enumerate(free)}
    var_expr: dict[int, tuple[int, int]] = {}
    for v in range(nvars):
        if v in free_index:
            var_expr[v] = (0, 1 << free_index[v])
        else:
            row = piv[v]
            const = row >> nvars & 1
            mask = 0
            for u in _bit_iter(row & (cbit - 1) & ~(1 << v)):
                mask |= 1 << free_index[u]
            var_expr[v] = (const, mask)
    entries: dict[tuple[int, int, int], tuple[int, int]] = {}
    for key, v in var_of.items():
        entries[key] = var_expr[v]
    for key, val in fixed.items():
        entries[key] = (val, 0)
    prob = _Problem(model, lay0, lay1, entries, nfree, nvars, len(fixed))
    _pack_checks(prob, pairs)
    return prob


def _pack_checks(prob: _Problem, pairs: Sequence[Pair]) -> None:
    """Cone boundary matrices of every checked pair as affine row bitsets."""
    s0, s1 = prob.model.slice0, prob.model.slice1
    lay0, lay1 = prob.lay0, prob.lay1
    nfree = prob.nfree
    base: list[int] = []
    deltas: list[list[int]] = [[] for _ in range(nfree)]
    for keep0, keep1 in ((set(a), set(b)) for a, b in pairs):
        g0 = {n: [k for k, (e, _) in enumerate(lay0.at(n)) if e in keep0] for n in lay0.gens}
        g1 = {n: [k for k, (e, _) in enumerate(lay1.at(n)) if e in keep1] for n in lay1.gens}
        dim0 = sum(len(v) for v in g0.values())
        dim1 = sum(len(v) for v in g1.values())
        total = dim0 + dim1
        target = total // 2
        degs = sorted({n + 1 for n in g1 if g1[n]} | {n for n in g0 if g0[n]})
        mats: list[tuple[list[int], list[list[int]], int]] = []
        for n in degs:
            # columns: C1_{n-1} (kept) then C0_n (kept); rows: C1_{n-2} then C0_{n-1}
            cs, cd = g1.get(n - 1, []), g0.get(n, [])
            rs, rd = g1.get(n - 2, []), g0.get(n - 1, [])
            ncols, nrows = len(cs) + len(cd), len(rs) + len(rd)
            if not ncols or not nrows:
                continue
            xs = s1.boundary().block(n - 1).submatrix(rs, cs) if rs and cs else None
            xd = s0.boundary().block(n).submatrix(rd, cd) if rd and cd else None
            mbase, mdel = [], [[] for _ in range(nfree)]
            for t in range(len(rs)):
                row = xs.rows[t] if xs is not None else 0
                mbase.append(row)
                for f in range(nfree):
                    mdel[f].append(0)
            for t, a in enumerate(rd):
                row = (xd.rows[t] << len(cs)) if xd is not None else 0
                drow = [0] * nfree
                for u, b in enumerate(cs):
                    const, mask = prob.entries.get((n - 1, a, b), (0, 0))
                    if const:
                        row |= 1 << u
                    for f in _bit_iter(mask):
                        drow[f] |= 1 << u
                mbase.append(row)
                for f in range(nfree):
                    mdel[f].append(drow[f])
            mats.append((mbase, mdel, ncols))
        const_only = all(not any(md) for _, mdl, _ in mats for md in mdl)
        if total % 2:
            prob.infeasible = True
            return
        if const_only:
            from ._kernels._fallback import rank_u64

            if sum(rank_u64(mb) for mb, _, _ in mats) != target:
                prob.infeasible = True
                return
            continue
        for mbase, mdel, ncols in mats:
            base.extend(mbase)
            for f in range(nfree):
                deltas[f].extend(mdel[f])
            prob.mat_off.append(len(base))
            prob.mat_cols.append(ncols)
        prob.check_start.append(len(prob.mat_off) - 1)
        prob.check_target.append(target)
    prob.base = base
    prob.deltas = deltas


def _worker_count(threads: int | None) -> int:
    if threads is not None:
        return max(1, threads)
    env = os.environ.get("CONLEY_TRANSIT_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"CONLEY_TRANSIT_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _scan(prob: _Problem, cap: int, threads: int | None, backend: str | None) -> tuple[list[int], bool, str]:
    nfree = prob.nfree
    wide = any(c > 64 for c in prob.mat_cols)
    kern = _kernels.get_backend("python" if wide else backend)
    if not prob.check_target:
        # no rank filter: every point of the affine space is accepted
        total = 1 << nfree
        n = min(total, cap + 1)
        return list(range(n)), total > cap, kern.NAME
    low = min(nfree, LOW_BITS)
    nprefix = 1 << (nfree - low)
    if kern.NAME == "cython":
        base = np.array(prob.base, dtype=np.uint64)
        deltas = np.array(prob.deltas, dtype=np.uint64).reshape(nfree, len(prob.base))
    else:
        base, deltas = prob.base, prob.deltas
    mat_off = np.array(prob.mat_off, dtype=np.int32)
    cst = np.array(prob.check_start, dtype=np.int32)
    ctg = np.array(prob.check_target, dtype=np.int32)

    def run(prefix: int):
        return kern.scan_block(base, deltas, mat_off, cst, ctg, nfree, prefix, low)

    accepted: list[int] = []
    workers = _worker_count(threads)
    truncated = False
    if workers == 1 or nprefix == 1:
        for prefix in range(nprefix):
            accepted.extend(int(v) for v in run(prefix))
            if len(accepted) > cap:
                truncated = True
                break
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for start in range(0, nprefix, workers):
                chunk = range(start, min(nprefix, start + workers))
                for res in pool.map(run, chunk):
                    accepted.extend(int(v) for v in res)
                if len(accepted) > cap:
                    truncated = True
                    break
    return accepted[:cap], truncated, kern.NAME


def enumerate_transitions(
    model: MorseModel,
    d: Decomposition | None = None,
    cap: int = DEFAULT_CAP,
    *,
    max_free: int = DEFAULT_MAX_FREE,
    scope: str = "finest",
    theta: ThetaShift | None = None,
    threads: int | None = None,
    backend: str | None = None,
) -> EnumerationResult:
    """All axiomatic transition matrices, ordered by free-variable bit-vector."""
    theta = theta if theta is not None else ThetaShift.from_model(model)
    pairs = _pairs_for_scope(model, d, scope)
    prob = _build_problem(model, pairs, theta, max_free)
    if prob.infeasible:
        return EnumerationResult([], False, prob.nfree, prob.nvars, prob.nfixed, [], "none", len(prob.check_target))
    codes, truncated, name = _scan(prob, cap, threads, backend)
    mats = [prob.materialize(c) for c in codes]
    return EnumerationResult(mats, truncated, prob.nfree, prob.nvars, prob.nfixed, codes, name, len(prob.check_target))


def linear_solution_space(model: MorseModel, d: Decomposition | None = None, theta: ThetaShift | None = None,
                          max_free: int = DEFAULT_MAX_FREE) -> _Problem:
    """Affine solution space of the chain-map equations before any rank filter."""
    theta = theta if theta is not None else ThetaShift.from_model(model)
    pairs = _pairs_for_scope(model, d, "finest")
    return _build_problem(model, pairs, theta, max_free)


# ----------------------------------------------------------- forced orbits


def extended_order(model: MorseModel, transitions: Sequence[TransitionMatrix] | None = None) -> Poset:
    """Order on the extended index set selected by ``model.extended_order``.

    ``"product"``: every slice-0 set below every slice-1 set.
    ``"support"``: generated by the nonzero connection blocks of both slices
    and the union of nonzero T blocks over ``transitions``.
    A tuple of pairs gives covering relations explicitly.
    """
    s0, s1 = model.slice0, model.slice1
    spec = model.extended_order
    elements = s0.elements + s1.elements
    if spec == "product":
        return product_order(s0.order, s1.order)
    if spec == "support":
        if transitions is None:
            raise InputError("support order needs the enumerated transition matrices")
        covers = {(p, q) for p, q, _ in s0.nonzero_blocks()}
        covers |= {(p, q) for p, q, _ in s1.nonzero_blocks()}
        for t in transitions:
            covers |= {(i, j) for i, j, _ in t.nonzero_blocks(model)}
        return Poset.from_covers(elements, sorted(covers))
    return Poset.from_covers(elements, list(spec))


def forced_connections(
    model: MorseModel,
    d: Decomposition | None = None,
    result: EnumerationResult | None = None,
    cap: int = DEFAULT_CAP,
    **kwargs: Any,
) -> list[Block]:
    """Adjacent (p, q, n) whose T block is nonzero in every enumerated matrix."""
    if result is None:
        result = enumerate_transitions(model, d, cap, **kwargs)
    if result.truncated:
        raise TruncationError("forced connections need a complete (untruncated) enumeration")
    if not result.matrices:
        return []
    order = extended_order(model, result.matrices)
    first = result.matrices[0]
    candidates = set(first.nonzero_blocks(model))
    for t in result.matrices[1:]:
        candidates &= set(t.nonzero_blocks(model))
    i0, i1 = model.slice0.order.index, model.slice1.order.index
    out = [k for k in candidates if is_adjacent_pair(order, [k[0]], [k[1]])]
    return sorted(out, key=lambda k: (i0(k[0]), i1(k[1]), k[2]))


# -------------------------------------------------------------- scenarios


@dataclass(frozen=True)
class Scenario:
    kind: str
    steps: tuple[str, ...]

    @property
    def text(self) -> str:
        return " ".join(self.steps)

    def to_json(self) -> dict:
        return {"kind": self.kind, "path": self.text}


def _support_order(slice_: MorseSlice, members: Iterable[str]) -> Poset:
    keep = [e for e in slice_.elements if e in set(members)]
    covers = [(p, q) for p, q, _ in slice_.nonzero_blocks() if p in keep and q in keep]
    return Poset.from_covers(keep, covers)


def _chains_down(order: Poset, start: str) -> list[list[str]]:
    """All descending cover chains from start (including the trivial one)."""
    out = [[start]]
    for p, q in order.covers():
        if q == start:
            out.extend([start] + rest for rest in _chains_down(order, p))
    return out


def _alts(names: list[str]) -> str:
    return names[0] if len(names) == 1 else names[0] + " (or " + ", ".join(names[1:]) + ")"


def connection_scenarios(
    model: MorseModel, forced: tuple[str, str] | Block, d: Decomposition | None = None
) -> list[Scenario]:
    """Qualitative routes for a forced connection from q (slice 1) to p (slice 0).

    ``M[X]`` stands for the continuation block of finest pair X through the
    breakdown parameter.  Routes: directly through blocks at the breakdown,
    a slice-0 connection before it, or a slice-1 connection after it;
    alternative sets at the same step are listed with "or".
    """
    p, q = forced[0], forced[1]
    d = d if d is not None else finest_decomposition(model)
    blk_p = next((k for k, (a, _) in enumerate(d.pairs) if p in a), None)
    blk_q = next((k for k, (_, b) in enumerate(d.pairs) if q in b), None)
    if blk_p is None or blk_q is None:
        raise InputError(f"({p}, {q}) is not covered by the decomposition")

    def name(k: int) -> str:
        return f"M[{_pair_label(model, d.pairs[k])}]"

    if blk_p == blk_q:
        return [Scenario("within-block", (q, "->", name(blk_p), "<-", p))]
    A, B = blk_p, blk_q
    out = [Scenario("at-breakdown", (q, "->", name(B), ">", name(A), "<-", p))]

    # before the breakdown: leave M_B at a set of J_B, slide down inside J_B, then reach p
    jb = d.pairs[B][0]
    s0 = model.slice0
    if jb:
        sup = _support_order(s0, jb)
        by_len: dict[int, list[list[str]]] = {}
        for r in sup.elements:
            for chain in _chains_down(sup, r):
                last = chain[-1]
                if sup.down_mask(sup.index(last)) == 0 and s0.order.less(p, last):
                    by_len.setdefault(len(chain), []).append(chain)
        for ln in sorted(by_len):
            chains = by_len[ln]
            steps: list[str] = [q, "->", name(B), "<-"]
            for k in range(ln):
                steps.append(_alts(sorted({c[k] for c in chains}, key=s0.order.index, reverse=True)))
                steps.append(">")
            steps.append(p)
            out.append(Scenario(f"before-breakdown-{ln}", tuple(steps)))

    # after the breakdown: q drops into a top set of J'_A, then slides down inside it
    ja1 = d.pairs[A][1]
    s1 = model.slice1
    if ja1:
        sup = _support_order(s1, ja1)
        by_len = {}
        for s in sup.elements:
            if sup.up_mask(sup.index(s)) != 0 or not s1.order.less(s, q):
                continue
            for chain in _chains_down(sup, s):
                by_len.setdefault(len(chain), []).append(chain)
        for ln in sorted(by_len):
            chains = by_len[ln]
            steps = [q]
            for k in range(ln):
                steps.append(">")
                steps.append(_alts(sorted({c[k] for c in chains}, key=s1.order.index, reverse=True)))
            steps += ["->", name(A), "<-", p]
            out.append(Scenario(f"after-breakdown-{ln}", tuple(steps)))
    return out
