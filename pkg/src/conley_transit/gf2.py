"""Graded linear algebra over GF(2).

Matrices are row bitsets: bit ``j`` of ``rows[i]`` is the entry in row ``i``,
column ``j``.  Over GF(2) every sign in the usual chain-complex formulas
disappears (``-X = X``), so cones and chain-map identities are written
without signs.

A :class:`GradedMap` stores one block per *source* degree ``n``, mapping
degree ``n`` to degree ``n + degree``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import InputError, ResourceError

DEFAULT_MAX_DEGREE = 8
DEFAULT_MAX_DIM = 32


def _lowbit(v: int) -> int:
    return (v & -v).bit_length() - 1


def _bits(v: int) -> Iterator[int]:
    while v:
        low = v & -v
        yield low.bit_length() - 1
        v ^= low


@dataclass(frozen=True)
class Matrix:
    nrows: int
    ncols: int
    rows: tuple[int, ...]

    def __post_init__(self) -> None:
        rows = tuple(self.rows)
        object.__setattr__(self, "rows", rows)
        if len(rows) != self.nrows:
            raise InputError(f"matrix has {len(rows)} rows, expected {self.nrows}")
        limit = 1 << self.ncols
        for r in rows:
            if r < 0 or r >= limit:
                raise InputError(f"matrix row {r:b} wider than {self.ncols} columns")

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "Matrix":
        return cls(nrows, ncols, (0,) * nrows)

    @classmethod
    def identity(cls, n: int) -> "Matrix":
        return cls(n, n, tuple(1 << i for i in range(n)))

    @classmethod
    def from_bits(cls, rows: Sequence[str], ncols: int | None = None) -> "Matrix":
        """Parse bit-strings; character ``j`` of string ``i`` is entry (i, j)."""
        if ncols is None:
            ncols = len(rows[0]) if rows else 0
        packed = []
        for i, s in enumerate(rows):
            if len(s) != ncols or any(c not in "01" for c in s):
                raise InputError(f"bad bit-string row {i}: {s!r} (expected {ncols} chars of 0/1)")
            packed.append(sum(1 << j for j, c in enumerate(s) if c == "1"))
        return cls(len(rows), ncols, tuple(packed))

    @classmethod
    def from_lists(cls, rows: Sequence[Sequence[int]]) -> "Matrix":
        ncols = len(rows[0]) if rows else 0
        return cls(len(rows), ncols, tuple(sum((v & 1) << j for j, v in enumerate(r)) for r in rows))

    def to_bits(self) -> list[str]:
        return ["".join("1" if r >> j & 1 else "0" for j in range(self.ncols)) for r in self.rows]

    def to_lists(self) -> list[list[int]]:
        return [[r >> j & 1 for j in range(self.ncols)] for r in self.rows]

    @property
    def shape(self) -> tuple[int, int]:
        return self.nrows, self.ncols

    def entry(self, i: int, j: int) -> int:
        return self.rows[i] >> j & 1

    def is_zero(self) -> bool:
        return not any(self.rows)

    def __add__(self, other: "Matrix") -> "Matrix":
        if self.shape != other.shape:
            raise InputError(f"cannot add {self.shape} and {other.shape} matrices")
        return Matrix(self.nrows, self.ncols, tuple(a ^ b for a, b in zip(self.rows, other.rows)))

    def __matmul__(self, other: "Matrix") -> "Matrix":
        if self.ncols != other.nrows:
            raise InputError(f"cannot multiply {self.shape} by {other.shape}")
        out = []
        for r in self.rows:
            acc = 0
            for k in _bits(r):
                acc ^= other.rows[k]
            out.append(acc)
        return Matrix(self.nrows, other.ncols, tuple(out))

    def transpose(self) -> "Matrix":
        cols = [0] * self.ncols
        for i, r in enumerate(self.rows):
            for j in _bits(r):
                cols[j] |= 1 << i
        return Matrix(self.ncols, self.nrows, tuple(cols))

    def columns(self) -> list[int]:
        return list(self.transpose().rows)

    def apply(self, v: int) -> int:
        """Image of the column vector ``v`` (bitset over columns)."""
        out = 0
        for i, r in enumerate(self.rows):
            if (r & v).bit_count() & 1:
                out |= 1 << i
        return out

    def rank(self) -> int:
        return rank_rows(self.rows)

    def kernel_basis(self) -> list[int]:
        """Basis of the null space as bitsets over columns."""
        ech = Echelon()
        basis = []
        for j, col in enumerate(self.columns()):
            residual, tag = ech.reduce(col, 1 << j)
            if residual:
                ech.insert(residual, tag)
            else:
                basis.append(tag)
        return basis

    def image_basis(self) -> list[int]:
        """Independent columns (first-come order) spanning the image."""
        ech = Echelon()
        basis = []
        for col in self.columns():
            residual, tag = ech.reduce(col, 0)
            if residual:
                ech.insert(residual, tag)
                basis.append(col)
        return basis

    def inverse(self) -> "Matrix":
        if self.nrows != self.ncols:
            raise InputError("only square matrices are invertible")
        n = self.nrows
        ech = Echelon()
        for i, r in enumerate(self.rows):
            residual, tag = ech.reduce(r, 1 << i)
            if not residual:
                raise InputError("matrix is singular")
            ech.insert(residual, tag)
        # row j of the inverse holds the row combination c with c·A = e_j
        out = [ech.reduce(1 << j, 0)[1] for j in range(n)]
        return Matrix(n, n, tuple(out))

    def is_invertible(self) -> bool:
        return self.nrows == self.ncols and self.rank() == self.nrows

    def submatrix(self, row_idx: Sequence[int], col_idx: Sequence[int]) -> "Matrix":
        out = []
        for i in row_idx:
            r = self.rows[i]
            out.append(sum(1 << k for k, j in enumerate(col_idx) if r >> j & 1))
        return Matrix(len(row_idx), len(col_idx), tuple(out))


class Echelon:
    """Incremental echelon form keyed by lowest set bit.

    Every stored vector has a distinct lowest bit, so reducing a vector
    against the store touches only higher bits and terminates.  Tags track
    the combination of inserted inputs that produced each stored vector.
    """

    def __init__(self) -> None:
        self.pivots: dict[int, tuple[int, int]] = {}

    def reduce(self, v: int, tag: int = 0) -> tuple[int, int]:
        while v:
            b = _lowbit(v)
            hit = self.pivots.get(b)
            if hit is None:
                # lowest bit is free; reduce the rest so the residual is canonical
                rest, rtag = self.reduce(v ^ (1 << b), 0)
                return rest | (1 << b), tag ^ rtag
            v ^= hit[0]
            tag ^= hit[1]
        return 0, tag

    def insert(self, v: int, tag: int) -> None:
        self.pivots[_lowbit(v)] = (v, tag)

    def __len__(self) -> int:
        return len(self.pivots)


def rank_rows(rows: Iterable[int]) -> int:
    pivots: dict[int, int] = {}
    for v in rows:
        while v:
            b = _lowbit(v)
            p = pivots.get(b)
            if p is None:
                pivots[b] = v
                break
            v ^= p
    return len(pivots)


class GradedSpace:
    """Finitely supported degree → dimension map (zero entries dropped)."""

    __slots__ = ("_dims",)

    def __init__(self, dims: Mapping[int, int] | None = None) -> None:
        clean = {}
        for n, d in (dims or {}).items():
            n, d = int(n), int(d)
            if n < 0 or d < 0:
                raise InputError(f"graded space needs non-negative degrees and dims, got {n}:{d}")
            if d:
                clean[n] = d
        self._dims = dict(sorted(clean.items()))

    @classmethod
    def checked(
        cls,
        dims: Mapping[int, int],
        max_degree: int = DEFAULT_MAX_DEGREE,
        max_dim: int = DEFAULT_MAX_DIM,
    ) -> "GradedSpace":
        space = cls(dims)
        for n, d in space.items():
            if n > max_degree:
                raise ResourceError(f"degree {n} exceeds degree cap {max_degree}")
            if d > max_dim:
                raise ResourceError(f"dimension {d} at degree {n} exceeds cap {max_dim}")
        return space

    def dim(self, n: int) -> int:
        return self._dims.get(n, 0)

    def items(self):
        return self._dims.items()

    def degrees(self) -> list[int]:
        return list(self._dims)

    def as_dict(self) -> dict[int, int]:
        return dict(self._dims)

    @property
    def total(self) -> int:
        return sum(self._dims.values())

    def max_degree(self) -> int:
        return max(self._dims, default=-1)

    def shift(self, k: int) -> "GradedSpace":
        return GradedSpace({n + k: d for n, d in self._dims.items()})

    def __add__(self, other: "GradedSpace") -> "GradedSpace":
        out = dict(self._dims)
        for n, d in other.items():
            out[n] = out.get(n, 0) + d
        return GradedSpace(out)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, GradedSpace) and self._dims == other._dims

    def __hash__(self) -> int:
        return hash(tuple(self._dims.items()))

    def __repr__(self) -> str:
        return f"GradedSpace({self._dims})"

    def is_zero(self) -> bool:
        return not self._dims


class GradedMap:
    """Blockwise map of a fixed degree; missing blocks are zero."""

    __slots__ = ("source", "target", "degree", "_blocks")

    def __init__(
        self,
        source: GradedSpace,
        target: GradedSpace,
        degree: int,
        blocks: Mapping[int, Matrix] | None = None,
    ) -> None:
        self.source = source
        self.target = target
        self.degree = degree
        clean = {}
        for n, m in (blocks or {}).items():
            want = (target.dim(n + degree), source.dim(n))
            if m.shape != want:
                raise InputError(f"block at degree {n} has shape {m.shape}, expected {want}")
            if want[0] and want[1]:
                clean[n] = m
        self._blocks = dict(sorted(clean.items()))

    @classmethod
    def zero(cls, source: GradedSpace, target: GradedSpace, degree: int) -> "GradedMap":
        return cls(source, target, degree)

    @classmethod
    def identity(cls, space: GradedSpace) -> "GradedMap":
        return cls(space, space, 0, {n: Matrix.identity(d) for n, d in space.items()})

    def block(self, n: int) -> Matrix:
        m = self._blocks.get(n)
        if m is None:
            return Matrix.zeros(self.target.dim(n + self.degree), self.source.dim(n))
        return m

    def blocks(self) -> dict[int, Matrix]:
        return dict(self._blocks)

    def is_zero(self) -> bool:
        return all(m.is_zero() for m in self._blocks.values())

    def __add__(self, other: "GradedMap") -> "GradedMap":
        _same_shape(self, other)
        degs = set(self._blocks) | set(other._blocks)
        return GradedMap(self.source, self.target, self.degree, {n: self.block(n) + other.block(n) for n in degs})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GradedMap):
            return NotImplemented
        if (self.source, self.target, self.degree) != (other.source, other.target, other.degree):
            return False
        degs = set(self._blocks) | set(other._blocks)
        return all(self.block(n) == other.block(n) for n in degs)

    def __repr__(self) -> str:
        body = ", ".join(f"{n}: {m.to_bits()}" for n, m in self._blocks.items())
        return f"GradedMap(degree={self.degree}, {{{body}}})"


def _same_shape(f: GradedMap, g: GradedMap) -> None:
    if (f.source, f.target, f.degree) != (g.source, g.target, g.degree):
        raise InputError("graded maps have different source, target or degree")


@dataclass(frozen=True)
class ChainComplexG:
    space: GradedSpace
    boundary: GradedMap

    def __post_init__(self) -> None:
        b = self.boundary
        if b.degree != -1 or b.source != self.space or b.target != self.space:
            raise InputError("chain complex boundary must be a degree -1 self-map of the space")

    @classmethod
    def zero(cls, space: GradedSpace) -> "ChainComplexG":
        return cls(space, GradedMap.zero(space, space, -1))

    def d(self, n: int) -> Matrix:
        """Boundary out of degree n."""
        return self.boundary.block(n)

    def degree_range(self) -> range:
        return range(0, self.space.max_degree() + 2)


def compose(f: GradedMap, g: GradedMap) -> GradedMap:
    """f ∘ g."""
    if g.target != f.source:
        raise InputError("compose: g.target does not match f.source")
    out = {}
    for n in g.source.degrees():
        out[n] = f.block(n + g.degree) @ g.block(n)
    return GradedMap(g.source, f.target, f.degree + g.degree, out)


def is_boundary(d: GradedMap) -> bool:
    if d.degree != -1:
        raise InputError(f"boundary must have degree -1, got {d.degree}")
    if d.source != d.target:
        raise InputError("boundary must be a self-map")
    return compose(d, d).is_zero()


def _require_boundary(c: ChainComplexG) -> None:
    if not is_boundary(c.boundary):
        raise InputError("boundary does not square to zero")


def homology(c: ChainComplexG) -> GradedSpace:
    _require_boundary(c)
    dims = {}
    for n in c.space.degrees():
        nullity = c.space.dim(n) - c.d(n).rank()
        dims[n] = nullity - c.d(n + 1).rank()
    return GradedSpace(dims)


def is_acyclic(c: ChainComplexG) -> bool:
    return homology(c).is_zero()


def _check_chain_shapes(t: GradedMap, src: ChainComplexG, dst: ChainComplexG) -> None:
    if t.degree != 0:
        raise InputError(f"chain map must have degree 0, got {t.degree}")
    if t.source != src.space or t.target != dst.space:
        raise InputError("chain map source/target do not match the complexes")


def is_chain_map(t: GradedMap, src: ChainComplexG, dst: ChainComplexG) -> bool:
    _check_chain_shapes(t, src, dst)
    return compose(dst.boundary, t) == compose(t, src.boundary)


@dataclass(frozen=True)
class HomologyBasis:
    """Cycle representatives for H_n plus an echelon of (boundaries ∪ reps)."""

    reps: tuple[int, ...]
    echelon: Echelon
    n_boundary: int

    def coordinates(self, v: int) -> int:
        """Coordinates of a cycle in the representative basis (bitset over reps)."""
        residual, tag = self.echelon.reduce(v, 0)
        if residual:
            raise InputError("vector is not a cycle")
        return tag >> self.n_boundary


def homology_basis(c: ChainComplexG, n: int) -> HomologyBasis:
    boundaries = c.d(n + 1).image_basis()
    cycles = c.d(n).kernel_basis()
    ech = Echelon()
    for i, b in enumerate(boundaries):
        residual, tag = ech.reduce(b, 1 << i)
        ech.insert(residual, tag)
    reps = []
    nb = len(boundaries)
    for z in cycles:
        residual, tag = ech.reduce(z, 0)
        if residual:
            ech.insert(residual, tag ^ (1 << (nb + len(reps))))
            reps.append(z)
    return HomologyBasis(tuple(reps), ech, nb)


def induced_homology_map(t: GradedMap, src: ChainComplexG, dst: ChainComplexG) -> GradedMap:
    if not is_chain_map(t, src, dst):
        raise InputError("induced_homology_map needs a chain map")
    hs, hd = homology(src), homology(dst)
    blocks = {}
    for n in hs.degrees():
        bs, bd = homology_basis(src, n), homology_basis(dst, n)
        tn = t.block(n)
        cols = [bd.coordinates(tn.apply(r)) for r in bs.reps]
        rows = [sum((cols[j] >> i & 1) << j for j in range(len(cols))) for i in range(hd.dim(n))]
        blocks[n] = Matrix(hd.dim(n), hs.dim(n), tuple(rows))
    return GradedMap(hs, hd, 0, blocks)


def is_isomorphism(f: GradedMap) -> bool:
    if f.source != f.target:
        return False
    return all(f.block(n).rank() == d for n, d in f.source.items())


def block_matrix(grid: Sequence[Sequence[Matrix]]) -> Matrix:
    """Assemble a 2-D grid of blocks; rows of blocks must agree in height."""
    rows: list[int] = []
    ncols = sum(m.ncols for m in grid[0]) if grid else 0
    for brow in grid:
        height = brow[0].nrows
        for i in range(height):
            acc, off = 0, 0
            for m in brow:
                if m.nrows != height:
                    raise InputError("block row heights disagree")
                acc |= m.rows[i] << off
                off += m.ncols
            rows.append(acc)
    return Matrix(len(rows), ncols, tuple(rows))


def mapping_cone(t: GradedMap, src: ChainComplexG, dst: ChainComplexG) -> ChainComplexG:
    """Cone_n = src_{n-1} ⊕ dst_n with boundary [[d_src, 0], [t, d_dst]]."""
    if not is_chain_map(t, src, dst):
        raise InputError("mapping_cone needs a chain map")
    space = src.space.shift(1) + dst.space
    blocks = {}
    for n in space.degrees():
        # source of the block: src_{n-1} ⊕ dst_n; target: src_{n-2} ⊕ dst_{n-1}
        a_s, a_d = src.space.dim(n - 1), dst.space.dim(n)
        b_s, b_d = src.space.dim(n - 2), dst.space.dim(n - 1)
        grid = [
            [src.d(n - 1) if n >= 1 else Matrix.zeros(b_s, a_s), Matrix.zeros(b_s, a_d)],
            [t.block(n - 1) if n >= 1 else Matrix.zeros(b_d, a_s), dst.d(n)],
        ]
        blocks[n] = block_matrix(grid)
    return ChainComplexG(space, GradedMap(space, space, -1, blocks))
