"""Slow-fast companion for one-dimensional families.

The extended system is ``x' = f(x, lam)``, ``lam' = eps * lam * (lam - 1)``
with ``f`` a polynomial of degree at most 5 whose coefficients are affine
in ``lam``: ``f = sum_k (a_k + b_k lam) x^k``.  Fixed points of a slice are
labelled sinks first, then sources, each in ascending x; ids carry the
suffix ``@1`` or ``@0`` when the slice lies in the parameter segment that
contains lam = 1 or lam = 0.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.spatial import cKDTree

from . import _kernels
from .conley import MorseModel, MorseSlice
from .errors import InputError
from .gf2 import GradedSpace, Matrix
from .posets import Poset

DEFAULT_CELLS = 4096
DEFAULT_TOL = 1e-9
DEFAULT_STEP = 1e-3
DEFAULT_GRID = 256
START_OFFSET = 1e-6
START_LAMBDA = 1.0 - 1e-3

SINK, SOURCE, DEGENERATE = "sink", "source", "non-hyperbolic"


@dataclass(frozen=True)
class Family1D:
    name: str
    a: tuple[float, ...]
    b: tuple[float, ...]
    x_window: tuple[float, float] = (-2.0, 2.0)
    delta: float = 1e-2
    params: dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if len(self.a) != 6 or len(self.b) != 6:
            raise InputError("family coefficients must cover degrees 0..5")
        lo, hi = self.x_window
        if not lo < hi:
            raise InputError("x_window must satisfy x_min < x_max")
        if self.delta <= 0:
            raise InputError("delta must be positive")

    @classmethod
    def polynomial(cls, coefficients: Sequence[Sequence[float]], **kw: Any) -> "Family1D":
        if len(coefficients) > 6:
            raise InputError("coefficients: polynomial families are limited to degree 5")
        a = [0.0] * 6
        b = [0.0] * 6
        for k, pair in enumerate(coefficients):
            if len(pair) != 2:
                raise InputError(f"coefficients[{k}]: expected [a_k, b_k]")
            a[k], b[k] = float(pair[0]), float(pair[1])
        return cls(kw.pop("name", "polynomial"), tuple(a), tuple(b), **kw)

    @classmethod
    def pitchfork(cls, lambda0: float = 0.5, **kw: Any) -> "Family1D":
        """f = (lam - lambda0) x - x^3."""
        fam = cls.polynomial([[0, 0], [-lambda0, 1], [0, 0], [-1, 0]], name="pitchfork", **kw)
        return _with_params(fam, lambda0=lambda0)

    @classmethod
    def perturbed_pitchfork(cls, lambda0: float = 0.5, imperfection: float = 0.01, **kw: Any) -> "Family1D":
        """f = imperfection + (lam - lambda0) x - x^3."""
        fam = cls.polynomial(
            [[imperfection, 0], [-lambda0, 1], [0, 0], [-1, 0]], name="perturbed_pitchfork", **kw
        )
        return _with_params(fam, lambda0=lambda0, imperfection=imperfection)

    @classmethod
    def linear_sink(cls, rate: float = 1.0, **kw: Any) -> "Family1D":
        """f = -rate x."""
        fam = cls.polynomial([[0, 0], [-rate, 0]], name="linear_sink", **kw)
        return _with_params(fam, rate=rate)

    @property
    def lambda_window(self) -> tuple[float, float]:
        return -2.0 * self.delta, 1.0 + 2.0 * self.delta

    def f(self, x, lam):
        acc = np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0
        for k in range(5, -1, -1):
            acc = acc * x + (self.a[k] + self.b[k] * lam)
        return acc

    def to_json(self) -> dict:
        out: dict[str, Any] = {"family": self.name}
        if self.name == "polynomial" or not self.params:
            out["coefficients"] = [[self.a[k], self.b[k]] for k in range(6)]
        else:
            out["params"] = dict(self.params)
        out["x_window"] = list(self.x_window)
        out["delta"] = self.delta
        return out


def _with_params(fam: Family1D, **params: Any) -> Family1D:
    return Family1D(fam.name, fam.a, fam.b, fam.x_window, fam.delta, params)


BUILTINS = {
    "pitchfork": Family1D.pitchfork,
    "perturbed_pitchfork": Family1D.perturbed_pitchfork,
    "linear_sink": Family1D.linear_sink,
}


def family_from_json(obj: Any) -> Family1D:
    if not isinstance(obj, dict):
        raise InputError("family: expected a JSON object")
    for k in obj:
        if k not in ("schema", "family", "params", "coefficients", "x_window", "delta", "notes"):
            raise InputError(f"family: unknown key {k!r}")
    name = obj.get("family")
    kw: dict[str, Any] = {}
    if "x_window" in obj:
        xw = obj["x_window"]
        if not (isinstance(xw, list) and len(xw) == 2 and all(isinstance(v, (int, float)) for v in xw)):
            raise InputError("family.x_window: expected [x_min, x_max]")
        kw["x_window"] = (float(xw[0]), float(xw[1]))
    if "delta" in obj:
        if not isinstance(obj["delta"], (int, float)):
            raise InputError("family.delta: expected a number")
        kw["delta"] = float(obj["delta"])
    if name == "polynomial":
        coeffs = obj.get("coefficients")
        if not isinstance(coeffs, list):
            raise InputError("family.coefficients: expected a list of [a_k, b_k] pairs")
        return Family1D.polynomial(coeffs, **kw)
    if name not in BUILTINS:
        raise InputError(f"family.family: unknown family {name!r} (expected one of {sorted(BUILTINS) + ['polynomial']})")
    params = obj.get("params", {})
    if not isinstance(params, dict):
        raise InputError("family.params: expected an object")
    try:
        return BUILTINS[name](**params, **kw)
    except TypeError as exc:
        raise InputError(f"family.params: {exc}") from None


def load_family(path: str | Path) -> Family1D:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: cannot read family file ({exc.strerror})") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return family_from_json(obj)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


# ------------------------------------------------------------ slice analysis


@dataclass(frozen=True)
class FixedPoint:
    x: float
    stability: str
    label: str | None  # None for non-hyperbolic points


@dataclass(frozen=True)
class SliceAnalysis:
    lam: float
    fixed_points: tuple[FixedPoint, ...]

    @property
    def hyperbolic(self) -> bool:
        return all(p.stability != DEGENERATE for p in self.fixed_points)

    @property
    def signature(self) -> tuple[str, ...]:
        return tuple(p.stability for p in self.fixed_points)

    @property
    def non_hyperbolic(self) -> list[float]:
        return [p.x for p in self.fixed_points if p.stability == DEGENERATE]

    def labelled(self) -> list[FixedPoint]:
        pts = [p for p in self.fixed_points if p.label is not None]
        return sorted(pts, key=lambda p: int(p.label))

    def ids(self, suffix: str) -> dict[str, FixedPoint]:
        return {f"{p.label}@{suffix}": p for p in self.labelled()}

    @property
    def morse_order(self) -> Poset:
        return self.order("")

    def order(self, suffix: str) -> Poset:
        """Sink below each x-adjacent source."""
        ids = [f"{p.label}@{suffix}" if suffix else p.label for p in self.labelled()]
        covers = []
        pts = self.fixed_points
        for u, v in zip(pts, pts[1:]):
            if DEGENERATE in (u.stability, v.stability) or u.stability == v.stability:
                continue
            sink, source = (u, v) if u.stability == SINK else (v, u)
            name = (lambda p: f"{p.label}@{suffix}" if suffix else p.label)
            covers.append((name(sink), name(source)))
        return Poset.from_covers(ids, covers)

    @property
    def conley_index(self) -> dict[str, GradedSpace]:
        return {p.label: GradedSpace({0: 1} if p.stability == SINK else {1: 1}) for p in self.labelled()}

    def to_slice(self, label: int) -> MorseSlice:
        """Morse slice with unit blocks sink <- source for x-adjacent pairs."""
        if not self.hyperbolic:
            raise InputError(f"slice at lambda={self.lam} has non-hyperbolic fixed points")
        suffix = str(label)
        order = self.order(suffix)
        ci = {f"{k}@{suffix}": v for k, v in self.conley_index.items()}
        conn = {(p, q, 1): Matrix(1, 1, (1,)) for p, q in order.covers()}
        return MorseSlice(label, order, ci, conn)


def _deriv(family: Family1D, x: float, lam: float) -> float:
    h = 1e-6 * max(1.0, abs(x))
    return (float(family.f(x + h, lam)) - float(family.f(x - h, lam))) / (2.0 * h)


def analyze_slice(family: Family1D, lam: float, tol: float = DEFAULT_TOL, cells: int = DEFAULT_CELLS) -> SliceAnalysis:
    lo_l, hi_l = family.lambda_window
    if not lo_l <= lam <= hi_l:
        raise InputError(f"lambda={lam} outside the window [{lo_l}, {hi_l}]")
    xlo, xhi = family.x_window
    grid = np.linspace(xlo, xhi, cells + 1)
    fv = family.f(grid, lam)

    def g(x: float) -> float:
        return float(family.f(x, lam))

    roots: list[float] = []
    zero = fv == 0.0
    roots.extend(float(v) for v in grid[zero])
    change = np.nonzero((fv[:-1] * fv[1:]) < 0.0)[0]
    for i in change:
        r = brentq(g, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        roots.append(float(r))
    # tangential zeros: local minima of |f| without a sign change
    af = np.abs(fv)
    mid = af[1:-1]
    dips = (
        (mid <= af[:-2]) & (mid <= af[2:])
        & (fv[:-2] * fv[1:-1] > 0) & (fv[1:-1] * fv[2:] > 0)
        & ~(zero[:-2] | zero[1:-1] | zero[2:])
    )
    for i in np.nonzero(dips)[0] + 1:
        res = minimize_scalar(lambda x: abs(g(x)), bounds=(grid[i - 1], grid[i + 1]), method="bounded",
                              options={"xatol": 1e-12})
        if abs(g(res.x)) < tol:
            roots.append(float(res.x))
    roots.sort()
    merged: list[float] = []
    for r in roots:
        if not merged or r - merged[-1] > 1e-12:
            merged.append(r)
    pts = []
    for r in merged:
        if abs(g(r)) >= tol:
            continue
        d = _deriv(family, r, lam)
        if abs(d) < tol:
            pts.append((r, DEGENERATE))
        else:
            pts.append((r, SINK if d < 0 else SOURCE))
    sinks = [x for x, s in pts if s == SINK]
    sources = [x for x, s in pts if s == SOURCE]
    names = {x: str(k + 1) for k, x in enumerate(sinks + sources)}
    return SliceAnalysis(lam, tuple(FixedPoint(x, s, names.get(x)) for x, s in pts))


# -------------------------------------------------------- breakdown detection


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float
    left: tuple[str, ...]
    right: tuple[str, ...]

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)


@dataclass(frozen=True)
class BreakdownReport:
    grid: int
    intervals: tuple[tuple[float, float, tuple[str, ...]], ...]
    brackets: tuple[Bracket, ...]

    def to_json(self) -> dict:
        return {
            "grid": self.grid,
            "intervals": [{"lo": a, "hi": b, "signature": list(s)} for a, b, s in self.intervals],
            "breakdowns": [
                {"lo": br.lo, "hi": br.hi, "width": br.width, "left": list(br.left), "right": list(br.right)}
                for br in self.brackets
            ],
        }


def _sig(family: Family1D, lam: float, tol: float, cells: int) -> tuple[str, ...] | None:
    s = analyze_slice(family, lam, tol, cells)
    return s.signature if s.hyperbolic else None


def detect_breakdown(
    family: Family1D,
    grid: int = DEFAULT_GRID,
    lam_range: tuple[float, float] = (0.0, 1.0),
    tol: float = DEFAULT_TOL,
    cells: int = DEFAULT_CELLS,
) -> BreakdownReport:
    """Maximal grid runs of constant hyperbolic signature and brackets between them.

    ``grid`` counts cells over ``lam_range``; brackets are refined by
    bisection until their width is at most one cell.
    """
    if grid < 16:
        raise InputError("breakdown grid needs at least 16 cells")
    lo, hi = lam_range
    lams = [lo + (hi - lo) * k / grid for k in range(grid + 1)]
    step = (hi - lo) / grid
    sigs = [_sig(family, lam, tol, cells) for lam in lams]
    runs: list[list[int]] = []
    for k, s in enumerate(sigs):
        if s is None:
            continue
        if runs and runs[-1][1] == k - 1 and sigs[runs[-1][0]] == s:
            runs[-1][1] = k
        else:
            runs.append([k, k])
    intervals = tuple((lams[a], lams[b], sigs[a]) for a, b in runs)
    brackets = []
    for (a0, a1), (b0, b1) in zip(runs, runs[1:]):
        left, right = sigs[a1], sigs[b0]
        blo, bhi = lams[a1], lams[b0]
        for _ in range(200):
            if bhi - blo <= step * (1 + 1e-12):
                break
            w = bhi - blo
            probe = None
            for cand in (0.5 * (blo + bhi), 0.5 * (blo + bhi) - w / 4, 0.5 * (blo + bhi) + w / 4):
                s = _sig(family, cand, tol, cells)
                if s is not None:
                    probe = (cand, s)
                    break
            if probe is None:
                break
            cand, s = probe
            if s == left:
                blo = cand
            elif s == right:
                bhi = cand
            else:
                break  # a third signature: keep the conservative bracket
        brackets.append(Bracket(blo, bhi, left, right))
    return BreakdownReport(grid, intervals, tuple(brackets))


def fold_parameter(lambda0: float, imperfection: float) -> float:
    """Closed-form saddle-node parameter of the perturbed pitchfork."""
    return lambda0 + 3.0 * (abs(imperfection) / 2.0) ** (2.0 / 3.0)


# ------------------------------------------------------------- integration


@dataclass
class OrbitTrace:
    epsilon: float
    step: float
    samples: np.ndarray  # columns t, x, lambda
    slice_hits: dict[float, list[float]]
    exit: str
    steps: int
    backend: str

    def points(self, lam_lo: float = -math.inf, lam_hi: float = math.inf) -> np.ndarray:
        """Sample points as (x, lambda) rows, optionally restricted in lambda."""
        s = self.samples
        keep = (s[:, 2] >= lam_lo) & (s[:, 2] <= lam_hi)
        return s[keep][:, 1:3]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,x,lambda\n")
            for t, x, lam in self.samples.tolist():
                fh.write(f"{t!r},{x!r},{lam!r}\n")


EXIT_CODES = {0: "horizon", 1: "lambda_stop", 2: "x_window", 3: "lambda_window", 4: "non_finite"}


def integrate_extended(
    family: Family1D,
    epsilon: float,
    start: tuple[float, float],
    horizon: float,
    step: float = DEFAULT_STEP,
    *,
    lambda_stop: float | None = None,
    spacing: float = 1e-3,
    slice_step: float = 0.01,
    backend: str | None = None,
) -> OrbitTrace:
    if epsilon < 0:
        raise InputError("epsilon must be non-negative")
    if step <= 0 or horizon < 0:
        raise InputError("step must be positive and horizon non-negative")
    x0, lam0 = float(start[0]), float(start[1])
    xlo, xhi = family.x_window
    llo, lhi = family.lambda_window
    if not (xlo <= x0 <= xhi and llo < lam0 < lhi):
        raise InputError(f"start ({x0}, {lam0}) lies outside the window")
    kern = _kernels.get_backend(backend)
    nsteps = int(math.ceil(horizon / step - 1e-9))
    samples, hk, ht, hx, code, steps = kern.rk4_poly(
        list(family.a), list(family.b), float(epsilon), x0, lam0, float(step), nsteps,
        -math.inf if lambda_stop is None else float(lambda_stop),
        xlo, xhi, llo, lhi, float(spacing), float(slice_step),
    )
    hits: dict[float, list[float]] = {}
    for k, x in zip(hk.tolist(), hx.tolist()):
        hits.setdefault(round(k * slice_step, 12), []).append(x)
    return OrbitTrace(float(epsilon), float(step), samples, hits, EXIT_CODES[int(code)], int(steps), kern.NAME)


def hausdorff_distance(a: np.ndarray | Sequence, b: np.ndarray | Sequence) -> float:
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(a) == 0 or len(b) == 0:
        raise InputError("hausdorff_distance needs two nonempty point sets")
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


# --------------------------------------------------------------- itineraries


@dataclass(frozen=True)
class ItineraryStep:
    lam: float
    label: str


@dataclass
class EpsilonRun:
    epsilon: float
    trace: OrbitTrace
    steps: list[ItineraryStep]
    clean: bool
    ordered: bool
    diagnostics: list[str]

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.steps]


@dataclass
class ItineraryReport:
    runs: list[EpsilonRun]
    breakdown: BreakdownReport
    hausdorff: list[float]
    start: tuple[float, float]

    @property
    def primary(self) -> EpsilonRun:
        return min(self.runs, key=lambda r: r.epsilon)

    @property
    def itinerary(self) -> list[ItineraryStep]:
        return self.primary.steps

    @property
    def labels(self) -> list[str]:
        return self.primary.labels

    @property
    def ok(self) -> bool:
        p = self.primary
        return p.clean and p.ordered

    def flanks(self) -> list[tuple[str, str, Bracket]]:
        """(label before, label after, bracket) for every label change across a breakdown."""
        out = []
        steps = self.primary.steps
        for u, v in zip(steps, steps[1:]):
            for br in self.breakdown.brackets:
                if v.lam <= br.hi and u.lam >= br.lo and _segment_tag(u.label) != _segment_tag(v.label):
                    out.append((u.label, v.label, br))
                    break
        return out

    def to_json(self) -> dict:
        return {
            "start": {"x": self.start[0], "lambda": self.start[1]},
            "breakdown": self.breakdown.to_json()["breakdowns"],
            "runs": [
                {
                    "epsilon": r.epsilon,
                    "exit": r.trace.exit,
                    "steps": r.trace.steps,
                    "itinerary": [{"lambda": s.lam, "label": s.label} for s in r.steps],
                    "clean": r.clean,
                    "ordered": r.ordered,
                    "diagnostics": r.diagnostics,
                }
                for r in sorted(self.runs, key=lambda r: -r.epsilon)
            ],
            "hausdorff_successive": self.hausdorff,
            "flanks": [{"before": a, "after": b, "bracket": [br.lo, br.hi]} for a, b, br in self.flanks()],
            "ok": self.ok,
        }


def _segment_tag(label: str) -> str:
    return label.split("@", 1)[1] if "@" in label else ""


class _Namer:
    """Maps a parameter value to the id suffix of its continuation segment."""

    def __init__(self, report: BreakdownReport):
        self.brackets = sorted(report.brackets, key=lambda b: b.lo)

    def suffix(self, lam: float) -> str | None:
        if not self.brackets:
            return "1"
        if lam >= self.brackets[-1].hi:
            return "1"
        if lam <= self.brackets[0].lo:
            return "0"
        for k, (u, v) in enumerate(zip(self.brackets, self.brackets[1:])):
            if u.hi <= lam <= v.lo:
                return f"s{k + 1}"
        return None  # inside a bracket: no stable naming


def resolve_start(family: Family1D, rule: str, report: BreakdownReport | None = None,
                  offset: float = START_OFFSET, lam: float = START_LAMBDA) -> tuple[float, float]:
    """Start point for a rule such as ``source@1``, ``sink@1`` or ``2@1``."""
    if not rule.endswith("@1"):
        raise InputError(f"start rule {rule!r} must name a slice-1 set (suffix '@1')")
    head = rule[:-2]
    sa = analyze_slice(family, lam)
    pts = sa.labelled()
    if head in (SINK, SOURCE):
        cand = [p for p in pts if p.stability == head]
        if not cand:
            raise InputError(f"no {head} at lambda={lam}")
        chosen = cand[0]
    else:
        match = [p for p in pts if p.label == head]
        if not match:
            raise InputError(f"start rule {rule!r}: no fixed point with id {head!r} near lambda=1")
        chosen = match[0]
    return chosen.x + offset, lam


def label_trace(
    family: Family1D,
    trace: OrbitTrace,
    namer: _Namer,
    label_tol: float = 1e-3,
    cells: int = 1024,
) -> tuple[list[ItineraryStep], bool, bool, list[str]]:
    """Nearest-fixed-point labels along a trace with a 2*label_tol hysteresis band."""
    steps: list[ItineraryStep] = []
    diagnostics: list[str] = []
    current: str | None = None
    orders: dict[str, Poset] = {}
    ordered = True
    for t, x, lam in trace.samples:
        suffix = namer.suffix(lam)
        if suffix is None:
            continue
        sa = analyze_slice(family, float(lam), cells=cells)
        if not sa.hyperbolic:
            continue
        ids = sa.ids(suffix)
        if not ids:
            continue
        dist = {k: abs(p.x - x) for k, p in ids.items()}
        nearest = min(dist, key=lambda k: (dist[k], k))
        if current is None:
            current = nearest
            steps.append(ItineraryStep(float(lam), current))
            orders[suffix] = sa.order(suffix)
            continue
        if nearest == current:
            continue
        if current in dist and dist[nearest] + 2 * label_tol >= dist[current]:
            continue
        order = sa.order(suffix)
        if _segment_tag(current) == suffix and not order.less(nearest, current):
            ordered = False
            diagnostics.append(f"label change {current} -> {nearest} at lambda={lam:.6f} is not descending")
        steps.append(ItineraryStep(float(lam), nearest))
        current = nearest
    labels = [s.label for s in steps]
    clean = len(set(labels)) == len(labels)
    if not clean:
        diagnostics.append("label oscillation: a Morse set label recurs along the trace")
    return steps, clean, ordered, diagnostics


def limit_itinerary(
    family: Family1D,
    eps_sequence: Sequence[float],
    start_rule: str = "source@1",
    *,
    step: float = DEFAULT_STEP,
    lambda_stop: float = 0.02,
    label_tol: float = 1e-3,
    grid: int = DEFAULT_GRID,
    threads: int | None = None,
    backend: str | None = None,
    offset: float = START_OFFSET,
) -> ItineraryReport:
    eps = [float(e) for e in eps_sequence]
    if len(eps) < 3:
        raise InputError("limit_itinerary needs at least three epsilon values")
    if any(e <= 0 for e in eps) or any(u <= v for u, v in zip(eps, eps[1:])):
        raise InputError("epsilon sequence must be strictly decreasing and positive")
    report = detect_breakdown(family, grid)
    start = resolve_start(family, start_rule, report, offset)
    namer = _Namer(report)
    lam_s = start[1]

    def horizon(e: float) -> float:
        logit = lambda v: math.log(v / (1.0 - v))
        return 1.1 * (logit(lam_s) - logit(lambda_stop)) / e + 200.0

    def run(e: float) -> OrbitTrace:
        return integrate_extended(family, e, start, horizon(e), step, lambda_stop=lambda_stop, backend=backend)

    workers = threads if threads is not None else int(os.environ.get("CONLEY_TRANSIT_THREADS", "0") or 0) or (os.cpu_count() or 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(eps))) as pool:
            traces = list(pool.map(run, eps))
    else:
        traces = [run(e) for e in eps]
    runs = []
    for e, tr in zip(eps, traces):
        steps, clean, ordered, diag = label_trace(family, tr, namer, label_tol)
        runs.append(EpsilonRun(e, tr, steps, clean, ordered, diag))
    lo = max(lambda_stop, 0.05)
    pts = [tr.points(lo, 0.95) for tr in traces]
    hd = [hausdorff_distance(a, b) for a, b in zip(pts, pts[1:])]
    return ItineraryReport(runs, report, hd, start)


# ----------------------------------------------------------- model emission


def model_from_family(
    family: Family1D,
    lambdas: tuple[float, float] = (0.0, 1.0),
    grid: int = DEFAULT_GRID,
) -> MorseModel:
    """Two-slice model from the 1-D slices at lambdas[0] (slice 0) and lambdas[1] (slice 1)."""
    s0 = analyze_slice(family, lambdas[0]).to_slice(0)
    s1 = analyze_slice(family, lambdas[1]).to_slice(1)
    report = detect_breakdown(family, grid)
    lam0 = report.brackets[0].mid if len(report.brackets) == 1 else None
    return MorseModel(s0, s1, (), lam0, "product", {}, {}, family.name)
