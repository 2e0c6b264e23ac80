"""Command-line entry point.

Exit codes: 0 success, 1 verification failures, 2 truncation or resource
cap, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence, TextIO

from . import slowfast
from .conley import SCHEMA, MorseModel, load_model, model_to_json, verify_connection_matrix
from .continuation import finest_decomposition
from .errors import InputError, ResourceError
from .transition import (
    DEFAULT_CAP,
    DEFAULT_MAX_FREE,
    connection_scenarios,
    enumerate_transitions,
    forced_connections,
)

EXIT_OK, EXIT_FAIL, EXIT_RESOURCE, EXIT_INPUT = 0, 1, 2, 3

COMMANDS = (
    "verify-connection-matrix",
    "finest-decomposition",
    "enumerate-transitions",
    "forced-connections",
    "simulate",
    "indices-1d",
)


@dataclass
class RunConfig:
    command: str
    path: Path
    output_mode: str = "json"
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if self.output_mode not in ("json", "pretty"):
            raise InputError(f"unknown output mode {self.output_mode!r}")


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def _envelope(command: str, subject: str, **body: Any) -> dict:
    return {"schema": SCHEMA, "command": command, "subject": subject, **body}


def _pairs_json(model: MorseModel, pairs) -> list:
    return [
        [[e for e in model.slice0.elements if e in a], [e for e in model.slice1.elements if e in b]]
        for a, b in pairs
    ]


# ------------------------------------------------------------- commands


def _verify(cfg: RunConfig, out: TextIO) -> int:
    model = load_model(cfg.path)
    reports = [verify_connection_matrix(model.slice0), verify_connection_matrix(model.slice1)]
    passed = all(r.passed for r in reports)
    if cfg.output_mode == "json":
        out.write(_dump(_envelope(cfg.command, model.name, passed=passed, slices=[r.to_json() for r in reports])))
    else:
        for r in reports:
            out.write(r.pretty() + "\n")
    return EXIT_OK if passed else EXIT_FAIL


def _finest(cfg: RunConfig, out: TextIO) -> int:
    model = load_model(cfg.path)
    d = finest_decomposition(model)
    if cfg.output_mode == "json":
        out.write(_dump(_envelope(cfg.command, model.name, pairs=d.as_lists())))
    else:
        out.write(f"finest decomposition of {model.name} ({len(d)} pairs)\n")
        for a, b in d.as_lists():
            out.write(f"  ({{{', '.join(a)}}}, {{{', '.join(b)}}})\n")
    return EXIT_OK


def _enum_kwargs(cfg: RunConfig) -> dict:
    o = cfg.options
    return {
        "cap": o.get("cap", DEFAULT_CAP),
        "max_free": o.get("max_free", DEFAULT_MAX_FREE),
        "scope": o.get("scope", "finest"),
        "backend": o.get("backend"),
    }


def _pretty_matrix(model: MorseModel, k: int, t, out: TextIO) -> None:
    out.write(f"T[{k}]\n")
    blocks = t.nonzero_blocks(model)
    if not blocks:
        out.write("  (zero)\n")
    for i, j, n in blocks:
        out.write(f"  {i}|{j}|{n}: {' '.join(t.blocks[(i, j, n)].to_bits())}\n")
    cols = model.slice1.elements
    width = max(len(e) for e in model.slice0.elements)
    for n in t.degrees(model):
        out.write(f"  degree {n}: columns {' '.join(cols)}\n")
        for i, row in zip(model.slice0.elements, t.table(model, n, empty="-")):
            out.write(f"    {i:<{width}}  {row}\n")


def _enumerate(cfg: RunConfig, out: TextIO) -> int:
    model = load_model(cfg.path)
    d = finest_decomposition(model)
    res = enumerate_transitions(model, d, **_enum_kwargs(cfg))
    if cfg.output_mode == "json":
        out.write(_dump(_envelope(
            cfg.command,
            model.name,
            count=len(res),
            truncated=res.truncated,
            free_bits=res.free_dim,
            unknown_bits=res.unknowns,
            decomposition=d.as_lists(),
            matrices=[t.to_json(model) for t in res],
        )))
    else:
        out.write(
            f"{model.name}: {len(res)} transition matri{'x' if len(res) == 1 else 'ces'}"
            f" ({res.free_dim} free of {res.unknowns} unknown bits)"
            + ("  TRUNCATED" if res.truncated else "") + "\n"
        )
        for k, t in enumerate(res):
            _pretty_matrix(model, k, t, out)
    if res.truncated:
        print(f"error: enumeration truncated at cap {_enum_kwargs(cfg)['cap']}", file=sys.stderr)
        return EXIT_RESOURCE
    return EXIT_OK


def _forced(cfg: RunConfig, out: TextIO) -> int:
    model = load_model(cfg.path)
    d = finest_decomposition(model)
    kw = _enum_kwargs(cfg)
    res = enumerate_transitions(model, d, **kw)
    forced = forced_connections(model, d, res)
    items = []
    for p, q, n in forced:
        item: dict[str, Any] = {"p": p, "q": q, "degree": n}
        if cfg.options.get("scenarios"):
            item["scenarios"] = [s.to_json() for s in connection_scenarios(model, (p, q, n), d)]
        items.append(item)
    if cfg.output_mode == "json":
        out.write(_dump(_envelope(cfg.command, model.name, candidates=len(res), forced=items)))
    else:
        out.write(f"{model.name}: {len(forced)} forced connection(s) over {len(res)} candidate(s)\n")
        for it in items:
            out.write(f"  {it['q']} -> {it['p']}  (degree {it['degree']})\n")
            for s in it.get("scenarios", []):
                out.write(f"      {s['kind']}: {s['path']}\n")
    return EXIT_OK


def _eps_path(base: Path, eps: float) -> Path:
    return base.with_name(f"{base.stem}.eps{eps:g}{base.suffix or '.csv'}")


def _simulate(cfg: RunConfig, out: TextIO) -> int:
    o = cfg.options
    fam = slowfast.load_family(cfg.path)
    eps = o.get("eps") or [1e-2, 1e-3, 1e-4]
    step = o.get("step", slowfast.DEFAULT_STEP)
    lam_stop = o.get("lambda_stop", 0.02)
    start_rule = o.get("start", "source@1")
    outp = Path(o["out"]) if o.get("out") else None
    body: dict[str, Any] = {"family": fam.to_json()}
    if len(eps) >= 3:
        rep = slowfast.limit_itinerary(
            fam, eps, start_rule, step=step, lambda_stop=lam_stop,
            label_tol=o.get("label_tol", 1e-3), grid=o.get("grid", slowfast.DEFAULT_GRID),
            backend=o.get("backend"),
        )
        traces = {r.epsilon: r.trace for r in rep.runs}
        body["itinerary"] = rep.to_json()
        ok = rep.ok
    else:
        if any(e < 0 for e in eps):
            raise InputError("epsilon values must be non-negative")
        start = slowfast.resolve_start(fam, start_rule)
        traces = {}
        for e in eps:
            horizon = o.get("horizon") or (
                1.1 * (math.log(start[1] / (1 - start[1])) - math.log(lam_stop / (1 - lam_stop))) / e + 200.0
                if e > 0 else 100.0
            )
            traces[e] = slowfast.integrate_extended(
                fam, e, start, horizon, step, lambda_stop=lam_stop, backend=o.get("backend")
            )
        ok = True
    body["traces"] = [
        {"epsilon": e, "exit": tr.exit, "steps": tr.steps, "samples": len(tr.samples)}
        for e, tr in sorted(traces.items(), key=lambda kv: -kv[0])
    ]
    if outp is not None:
        smallest = min(traces)
        traces[smallest].write_csv(outp)
        files = {str(smallest): str(outp)}
        if len(traces) > 1:
            for e, tr in traces.items():
                p = _eps_path(outp, e)
                tr.write_csv(p)
                files[str(e)] = str(p)
        body["csv"] = files
    if cfg.output_mode == "json":
        out.write(_dump(_envelope(cfg.command, fam.name, ok=ok, **body)))
    else:
        out.write(f"{fam.name}: start {start_rule}\n")
        for t in body["traces"]:
            out.write(f"  eps={t['epsilon']:g}: {t['steps']} steps, exit {t['exit']}\n")
        if "itinerary" in body:
            it = body["itinerary"]
            for r in it["runs"]:
                seq = " -> ".join(s["label"] for s in r["itinerary"])
                out.write(f"  itinerary eps={r['epsilon']:g}: {seq}\n")
                for dmsg in r["diagnostics"]:
                    out.write(f"    ! {dmsg}\n")
            for f in it["flanks"]:
                out.write(f"  breakdown flank: {f['before']} | {f['after']} in [{f['bracket'][0]}, {f['bracket'][1]}]\n")
            out.write(f"  hausdorff (successive eps): {', '.join(f'{h:.3e}' for h in it['hausdorff_successive'])}\n")
    return EXIT_OK if ok else EXIT_FAIL


def _indices(cfg: RunConfig, out: TextIO) -> int:
    o = cfg.options
    fam = slowfast.load_family(cfg.path)
    lams = tuple(o.get("lambdas") or (0.0, 1.0))
    if len(lams) != 2:
        raise InputError("--lambda expects exactly two values")
    slices = [slowfast.analyze_slice(fam, lam, tol=o.get("tol", slowfast.DEFAULT_TOL)) for lam in lams]
    model = slowfast.model_from_family(fam, lams, grid=o.get("grid", slowfast.DEFAULT_GRID))
    mj = model_to_json(model)
    if o.get("emit_model"):
        Path(o["emit_model"]).write_text(_dump(mj), encoding="utf-8")
    analyses = [
        {
            "lambda": s.lam,
            "fixed_points": [
                {"x": p.x, "stability": p.stability, "id": f"{p.label}@{k}" if p.label else None}
                for p in s.fixed_points
            ],
        }
        for k, s in enumerate(slices)
    ]
    if cfg.output_mode == "json":
        out.write(_dump(_envelope(cfg.command, fam.name, slices=analyses, model=mj)))
    else:
        for a in analyses:
            out.write(f"lambda={a['lambda']:g}\n")
            for p in a["fixed_points"]:
                out.write(f"  {p['id'] or '?':<6} x={p['x']:+.12f}  {p['stability']}\n")
        if o.get("emit_model"):
            out.write(f"model written to {o['emit_model']}\n")
    return EXIT_OK


HANDLERS = {
    "verify-connection-matrix": _verify,
    "finest-decomposition": _finest,
    "enumerate-transitions": _enumerate,
    "forced-connections": _forced,
    "simulate": _simulate,
    "indices-1d": _indices,
}


def run(config: RunConfig, out: TextIO | None = None) -> int:
    out = out if out is not None else sys.stdout
    try:
        if not config.path.exists():
            raise InputError(f"{config.path}: no such file")
        return HANDLERS[config.command](config, out)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


# --------------------------------------------------------------- parsing


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors (exit 3), not argparse's default 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="conley-transit", description="Transition matrices across a breakdown of continuation.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add_mode(p: argparse.ArgumentParser, default: str) -> None:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--json", dest="output_mode", action="store_const", const="json")
        g.add_argument("--pretty", dest="output_mode", action="store_const", const="pretty")
        p.set_defaults(output_mode=default)

    p = sub.add_parser("verify-connection-matrix", help="check both slices of a model")
    p.add_argument("path", type=Path)
    add_mode(p, "pretty")

    p = sub.add_parser("finest-decomposition", help="print the finest decomposition")
    p.add_argument("path", type=Path)
    add_mode(p, "json")

    for name in ("enumerate-transitions", "forced-connections"):
        p = sub.add_parser(name)
        p.add_argument("path", type=Path)
        p.add_argument("--cap", type=int, default=DEFAULT_CAP, help="maximum number of matrices (default %(default)s)")
        p.add_argument("--max-free", type=int, default=DEFAULT_MAX_FREE, help="free-bit limit (default %(default)s)")
        p.add_argument("--scope", choices=("finest", "closure"), default="finest",
                       help="pairs checked for the isomorphism axiom")
        p.add_argument("--backend", choices=("auto", "python", "cython"), default=None)
        if name == "forced-connections":
            p.add_argument("--scenarios", action="store_true", help="list qualitative routes per connection")
        add_mode(p, "pretty")

    p = sub.add_parser("simulate", help="integrate the slow-fast system and label the itinerary")
    p.add_argument("path", type=Path)
    p.add_argument("--eps", type=_floats, default=[1e-2, 1e-3, 1e-4])
    p.add_argument("--start", default="source@1", help="source@1, sink@1 or <id>@1")
    p.add_argument("--out", type=Path, default=None, help="CSV file for the smallest epsilon")
    p.add_argument("--step", type=float, default=slowfast.DEFAULT_STEP)
    p.add_argument("--lambda-stop", type=float, default=0.02)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--label-tol", type=float, default=1e-3)
    p.add_argument("--grid", type=int, default=slowfast.DEFAULT_GRID)
    p.add_argument("--backend", choices=("auto", "python", "cython"), default=None)
    add_mode(p, "json")

    p = sub.add_parser("indices-1d", help="fixed points and Conley indices of two slices")
    p.add_argument("path", type=Path)
    p.add_argument("--lambda", dest="lambdas", type=_floats, default=[0.0, 1.0])
    p.add_argument("--emit-model", type=Path, default=None)
    p.add_argument("--tol", type=float, default=slowfast.DEFAULT_TOL)
    p.add_argument("--grid", type=int, default=slowfast.DEFAULT_GRID)
    add_mode(p, "json")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    opts = {k: v for k, v in vars(ns).items() if k not in ("command", "path", "output_mode") and v is not None}
    return RunConfig(ns.command, ns.path, ns.output_mode, opts)


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    return run(config_from_args(ns))


if __name__ == "__main__":
    sys.exit(main())
