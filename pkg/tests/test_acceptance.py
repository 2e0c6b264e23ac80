"""Acceptance criteria 1-8.  Each test records a PASS/FAIL line with its runtime.

Run under pytest (lines appear in the terminal summary) or directly with
``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import io
import json
import random
import sys
import time
from contextlib import redirect_stdout
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE, DATA  # noqa: E402
from conley_transit import load_model  # noqa: E402
from conley_transit.cli import main as cli_main  # noqa: E402
from conley_transit.conley import restrict  # noqa: E402
from conley_transit.continuation import finest_decomposition, shuffled_model  # noqa: E402
from conley_transit.gf2 import ChainComplexG, GradedMap, GradedSpace, Matrix, homology, mapping_cone  # noqa: E402
from conley_transit.slowfast import Family1D, detect_breakdown, fold_parameter, integrate_extended, limit_itinerary  # noqa: E402
from conley_transit.transition import enumerate_transitions, forced_connections, to_hat  # noqa: E402
from oracles import brute_homology, fold_lambda, random_complex  # noqa: E402


def record(k: int, title: str, fn, limit: float | None = None) -> None:
    t0 = time.perf_counter()
    detail = ""
    ok = False
    try:
        detail = fn() or ""
        ok = True
    except AssertionError as exc:
        detail = f"assertion: {exc}"
    secs = time.perf_counter() - t0
    if ok and limit is not None and secs >= limit:
        ok = False
        detail = f"runtime {secs:.2f} s exceeds {limit} s"
    ACCEPTANCE[k] = (title, ok, secs, detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {title}  ({secs:.2f} s)  {detail}")
    assert ok, detail


def cli_json(*argv) -> tuple[int, dict]:
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli_main([str(a) for a in argv] + ["--json"])
    return code, json.loads(buf.getvalue())


PITCHFORK_MATRIX = {"1@0|1@1|0": ["1"], "1@0|2@1|0": ["1"]}


# ---------------------------------------------------------------- criteria


def test_criterion_1_pitchfork_golden():
    def check():
        model = load_model(DATA / "pitchfork.json")
        assert finest_decomposition(model).as_lists() == [[["1@0"], ["1@1", "2@1", "3@1"]]]
        code, obj = cli_json("enumerate-transitions", DATA / "pitchfork.json")
        assert code == 0 and obj["count"] == 1 and not obj["truncated"], obj
        mat = obj["matrices"][0]
        assert mat["blocks"] == PITCHFORK_MATRIX, mat
        assert mat["tables"] == {"0": ["110"]}, mat
        return "T_0 = [1 1 0], unique"

    record(1, "pitchfork golden transition matrix", check, limit=1.0)


def test_criterion_2_eightset_forced():
    def check():
        model = load_model(DATA / "eightset.json")
        assert len(finest_decomposition(model)) == 3
        res = enumerate_transitions(model)
        assert len(res) > 0 and not res.truncated
        for t in res:
            hat = to_hat(model, t)
            assert hat.get(("2@0", "5@1", 2)) == Matrix.identity(1), hat
            assert hat.get(("1@0", "1@1", 1)) == Matrix.identity(1)
        assert ("2@0", "5@1", 1) in forced_connections(model, result=res)
        code, obj = cli_json("forced-connections", DATA / "eightset.json")
        assert code == 0
        assert {"p": "2@0", "q": "5@1", "degree": 1} in obj["forced"], obj
        return f"{len(res)} candidates, T-hat_2(2@0,5@1)=1 in all"

    record(2, "eightset forced entry (2@0,5@1)", check, limit=10.0)


FIVEPOINT_FINEST = [
    [["1@0"], ["1@1"]],
    [["2@0"], ["2@1"]],
    [["3@0", "4@0"], []],
    [["5@0"], ["3@1", "4@1", "5@1"]],
]


def test_criterion_3_finest_decomposition():
    def check():
        model = load_model(DATA / "fivepoint.json")
        assert finest_decomposition(model).as_lists() == FIVEPOINT_FINEST
        rng = random.Random(2024)
        n = len(model.continuable_pairs)
        for _ in range(120):
            perm = list(range(n))
            rng.shuffle(perm)
            assert finest_decomposition(shuffled_model(model, perm)).as_lists() == FIVEPOINT_FINEST, perm
        return "4 pairs, invariant under 120 shuffles"

    record(3, "five-point finest decomposition", check)


def test_criterion_4_acyclicity():
    def check():
        count = 0
        for name in ("pitchfork.json", "eightset.json"):
            model = load_model(DATA / name)
            c0, c1 = model.slice0.complex(), model.slice1.complex()
            d = finest_decomposition(model)
            for t in enumerate_transitions(model):
                assert homology(mapping_cone(t.graded_map(model), c1, c0)).is_zero()
                for pair in d.pairs:
                    src, dst = restrict(model.slice1, pair[1]), restrict(model.slice0, pair[0])
                    assert homology(mapping_cone(t.restricted(model, pair), src, dst)).is_zero(), pair
                count += 1
        return f"{count} matrices checked"

    record(4, "mapping cones acyclic", check)


def test_criterion_5_gf2_oracle():
    def check():
        rng = random.Random(5)
        for _ in range(200):
            dims, d = random_complex(rng, max_degree=3, max_dim=3)
            sp = GradedSpace(dims)
            blocks = {}
            for n, rows in d.items():
                if dims.get(n, 0) and dims.get(n - 1, 0):
                    blocks[n] = Matrix.from_lists(rows)
            got = homology(ChainComplexG(sp, GradedMap(sp, sp, -1, blocks))).as_dict()
            assert got == brute_homology(dims, d), (dims, d)
        return "200 complexes"

    record(5, "GF(2) homology matches brute force", check, limit=5.0)


def test_criterion_6_simulator_itinerary():
    def check():
        fam = Family1D.pitchfork(0.5)
        rep = limit_itinerary(fam, (1e-2, 1e-3, 1e-4), "source@1")
        assert rep.labels == ["3@1", "2@1", "1@0"], rep.labels
        assert rep.ok
        for r in rep.runs:
            assert r.labels == rep.labels, (r.epsilon, r.labels)
        assert [(a, b) for a, b, _ in rep.flanks()] == [("2@1", "1@0")]
        fine = rep.primary.trace
        pts = fine.points(0.6, 0.9)
        err = float(np.abs(pts[:, 0] - np.sqrt(pts[:, 1] - 0.5)).max())
        assert err < 1e-2, err
        # step doubling: same start, half step, stop once past the window
        half = integrate_extended(fam, 1e-4, rep.start, 1e6, fine.step / 2, lambda_stop=0.55)
        grid = [round(0.6 + 0.01 * k, 2) for k in range(31)]
        diff = max(abs(fine.slice_hits[g][0] - half.slice_hits[g][0]) for g in grid)
        assert diff < 1e-6, diff
        return f"branch error {err:.1e}, step-doubling {diff:.1e}"

    record(6, "simulator itinerary source -> branch sink -> sink", check, limit=30.0)


def test_criterion_7_breakdown():
    def check():
        pf = detect_breakdown(Family1D.pitchfork(0.5), 256)
        assert len(pf.brackets) == 1
        b = pf.brackets[0]
        assert b.lo <= 0.5 <= b.hi and b.width <= 1 / 256, b
        want = fold_lambda(0.5, 0.01)
        assert abs(fold_parameter(0.5, 0.01) - want) < 1e-12
        pp = detect_breakdown(Family1D.perturbed_pitchfork(0.5, 0.01), 256)
        assert len(pp.brackets) == 1
        c = pp.brackets[0]
        assert c.lo <= want <= c.hi and c.width <= 1 / 256, (c, want)
        return f"[{b.lo:.6f}, {b.hi:.6f}] and [{c.lo:.6f}, {c.hi:.6f}] ∋ {want:.6f}"

    record(7, "breakdown brackets", check)


def test_criterion_8_cross_validation(tmp_path):
    def check():
        emitted = tmp_path / "pitchfork_model.json"
        code, _ = cli_json("indices-1d", DATA / "pitchfork_family.json", "--emit-model", emitted)
        assert code == 0
        code, obj = cli_json("enumerate-transitions", emitted)
        assert code == 0 and obj["count"] == 1, obj
        assert obj["matrices"][0]["blocks"] == PITCHFORK_MATRIX
        assert obj["matrices"][0]["tables"] == {"0": ["110"]}
        return "emitted model reproduces criterion 1"

    record(8, "indices-1d model reproduces the pitchfork matrix", check)


if __name__ == "__main__":
    import tempfile

    tests = [
        test_criterion_1_pitchfork_golden,
        test_criterion_2_eightset_forced,
        test_criterion_3_finest_decomposition,
        test_criterion_4_acyclicity,
        test_criterion_5_gf2_oracle,
        test_criterion_6_simulator_itinerary,
        test_criterion_7_breakdown,
    ]
    failed = 0
    for fn in tests:
        try:
            fn()
        except AssertionError:
            failed += 1
    with tempfile.TemporaryDirectory() as tmp:
        try:
            test_criterion_8_cross_validation(Path(tmp))
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
