"""Acceptance suite: one test per criterion, each run at its stated tolerance.

Every test prints a ``criterion N: PASS|FAIL`` line (also repeated in the
pytest terminal summary) and fails if the criterion does not hold.  Each
criterion must also finish in under 10 s single-threaded.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from specialframes import catalog
from specialframes.calculus import Axis, OdeSettings, multiparam_transport, solve_linear_transport
from specialframes.cli import main
from specialframes.core import SDerivationAlongX, VectorField
from specialframes.errors import EvaluationError, ParseError
from specialframes.fieldexpr import FUNCTIONS, BinOp, Call, Const, Neg, Var, evaluate, parse, pretty
from specialframes.framebuilder import (
    build_frame_along_map,
    build_frame_fixed_field,
    check_holonomic,
    check_uniqueness,
    verify_vanishing,
)
from specialframes.obstruction import Grid, ParamMap, curvature_matrices, obstruction_matrices

pytestmark = pytest.mark.acceptance

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
TIME_LIMIT = 10.0
HALF_PI = math.pi / 2
TWO_PI = 2 * math.pi


def sphere_patch():
    return ParamMap.adapted_map(Grid((Axis(HALF_PI - 0.25, HALF_PI + 0.25, 11), Axis(0.0, 0.5, 11)), 2))


def polar_patch():
    return ParamMap.adapted_map(Grid((Axis(1.0, 2.0, 11), Axis(0.0, 1.0, 11)), 2))


def polar_circle(count=41):
    return ParamMap.adapted_map(Grid((Axis(0.0, TWO_PI, count),), 2, tangential=(1,), t0=(2.0,)))


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t0


def finish(criterion, number, ok, detail, timer):
    ok = ok and timer.elapsed < TIME_LIMIT
    criterion(number, ok, f"{detail} [{timer.elapsed:.1f} s]")
    assert ok, detail


def test_c01_obstruction_correctness(criterion):
    with Timer() as t:
        sph = obstruction_matrices(catalog.unit_sphere(), sphere_patch())
        node = int(np.argmin(np.abs(sph.params[:, 0] - HALF_PI) + np.abs(sph.params[:, 1])))
        err = float(np.max(np.abs(sph.R[node, 0, 1] - np.array([[0.0, 1.0], [-1.0, 0.0]]))))
        pol = obstruction_matrices(catalog.flat_polar(), polar_patch())
    ok = err <= 1e-6 and pol.max_norm <= 1e-6
    finish(criterion, 1, ok, f"sphere R at equator err={err:.2e}; flat-polar max-norm={pol.max_norm:.2e}", t)


def test_c02_transport_discrepancy_iff_obstruction(criterion):
    rows = []
    with Timer() as t:
        for name, conn, pmap in (
            ("flat-polar", catalog.flat_polar(), polar_patch()),
            ("sphere", catalog.unit_sphere(), sphere_patch()),
        ):
            # h = 1e-5 keeps the flat case's finite-difference floor below 1e-8
            rep = obstruction_matrices(conn, pmap, h=1e-5)
            grid = pmap.grid
            Zs = [lambda s, a=a: -conn.matrices(grid.embed(s))[a] for a in range(2)]
            res = multiparam_transport(Zs, grid.param(grid.center_index()), grid.axes)
            rows.append((name, rep.max_norm, res.discrepancy))
    iff = all((obs < 1e-8) == (disc < 1e-7) for _, obs, disc in rows)
    both = {obs < 1e-8 for _, obs, _ in rows} == {True, False}
    detail = "; ".join(f"{n}: obstruction={o:.2e} discrepancy={d:.2e}" for n, o, d in rows)
    finish(criterion, 2, iff and both, detail, t)


def test_c03_constructive_frames(criterion):
    conn = catalog.flat_polar()
    worst = {}
    with Timer() as t:
        for label, pmap in (("circle p=1", polar_circle()), ("annulus p=2", polar_patch())):
            for B0 in (np.eye(2), np.array([[2.0, 0.5], [0.0, 1.0]])):
                frame = build_frame_along_map(conn, pmap, B0)
                r = verify_vanishing(conn, frame, pmap).max_norm
                worst[label] = max(worst.get(label, 0.0), r)
    ok = all(v <= 1e-5 for v in worst.values())
    finish(criterion, 3, ok, "; ".join(f"{k} max residual={v:.2e}" for k, v in worst.items()), t)


def test_c04_fixed_field_existence(criterion):
    sphere = catalog.unit_sphere()
    cases = {
        "sphere": (
            SDerivationAlongX.from_connection(
                sphere, VectorField([lambda x: 0.2 * math.sin(x[1]), lambda x: 1.0], domain=sphere.domain)
            ),
            [[1.0, 0.0], [HALF_PI, 0.3], [2.2, -1.0]],
        ),
        "lie-derivative": (catalog.lie_derivative(), [[1.0, 0.0], [0.5, 0.5], [2.0, -1.0]]),
    }
    worst = {}
    with Timer() as t:
        for name, (d, starts) in cases.items():
            for x0 in starts:
                frame = build_frame_fixed_field(d, x0, 0.75)
                assert not frame.truncated
                worst[name] = max(worst.get(name, 0.0), verify_vanishing(d, frame).max_norm)
    ok = all(v <= 1e-6 for v in worst.values())
    finish(criterion, 4, ok, "; ".join(f"{k} max W' residual={v:.2e}" for k, v in worst.items()), t)


def test_c05_latitude_holonomy(criterion):
    conn = catalog.unit_sphere()
    X = VectorField([0.0, 1.0])
    errs = []
    with Timer() as t:
        for theta0 in (math.pi / 3, math.pi / 4):
            frame = build_frame_fixed_field(SDerivationAlongX.from_connection(conn, X), [theta0, 0.0], TWO_PI)
            trace = float(np.trace(frame.transport.final))
            errs.append((theta0, trace, abs(trace - 2 * math.cos(TWO_PI * math.cos(theta0)))))
    ok = all(e <= 1e-6 for _, _, e in errs)
    detail = "; ".join(f"theta0={th:.4f} trace={tr:.8f} err={e:.1e}" for th, tr, e in errs)
    finish(criterion, 5, ok, detail, t)


def test_c06_holonomicity_both_directions(criterion):
    with Timer() as t:
        polar = catalog.flat_polar()
        circle = polar_circle()
        rep_free = check_holonomic(build_frame_along_map(polar, circle), circle, polar)
        tors = catalog.flat_with_torsion()
        square = ParamMap.adapted_map(Grid((Axis(-1.0, 1.0, 9), Axis(-1.0, 1.0, 9)), 2))
        rep_tors = check_holonomic(build_frame_along_map(tors, square), square, tors)
    free_max = float(rep_free.commutator_norms.max())
    tors_min = float(rep_tors.commutator_norms.min())
    ident = float(np.max(np.abs(rep_tors.commutators + rep_tors.torsion)))
    ok = free_max <= 1e-5 and tors_min >= 1e-1 and ident <= 1e-5
    detail = f"torsion-free commutator max={free_max:.2e}; torsion commutator min={tors_min:.3f}, |C + T|={ident:.1e}"
    finish(criterion, 6, ok, detail, t)


def test_c07_uniqueness(criterion):
    conn = catalog.flat_polar()
    circle = polar_circle()
    with Timer() as t:
        fa = build_frame_along_map(conn, circle, np.eye(2))
        fb = build_frame_along_map(conn, circle, np.diag([2.0, 1.0]))
        same = check_uniqueness(fa, fb, circle).max_norm
        N = np.array([[0.0, 1.0], [0.0, 0.0]])
        bad = check_uniqueness(fa, lambda x: fb(x) @ (np.eye(2) + 0.1 * math.sin(x[1]) * N), circle).max_norm
    ok = same <= 1e-5 and bad >= 1e-2
    finish(criterion, 7, ok, f"B0 change max norm={same:.2e}; s-dependent corruption={bad:.2e}", t)


def test_c08_identity_map_limit(criterion):
    conn = catalog.unit_sphere()
    with Timer() as t:
        pmap = ParamMap.adapted_map(Grid((Axis(0.5, 2.5, 21), Axis(-1.0, 1.0, 21)), 2))
        rep = obstruction_matrices(conn, pmap)
        diff = max(float(np.max(np.abs(R - curvature_matrices(conn, x)))) for x, R in zip(rep.points, rep.R))
    finish(criterion, 8, diff <= 1e-9, f"max |obstruction - curvature| on 21x21 = {diff:.1e}", t)


def test_c09_refusal_path(criterion, tmp_path):
    with Timer() as t:
        code = main(["build", "--config", str(SCENARIOS / "sphere_patch.json"), "--out", str(tmp_path)])
        summary = json.loads((tmp_path / "build_summary.json").read_text())
    obs = summary["summary"].get("obstruction", {})
    norm = obs.get("max_norm", 0.0)
    has_csv = (tmp_path / "build_obstruction.csv").exists()
    ok = code == 1 and summary["outcome"] == "refused" and norm >= 0.5 and has_csv
    finish(criterion, 9, ok, f"exit code={code}, outcome={summary['outcome']}, obstruction max-norm={norm:.3f}", t)


def test_c10_numerics_hygiene(criterion):
    rot = np.array([[0.0, 1.0], [-1.0, 0.0]])
    oracle = np.array([[math.cos(TWO_PI), math.sin(TWO_PI)], [-math.sin(TWO_PI), math.cos(TWO_PI)]])
    with Timer() as t:
        errs = [
            np.linalg.norm(solve_linear_transport(lambda s: rot, 0.0, TWO_PI, OdeSettings(step=h)).final - oracle)
            for h in (0.1, 0.05)
        ]
        polar, sphere, tors = catalog.flat_polar(), catalog.unit_sphere(), catalog.flat_with_torsion()
        lie = catalog.lie_derivative()
        transports = {
            "flat-cartesian": lambda s: -catalog.flat_cartesian().matrices([s, 0.0])[0],
            "flat-polar radial": lambda s: -polar.matrices([1.0 + s, 0.3])[0],
            "flat-polar circle": lambda s: -polar.matrices([2.0, s])[1],
            "unit-sphere meridian": lambda s: -sphere.matrices([0.3 + 0.4 * s, 0.0])[0],
            "unit-sphere latitude": lambda s: -sphere.matrices([math.pi / 3, s])[1],
            "flat-with-torsion": lambda s: -tors.matrices([s, 0.0])[0],
            "lie-derivative": lambda s: -lie.coordinate_W([math.cos(s), math.sin(s)]),
        }
        liouville = {k: solve_linear_transport(Z, 0.0, TWO_PI).liouville_error() for k, Z in transports.items()}
    ratio = errs[0] / errs[1]
    worst = max(liouville.values())
    ok = ratio >= 8.0 and worst <= 1e-6
    finish(criterion, 10, ok, f"step-halving error ratio={ratio:.1f}; worst Liouville error={worst:.1e}", t)


def random_ast(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.5:
            return Var(int(rng.integers(3)))
        return Const(float(rng.uniform(-5.0, 5.0)))
    kind = rng.choice(["+", "-", "*", "/", "^", "neg", "call"])
    a = random_ast(rng, depth - 1)
    if kind == "neg":
        return Neg(a)
    if kind == "call":
        f = str(rng.choice(FUNCTIONS))
        if f in ("log", "sqrt"):
            a = BinOp("+", Const(0.5), Call("abs", a))
        elif f in ("exp", "tan"):
            a = Call("sin", a)
        return Call(f, a)
    b = random_ast(rng, depth - 1)
    if kind == "/":
        b = BinOp("+", Const(2.0), Call("cos", b))
    if kind == "^":
        a = BinOp("+", Const(1.0), Call("abs", Call("sin", a)))
        b = Call("cos", b)
    return BinOp(str(kind), a, b)


def test_c11_parser(criterion):
    rng = np.random.default_rng(20240601)
    names = ["x1", "x2", "x3"]
    points = rng.uniform(-3.0, 3.0, size=(100, 3))
    worst = 0.0
    with Timer() as t:
        for _ in range(1000):
            node = random_ast(rng, 5)
            again = parse(pretty(node, names), names)
            for x in points:
                want = evaluate(node, x)
                got = again(x)
                worst = max(worst, abs(got - want) / max(1.0, abs(want)))
        bad_offsets = 0
        samples = 0
        alphabet = list("x123+-*/^()., sinco")
        for _ in range(3000):
            text = "".join(rng.choice(alphabet, size=int(rng.integers(0, 16))))
            try:
                parse(text, names)
            except ParseError as exc:
                samples += 1
                bad_offsets += not (0 <= exc.offset < max(len(text), 1))
            except EvaluationError:
                pass
    ok = worst <= 1e-12 and bad_offsets == 0 and samples > 1000
    finish(criterion, 11, ok, f"1000 round-trips max rel diff={worst:.1e}; {samples} parse errors, "
                              f"{bad_offsets} offsets out of bounds", t)
