"""Non-rigorous pipeline: simulation, Newton, monodromy, frames and candidate sets."""

import math

import numpy as np
import pytest

from oracles import point_set
from rigdde.integrator import step
from rigdde.interval import Interval, matmul
from rigdde.lohner import DoubletonSet, hull_of
from rigdde.pnrep import PnParams, PnVector
from rigdde.poincare import PoincareResult, Section, section_eval
from rigdde.proof_cli import minimal_period
from rigdde.section_finder import (
    DegenerateNormal,
    Eigenvalue1Missing,
    FloatIntegrator,
    Frame,
    NoConvergence,
    NoInvariance,
    build_candidate,
    build_frame,
    frame_coordinates,
    monodromy_left_eigvec,
    newton_refine,
    radii_law,
    shrink_to_invariant,
    simulate,
)
from rigdde.taylor_ad import mg_rhs, z1

MG6 = mg_rhs(2, 1, 6)
P6 = PnParams(32, 4, Interval(2.0))


@pytest.fixture(scope="module")
def newton6():
    fi = FloatIntegrator(P6, MG6)
    x = fi.flow(fi.constant(1.1), 200.0)
    return newton_refine(x, MG6, P6)


# ------------------------------------------------------------- simulate


def test_simulate_linear_delay_one_delay():
    P = PnParams(4, 3, Interval(1.0))
    fi = FloatIntegrator(P, z1)
    y = simulate(fi.constant(1.0), z1, 1.0, P)
    # x(t) = 1 + t on [0, 1]: node i at t = 1 - i/4
    assert y[0] == pytest.approx(2.0, abs=1e-14)
    for i in range(1, P.p + 1):
        assert y[P.pos(i, 0)] == pytest.approx(2.0 - i / 4, abs=1e-14)
        assert y[P.pos(i, 1)] == pytest.approx(1.0, abs=1e-14)
        assert y[P.pos(i, 2)] == pytest.approx(0.0, abs=1e-14)


def test_simulate_zero_time_is_identity():
    fi = FloatIntegrator(P6, MG6)
    x = fi.constant(1.1)
    assert np.array_equal(simulate(x, MG6, 0.0, P6), x)
    with pytest.raises(ValueError):
        simulate(x, MG6, -1.0, P6)


def test_simulate_long_run_range():
    fi = FloatIntegrator(P6, MG6)
    X = fi.flow(fi.constant(1.1), 200.0)
    vals = []
    for _ in range(12 * P6.p):
        X = fi.step(X)
        vals.append(X[0])
    # the orbit oscillates around 0.977 with amplitude about 0.24
    assert 0.70 < min(vals) < 0.75
    assert 1.19 < max(vals) < 1.23


def test_simulate_inside_rigorous_steps(data_dir):
    frame = Frame.load(data_dir / "mg6_frame.txt")
    P = frame.params
    fi = FloatIntegrator(P, MG6)
    x = frame.x0.copy()
    x[P.remainder_positions] = 0.0
    s = DoubletonSet.from_box(PnVector(P, Interval.point(x)))
    X = x.copy()
    cols = np.concatenate([[0], P.coeff_positions.reshape(-1)])
    for _ in range(2 * P.p):
        s = step(s, MG6)
        X = fi.step(X)
        hull = hull_of(s)
        assert np.all(hull.lo[cols] <= X[cols]) and np.all(X[cols] <= hull.hi[cols])


# --------------------------------------------------------------- Newton


def test_newton_period_n6(newton6):
    assert newton6.residual <= 1e-10
    assert 10.9671 <= newton6.period <= 10.9673


def test_newton_fixed_point_unchanged(newton6):
    again = newton_refine(newton6.x, MG6, P6)
    assert again.iterations == 0
    assert np.array_equal(again.x, newton6.x)


def test_newton_far_seed_fails():
    fi = FloatIntegrator(P6, MG6)
    with pytest.raises(NoConvergence):
        newton_refine(fi.constant(3.0), MG6, P6)


# ------------------------------------------------------------- monodromy


def test_monodromy_diagonal_toy():
    res = monodromy_left_eigvec(None, None, 1.0, matrix=np.diag([1.0, 0.5]))
    assert res.eigenvalue == pytest.approx(1.0)
    assert np.allclose(res.l_hat, [1.0, 0.0])
    assert np.allclose(res.return_eigenvalues, [0.5])


def test_monodromy_without_unit_eigenvalue():
    with pytest.raises(Eigenvalue1Missing):
        monodromy_left_eigvec(None, None, 1.0, matrix=np.diag([0.5, 0.25]))


def test_monodromy_n6_eigenvalues(newton6):
    tmin = minimal_period(newton6.x, MG6, P6, newton6.section_value, newton6.direction, newton6.period)
    assert abs(tmin - newton6.period / 2) < 1e-6
    res = monodromy_left_eigvec(newton6.x, MG6, tmin, P6)
    assert 0.8 <= res.eigenvalue.real <= 1.2
    assert res.residual <= 1e-4
    lead = res.return_eigenvalues[:2]
    assert np.all(np.abs(lead - 0.0905) <= 0.1 * 0.0905)
    assert float(res.l_hat @ res.xdot) == pytest.approx(1.0)


# ----------------------------------------------------------------- frame


def test_frame_identity_for_first_axis():
    P = PnParams(4, 2, Interval(1.0))
    e1 = np.zeros(P.m)
    e1[0] = 1.0
    fr = build_frame(e1, np.zeros(P.m), P)
    assert np.array_equal(fr.C, np.eye(P.m))


def test_frame_two_coordinate_normal():
    P = PnParams(4, 2, Interval(1.0))
    l = np.zeros(P.m)
    l[0] = l[1] = 1.0
    fr = build_frame(l / math.sqrt(2), np.zeros(P.m), P)
    expect = np.zeros(P.m)
    expect[:2] = 1 / math.sqrt(2)
    assert np.allclose(fr.C[:, 0], expect, atol=1e-15)
    assert np.max(np.abs(fr.C.T @ fr.C - np.eye(P.m))) <= 1e-12


def test_frame_random_normals_orthonormal():
    rng = np.random.default_rng(3)
    P = PnParams(8, 3, Interval(1.0))
    for _ in range(20):
        l = rng.normal(size=P.m)
        fr = build_frame(l, np.zeros(P.m), P)
        assert np.max(np.abs(fr.C.T @ fr.C - np.eye(P.m))) <= 1e-12
        # remainder coordinates are left alone
        rp = P.remainder_positions
        assert np.array_equal(fr.C[np.ix_(rp, rp)], np.eye(rp.size))
        assert np.all(fr.C[rp][:, np.setdiff1d(np.arange(P.m), rp)] == 0)
        # orientation of the normal is kept
        l[rp] = 0
        assert fr.C[:, 0] @ l > 0


def test_frame_degenerate_normal():
    P = PnParams(4, 2, Interval(1.0))
    l = np.zeros(P.m)
    l[P.remainder_positions] = 1.0
    with pytest.raises(DegenerateNormal):
        build_frame(l, np.zeros(P.m), P)


def test_frame_inverse_rigor(data_dir):
    fr = Frame.load(data_dir / "mg6_frame.txt")
    CtC = matmul(Interval.point(fr.C.T), Interval.point(fr.C))
    m = fr.params.m
    assert np.all(CtC.contains(np.eye(m)))
    off = ~np.eye(m, dtype=bool)
    assert np.max(CtC.diam()[off]) <= 1e-10


def test_frame_file_round_trip(tmp_path, data_dir):
    fr = Frame.load(data_dir / "mg6_frame.txt")
    fr.save(tmp_path / "f.txt")
    back = Frame.load(tmp_path / "f.txt")
    assert np.array_equal(back.C, fr.C) and np.array_equal(back.x0, fr.x0)


# ------------------------------------------------------------ candidates


def test_candidate_point_set():
    P = PnParams(4, 2, Interval(1.0))
    x0 = np.arange(P.m, dtype=float)
    fr = build_frame(np.eye(P.m)[3], x0, P)
    V = build_candidate(fr, np.zeros(P.m))
    h = hull_of(V)
    assert np.array_equal(h.lo, x0) and np.array_equal(h.hi, x0)


def test_radii_law_values():
    P = PnParams(4, 2, Interval(1.0))
    r = radii_law(P, 1e-4, 0.1, 1e-2)
    assert r[0] == 0.0
    for k in range(P.n + 1):
        assert np.allclose(r[P.coeff_positions[:, k]], 1e-4 * 0.1**k, rtol=1e-15)
    assert np.all(r[P.remainder_positions] == 1e-2)


def test_candidate_on_section():
    P = PnParams(8, 3, Interval(1.0))
    rng = np.random.default_rng(0)
    fr = build_frame(rng.normal(size=P.m), rng.normal(size=P.m), P)
    V = build_candidate(fr, radii_law(P))
    assert section_eval(Section.from_frame(fr), V).contains(0.0)
    with pytest.raises(ValueError):
        build_candidate(fr, np.ones(P.m))


# -------------------------------------------------------------- shrinking


def _stub_map(image):
    return lambda V: PoincareResult(0, Interval(0.0), Interval(0.0), image, Interval(1.0))


def test_shrink_point_misses_itself():
    P = PnParams(4, 2, Interval(1.0))
    fr = build_frame(np.eye(P.m)[0], np.ones(P.m), P)
    V0 = build_candidate(fr, np.zeros(P.m))
    moved = build_candidate(build_frame(np.eye(P.m)[0], np.ones(P.m) * 1.5, P), np.zeros(P.m))
    with pytest.raises(NoInvariance):
        shrink_to_invariant(V0, fr, _stub_map(moved))


def test_shrink_contracting_toy():
    P = PnParams(4, 2, Interval(1.0))
    fr = build_frame(np.eye(P.m)[0], np.zeros(P.m), P)
    r = radii_law(P, 1.0, 1.0, 1.0)

    def pmap(V):
        # image: the box shrunk to 60% about a slightly shifted centre
        box = frame_coordinates(fr, V)
        c = 0.1 * box.rad()
        w = 0.6 * box.rad()
        w[0] = c[0] = 0.0
        return _stub_map(build_candidate(fr, Interval(c - w, c + w)))(V)

    res = shrink_to_invariant(build_candidate(fr, r), fr, pmap)
    assert res.iterations <= 2


@pytest.mark.slow
def test_shrink_shipped_set_is_invariant(mg6_run):
    _, art = mg6_run
    V = build_candidate(art.frame, art.box)
    res = shrink_to_invariant(V, art.frame, lambda W: art.result, box=art.box)
    assert res.iterations == 0
