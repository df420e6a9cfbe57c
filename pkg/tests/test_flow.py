import numpy as np
import pytest

from shearmix.flow import (
    ShearSchedule,
    double_step,
    double_step_jacobian,
    gronwall_constants,
    jacobian_step,
    lyapunov_exponent,
    profile_slope,
    profile_wave,
    projective_step,
    separation_double_step,
    shear_step,
    two_point_step,
)
from shearmix.torus import RngStream, dist, displacement, wrap


def test_profiles():
    s = np.linspace(0, 1, 9, endpoint=False)
    assert np.allclose(profile_wave(s, "sine"), np.sin(2 * np.pi * s))
    tri = profile_wave(np.array([0.0, 0.25, 0.5, 0.75, 0.125]), "piecewise_linear")
    assert np.allclose(tri, [0.0, 1.0, 0.0, -1.0, 0.5])
    # left one-sided slope at the kinks
    assert profile_slope(0.25, "piecewise_linear") == 4.0
    assert profile_slope(0.75, "piecewise_linear") == -4.0
    with pytest.raises(ValueError):
        profile_wave(0.0, "sawtooth")


def test_shear_step_closed_form():
    assert np.allclose(shear_step((0.0, 0.25), 0.0, "horizontal", 0.5), (0.5, 0.25))
    # sin(0) = 0: the line x2 = 0 is invariant
    assert np.allclose(shear_step((0.3, 0.0), 0.0, "horizontal", 3.7), (0.3, 0.0))
    # sin(2 pi * 1/2) = 0
    assert np.allclose(shear_step((0.1, 0.6), 0.1, "horizontal", 1.0), (0.1, 0.6))


def test_double_step_is_composition():
    gen = np.random.default_rng(0)
    x = gen.uniform(size=(500, 2))
    ze, zo = gen.uniform(size=(2, 500))
    direct = double_step(x, ze, zo, 1.3)
    composed = shear_step(shear_step(x, ze, "horizontal", 1.3), zo, "vertical", 1.3)
    assert np.array_equal(direct, composed)
    assert np.array_equal(double_step(x, ze, zo, 0.0), x)


def test_shear_flow_additive_in_time():
    # the exact time-1 map at amplitude A equals two successive maps at A/2
    gen = np.random.default_rng(1)
    x = gen.uniform(size=(200, 2))
    zeta = gen.uniform(size=200)
    once = shear_step(x, zeta, "horizontal", 0.8)
    twice = shear_step(shear_step(x, zeta, "horizontal", 0.4), zeta, "horizontal", 0.4)
    assert np.allclose(once, twice, atol=1e-15)


def test_jacobian_entries_and_determinant():
    x = np.array([0.3, 0.42])
    assert np.allclose(jacobian_step(x, 0.0, "horizontal", 0.0), np.eye(2))
    j = jacobian_step(np.array([0.5, 0.42]), 0.42, "horizontal", 1.5)
    assert np.isclose(j[0, 1], 2 * np.pi * 1.5)
    # one-period compositions are unimodular to near machine precision;
    # longer products at large amplitude lose the determinant to
    # cancellation (entries grow like exp(n log(2 pi A)))
    gen = np.random.default_rng(2)
    x = gen.uniform(size=(10_000, 2))
    ze, zo = gen.uniform(size=(2, 10_000))
    jac = double_step_jacobian(x, ze, zo, 2.0)
    dets = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    assert np.max(np.abs(dets - 1.0)) < 1e-13
    prod = double_step_jacobian(double_step(x, ze, zo, 0.5), zo, ze, 0.5) @ double_step_jacobian(x, ze, zo, 0.5)
    dets = prod[:, 0, 0] * prod[:, 1, 1] - prod[:, 0, 1] * prod[:, 1, 0]
    assert np.max(np.abs(dets - 1.0)) < 1e-12


def test_two_point_step_basics():
    # pair on the horizontal fixed line (x2 = zeta_even, zero velocity) and
    # straddling a sine peak symmetrically for the vertical step, so both
    # points see equal velocities throughout: separation is preserved
    eps = 1e-6
    x = np.array([0.2, 0.3])
    y = np.array([0.2 + eps, 0.3])
    ze = 0.3
    zo = x[0] - 0.25 + eps / 2.0
    xs, ys = two_point_step(x, y, ze, zo, 2.0)
    assert np.isclose(dist(xs, ys), eps, rtol=1e-9)
    with pytest.raises(ValueError):
        two_point_step(x, x, 0.1, 0.2, 1.0)
    # A = 0 leaves the pair alone
    xs, ys = two_point_step(x, y, 0.9, 0.1, 0.0)
    assert np.array_equal(xs, x) and np.array_equal(ys, y)


def test_two_point_swap_symmetry_and_lipschitz():
    gen = np.random.default_rng(3)
    n = 100_000
    x = gen.uniform(size=(n, 2))
    y = wrap(x + gen.uniform(-0.01, 0.01, size=(n, 2)))
    ok = np.any(x != y, axis=-1)
    x, y = x[ok], y[ok]
    ze, zo = gen.uniform(size=(2, len(x)))
    a = 1.0
    xs, ys = two_point_step(x, y, ze, zo, a)
    ys2, xs2 = two_point_step(y, x, ze, zo, a)
    assert np.array_equal(xs, xs2) and np.array_equal(ys, ys2)
    growth = dist(xs, ys) / dist(x, y)
    assert np.max(growth) <= (1 + 2 * np.pi * a) ** 2 + 1e-9


def test_projective_step():
    x = np.array([0.3, 0.8])
    v = np.array([1.0, 0.0])
    x1, v1 = projective_step(x, v, 0.2, 0.9, 0.0)
    assert np.array_equal(x1, x) and np.array_equal(v1, v)
    gen = np.random.default_rng(4)
    xs = gen.uniform(size=(300, 2))
    th = gen.uniform(0, 2 * np.pi, size=300)
    vs = np.stack([np.cos(th), np.sin(th)], axis=-1)
    _, vo = projective_step(xs, vs, gen.uniform(size=300), gen.uniform(size=300), 5.0)
    assert np.max(np.abs(np.linalg.norm(vo, axis=-1) - 1.0)) < 1e-12


def test_projective_e1_fixed_by_horizontal_substep():
    # the horizontal shear Jacobian is upper triangular: it fixes e1
    x = np.array([0.37, 0.61])
    j = jacobian_step(x, 0.12, "horizontal", 7.0)
    assert np.allclose(j @ np.array([1.0, 0.0]), np.array([1.0, 0.0]))


def test_lyapunov_exponent_zero_amplitude():
    out = lyapunov_exponent(0.0, "sine", 100, 10, RngStream(6))
    assert abs(out["estimate"]) < 1e-14
    assert out["ci95"] < 1e-14


def test_lyapunov_exponent_positive_and_seed_stable():
    a = lyapunov_exponent(20.0, "sine", 1000, 100, RngStream(7))
    assert a["estimate"] - a["ci95"] > 0.0
    b = lyapunov_exponent(20.0, "sine", 1000, 100, RngStream(8))
    assert abs(a["estimate"] - b["estimate"]) < a["ci95"] + b["ci95"]


def test_gronwall_constants():
    g = gronwall_constants(1.0)
    assert np.isclose(g["A1"], 2 * np.pi)
    assert np.isclose(g["C0"], np.exp(2 * np.pi))
    assert np.isclose(gronwall_constants(0.7, "piecewise_linear")["A1"], 2.8)


def test_gronwall_sandwich_small_sample():
    gen = np.random.default_rng(9)
    a = 0.5
    c0 = gronwall_constants(a)["C0"]
    n = 10_000
    x = gen.uniform(size=(n, 2))
    r = gen.uniform(1e-9, 1.0 / (4 * c0), size=n)
    th = gen.uniform(0, 2 * np.pi, size=n)
    y = wrap(x + r[:, None] * np.stack([np.cos(th), np.sin(th)], axis=-1))
    zeta = gen.uniform(size=n)
    xs = shear_step(x, zeta, "horizontal", a)
    ys = shear_step(y, zeta, "horizontal", a)
    ratio = dist(xs, ys) / dist(x, y)
    assert np.max(ratio) <= c0 * (1 + 1e-12)
    assert np.min(ratio) >= 1.0 / c0 * (1 - 1e-12)


def test_translation_covariance():
    gen = np.random.default_rng(10)
    x = gen.uniform(size=(2000, 2))
    ze, zo = gen.uniform(size=(2, 2000))
    c = np.array([0.37, 0.81])
    base = double_step(x, ze, zo, 1.7)
    # shifting the phases along with the point commutes with translation:
    # the horizontal phase shifts by c2, the vertical one by c1
    moved = double_step(wrap(x + c), wrap(ze + c[1]), wrap(zo + c[0]), 1.7)
    assert np.allclose(displacement(wrap(base + c), moved), 0.0, atol=1e-12)


def test_separation_double_step_matches_two_point():
    gen = np.random.default_rng(11)
    n = 5000
    x = gen.uniform(size=(n, 2))
    s = gen.uniform(-0.2, 0.2, size=(n, 2))
    ze, zo = gen.uniform(size=(2, n))
    xs, ys = two_point_step(x, wrap(x + s), ze, zo, 3.0)
    x2, s2 = separation_double_step(x, s, ze, zo, 3.0)
    assert np.allclose(x2, xs, atol=1e-12)
    assert np.allclose(s2, displacement(xs, ys), atol=1e-10)


def test_separation_step_accurate_at_machine_scale():
    # at separation ~1e-15 the position difference rounds away, while the
    # separation form tracks the Jacobian action exactly
    x = np.array([[0.3, 0.7]])
    s = np.array([[0.0, 1e-15]])
    _, s1 = separation_double_step(x, s, np.array([0.2]), np.array([0.6]), 10.0)
    jac = double_step_jacobian(x[0], 0.2, 0.6, 10.0)
    expected = jac @ np.array([0.0, 1e-15])
    assert np.allclose(s1[0], expected, rtol=1e-9)


def test_shear_schedule_reproducible_prefix():
    sched = ShearSchedule(1.0, "sine", RngStream(21))
    a = sched.shifts(3)
    b = sched.shifts(6)
    assert np.array_equal(a, b[:3])
    assert np.all((b >= 0) & (b < 1))
    with pytest.raises(ValueError):
        ShearSchedule(-1.0)
