import numpy as np
import pytest

from perfid.formats import parse_format
from perfid.monodromy import track_loop
from perfid.system import SegmentHomotopy, build_system, make_loop
from perfid.tensors import canonical_form, distance, evaluate, random_decomposition
from perfid.tracker import (
    ProjectiveTotalDegreeHomotopy,
    TrackerSettings,
    newton_refine,
    solve_projective,
    track,
)


def _planted(text, r, seed=0):
    fmt = parse_format(text)
    dec = random_decomposition(fmt, r, seed)
    T = evaluate(dec)
    return dec, T, build_system(fmt, r, T, dec.patches)


class _Scalar:
    """``H(x, s) = (1 - s) x - 1``: the root 1/(1-s) escapes to infinity."""

    def evaluate(self, x, s):
        return np.array([(1 - s) * x[0] - 1]), np.array([[1 - s]], dtype=complex), np.array([-x[0]])


def test_settings_validation():
    TrackerSettings()
    with pytest.raises(ValueError):
        TrackerSettings(min_step=0.2)
    with pytest.raises(ValueError):
        TrackerSettings(step_shrink=1.5)
    with pytest.raises(ValueError):
        TrackerSettings(predictor="midpoint")
    s = TrackerSettings().updated(predictor="euler", newton_tol=None)
    assert s.predictor == "euler" and s.newton_tol == 1e-10


@pytest.mark.parametrize("predictor", ["euler", "rk4"])
def test_constant_loop(predictor):
    dec, T, sys_ = _planted("2,2,2,3", 4)
    H = SegmentHomotopy(sys_, T.coeffs, T.coeffs)
    x0 = sys_.pack(dec)
    res = track(H, x0, TrackerSettings(predictor=predictor))
    assert res.success
    assert np.linalg.norm(res.endpoint - x0) <= 1e-10 * (1 + np.linalg.norm(x0))


@pytest.mark.parametrize("predictor", ["euler", "rk4"])
def test_loop_2223_single_orbit(predictor):
    dec, T, sys_ = _planted("2,2,2,3", 4, 1)
    result, end = track_loop(sys_, make_loop(T, 3), dec, TrackerSettings(predictor=predictor))
    assert result.success
    assert np.linalg.norm(evaluate(end).coeffs - T.coeffs) <= 1e-10 * T.norm()
    assert distance(canonical_form(end), canonical_form(dec)) <= 1e-6


def test_success_residual_contract():
    dec, T, sys_ = _planted("3,4,5", 6, 2)
    loop = make_loop(T, 4)
    a, b = loop.segments()[0]
    H = SegmentHomotopy(sys_, a, b)
    res = track(H, sys_.pack(dec))
    assert res.success and res.s_reached == 1.0
    assert res.final_residual <= 1e-12 * (1 + np.linalg.norm(res.endpoint))
    assert np.linalg.norm(H.evaluate(res.endpoint, 1.0)[0]) == pytest.approx(res.final_residual)


def test_loop_then_reverse_returns():
    dec, T, sys_ = _planted("3,3,5", 5, 4)
    start = canonical_form(dec)
    loop = make_loop(T, 8)
    r1, mid = track_loop(sys_, loop, start)
    assert r1.success
    r2, back = track_loop(sys_, loop.reversed(), mid)
    assert r2.success
    assert distance(canonical_form(back), start) <= 1e-6


def test_max_steps_bound():
    dec, T, sys_ = _planted("2,2,2,3", 4)
    loop = make_loop(T, 1)
    a, b = loop.segments()[0]
    res = track(SegmentHomotopy(sys_, a, b), sys_.pack(dec), TrackerSettings(max_steps=3))
    assert res.status == "step_underflow"
    assert res.steps_taken <= 3
    assert 0 < res.s_reached < 1


def test_path_to_infinity_fails():
    res = track(_Scalar(), np.array([1.0 + 0j]))
    assert not res.success
    assert res.status in ("diverged", "step_underflow")


def test_newton_exact_and_perturbed():
    dec, T, sys_ = _planted("2,2,2,3", 4, 5)
    x0 = sys_.pack(dec)
    x, ok = newton_refine(sys_.residual_jacobian, x0)
    assert ok and np.linalg.norm(x - x0) <= 1e-12 * np.linalg.norm(x0)
    rng = np.random.default_rng(0)
    noisy = x0 + 1e-4 * (rng.standard_normal(x0.size) + 1j * rng.standard_normal(x0.size))
    x, ok = newton_refine(sys_.residual_jacobian, noisy)
    assert ok and np.linalg.norm(x - x0) <= 1e-12 * np.linalg.norm(x0)


def test_newton_far_point_never_false_success():
    dec, T, sys_ = _planted("2,2,2,3", 4, 6)
    rng = np.random.default_rng(1)
    for _ in range(5):
        far = 10 * (rng.standard_normal(sys_.n_vars) + 1j * rng.standard_normal(sys_.n_vars))
        x, ok = newton_refine(sys_.residual_jacobian, far, max_iters=20)
        if ok:
            assert np.linalg.norm(sys_.eval(x)) <= 1e-8 * T.norm()


def test_newton_singular_reports_failure():
    x, ok = newton_refine(lambda y: (np.array([1.0 + 0j]), np.zeros((1, 1), dtype=complex)), np.zeros(1))
    assert not ok


def test_projective_solver_finds_conic_intersection():
    # x^2 - 4z^2 = 0 and y^2 - 9z^2 = 0 meet in (±2 : ±3 : 1)
    def target(v):
        x, y, z = v
        F = np.array([x * x - 4 * z * z, y * y - 9 * z * z])
        J = np.array([[2 * x, 0, -8 * z], [0, 2 * y, -18 * z]])
        return F, J

    rng = np.random.default_rng(3)
    results = solve_projective(target, [2, 2], rng)
    assert len(results) == 4 and all(r.success for r in results)
    pts = sorted((complex(r.endpoint[0] / r.endpoint[2]).real, complex(r.endpoint[1] / r.endpoint[2]).real)
                 for r in results)
    np.testing.assert_allclose(pts, [(-2, -3), (-2, 3), (2, -3), (2, 3)], atol=1e-10)


def test_projective_start_points_solve_start_system():
    rng = np.random.default_rng(0)
    H = ProjectiveTotalDegreeHomotopy(lambda v: (np.zeros(2), np.zeros((2, 3))), [2, 3], rng)
    starts = H.start_points()
    assert len(starts) == 6
    for y in starts:
        assert np.linalg.norm(H.evaluate(y, 0.0)[0]) < 1e-12
