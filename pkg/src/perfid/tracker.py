"""Predictor-corrector path tracking and Newton refinement.

A homotopy is any object with ``evaluate(x, s) -> (H, dH/dx, dH/ds)`` for
``s`` in ``[0, 1]``.  :class:`~perfid.system.SegmentHomotopy` and
:class:`ProjectiveTotalDegreeHomotopy` are the two used in the package.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, replace

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackerSettings:
    initial_step: float = 0.05
    min_step: float = 1e-7
    max_step: float = 0.1
    newton_tol: float = 1e-10
    max_newton_iters: int = 3
    step_shrink: float = 0.5
    step_growth: float = 2.0
    growth_after: int = 5
    max_steps: int = 10_000
    endgame_refine_tol: float = 1e-12
    endgame_max_iters: int = 20
    divergence_factor: float = 1e8
    predictor: str = "rk4"

    def __post_init__(self):
        if not 0 < self.min_step <= self.initial_step <= self.max_step <= 1:
            raise ValueError("need 0 < min_step <= initial_step <= max_step <= 1")
        if not 0 < self.step_shrink < 1 or self.step_growth <= 1:
            raise ValueError("step_shrink must lie in (0, 1) and step_growth exceed 1")
        if self.predictor not in ("euler", "rk4"):
            raise ValueError(f"unknown predictor {self.predictor!r}")

    def updated(self, **overrides) -> "TrackerSettings":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class TrackResult:
    status: str  # success | diverged | singular | step_underflow
    endpoint: np.ndarray
    steps_taken: int
    final_residual: float
    s_reached: float = 0.0

    @property
    def success(self) -> bool:
        return self.status == "success"


def _norm(v) -> float:
    return float(np.linalg.norm(v))


def newton_refine(func, x, tol: float = 1e-12, max_iters: int = 20):
    """Newton's method on a square system ``func(x) -> (F, J)``.

    Stops when a Newton step is shorter than ``tol * (1 + |x|)``.  Returns
    ``(x, converged)``; a singular or non-finite Jacobian solve counts as failure.
    """
    x = np.array(x, dtype=np.complex128)
    for _ in range(max_iters):
        F, J = func(x)
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            return x, False
        if not np.all(np.isfinite(dx)):
            return x, False
        x = x + dx
        if _norm(dx) <= tol * (1.0 + _norm(x)):
            return x, True
    return x, False


def _tangent(H, x, s):
    _, J, Hs = H.evaluate(x, s)
    return np.linalg.solve(J, -Hs)


def _predict(H, x, s, h, method):
    if method == "euler":
        return x + h * _tangent(H, x, s)
    k1 = _tangent(H, x, s)
    k2 = _tangent(H, x + 0.5 * h * k1, s + 0.5 * h)
    k3 = _tangent(H, x + 0.5 * h * k2, s + 0.5 * h)
    k4 = _tangent(H, x + h * k3, s + h)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _correct(H, x, s, settings):
    prev = None
    for _ in range(settings.max_newton_iters):
        F, J, _ = H.evaluate(x, s)
        dx = np.linalg.solve(J, -F)
        if not np.all(np.isfinite(dx)):
            return x, False
        x = x + dx
        nrm = _norm(dx)
        if nrm <= settings.newton_tol * (1.0 + _norm(x)):
            return x, True
        # Newton must contract quadratically inside the basin
        if prev is not None and nrm > 0.5 * prev:
            return x, False
        prev = nrm
    return x, False


def track(H, start, settings: TrackerSettings | None = None) -> TrackResult:
    """Continue a root of ``H(., 0)`` to ``s = 1``.

    Classical RK4 (or explicit Euler) on the Davidenko equation predicts, Newton at
    frozen ``s`` corrects, and a step is accepted iff the corrector converges
    within ``max_newton_iters``.
    """
    settings = settings or TrackerSettings()
    x, ok = newton_refine(lambda y: H.evaluate(y, 0.0)[:2], start, settings.newton_tol,
                          settings.endgame_max_iters)
    if not ok:
        F = H.evaluate(x, 0.0)[0]
        return TrackResult("singular", x, 0, _norm(F), 0.0)
    ref_norm = max(1.0, _norm(x))
    s, h, streak, steps = 0.0, settings.initial_step, 0, 0
    while s < 1.0:
        if steps >= settings.max_steps:
            logger.debug("path exhausted max_steps at s=%.6g", s)
            return TrackResult("step_underflow", x, steps, _norm(H.evaluate(x, s)[0]), s)
        steps += 1
        last = h >= 1.0 - s
        h = min(h, 1.0 - s)
        s_new = 1.0 if last else s + h
        try:
            x_pred = _predict(H, x, s, h, settings.predictor)
            x_new, ok = _correct(H, x_pred, s_new, settings)
        except np.linalg.LinAlgError:
            ok = False
        if ok:
            s, x = s_new, x_new
            streak += 1
            if streak >= settings.growth_after:
                h = min(h * settings.step_growth, settings.max_step)
                streak = 0
            if _norm(x) > settings.divergence_factor * ref_norm:
                return TrackResult("diverged", x, steps, float("nan"), s)
        else:
            streak = 0
            h *= settings.step_shrink
            if h < settings.min_step:
                return TrackResult("step_underflow", x, steps, float("nan"), s)
    x, ok = newton_refine(lambda y: H.evaluate(y, 1.0)[:2], x, settings.endgame_refine_tol,
                          settings.endgame_max_iters)
    res = _norm(H.evaluate(x, 1.0)[0])
    if not np.isfinite(res):
        return TrackResult("singular", x, steps, res, 1.0)
    # a refinement that stalls at rounding level is still accepted on the residual test
    if res > settings.endgame_refine_tol * (1.0 + _norm(x)):
        return TrackResult("singular", x, steps, res, 1.0)
    return TrackResult("success", x, steps, res, 1.0)


class ProjectiveTotalDegreeHomotopy:
    """Gamma-trick total-degree homotopy for homogeneous equations on a random affine patch.

    ``target(y) -> (F, dF/dy)`` gives ``N`` homogeneous polynomials of the given
    degrees in ``N + 1`` unknowns.  The start system is ``y_i^d_i - y_0^d_i``;
    the extra equation ``l . y = 1`` holds along the whole path, so paths whose
    affine image would run to infinity stay finite.
    """

    def __init__(self, target, degrees, rng: np.random.Generator):
        self.target = target
        self.degrees = np.asarray(degrees, dtype=np.int64)
        n = len(degrees) + 1
        self.n_vars = n
        self.patch = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        angle = rng.uniform(0, 2 * np.pi)
        self.gamma = np.exp(1j * angle)

    def _start(self, y):
        d = self.degrees
        N = len(d)
        G = y[1:] ** d - y[0] ** d
        dG = np.zeros((N, N + 1), dtype=np.complex128)
        dG[:, 0] = -d * y[0] ** (d - 1)
        dG[np.arange(N), np.arange(1, N + 1)] = d * y[1:] ** (d - 1)
        return G, dG

    def evaluate(self, y, s):
        G, dG = self._start(y)
        F, dF = self.target(y)
        N = len(self.degrees)
        H = np.empty(N + 1, dtype=np.complex128)
        J = np.empty((N + 1, N + 1), dtype=np.complex128)
        H[:N] = (1 - s) * self.gamma * G + s * F
        J[:N] = (1 - s) * self.gamma * dG + s * dF
        H[N] = np.dot(self.patch, y) - 1.0
        J[N] = self.patch
        Hs = np.zeros(N + 1, dtype=np.complex128)
        Hs[:N] = F - self.gamma * G
        return H, J, Hs

    def start_points(self) -> list[np.ndarray]:
        roots = [np.exp(2j * np.pi * np.arange(d) / d) for d in self.degrees]
        pts = []
        for combo in itertools.product(*roots):
            y = np.concatenate(([1.0 + 0j], np.array(combo)))
            denom = np.dot(self.patch, y)
            pts.append(y / denom)
        return pts


def solve_projective(target, degrees, rng: np.random.Generator,
                     settings: TrackerSettings | None = None) -> list[TrackResult]:
    """Track all ``prod(degrees)`` total-degree paths; returns one result per path."""
    H = ProjectiveTotalDegreeHomotopy(target, degrees, rng)
    return [track(H, y0, settings) for y0 in H.start_points()]
