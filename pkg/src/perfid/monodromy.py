"""Counting decompositions of a general tensor with random monodromy loops."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .formats import FormatSpec, expected_generic_rank, format_to_string
from .system import LoopPath, SegmentHomotopy, SquareSystem, make_loop
from .tensors import (
    Decomposition,
    DenseTensor,
    PatchSet,
    canonical_form,
    distance,
    evaluate,
    random_decomposition,
)
from .tracker import TrackerSettings, newton_refine, track

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonodromySettings:
    stabilize_after: int = 50
    max_loops: int = 2000
    seed: int = 0
    dedup_tol: float = 1e-6
    residual_tol: float = 1e-8
    workers: int = 1
    tracker: TrackerSettings = field(default_factory=TrackerSettings)


@dataclass
class MonodromyState:
    target: DenseTensor
    system: SquareSystem
    known_orbits: list[Decomposition]
    dedup_tol: float = 1e-6
    residual_tol: float = 1e-8
    loops_run: int = 0
    loops_since_last_new: int = 0
    failures: int = 0
    paths_tracked: int = 0
    seed: int = 0

    def find(self, dec: Decomposition) -> int | None:
        for i, known in enumerate(self.known_orbits):
            if distance(known, dec) <= self.dedup_tol:
                return i
        return None


@dataclass
class CountReport:
    format: str
    rank: int
    orbit_count: int
    loops_run: int
    failures: int
    stabilized: bool
    wall_time: float
    seed: int
    paths_tracked: int = 0
    stabilize_after: int = 50
    label: str = ""
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        rows = [
            ("format", self.format),
            ("rank", self.rank),
            ("decompositions", f"{self.orbit_count} ({self.label})"),
            ("loops run", self.loops_run),
            ("paths tracked", self.paths_tracked),
            ("path failures", self.failures),
            ("stabilized", f"{self.stabilized} (after {self.stabilize_after} quiet loops)"),
            ("seed", self.seed),
            ("wall time [s]", f"{self.wall_time:.2f}"),
        ]
        width = max(len(k) for k, _ in rows)
        lines = [f"{k:<{width}}  {v}" for k, v in rows]
        lines += [f"warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def _square_rank(fmt: FormatSpec, r: int | None) -> int:
    R = expected_generic_rank(fmt)
    if r is None:
        if R.denominator != 1:
            raise ValueError(f"format {fmt} is not perfect (R = {R}); no square system exists")
        return int(R)
    if r * (1 + sum(n - 1 for n in fmt.dims)) != fmt.ambient_dim:
        raise ValueError(
            f"rank {r} does not give a square system for {fmt}: need r(1 + sum(n_j - 1)) = "
            f"{fmt.ambient_dim}"
        )
    return r


def track_loop(system: SquareSystem, loop: LoopPath, start: Decomposition,
               settings: TrackerSettings | None = None):
    """Carry ``start`` once around ``loop``; returns ``(TrackResult, endpoint decomposition or None)``."""
    x = system.pack(start)
    result = None
    for a, b in loop.segments():
        result = track(SegmentHomotopy(system, a, b), x, settings)
        if not result.success:
            return result, None
        x = result.endpoint
    return result, system.unpack(x)


def _verify(state: MonodromyState, dec: Decomposition) -> Decomposition | None:
    sys_ = state.system
    x, ok = newton_refine(lambda y: sys_.residual_jacobian(y), sys_.pack(dec), 1e-13, 5)
    dec = sys_.unpack(x)
    T = state.target
    res = np.linalg.norm(T.coeffs - evaluate(dec).coeffs)
    if not np.isfinite(res) or res > state.residual_tol * T.norm():
        return None
    return canonical_form(dec)


def run_loop(state: MonodromyState, loop: LoopPath, settings: TrackerSettings | None = None,
             workers: int = 1) -> int:
    """Track every known orbit around ``loop``; insert verified new endpoints.  Returns the number added."""
    starts = list(state.known_orbits)

    def one(dec):
        return track_loop(state.system, loop, dec, settings)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, starts))
    else:
        outcomes = [one(d) for d in starts]

    added = 0
    for result, endpoint in outcomes:
        state.paths_tracked += 1
        if endpoint is None:
            state.failures += 1
            logger.debug("path failed: %s after %d steps", result.status, result.steps_taken)
            continue
        checked = _verify(state, endpoint)
        if checked is None:
            state.failures += 1
            continue
        if state.find(checked) is None:
            state.known_orbits.append(checked)
            added += 1
    state.loops_run += 1
    state.loops_since_last_new = 0 if added else state.loops_since_last_new + 1
    return added


def initial_state(fmt: FormatSpec, r: int | None = None, seed: int = 0,
                  start: Decomposition | None = None, dedup_tol: float = 1e-6,
                  residual_tol: float = 1e-8) -> MonodromyState:
    """Plant a random decomposition (or take ``start``) and set up the orbit store."""
    r = _square_rank(fmt, r)
    if start is None:
        start = random_decomposition(fmt, r, np.random.SeedSequence([seed, 1]))
    elif start.format != fmt or start.rank != r:
        raise ValueError("start decomposition does not match format and rank")
    T = evaluate(start)
    system = SquareSystem(fmt, r, T, start.patches, require_square=True)
    state = MonodromyState(T, system, [], dedup_tol, residual_tol, seed=seed)
    first = _verify(state, start)
    if first is None:
        raise ValueError("start decomposition does not reproduce its tensor")
    state.known_orbits.append(first)
    return state


def count_decompositions(fmt: FormatSpec, r: int | None = None,
                         settings: MonodromySettings | None = None,
                         start: Decomposition | None = None,
                         progress=None) -> tuple[CountReport, MonodromyState]:
    """Run random triangle loops until ``stabilize_after`` consecutive loops add nothing.

    The count is a lower bound that is expected to be sharp once stabilized.
    """
    settings = settings or MonodromySettings()
    t0 = time.perf_counter()
    state = initial_state(fmt, r, settings.seed, start, settings.dedup_tol, settings.residual_tol)
    loop_seeds = np.random.SeedSequence([settings.seed, 2])
    while state.loops_run < settings.max_loops and state.loops_since_last_new < settings.stabilize_after:
        (child,) = loop_seeds.spawn(1)
        loop = make_loop(state.target, child)
        added = run_loop(state, loop, settings.tracker, settings.workers)
        if progress is not None:
            progress(state, added)
    stabilized = state.loops_since_last_new >= settings.stabilize_after
    warnings = []
    if state.paths_tracked and state.failures > 0.25 * state.paths_tracked:
        warnings.append(f"{state.failures} of {state.paths_tracked} paths failed")
    if not stabilized:
        warnings.append(f"max_loops={settings.max_loops} reached before stabilization")
    report = CountReport(
        format=format_to_string(fmt),
        rank=state.system.r,
        orbit_count=len(state.known_orbits),
        loops_run=state.loops_run,
        failures=state.failures,
        stabilized=stabilized,
        wall_time=time.perf_counter() - t0,
        seed=settings.seed,
        paths_tracked=state.paths_tracked,
        stabilize_after=settings.stabilize_after,
        label="lower bound, stabilized" if stabilized else "lower bound",
        warnings=warnings,
    )
    return report, state
