"""The square decomposition system F_T and the loops that move its parameter T."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import Layout, residual_jacobian
from .formats import FormatSpec
from .tensors import (
    Decomposition,
    DenseTensor,
    PatchSet,
    RankOneTerm,
    complex_gaussian,
)


class SquareSystem:
    """Residual ``T - sum_i lam_i (x)_j v_j^i^{(x) e_j}`` stacked over the patch equations.

    Variables are packed per term as ``lam`` followed by the group vectors.
    Equations are the residual entries in row-major order, then the patch
    equations ordered by (term, group).  ``target`` is the parameter slot;
    use :meth:`with_target` to get a system for another tensor.
    """

    def __init__(self, fmt: FormatSpec, r: int, target: DenseTensor, patches: PatchSet,
                 require_square: bool = False):
        if r <= 0:
            raise ValueError("rank must be positive")
        if target.format != fmt:
            raise ValueError(f"target has format {target.format}, expected {fmt}")
        self.format = fmt
        self.r = r
        self.patches = patches
        self.target = target
        self.layout = Layout(fmt, r, patches)
        if require_square and not self.is_square:
            raise ValueError(
                f"format {fmt} at rank {r} gives {self.n_eqs} equations in {self.n_vars} variables; "
                "the system is square only when r(1 + sum(n_j - 1)) equals the ambient dimension"
            )

    @property
    def n_eqs(self) -> int:
        return self.layout.n_eqs

    @property
    def n_vars(self) -> int:
        return self.layout.n_vars

    @property
    def is_square(self) -> bool:
        return self.n_eqs == self.n_vars

    def with_target(self, target: DenseTensor) -> "SquareSystem":
        other = object.__new__(SquareSystem)
        other.__dict__.update(self.__dict__)
        if target.format != self.format:
            raise ValueError("target format mismatch")
        other.target = target
        return other

    def residual_jacobian(self, x, target_coeffs=None):
        t = self.target.coeffs if target_coeffs is None else target_coeffs
        return residual_jacobian(self.layout, x, t)

    def eval(self, x) -> np.ndarray:
        return self.residual_jacobian(x)[0]

    def eval_jacobian(self, x) -> np.ndarray:
        return self.residual_jacobian(x)[1]

    def pack(self, dec: Decomposition) -> np.ndarray:
        if dec.format != self.format or dec.rank != self.r:
            raise ValueError("decomposition does not match the system's format and rank")
        return np.concatenate([np.concatenate(([t.lam],) + t.vectors) for t in dec.terms])

    def unpack(self, x) -> Decomposition:
        x = np.asarray(x, dtype=np.complex128)
        lay = self.layout
        terms = []
        for i in range(self.r):
            base = i * lay.stride
            vecs = tuple(
                x[base + 1 + o : base + 1 + o + n].copy() for o, n in zip(lay.group_offsets, lay.dims)
            )
            terms.append(RankOneTerm(x[base], vecs))
        return Decomposition(self.format, tuple(terms), self.patches)


def build_system(fmt: FormatSpec, r: int, T: DenseTensor, patches: PatchSet,
                 require_square: bool = False) -> SquareSystem:
    return SquareSystem(fmt, r, T, patches, require_square=require_square)


@dataclass(frozen=True)
class LoopPath:
    """Closed triangle ``T -> T1 -> T2 -> T`` traversed on thirds of ``[0, 1]``."""

    base: DenseTensor
    waypoints: tuple[DenseTensor, DenseTensor]

    @property
    def vertices(self) -> list[DenseTensor]:
        return [self.base, self.waypoints[0], self.waypoints[1], self.base]

    def segments(self) -> list[tuple[np.ndarray, np.ndarray]]:
        v = [t.coeffs for t in self.vertices]
        return [(v[i], v[i + 1]) for i in range(3)]

    def __call__(self, s: float) -> DenseTensor:
        if not 0.0 <= s <= 1.0:
            raise ValueError("loop parameter must lie in [0, 1]")
        if s == 0.0 or s == 1.0:
            return self.base
        seg = min(int(s * 3), 2)
        local = s * 3 - seg
        a, b = self.segments()[seg]
        if local == 0.0:
            return DenseTensor(self.base.format, a)
        return DenseTensor(self.base.format, a + local * (b - a))

    def reversed(self) -> "LoopPath":
        return LoopPath(self.base, (self.waypoints[1], self.waypoints[0]))


def make_loop(T: DenseTensor, seed) -> LoopPath:
    """Triangle loop through two complex-Gaussian waypoints scaled to ``|T|``."""
    rng = np.random.default_rng(seed)
    scale = T.norm() or 1.0
    pts = []
    for _ in range(2):
        g = complex_gaussian(rng, T.format.ambient_dim)
        pts.append(DenseTensor(T.format, g * (scale / np.linalg.norm(g))))
    return LoopPath(T, (pts[0], pts[1]))


class SegmentHomotopy:
    """``H(x, s) = F_{A + s (B - A)}(x)``; only the residual block depends on ``s``."""

    def __init__(self, system: SquareSystem, start_coeffs, end_coeffs):
        self.system = system
        self.a = np.asarray(start_coeffs, dtype=np.complex128)
        self.b = np.asarray(end_coeffs, dtype=np.complex128)
        self._ds = np.zeros(system.n_eqs, dtype=np.complex128)
        self._ds[: system.layout.ambient] = self.b - self.a

    @property
    def n_vars(self) -> int:
        return self.system.n_vars

    def evaluate(self, x, s: float):
        """Return ``(H, dH/dx, dH/ds)`` at ``(x, s)``."""
        F, J = self.system.residual_jacobian(x, self.a + s * (self.b - self.a))
        return F, J, self._ds
