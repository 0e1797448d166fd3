"""Dense tensors, patched rank-one decompositions and their orbit bookkeeping."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache, reduce
from typing import Sequence

import numpy as np

from .errors import AmbiguousOrderError
from .formats import FormatSpec, monomial_exponents


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


def complex_gaussian(rng: np.random.Generator, size) -> np.ndarray:
    """Standard circular complex Gaussian samples (unit variance)."""
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


@lru_cache(maxsize=None)
def exponent_table(n: int, e: int) -> np.ndarray:
    table = np.array(monomial_exponents(n, e), dtype=np.int64)
    table.setflags(write=False)
    return table


def veronese(v: np.ndarray, e: int) -> np.ndarray:
    """Unweighted degree-``e`` monomials of ``v`` in the package's monomial order."""
    v = np.asarray(v, dtype=np.complex128)
    if e == 1:
        return v.copy()
    return np.prod(v[None, :] ** exponent_table(len(v), e), axis=1)


@dataclass(frozen=True)
class DenseTensor:
    """Coefficients of a tensor, flattened row-major over the format's blocks."""

    format: FormatSpec
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = _frozen(self.coeffs).reshape(-1)
        if coeffs.size != self.format.ambient_dim:
            raise ValueError(
                f"format {self.format} needs {self.format.ambient_dim} coefficients, got {coeffs.size}"
            )
        object.__setattr__(self, "coeffs", coeffs)

    def array(self) -> np.ndarray:
        """Coefficients reshaped to the block shape of the format."""
        return self.coeffs.reshape(self.format.shape)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def __add__(self, other: "DenseTensor") -> "DenseTensor":
        _check_same_format(self.format, other.format)
        return DenseTensor(self.format, self.coeffs + other.coeffs)

    def __sub__(self, other: "DenseTensor") -> "DenseTensor":
        _check_same_format(self.format, other.format)
        return DenseTensor(self.format, self.coeffs - other.coeffs)

    def __mul__(self, alpha: complex) -> "DenseTensor":
        return DenseTensor(self.format, alpha * self.coeffs)

    __rmul__ = __mul__

    def to_dict(self) -> dict:
        return {
            "format": [list(g) for g in self.format.groups],
            "coeffs": [[float(z.real), float(z.imag)] for z in self.coeffs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DenseTensor":
        fmt = FormatSpec(tuple(tuple(g) for g in data["format"]))
        return cls(fmt, [complex(re, im) for re, im in data["coeffs"]])


def _check_same_format(a: FormatSpec, b: FormatSpec) -> None:
    if a != b:
        raise ValueError(f"format mismatch: {a} vs {b}")


@dataclass(frozen=True)
class PatchSet:
    """One affine-patch functional per factor group: a vector ``v`` is normalized by ``u . v = 1``.

    The pairing is bilinear (no conjugation), so patch equations stay polynomial.
    ``seed is None`` marks the strict patch ``u = e_1``.
    """

    vectors: tuple[np.ndarray, ...]
    seed: int | None = None

    def __post_init__(self):
        vecs = tuple(_frozen(u) for u in self.vectors)
        for u in vecs:
            if not np.any(u):
                raise ValueError("patch vectors must be nonzero")
        object.__setattr__(self, "vectors", vecs)

    @classmethod
    def random(cls, fmt: FormatSpec, seed: int) -> "PatchSet":
        rng = np.random.default_rng(seed)
        vecs = []
        for n in fmt.dims:
            u = complex_gaussian(rng, n)
            vecs.append(u / np.linalg.norm(u))
        return cls(tuple(vecs), seed)

    @classmethod
    def strict(cls, fmt: FormatSpec) -> "PatchSet":
        return cls(tuple(np.eye(n, dtype=np.complex128)[0] for n in fmt.dims), None)

    def conforms(self, fmt: FormatSpec) -> bool:
        return tuple(len(u) for u in self.vectors) == fmt.dims

    def __eq__(self, other):
        if not isinstance(other, PatchSet):
            return NotImplemented
        return self.seed == other.seed and len(self.vectors) == len(other.vectors) and all(
            np.array_equal(a, b) for a, b in zip(self.vectors, other.vectors)
        )

    def __hash__(self):
        return hash((self.seed, tuple(u.tobytes() for u in self.vectors)))


@dataclass(frozen=True)
class RankOneTerm:
    lam: complex
    vectors: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "vectors", tuple(_frozen(v) for v in self.vectors))

    def coords(self) -> np.ndarray:
        """Vector coordinates followed by ``lam``."""
        return np.concatenate(self.vectors + (np.array([self.lam]),))

    def tensor(self, fmt: FormatSpec) -> np.ndarray:
        blocks = [veronese(v, e) for v, e in zip(self.vectors, fmt.degrees)]
        return self.lam * reduce(np.multiply.outer, blocks).reshape(-1)


@dataclass(frozen=True)
class Decomposition:
    format: FormatSpec
    terms: tuple[RankOneTerm, ...]
    patches: PatchSet

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("a decomposition needs at least one term")
        if not self.patches.conforms(self.format):
            raise ValueError("patch vectors do not match the format")
        for t in terms:
            if tuple(len(v) for v in t.vectors) != self.format.dims:
                raise ValueError(
                    f"term vector lengths {[len(v) for v in t.vectors]} do not match format {self.format}"
                )
        object.__setattr__(self, "terms", terms)

    @property
    def rank(self) -> int:
        return len(self.terms)

    def patch_residual(self) -> float:
        """Largest deviation from the patch constraints over all terms and groups."""
        return max(
            abs(np.dot(u, v) - 1.0)
            for t in self.terms
            for u, v in zip(self.patches.vectors, t.vectors)
        )

    def replace_terms(self, terms: Sequence[RankOneTerm]) -> "Decomposition":
        return Decomposition(self.format, tuple(terms), self.patches)

    def to_dict(self) -> dict:
        return {
            "format": [list(g) for g in self.format.groups],
            "patch_seed": self.patches.seed,
            "patch_vectors": [[[float(z.real), float(z.imag)] for z in u] for u in self.patches.vectors],
            "terms": [
                {
                    "lambda": [t.lam.real, t.lam.imag],
                    "vectors": [[[float(z.real), float(z.imag)] for z in v] for v in t.vectors],
                }
                for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Decomposition":
        fmt = FormatSpec(tuple(tuple(g) for g in data["format"]))
        seed = data.get("patch_seed")
        if "patch_vectors" in data:
            patches = PatchSet(
                tuple(np.array([complex(a, b) for a, b in u]) for u in data["patch_vectors"]), seed
            )
        elif seed is None:
            patches = PatchSet.strict(fmt)
        else:
            patches = PatchSet.random(fmt, seed)
        terms = [
            RankOneTerm(
                complex(*t["lambda"]),
                tuple(np.array([complex(a, b) for a, b in v]) for v in t["vectors"]),
            )
            for t in data["terms"]
        ]
        return cls(fmt, tuple(terms), patches)


def dumps(obj: DenseTensor | Decomposition, **kwargs) -> str:
    return json.dumps(obj.to_dict(), **kwargs)


def loads(text: str) -> DenseTensor | Decomposition:
    data = json.loads(text)
    if "terms" in data:
        return Decomposition.from_dict(data)
    return DenseTensor.from_dict(data)


def normalize_term(fmt: FormatSpec, patches: PatchSet, lam: complex, vectors) -> RankOneTerm:
    """Move every vector onto its patch and push the scale into ``lam``."""
    lam = complex(lam)
    out = []
    for u, v, e in zip(patches.vectors, vectors, fmt.degrees):
        v = np.asarray(v, dtype=np.complex128)
        s = np.dot(u, v)
        if s == 0:
            raise ZeroDivisionError("vector lies on the patch's hyperplane at infinity")
        out.append(v / s)
        lam *= s**e
    return RankOneTerm(lam, tuple(out))


def evaluate(dec: Decomposition) -> DenseTensor:
    coeffs = np.zeros(dec.format.ambient_dim, dtype=np.complex128)
    for t in dec.terms:
        coeffs += t.tensor(dec.format)
    return DenseTensor(dec.format, coeffs)


def random_decomposition(
    fmt: FormatSpec, r: int, seed, patches: PatchSet | None = None
) -> Decomposition:
    """Complex-Gaussian rank-one terms moved onto ``patches`` (seeded from ``seed`` when absent)."""
    if r < 1:
        raise ValueError("r must be >= 1")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    if patches is None:
        patch_seed = int(ss.generate_state(1)[0])
        patches = PatchSet.random(fmt, patch_seed)
    rng = np.random.default_rng(ss)
    terms = []
    for _ in range(r):
        vecs = [complex_gaussian(rng, n) for n in fmt.dims]
        terms.append(normalize_term(fmt, patches, 1.0, vecs))
    return Decomposition(fmt, tuple(terms), patches)


def _term_key(t: RankOneTerm, digits: int) -> tuple:
    c = np.round(t.coords(), digits)
    # adding 0.0 folds -0.0 into 0.0
    return tuple((float(z.real) + 0.0, float(z.imag) + 0.0) for z in c)


def canonical_form(dec: Decomposition, digits: int = 8) -> Decomposition:
    """Sort terms by their rounded coordinates; the result is constant on term permutations."""
    keyed = sorted(((_term_key(t, digits), i) for i, t in enumerate(dec.terms)))
    for (k1, i1), (k2, i2) in zip(keyed, keyed[1:]):
        if k1 == k2 and not np.array_equal(dec.terms[i1].coords(), dec.terms[i2].coords()):
            raise AmbiguousOrderError(
                f"terms {i1} and {i2} coincide after rounding to {digits} digits"
            )
    return dec.replace_terms([dec.terms[i] for _, i in keyed])


def term_distance(a: RankOneTerm, b: RankOneTerm) -> float:
    """Max coordinate deviation; ``lam`` is compared relative to its size."""
    dv = max(float(np.max(np.abs(x - y))) for x, y in zip(a.vectors, b.vectors))
    dl = abs(a.lam - b.lam) / max(1.0, abs(a.lam), abs(b.lam))
    return max(dv, dl)


def _greedy_match(A: Sequence[RankOneTerm], B: Sequence[RankOneTerm]) -> float:
    free = list(range(len(B)))
    worst = 0.0
    for a in A:
        dists = [term_distance(a, B[j]) for j in free]
        k = int(np.argmin(dists))
        worst = max(worst, dists[k])
        free.pop(k)
    return worst


def distance(dec1: Decomposition, dec2: Decomposition) -> float:
    """Orbit-aware distance: greedy nearest-neighbour matching of terms, worst matched pair.

    Greedy matching is run in both directions on canonical orderings and the
    smaller value is kept, which makes the result symmetric.
    """
    if dec1.format != dec2.format or dec1.rank != dec2.rank:
        raise ValueError("decompositions must share format and rank")
    A = sorted(dec1.terms, key=lambda t: _term_key(t, 8))
    B = sorted(dec2.terms, key=lambda t: _term_key(t, 8))
    return min(_greedy_match(A, B), _greedy_match(B, A))
