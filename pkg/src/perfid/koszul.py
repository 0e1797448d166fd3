"""Koszul flattenings, their rank bounds, and apolarity decomposition of (3,4,5) and (2,2,2,3) tensors."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, product

import numpy as np

from .errors import DegenerateInputError, GenericityError, UnsupportedFormatError
from .formats import FormatSpec
from .linalg import DEFAULT_RANK_TOL, null_space, numerical_rank, singular_values
from .system import SquareSystem
from .tensors import (
    Decomposition,
    DenseTensor,
    PatchSet,
    RankOneTerm,
    canonical_form,
    evaluate,
    normalize_term,
    random_decomposition,
    term_distance,
)
from .tracker import TrackerSettings, newton_refine, solve_projective


@dataclass(frozen=True)
class FlatteningIndex:
    """Exterior-power degree per factor; negative entries stand for powers of the dual space."""

    I: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "I", tuple(int(i) for i in self.I))

    @property
    def positive(self) -> tuple[int, ...]:
        return tuple(j for j, i in enumerate(self.I) if i >= 0)

    @property
    def negative(self) -> tuple[int, ...]:
        return tuple(j for j, i in enumerate(self.I) if i < 0)

    def transpose(self) -> "FlatteningIndex":
        return FlatteningIndex(tuple(-i - 1 for i in self.I))

    def __str__(self) -> str:
        return "(" + ",".join(str(i) for i in self.I) + ")"


def _dims_of(fmt) -> tuple[int, ...]:
    if isinstance(fmt, FormatSpec):
        if not fmt.is_ordinary:
            raise UnsupportedFormatError("Koszul flattenings are implemented for ordinary formats only")
        return fmt.dims
    return tuple(fmt)


def _as_index(I) -> FlatteningIndex:
    return I if isinstance(I, FlatteningIndex) else FlatteningIndex(tuple(I))


def source_target_dims(fmt, I) -> tuple[int, int]:
    dims = _dims_of(fmt)
    I = _as_index(I)
    if len(I.I) != len(dims):
        raise ValueError(f"index {I} has the wrong length for format {dims}")
    src = math.prod(math.comb(n, abs(i)) if abs(i) <= n else 0 for n, i in zip(dims, I.I))
    tgt = math.prod(math.comb(n, abs(i + 1)) if abs(i + 1) <= n else 0 for n, i in zip(dims, I.I))
    return src, tgt


def mult_factor(fmt, I) -> int:
    """Rank of the flattening of a single rank-one tensor."""
    dims = _dims_of(fmt)
    I = _as_index(I)
    return math.prod(math.comb(n - 1, i if i >= 0 else -i - 1) for n, i in zip(dims, I.I))


def rank_bound(fmt, r: int, I) -> int:
    return r * mult_factor(fmt, I)


def detection_limit(fmt, I) -> int:
    """Largest tensor rank whose flattening rank can still grow: ``floor(min(src, tgt) / m)``."""
    src, tgt = source_target_dims(fmt, I)
    m = mult_factor(fmt, I)
    return min(src, tgt) // m if m else 0


@lru_cache(maxsize=None)
def wedge_basis(n: int, p: int) -> tuple[tuple[int, ...], ...]:
    """Sorted index sets of size ``|p|``, lexicographic."""
    return tuple(combinations(range(n), abs(p)))


@lru_cache(maxsize=None)
def koszul_factor(n: int, i: int) -> np.ndarray:
    """``E[a]`` is the matrix of the one-factor Koszul map for the basis vector ``e_a``.

    For ``i >= 0`` it is wedging ``phi -> phi ^ e_a`` on the exterior power;
    for ``i < 0`` it is contraction of ``phi`` in the dual exterior power with
    ``e_a``.  Signs come from the parity of the sorted insertion/removal.
    """
    src = wedge_basis(n, i)
    tgt = wedge_basis(n, i + 1)
    tpos = {s: k for k, s in enumerate(tgt)}
    E = np.zeros((n, len(tgt), len(src)))
    for a in range(n):
        for col, S in enumerate(src):
            if i >= 0:
                if a in S:
                    continue
                sign = (-1) ** sum(1 for s in S if s > a)
                E[a, tpos[tuple(sorted(S + (a,)))], col] = sign
            else:
                if a not in S:
                    continue
                k = S.index(a)
                E[a, tpos[S[:k] + S[k + 1:]], col] = (-1) ** k
    E.setflags(write=False)
    return E


@dataclass(frozen=True)
class KoszulMatrix:
    matrix: np.ndarray
    row_basis: tuple[tuple[tuple[int, ...], ...], ...]
    col_basis: tuple[tuple[tuple[int, ...], ...], ...]
    index: FlatteningIndex

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape


def _koszul_from_array(arr: np.ndarray, dims, I: FlatteningIndex) -> np.ndarray:
    d = len(dims)
    letters = "abcdefghijklm"
    rows = "nopqrstu"
    cols = "vwxyzABC"
    spec = letters[:d] + "," + ",".join(letters[j] + rows[j] + cols[j] for j in range(d))
    spec += "->" + rows[:d] + cols[:d]
    ops = [koszul_factor(n, i) for n, i in zip(dims, I.I)]
    out = np.einsum(spec, arr, *ops, optimize=True)
    src, tgt = source_target_dims(dims, I)
    return out.reshape(tgt, src)


def build_koszul(T: DenseTensor, I) -> KoszulMatrix:
    """Matrix of ``K_I(T)``; rows index the target, columns the source, Kronecker-ordered by factor."""
    dims = _dims_of(T.format)
    I = _as_index(I)
    src, tgt = source_target_dims(dims, I)
    if src == 0 or tgt == 0 or any(not -n <= i <= n for n, i in zip(dims, I.I)):
        raise ValueError(f"index {I} has an empty source or target for format {dims}")
    M = _koszul_from_array(T.array(), dims, I)
    return KoszulMatrix(
        M,
        tuple(wedge_basis(n, i + 1) for n, i in zip(dims, I.I)),
        tuple(wedge_basis(n, i) for n, i in zip(dims, I.I)),
        I,
    )


def koszul_of_term(fmt: FormatSpec, vectors, I) -> np.ndarray:
    """``K_I`` of the rank-one tensor ``v_1 (x) ... (x) v_d`` as a Kronecker product."""
    I = _as_index(I)
    out = np.ones((1, 1), dtype=np.complex128)
    for v, n, i in zip(vectors, fmt.dims, I.I):
        out = np.kron(out, np.tensordot(np.asarray(v), koszul_factor(n, i), axes=(0, 0)))
    return out


def koszul_kernel(T: DenseTensor, I, rel_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    return null_space(build_koszul(T, I).matrix, rel_tol)


def _orientation_key(I: tuple[int, ...]):
    # prefer more dual factors, then lower total degree, then duals on later (larger) factors
    neg = sorted((j for j, i in enumerate(I) if i == -1), reverse=True)
    return (-len(neg), sum(abs(i) for i in I), tuple(-j for j in neg))


def koszul_table(fmt) -> list[dict]:
    """Non-redundant flattenings of an ordinary format, one per transpose pair.

    Each factor carries a degree in ``[-1, (n-1)//2]`` (higher degrees are
    isomorphic to lower ones of the dual), at least one factor is dualized and
    at least one is left as ``V^0``.  Rows are sorted by multiplicative factor.
    """
    dims = _dims_of(fmt)
    seen = set()
    rows = []
    for I in product(*[range(-1, (n - 1) // 2 + 1) for n in dims]):
        if I in seen or -1 not in I or 0 not in I:
            continue
        J = tuple(-i - 1 for i in I)
        seen.add(I)
        seen.add(J)
        rep = min([I, J], key=_orientation_key) if J in _box(dims) else I
        src, tgt = source_target_dims(dims, rep)
        m = mult_factor(dims, rep)
        rows.append({
            "index": rep,
            "rows": tgt,
            "cols": src,
            "mult_factor": m,
            "detection_limit": detection_limit(dims, rep),
            "exact_ratio": min(src, tgt) / m,
        })
    rows.sort(key=lambda r: (r["mult_factor"], r["rows"] * r["cols"], _orientation_key(r["index"])))
    return rows


def _box(dims):
    return set(product(*[range(-1, (n - 1) // 2 + 1) for n in dims]))


def format_koszul_table(rows: list[dict]) -> str:
    header = ("map", "size", "mult-factor", "max tensor rank detected")
    body = []
    for r in rows:
        note = "" if r["exact_ratio"].is_integer() else f" (ratio {r['exact_ratio']:.2f})"
        body.append((
            "K_(" + ",".join(str(i) for i in r["index"]) + ")",
            f"{r['rows']}x{r['cols']}",
            str(r["mult_factor"]),
            f"{r['detection_limit']}{note}",
        ))
    widths = [max(len(h), *(len(b[k]) for b in body)) if body else len(h) for k, h in enumerate(header)]
    fmt_row = lambda cells: " | ".join(c.ljust(w) for c, w in zip(cells, widths))
    lines = [fmt_row(header), "-+-".join("-" * w for w in widths)]
    lines += [fmt_row(b) for b in body]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# constructive decompositions


def _check_format(T: DenseTensor, dims: tuple[int, ...]) -> None:
    if not T.format.is_ordinary or T.format.dims != dims:
        raise UnsupportedFormatError(f"expected format {dims}, got {T.format}")


def _projective_key(y: np.ndarray) -> np.ndarray:
    y = y / np.linalg.norm(y)
    k = int(np.argmax(np.abs(y)))
    return y * (abs(y[k]) / y[k])


def _dedup_projective(points, tol: float = 1e-6) -> list[np.ndarray]:
    out = []
    for p in points:
        q = _projective_key(p)
        if all(np.linalg.norm(q - o) > tol for o in out):
            out.append(q)
    return out


def _polish(fmt: FormatSpec, T: DenseTensor, terms, patches: PatchSet) -> Decomposition:
    dec = Decomposition(fmt, tuple(terms), patches)
    system = SquareSystem(fmt, dec.rank, T, patches)
    if system.is_square:
        x, ok = newton_refine(system.residual_jacobian, system.pack(dec), 1e-14, 4)
        if np.all(np.isfinite(x)):
            polished = system.unpack(x)
            old = np.linalg.norm(evaluate(dec).coeffs - T.coeffs)
            new = np.linalg.norm(evaluate(polished).coeffs - T.coeffs)
            if new <= old:
                dec = polished
    return dec


def _finish(fmt, T, factors, patches, seed, residual_tol) -> Decomposition:
    if patches is None:
        patches = PatchSet.random(fmt, 0 if seed is None else seed)
    terms = [normalize_term(fmt, patches, 1.0, vecs) for vecs in factors]
    dec = _polish(fmt, T, terms, patches)
    res = np.linalg.norm(evaluate(dec).coeffs - T.coeffs)
    if res > residual_tol * T.norm():
        raise DegenerateInputError(f"recovered terms leave relative residual {res / T.norm():.3g}")
    return canonical_form(dec)


def _minors_3x3(Phi: np.ndarray):
    """Homogeneous 2x2 minors of ``M(c) = [Phi_1 c, Phi_2 c, Phi_3 c]`` and their gradients."""
    pairs = list(combinations(range(3), 2))

    def minors(c):
        M = np.einsum("krm,m->rk", Phi, c)
        dM = np.transpose(Phi, (1, 0, 2))  # dM[r, k, :] = Phi[k, r, :]
        vals, grads = [], []
        for r1, r2 in pairs:
            for k1, k2 in pairs:
                vals.append(M[r1, k1] * M[r2, k2] - M[r1, k2] * M[r2, k1])
                grads.append(
                    dM[r1, k1] * M[r2, k2] + M[r1, k1] * dM[r2, k2]
                    - dM[r1, k2] * M[r2, k1] - M[r1, k2] * dM[r2, k1]
                )
        return np.array(vals), np.array(grads), M

    return minors


def _rank_one_points(Phi, rng, settings, minor_tol):
    minors = _minors_3x3(Phi)
    C = rng.standard_normal((4, 9)) + 1j * rng.standard_normal((4, 9))

    def system(c):
        v, g, _ = minors(c)
        return C @ v, C @ g

    results = solve_projective(system, [2, 2, 2, 2], rng, settings)
    good = []
    for res in results:
        if not res.success:
            continue
        c = res.endpoint / np.linalg.norm(res.endpoint)
        v, _, M = minors(c)
        if np.max(np.abs(v)) <= minor_tol * max(np.linalg.norm(M) ** 2, 1e-300):
            good.append(c)
    return _dedup_projective(good)


def decompose_345(T: DenseTensor, patches: PatchSet | None = None, seed=None,
                  rel_tol: float = DEFAULT_RANK_TOL, minor_tol: float = 1e-8,
                  residual_tol: float = 1e-8, retries: int = 3,
                  settings: TrackerSettings | None = None) -> Decomposition:
    """Unique rank-6 decomposition of a general (3,4,5) tensor.

    The kernel of ``K_(1,0,-1)(T)`` is a 3-dimensional space of maps C -> A.
    The six points ``c`` where those maps send ``c`` into a common line are
    found with the path tracker; the line gives ``a``, and a linear solve
    gives the ``b`` factors.
    """
    _check_format(T, (3, 4, 5))
    fmt = T.format
    K = build_koszul(T, (1, 0, -1)).matrix
    ker = null_space(K, rel_tol)
    if ker.shape[1] != 3:
        raise GenericityError(
            f"not generic of rank 6: ker K_(1,0,-1) has dimension {ker.shape[1]}, expected 3"
        )
    Phi = np.stack([ker[:, k].reshape(3, 5) for k in range(3)])  # Phi[k] : C -> A
    rng = np.random.default_rng(seed)
    points = []
    for _ in range(retries + 1):
        points = _rank_one_points(Phi, rng, settings, minor_tol)
        if len(points) == 6:
            break
    if len(points) != 6:
        raise DegenerateInputError(
            f"degenerate input: found {len(points)} base points of ker K_(1,0,-1), expected 6"
        )
    A_vecs = []
    for c in points:
        M = np.einsum("krm,m->rk", Phi, c)
        U, s, _ = np.linalg.svd(M)
        if s[1] > 1e-6 * s[0]:
            raise DegenerateInputError(f"base point with non rank-one M(c): sigma2/sigma1={s[1] / s[0]:.3g}")
        A_vecs.append(U[:, 0])
    # T[a, b, c] = sum_i a_i[a] b_i[b] c_i[c]; solve for the b_i
    G = np.stack([np.outer(a, c).reshape(-1) for a, c in zip(A_vecs, points)], axis=1)
    rhs = np.transpose(T.array(), (0, 2, 1)).reshape(15, 4)
    Bt, *_ = np.linalg.lstsq(G, rhs, rcond=None)
    factors = [(A_vecs[i], Bt[i], points[i]) for i in range(6)]
    return _finish(fmt, T, factors, patches, seed, residual_tol)


def _conic(Psi: np.ndarray):
    """``det [Psi_1 d, Psi_2 d]`` as a quadratic form in ``d`` with its gradient."""

    def f(d):
        u, w = Psi[0] @ d, Psi[1] @ d
        val = u[0] * w[1] - u[1] * w[0]
        grad = Psi[0][0] * w[1] + u[0] * Psi[1][1] - Psi[0][1] * w[0] - u[1] * Psi[1][0]
        return val, grad

    return f


def _kernel_pair(T: DenseTensor, I, rel_tol, shape) -> np.ndarray:
    ker = null_space(build_koszul(T, I).matrix, rel_tol)
    if ker.shape[1] != 2:
        raise GenericityError(
            f"not generic of rank 4: ker K_{FlatteningIndex(I)} has dimension {ker.shape[1]}, expected 2"
        )
    return np.stack([ker[:, k].reshape(shape) for k in range(2)])


def _null_vector_2(R: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(R)
    return vh[-1].conj()


def decompose_2223(T: DenseTensor, patches: PatchSet | None = None, seed=None,
                   rel_tol: float = DEFAULT_RANK_TOL, residual_tol: float = 1e-8,
                   retries: int = 3, settings: TrackerSettings | None = None,
                   return_points: bool = False):
    """Unique rank-4 decomposition of a general (2,2,2,3) tensor.

    Each of the 2-flattenings ``K_(0,0,-1,-1)`` and ``K_(0,-1,0,-1)`` has a
    pencil of kernel forms; the degeneracy loci are conics in P(D) meeting in
    the four points ``d_i``.  Null vectors at ``d_i`` give ``c_i`` and ``b_i``;
    the ``a_i`` follow by least squares.
    """
    _check_format(T, (2, 2, 2, 3))
    fmt = T.format
    PsiC = _kernel_pair(T, (0, 0, -1, -1), rel_tol, (2, 3))  # forms on C x D
    PsiB = _kernel_pair(T, (0, -1, 0, -1), rel_tol, (2, 3))  # forms on B x D
    qc, qb = _conic(PsiC), _conic(PsiB)

    def system(d):
        v1, g1 = qc(d)
        v2, g2 = qb(d)
        return np.array([v1, v2]), np.array([g1, g2])

    rng = np.random.default_rng(seed)
    points = []
    for _ in range(retries + 1):
        results = solve_projective(system, [2, 2], rng, settings)
        points = _dedup_projective([r.endpoint for r in results if r.success])
        if len(points) == 4:
            break
    if len(points) != 4:
        raise DegenerateInputError(f"degenerate input: conics meet in {len(points)} simple points, expected 4")
    factors_bcd = []
    for d in points:
        c = _null_vector_2(np.stack([PsiC[0] @ d, PsiC[1] @ d]))
        b = _null_vector_2(np.stack([PsiB[0] @ d, PsiB[1] @ d]))
        factors_bcd.append((b, c, d))
    G = np.stack([np.einsum("i,j,k->ijk", b, c, d).reshape(-1) for b, c, d in factors_bcd], axis=1)
    rhs = T.array().reshape(2, 12).T
    At, *_ = np.linalg.lstsq(G, rhs, rcond=None)
    factors = [(At[i],) + factors_bcd[i] for i in range(4)]
    dec = _finish(fmt, T, factors, patches, seed, residual_tol)
    return (dec, points) if return_points else dec


def decompose_345_anyrank(T: DenseTensor, r: int, patches: PatchSet | None = None, seed=None,
                          retries: int = 3, match_tol: float = 1e-6, **kwargs) -> Decomposition:
    """Decompose a general (3,4,5) tensor of known rank ``r <= 6`` by padding it to rank 6."""
    _check_format(T, (3, 4, 5))
    if not 1 <= r <= 6:
        raise ValueError("rank must lie between 1 and 6")
    if r == 6:
        return decompose_345(T, patches=patches, seed=seed, **kwargs)
    fmt = T.format
    if patches is None:
        patches = PatchSet.random(fmt, 0 if seed is None else seed)
    ss = np.random.SeedSequence(seed)
    last_error = None
    for child in ss.spawn(retries + 1):
        pad = random_decomposition(fmt, 6 - r, child, patches)
        padded = DenseTensor(fmt, T.coeffs + evaluate(pad).coeffs)
        try:
            full = decompose_345(padded, patches=patches, seed=child.generate_state(1)[0], **kwargs)
        except (GenericityError, DegenerateInputError) as exc:
            last_error = exc
            continue
        remaining = list(full.terms)
        ok = True
        for p in pad.terms:
            dists = [term_distance(p, t) for t in remaining]
            order = np.argsort(dists)
            if dists[order[0]] > match_tol or (len(order) > 1 and dists[order[1]] <= match_tol):
                ok = False
                break
            remaining.pop(int(order[0]))
        if not ok:
            last_error = DegenerateInputError("padding terms could not be matched unambiguously")
            continue
        return canonical_form(Decomposition(fmt, tuple(remaining), patches))
    raise last_error


def flattening_singular_values(T: DenseTensor, I) -> np.ndarray:
    return singular_values(build_koszul(T, I).matrix)


def flattening_rank(T: DenseTensor, I, rel_tol: float = DEFAULT_RANK_TOL) -> int:
    return numerical_rank(build_koszul(T, I).matrix, rel_tol)
