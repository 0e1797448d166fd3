"""Tensor formats and the closed-form counting formulas that go with them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations_with_replacement

from .errors import UnsupportedFormatError


@dataclass(frozen=True)
class FormatSpec:
    """A tensor format as an ordered tuple of ``(dim, sym_degree)`` groups.

    ``FormatSpec.ordinary(3, 4, 5)`` is C^3 (x) C^4 (x) C^5, ``FormatSpec(((3, 5),))``
    is Sym^5 C^3 and ``FormatSpec(((3, 3), (2, 1), (2, 1)))`` is
    Sym^3 C^3 (x) C^2 (x) C^2.
    """

    groups: tuple[tuple[int, int], ...]

    def __post_init__(self):
        groups = tuple((int(n), int(e)) for n, e in self.groups)
        if not groups:
            raise ValueError("a format needs at least one factor group")
        for n, e in groups:
            if n < 2:
                raise ValueError(f"every dimension must be >= 2, got {n}")
            if e < 1:
                raise ValueError(f"every symmetric degree must be >= 1, got {e}")
        object.__setattr__(self, "groups", groups)

    @classmethod
    def ordinary(cls, *dims: int) -> "FormatSpec":
        return cls(tuple((n, 1) for n in dims))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(n for n, _ in self.groups)

    @property
    def degrees(self) -> tuple[int, ...]:
        return tuple(e for _, e in self.groups)

    @property
    def is_ordinary(self) -> bool:
        return all(e == 1 for _, e in self.groups)

    @property
    def order(self) -> int:
        return sum(self.degrees)

    @property
    def block_sizes(self) -> tuple[int, ...]:
        return tuple(math.comb(n + e - 1, e) for n, e in self.groups)

    @property
    def ambient_dim(self) -> int:
        return math.prod(self.block_sizes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.block_sizes

    def __str__(self) -> str:
        return format_to_string(self)


def parse_format(text: str) -> FormatSpec:
    """Parse ``"3,4,5"``, ``"sym5:3"`` or ``"sym3:3,2,2"``.

    A ``symE:`` prefix applies to the single dimension that follows it.
    """
    groups = []
    for raw in text.replace(" ", "").split(","):
        if not raw:
            raise ValueError(f"malformed format string {text!r}")
        e = 1
        if raw.lower().startswith("sym"):
            head, sep, raw = raw[3:].partition(":")
            if not sep or not head.isdigit():
                raise ValueError(f"malformed symmetric group in {text!r}")
            e = int(head)
        if not raw.isdigit():
            raise ValueError(f"malformed format string {text!r}")
        groups.append((int(raw), e))
    return FormatSpec(tuple(groups))


def format_to_string(fmt: FormatSpec) -> str:
    return ",".join(str(n) if e == 1 else f"sym{e}:{n}" for n, e in fmt.groups)


def monomial_exponents(n: int, e: int) -> list[tuple[int, ...]]:
    """Exponent vectors of degree ``e`` in ``n`` variables, lexicographically descending.

    For ``n=3, e=3`` this is x^3, x^2y, x^2z, xy^2, xyz, xz^2, y^3, y^2z, yz^2, z^3.
    """
    out = []
    for combo in combinations_with_replacement(range(n), e):
        alpha = [0] * n
        for k in combo:
            alpha[k] += 1
        out.append(tuple(alpha))
    return out


def expected_generic_rank(fmt: FormatSpec) -> Fraction:
    """Ambient dimension divided by one plus the sum of ``n_j - 1`` over groups.

    Each rank-one term has ``1 + sum(n_j - 1)`` free parameters whatever the
    symmetric degrees are, so Sym^d C^n gives ``binom(n+d-1, d) / n``.
    """
    return Fraction(fmt.ambient_dim, 1 + sum(n - 1 for n in fmt.dims))


def is_perfect(fmt: FormatSpec) -> bool:
    return expected_generic_rank(fmt).denominator == 1


def generic_rank_if_perfect(fmt: FormatSpec) -> int | None:
    R = expected_generic_rank(fmt)
    return int(R) if R.denominator == 1 else None


def _require_ordinary(fmt: FormatSpec, what: str) -> tuple[int, ...]:
    if not fmt.is_ordinary:
        raise UnsupportedFormatError(f"{what} is only defined for ordinary formats, got {fmt}")
    return tuple(sorted(fmt.dims))


def _balance_threshold(dims: tuple[int, ...]) -> int:
    head = dims[:-1]
    return math.prod(head) - sum(n - 1 for n in head)


def classify_format(fmt: FormatSpec) -> dict:
    """Perfect/balanced flags and the regime of an ordinary format.

    Dimensions are sorted ascending before testing.  ``boundary`` is the
    equality case ``n_d == prod(n_i) - sum(n_i - 1)`` over the first ``d-1``.
    """
    dims = _require_ordinary(fmt, "balancedness")
    threshold = _balance_threshold(dims)
    if dims[-1] < threshold:
        regime = "balanced"
    elif dims[-1] == threshold:
        regime = "boundary"
    else:
        regime = "unbalanced"
    return {"perfect": is_perfect(fmt), "balanced": regime == "balanced", "regime": regime}


def unbalanced_count(fmt: FormatSpec) -> dict:
    """Closed-form generic rank and decomposition count outside the balanced regime.

    In the boundary case the count is ``binom(D, n_d)`` with
    ``D = (sum(n_i - 1))! / prod((n_i - 1)!)`` over the first ``d-1`` factors.
    """
    dims = _require_ordinary(fmt, "the unbalanced count")
    regime = classify_format(fmt)["regime"]
    if regime == "balanced":
        raise UnsupportedFormatError(
            f"format {fmt} is balanced; no closed formula, use monodromy counting"
        )
    head = dims[:-1]
    if regime == "boundary":
        D = math.factorial(sum(n - 1 for n in head)) // math.prod(math.factorial(n - 1) for n in head)
        r = dims[-1]
        return {"generic_rank": r, "num_decompositions": math.comb(D, r)}
    return {"generic_rank": min(dims[-1], math.prod(head)), "num_decompositions": "infinite"}


def de_lathauwer_bound(fmt: FormatSpec) -> int:
    """``sum(n_i for i < d) - d + 1`` with dimensions sorted ascending."""
    dims = _require_ordinary(fmt, "the De Lathauwer bound")
    return sum(dims[:-1]) - len(dims) + 1


def plane_curve_divisor(d: int) -> int:
    """``(d-2)(d-4)/3``, the expected divisor of the number of decompositions of Sym^d C^3."""
    if d < 5 or d % 3 == 0:
        raise ValueError(f"need d >= 5 with d = 1 or 2 mod 3, got {d}")
    return (d - 2) * (d - 4) // 3

