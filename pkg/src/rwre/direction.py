"""Exact rational linear algebra for choosing an integer drift direction.

Given a finite step set ``A`` and a direction ``v`` with ``v.x >= 0`` on ``A``,
:func:`rationalize_direction` returns an integer vector with the same sign
pattern (positive / zero) on ``A``.  Everything is computed with
``fractions.Fraction``; floats only enter through an explicitly classified
real input, and then only as the exact rational value of the float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DirectionError

RationalVector = tuple  # tuple[Fraction, ...]


def to_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return Fraction(int(value[0]), int(value[1]))
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(value)
    return Fraction(int(value))


def rational_vector(values: Iterable) -> RationalVector:
    return tuple(to_fraction(v) for v in values)


def dot(a: Sequence, b: Sequence):
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def det(rows: Sequence[Sequence]) -> Fraction:
    """Exact determinant by fraction Gaussian elimination."""
    m = [[to_fraction(v) for v in row] for row in rows]
    n = len(m)
    if any(len(row) != n for row in m):
        raise DirectionError("determinant of a non-square matrix")
    sign = 1
    result = Fraction(1)
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != col:
            m[col], m[pivot] = m[pivot], m[col]
            sign = -sign
        p = m[col][col]
        result *= p
        for r in range(col + 1, n):
            f = m[r][col] / p
            if f:
                row_r, row_c = m[r], m[col]
                for c in range(col, n):
                    row_r[c] -= f * row_c[c]
    return result * sign


def _row_reduce(vectors: Sequence[Sequence]) -> list[list[Fraction]]:
    """Echelon basis of the span of ``vectors`` (rows)."""
    basis: list[list[Fraction]] = []
    pivots: list[int] = []
    for v in vectors:
        row = [to_fraction(x) for x in v]
        for b, p in zip(basis, pivots):
            if row[p]:
                f = row[p] / b[p]
                row = [x - f * y for x, y in zip(row, b)]
        lead = next((i for i, x in enumerate(row) if x != 0), None)
        if lead is not None:
            basis.append(row)
            pivots.append(lead)
    return basis


def exact_rank(vectors: Sequence[Sequence]) -> int:
    return len(_row_reduce(vectors))


def independent_subset(vectors: Sequence[Sequence]) -> list[tuple]:
    """Greedy maximal linearly independent subset, in input order."""
    chosen: list[tuple] = []
    for v in vectors:
        if exact_rank(chosen + [tuple(v)]) > len(chosen):
            chosen.append(tuple(v))
    return chosen


def orthogonal_complement(v: Sequence) -> list[RationalVector]:
    """Rational basis of ``{x : x.v = 0}``."""
    v = rational_vector(v)
    d = len(v)
    k = next((i for i, x in enumerate(v) if x != 0), None)
    if k is None:
        return [tuple(Fraction(int(i == j)) for j in range(d)) for i in range(d)]
    basis = []
    for i in range(d):
        if i == k:
            continue
        e = [Fraction(0)] * d
        e[i] = Fraction(1)
        e[k] = -v[i] / v[k]
        basis.append(tuple(e))
    return basis


def vector_product(*h: Sequence) -> RationalVector:
    """Generalized cross product ``F(h_1, ..., h_{d-1})``.

    The result ``z`` satisfies ``det[h_1, ..., h_{d-1}, x] = x.z`` for every
    ``x``; coordinate ``i`` (1-based) is ``(-1)**(i+d)`` times the minor of the
    ``d x (d-1)`` column matrix with row ``i`` removed.  Integer inputs give an
    integer-valued (denominator 1) result.
    """
    d = len(h) + 1
    cols = [rational_vector(v) for v in h]
    if any(len(c) != d for c in cols):
        raise DirectionError(f"vector_product needs {d - 1} vectors of dimension {d}")
    z = []
    for i in range(d):
        minor = [[cols[j][r] for j in range(d - 1)] for r in range(d) if r != i]
        sign = 1 if (i + 1 + d) % 2 == 0 else -1
        z.append(sign * det(minor) if d > 1 else Fraction(1))
    return tuple(z)


@dataclass(frozen=True)
class DirectionResult:
    u_hat: tuple[int, ...]
    certificate: tuple[str, ...]  # "positive" or "zero", one per point of A
    resolution: int  # grid resolution m at which the construction stopped

    def to_dict(self) -> dict:
        return {"u_hat": list(self.u_hat), "certificate": list(self.certificate), "resolution": self.resolution}


def _norm2(v: Sequence) -> Fraction:
    return sum((Fraction(x) * x for x in v), Fraction(0))


def _norm_upper(x: Sequence[int]) -> Fraction:
    """Rational upper bound on the Euclidean norm of an integer vector."""
    s = sum(int(c) * int(c) for c in x)
    r = math.isqrt(s)
    return Fraction(r if r * r == s else r + 1)


def _unit_scale(z: Sequence[Fraction]) -> RationalVector:
    """``z`` divided by a power of two so its largest entry has magnitude in [1, 2).

    Any rational multiple of F(...) serves equally well; fixing the scale keeps
    the grid resolution needed for rounding independent of the input sizes.
    """
    mx = max(abs(Fraction(c)) for c in z)
    if mx == 0:
        return tuple(z)
    k = mx.numerator.bit_length() - mx.denominator.bit_length()
    if Fraction(2) ** k > mx:
        k -= 1
    f = Fraction(2) ** k
    return tuple(Fraction(c) / f for c in z)


def _round_to_grid(v: Sequence[Fraction], m: int) -> RationalVector:
    return tuple(Fraction(round(x * m), m) for x in v)


def _offsets(d: int):
    # lexicographic order over {-1, 0, 1}^d with the zero offset first
    yield (0,) * d
    for code in range(3**d):
        off = []
        c = code
        for _ in range(d):
            off.append(c % 3 - 1)
            c //= 3
        off = tuple(reversed(off))
        if any(off):
            yield off


def _complete_basis(vs: list[tuple], target: Sequence[Fraction]) -> list[RationalVector]:
    """Vectors from ``target``'s orthogonal complement extending ``vs`` to rank d-1."""
    extra: list[RationalVector] = []
    for e in orthogonal_complement(target):
        if len(vs) + len(extra) == len(target) - 1:
            break
        if exact_rank(list(vs) + extra + [e]) > len(vs) + len(extra):
            extra.append(e)
    return extra


def _classify(A, v_hat, zeros, precision):
    d = len(v_hat)
    if zeros is None:
        if any(isinstance(c, float) for c in v_hat):
            raise DirectionError("float v_hat needs an explicit zero classification and precision")
        v = rational_vector(v_hat)
        dots = [dot(v, x) for x in A]
        if any(s < 0 for s in dots):
            bad = [list(x) for x, s in zip(A, dots) if s < 0]
            raise DirectionError(f"precondition violated: v_hat.x < 0 for {bad}")
        return v, [s > 0 for s in dots]
    if precision is None or precision < 0:
        raise DirectionError("real v_hat requires a nonnegative precision bound")
    v = tuple(Fraction(float(c)) for c in v_hat)
    prec = Fraction(float(precision))
    zero_set = set(int(i) for i in zeros)
    positive = []
    for i, x in enumerate(A):
        s = dot(v, x)
        if i in zero_set:
            if abs(s) > prec:
                raise DirectionError(f"point {list(x)} declared zero but |v_hat.x| = {float(abs(s))} > precision")
            positive.append(False)
        else:
            if s < -prec:
                raise DirectionError(f"precondition violated: v_hat.x < 0 for {list(x)}")
            if s <= prec:
                raise DirectionError(
                    f"ambiguous zero classification: point {list(x)} declared positive but |v_hat.x| <= precision"
                )
            positive.append(True)
    if len(v) != d:
        raise DirectionError("v_hat dimension mismatch")
    return v, positive


def rationalize_direction(
    A: Sequence[Sequence[int]],
    v_hat: Sequence,
    zeros: Iterable[int] | None = None,
    precision: float | None = None,
    max_resolution: int = 1 << 256,
) -> DirectionResult:
    """Integer vector with the same positive/zero pattern as ``v_hat`` on ``A``.

    Parameters
    ----------
    A : sequence of integer vectors
    v_hat : sequence
        Rational entries (ints, ``Fraction``, ``"p/q"`` strings or ``[p, q]``
        pairs), or floats.  Floats require ``zeros`` and ``precision``.
    zeros : iterable of int, optional
        Indices into ``A`` whose dot product with ``v_hat`` is declared zero.
    precision : float, optional
        Bound on float error in ``v_hat.x``; declared-positive points must
        clear it.

    Notes
    -----
    The construction: ``M`` is the largest norm in ``A`` and ``delta`` the
    smallest positive ``v_hat.x``.  A maximal independent set ``v_1..v_n`` is
    taken from the zero-class points, completed to a basis of the orthogonal
    complement of ``v_hat``, the completion vectors are replaced by grid points
    at resolution ``1/m``, ``zeta = F(...)`` is formed, and the best multiple
    of ``zeta`` is rounded to the grid.  ``m`` doubles until the result ``w``
    is within ``delta / (2M)`` of ``v_hat``; ``w`` is then scaled to integers.
    """
    A = [tuple(int(c) for c in x) for x in A]
    if not A:
        raise DirectionError("A must be nonempty")
    d = len(A[0])
    if any(len(x) != d for x in A) or len(v_hat) != d:
        raise DirectionError("dimension mismatch between A and v_hat")
    v, positive = _classify(A, v_hat, None if zeros is None else list(zeros), precision)
    if all(c == 0 for c in v):
        raise DirectionError("v_hat must be nonzero")

    M = max(_norm_upper(x) for x in A)
    pos_dots = [dot(v, x) for x, p in zip(A, positive) if p]
    if pos_dots and M > 0:
        eps = min(pos_dots) / (2 * M)
    else:
        eps = Fraction(1)
    eps2 = eps * eps

    vs = independent_subset([x for x, p in zip(A, positive) if not p and any(x)])
    n = len(vs)
    if n >= d:
        raise DirectionError("zero-class points span the whole space; no nonzero direction exists")
    xis = _complete_basis(vs, v) if 0 < n < d - 1 else []

    m = 1
    while m <= max_resolution:
        if n == 0:
            w = _round_to_grid(v, m)
        else:
            etas = []
            if xis:
                grid = 2 * m * d
                for xi in xis:
                    base = [round(c * grid) for c in xi]
                    chosen = None
                    for off in _offsets(d):
                        cand = tuple(Fraction(b + o, grid) for b, o in zip(base, off))
                        if _norm2([c - x for c, x in zip(cand, xi)]) > Fraction(1, m * m):
                            continue
                        if exact_rank(list(vs) + etas + [cand]) == n + len(etas) + 1:
                            chosen = cand
                            break
                    if chosen is None:
                        break
                    etas.append(chosen)
                if len(etas) != len(xis):
                    m *= 2
                    continue
            zeta = _unit_scale(vector_product(*(list(vs) + etas)))
            s = dot(zeta, v) / _norm2(zeta)
            q = Fraction(round(s * m), m)
            w = tuple(q * c for c in zeta)
        if any(w) and _norm2([a - b for a, b in zip(w, v)]) <= eps2:
            break
        m *= 2
    else:
        raise DirectionError("no admissible rational direction found; precision too coarse for the declared zeros")

    scale = math.lcm(*(c.denominator for c in w))
    u = [int(c * scale) for c in w]
    g = math.gcd(*u)
    u = tuple(c // g for c in u)

    certificate = []
    for x, p in zip(A, positive):
        s = sum(a * b for a, b in zip(u, x))
        got = "positive" if s > 0 else "zero" if s == 0 else "negative"
        want = "positive" if p else "zero"
        if got != want:
            raise DirectionError(f"internal: sign pattern broken at {list(x)} ({got} vs {want})")
        certificate.append(got)
    return DirectionResult(u_hat=u, certificate=tuple(certificate), resolution=m)


def direction_from_json(doc: dict) -> DirectionResult:
    """Run :func:`rationalize_direction` on the CLI JSON form.

    ``{"A": [[ints]], "v_hat": [[num, den], ...]}`` for rational input, or
    ``{"A": ..., "v_hat": {"floats": [...], "zeros": [indices], "precision": p}}``.
    """
    A = doc["A"]
    vh = doc["v_hat"]
    if isinstance(vh, dict):
        return rationalize_direction(A, [float(c) for c in vh["floats"]], zeros=vh.get("zeros", []),
                                     precision=vh["precision"])
    return rationalize_direction(A, [to_fraction(c) for c in vh])


def certificate_holds(A: Sequence[Sequence[int]], v_hat: Sequence, u_hat: Sequence[int]) -> bool:
    """Exact check that ``u_hat`` has the sign pattern of a rational ``v_hat`` on ``A``."""
    v = rational_vector(v_hat)
    for x in A:
        a, b = dot(u_hat, x), dot(v, x)
        if (a > 0) != (b > 0) or (a == 0) != (b == 0) or a < 0:
            return False
    return True


def _integer_multiple(v: Sequence[Fraction]) -> tuple:
    den = math.lcm(*(Fraction(c).denominator for c in v))
    return tuple(int(Fraction(c) * den) for c in v)


def random_instance(gen, d_max: int = 5, size_max: int = 20) -> tuple[list[tuple], RationalVector]:
    """Random ``(A, v_hat)`` with ``v_hat.x >= 0`` on ``A`` and some points forced onto ``v_hat``'s null space.

    ``gen`` is a :class:`numpy.random.Generator`.
    """
    d = int(gen.integers(1, d_max + 1))
    while True:
        v = [Fraction(int(gen.integers(-9, 10)), int(gen.integers(1, 10))) for _ in range(d)]
        if any(v):
            break
    size = int(gen.integers(1, size_max + 1))
    zeros_wanted = int(gen.integers(0, size + 1)) if d > 1 else 0
    A: list[tuple] = []
    basis = orthogonal_complement(v)
    for _ in range(zeros_wanted):
        comb = [int(c) for c in gen.integers(-3, 4, size=len(basis))]
        w = [sum(c * b[i] for c, b in zip(comb, basis)) for i in range(d)]
        A.append(_integer_multiple(w))
    while len(A) < size:
        x = tuple(int(c) for c in gen.integers(-5, 6, size=d))
        if dot(v, x) >= 0:
            A.append(x)
    return A, v
