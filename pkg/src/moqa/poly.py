"""Sparse multilinear pseudo-Boolean polynomials over binary variables.

A monomial is stored as an integer bit-set (bit ``i`` set means ``x_i`` is a
factor), so the product of two monomials is a bitwise ``or`` and the
idempotence ``x_i * x_i = x_i`` comes for free. The constant term is the
empty monomial ``0``.

Usage:

    .. code-block:: python

        from moqa.poly import make_poly
        P = make_poly(3, [([0, 1], 2.0), ([], 3.0)])
        print(P.evaluate([1, 1, 0]))  # 5.0
        print((P ** 2).degree())      # 2

"""

import logging
from collections import defaultdict
from math import comb
from typing import (
    Any,
    Dict,
    Iterable,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np

from .config import Settings, resolve
from .exceptions import (
    DimensionMismatch,
    EnumerationCapExceeded,
    InvalidParameter,
    SymbolicBudgetExceeded,
    VariableIndexOutOfRange,
)
from .utils import Assignment, Bits, indices_from_mask, mask_from_indices, popcount

log = logging.getLogger(__name__)

MAX_VARIABLES = 64

RawTerms = Iterable[Tuple[Sequence[int], float]]


def _check_n(n: int) -> None:
    if n < 0:
        raise VariableIndexOutOfRange("n must be >= 0, got %d" % n)
    if n > MAX_VARIABLES:
        raise VariableIndexOutOfRange("n=%d exceeds the %d variable limit" % (n, MAX_VARIABLES))


def _canonical(terms: Mapping[int, float], zero_threshold: float) -> Dict[int, float]:
    return {m: float(c) for m, c in terms.items() if abs(c) > zero_threshold}


def _parity(idx: np.ndarray, mask: int) -> np.ndarray:
    """popcount(idx & mask) mod 2, elementwise"""
    x = idx & np.uint64(mask)
    for shift in (32, 16, 8, 4, 2, 1):
        x = x ^ (x >> np.uint64(shift))
    return x & np.uint64(1)


def _subsets(mask: int) -> Iterator[int]:
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


class _SparseTerms(Mapping[int, float]):
    """Read-only monomial -> coefficient mapping shared by both bases."""

    __slots__ = ("n", "_terms")

    def __init__(
        self,
        n: int,
        terms: Optional[Mapping[int, float]] = None,
        settings: Optional[Settings] = None,
    ) -> None:
        _check_n(n)
        self.n = n
        limit = 1 << n
        raw = terms or {}
        for m in raw:
            if m < 0 or m >= limit:
                raise VariableIndexOutOfRange("monomial %s uses a variable >= n=%d" % (bin(m), n))
        self._terms = _canonical(raw, resolve(settings).zero_threshold)

    def __getitem__(self, mask: int) -> float:
        return self._terms[mask]

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self._terms))

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other: object) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms  # type: ignore[attr-defined]

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.n, frozenset(self._terms.items())))

    @property
    def constant(self) -> float:
        return self._terms.get(0, 0.0)

    def degree(self) -> int:
        """Largest monomial cardinality (0 for constants and the zero polynomial)"""
        return max((popcount(m) for m in self._terms), default=0)

    def term_count(self) -> int:
        return len(self._terms)

    def decompose(self) -> List[Tuple[List[int], float]]:
        """Terms as ``(var-index-list, coefficient)`` in ascending bit-set order"""
        return [(indices_from_mask(m), self._terms[m]) for m in sorted(self._terms)]

    def to_json(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "terms": [{"vars": v, "coef": c} for v, c in self.decompose()],
        }

    def _require_enumerable(self, settings: Optional[Settings]) -> None:
        cap = resolve(settings).enumeration_cap
        if self.n > cap:
            raise EnumerationCapExceeded("n=%d exceeds the enumeration cap %d" % (self.n, cap))


class Polynomial(_SparseTerms):
    """Multilinear polynomial over ``b in {0,1}^n`` in canonical form.

    Instances are immutable; arithmetic returns new polynomials. Coefficients
    whose magnitude does not exceed ``Settings.zero_threshold`` are dropped.

    :param int n: number of binary variables (at most 64)
    :param dict terms: bit-set monomial -> coefficient
    """

    def __repr__(self) -> str:
        if not self._terms:
            return "Polynomial(n=%d, 0)" % self.n
        parts = []
        for vars_, coef in self.decompose():
            name = "*".join("x%d" % i for i in vars_) or "1"
            parts.append("%r*%s" % (coef, name))
        return "Polynomial(n=%d, %s)" % (self.n, " + ".join(parts))

    def evaluate(self, b: Bits) -> float:
        """Sum over terms of coefficient times the product of the selected bits"""
        if len(b) != self.n:
            raise DimensionMismatch("assignment has length %d, expected %d" % (len(b), self.n))
        point = Assignment.to_int(b)
        return float(sum(c for m, c in self._terms.items() if point & m == m))

    def evaluate_all(self, settings: Optional[Settings] = None) -> np.ndarray:
        """Values on all 2**n assignments, indexed by assignment integer"""
        self._require_enumerable(settings)
        idx = Assignment.indices(self.n)
        out = np.full(idx.shape, self.constant, dtype=np.float64)
        for m, c in self._terms.items():
            if m == 0:
                continue
            hit = (idx & np.uint64(m)) == np.uint64(m)
            out[hit] += c
        return out

    def __add__(self, other: Union["Polynomial", float, int]) -> "Polynomial":
        if isinstance(other, (int, float)):
            other = constant(self.n, float(other))
        return add(self, other)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return scale(self, -1.0)

    def __sub__(self, other: Union["Polynomial", float, int]) -> "Polynomial":
        if isinstance(other, (int, float)):
            other = constant(self.n, float(other))
        return add(self, scale(other, -1.0))

    def __rsub__(self, other: Union[float, int]) -> "Polynomial":
        return add(constant(self.n, float(other)), scale(self, -1.0))

    def __mul__(self, other: Union["Polynomial", float, int]) -> "Polynomial":
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return multiply(self, other)

    def __rmul__(self, other: Union[float, int]) -> "Polynomial":
        return scale(self, float(other))

    def __pow__(self, p: int) -> "Polynomial":
        return power(self, p)


class IsingPolynomial(_SparseTerms):
    """Polynomial in spin variables ``z_i = 1 - 2 b_i`` in ``{+1, -1}``.

    Keys are the Pauli-Z supports as bit-sets; ``z_i**2 = 1`` plays the role
    idempotence plays in the binary basis.
    """

    def __repr__(self) -> str:
        parts = []
        for vars_, coef in self.decompose():
            name = "*".join("z%d" % i for i in vars_) or "1"
            parts.append("%r*%s" % (coef, name))
        return "IsingPolynomial(n=%d, %s)" % (self.n, " + ".join(parts) or "0")

    def evaluate(self, z: Sequence[int]) -> float:
        if len(z) != self.n:
            raise DimensionMismatch("spin vector has length %d, expected %d" % (len(z), self.n))
        total = 0.0
        for m, c in self._terms.items():
            sign = 1
            for i in indices_from_mask(m):
                sign *= int(z[i])
            total += c * sign
        return total

    def evaluate_all(self, settings: Optional[Settings] = None) -> np.ndarray:
        """Values at ``z = 1 - 2b`` for all 2**n assignments ``b``"""
        self._require_enumerable(settings)
        idx = Assignment.indices(self.n)
        out = np.full(idx.shape, self.constant, dtype=np.float64)
        for m, c in self._terms.items():
            if m == 0:
                continue
            out += c * (1.0 - 2.0 * _parity(idx, m).astype(np.float64))
        return out

    def to_json(self) -> Dict[str, Any]:
        payload = super().to_json()
        payload["basis"] = "ising"
        return payload


def make_poly(
    n: int, raw_terms: RawTerms, settings: Optional[Settings] = None
) -> Polynomial:
    """Build a canonical polynomial from ``(var-index-list, coefficient)`` pairs.

    Repeated indices inside one term collapse (``x_i * x_i = x_i``) and
    repeated monomials are merged by adding their coefficients.

    :raises VariableIndexOutOfRange: for an index >= n or n > 64
    """
    _check_n(n)
    acc: Dict[int, float] = defaultdict(float)
    for vars_, coef in raw_terms:
        for i in vars_:
            if not 0 <= int(i) < n:
                raise VariableIndexOutOfRange("variable index %d not in [0, %d)" % (i, n))
        acc[mask_from_indices(vars_)] += float(coef)
    return Polynomial(n, acc, settings=settings)


def constant(n: int, value: float, settings: Optional[Settings] = None) -> Polynomial:
    return Polynomial(n, {0: value}, settings=settings)


def variable(n: int, i: int, settings: Optional[Settings] = None) -> Polynomial:
    return make_poly(n, [([i], 1.0)], settings=settings)


def zero(n: int) -> Polynomial:
    return Polynomial(n)


def evaluate(P: Polynomial, b: Bits) -> float:
    return P.evaluate(b)


def degree(P: _SparseTerms) -> int:
    return P.degree()


def term_count(P: _SparseTerms) -> int:
    return P.term_count()


def _same_n(P: _SparseTerms, Q: _SparseTerms) -> None:
    if P.n != Q.n:
        raise DimensionMismatch("variable counts differ: %d vs %d" % (P.n, Q.n))


def add(P: Polynomial, Q: Polynomial, settings: Optional[Settings] = None) -> Polynomial:
    """Pointwise sum"""
    _same_n(P, Q)
    acc: Dict[int, float] = dict(P.items())
    for m, c in Q.items():
        acc[m] = acc.get(m, 0.0) + c
    return Polynomial(P.n, acc, settings=settings)


def scale(P: Polynomial, s: float, settings: Optional[Settings] = None) -> Polynomial:
    """Scalar multiple"""
    return Polynomial(P.n, {m: s * c for m, c in P.items()}, settings=settings)


def multiply(P: Polynomial, Q: Polynomial, settings: Optional[Settings] = None) -> Polynomial:
    """Product with idempotent reduction (monomial product is the union of variable sets)"""
    _same_n(P, Q)
    if P is Q:
        return _square(P, settings)
    acc: Dict[int, float] = defaultdict(float)
    q_items = list(Q.items())
    for ma, ca in P.items():
        for mb, cb in q_items:
            acc[ma | mb] += ca * cb
    return Polynomial(P.n, acc, settings=settings)


def _square(P: Polynomial, settings: Optional[Settings] = None) -> Polynomial:
    items = list(P.items())
    acc: Dict[int, float] = defaultdict(float)
    for i, (ma, ca) in enumerate(items):
        acc[ma] += ca * ca
        for mb, cb in items[i + 1 :]:
            acc[ma | mb] += 2.0 * ca * cb
    return Polynomial(P.n, acc, settings=settings)


def projected_power_terms(P: Polynomial, p: int) -> int:
    """Upper bound on ``term_count(power(P, p))``.

    The smaller of ``T**p`` and the number of monomials of degree at most
    ``min(n, degree(P) * p)``.
    """
    T = P.term_count()
    if T == 0:
        return 0
    max_deg = min(P.n, P.degree() * p)
    monomials = sum(comb(P.n, j) for j in range(max_deg + 1))
    if T == 1:
        return 1
    # T**p can be astronomically large; stop multiplying once it passes the monomial count
    bound = 1
    for _ in range(p):
        bound *= T
        if bound >= monomials:
            return monomials
    return bound


def power(P: Polynomial, p: int, settings: Optional[Settings] = None) -> Polynomial:
    """``P`` multiplied with itself ``p`` times (square-and-multiply).

    :raises InvalidParameter: if p < 1
    :raises SymbolicBudgetExceeded: if the projected term count exceeds ``Settings.term_budget``
    """
    if int(p) != p or p < 1:
        raise InvalidParameter("power requires an integer p >= 1, got %r" % (p,))
    p = int(p)
    cfg = resolve(settings)
    projected = projected_power_terms(P, p)
    log.debug("power p=%d of %d terms: projected %d terms", p, P.term_count(), projected)
    if projected > cfg.term_budget:
        raise SymbolicBudgetExceeded(
            "power p=%d projects %d terms, budget is %d" % (p, projected, cfg.term_budget)
        )
    x = P
    y: Optional[Polynomial] = None
    while p > 1:
        if p % 2:
            y = multiply(x, y, cfg) if y is not None else x
        x = _square(x, cfg)
        p //= 2
    return multiply(x, y, cfg) if y is not None else x


def to_ising(P: Polynomial, settings: Optional[Settings] = None) -> IsingPolynomial:
    """Substitute ``b_i = (1 - z_i) / 2`` and expand.

    ``prod_{i in S} b_i = 2**-|S| * sum_{T subset S} (-1)**|T| z_T``
    """
    acc: Dict[int, float] = defaultdict(float)
    for m, c in P.items():
        weight = c / float(1 << popcount(m))
        for sub in _subsets(m):
            acc[sub] += -weight if popcount(sub) % 2 else weight
    return IsingPolynomial(P.n, acc, settings=settings)


def to_binary(I: IsingPolynomial, settings: Optional[Settings] = None) -> Polynomial:
    """Substitute ``z_i = 1 - 2 b_i`` and expand back into the binary basis"""
    acc: Dict[int, float] = defaultdict(float)
    for m, c in I.items():
        for sub in _subsets(m):
            acc[sub] += c * (-2.0) ** popcount(sub)
    return Polynomial(I.n, acc, settings=settings)


def from_values(
    n: int, values: Union[Sequence[float], np.ndarray], settings: Optional[Settings] = None
) -> Polynomial:
    """Unique multilinear normal form of a function given by its 2**n values.

    ``values[k]`` is the function value at the assignment with integer
    encoding ``k``. Uses the fast Moebius transform.
    """
    _check_n(n)
    arr = np.array(values, dtype=np.float64)
    if arr.shape != (1 << n,):
        raise DimensionMismatch("expected %d values, got %s" % (1 << n, arr.shape))
    for i in range(n):
        step = 1 << i
        view = arr.reshape(-1, 2, step)
        view[:, 1, :] -= view[:, 0, :]
    return Polynomial(n, {m: float(c) for m, c in enumerate(arr)}, settings=settings)


def from_json(payload: Dict[str, Any], settings: Optional[Settings] = None) -> Polynomial:
    """Inverse of :meth:`Polynomial.to_json`"""
    try:
        n = int(payload["n"])
        raw = [(t["vars"], t["coef"]) for t in payload["terms"]]
    except (KeyError, TypeError) as exc:
        raise ValueError("malformed polynomial JSON: %s" % exc) from exc
    return make_poly(n, raw, settings=settings)


def ising_from_json(payload: Dict[str, Any], settings: Optional[Settings] = None) -> IsingPolynomial:
    n = int(payload["n"])
    _check_n(n)
    acc: Dict[int, float] = defaultdict(float)
    for t in payload["terms"]:
        acc[mask_from_indices(t["vars"])] += float(t["coef"])
    return IsingPolynomial(n, acc, settings=settings)
