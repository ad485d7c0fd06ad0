"""Exact landscapes of diagonal objectives and the guarantees relating h_max to h_(p).

Every objective here is diagonal in the computational basis, so its spectrum
is just the list of its 2**n values. Assignments are indexed by their integer
encoding (bit i of the integer is b_i) and ties are broken by ascending
integer.
"""

import csv
import logging
import math
from dataclasses import asdict, dataclass
from typing import IO, Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import Settings, resolve
from .exceptions import EnumerationCapExceeded, InvalidParameter, UndefinedGapRatio
from .problem import MultiObjective, Normalization, build_hp, hp_values, objective_values
from .utils import Assignment, Tolerance, format_float

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Spectrum:
    """Sorted view of a landscape.

    :param values: all values indexed by assignment integer
    :param lambda1: minimum
    :param lambda2: smallest value above ``lambda1`` beyond tolerance, ``None`` if constant
    :param lambda_max: maximum
    :param ground_set: assignments within tolerance of ``lambda1``, ascending
    """

    n: Optional[int]
    values: np.ndarray
    lambda1: float
    lambda2: Optional[float]
    lambda_max: float
    ground_set: Tuple[int, ...]
    tol: float

    @property
    def degeneracy(self) -> int:
        return len(self.ground_set)

    @property
    def argmin(self) -> int:
        """Smallest assignment integer among the minimizers"""
        return self.ground_set[0]

    def is_constant(self) -> bool:
        return self.lambda2 is None

    def to_json(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda_max": self.lambda_max,
            "ground_set": list(self.ground_set),
        }


def spectrum_from_values(
    values: Union[Sequence[float], np.ndarray],
    n: Optional[int] = None,
    settings: Optional[Settings] = None,
) -> Spectrum:
    """Extract levels and the ground set from a value array"""
    tol = resolve(settings).degeneracy_tol
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidParameter("a spectrum needs a non-empty 1-d value array")
    lambda1 = float(arr.min())
    ground = Tolerance.close_to(arr, lambda1, tol)
    rest = arr[~ground]
    lambda2 = float(rest.min()) if rest.size else None
    return Spectrum(
        n=n,
        values=arr,
        lambda1=lambda1,
        lambda2=lambda2,
        lambda_max=float(arr.max()),
        ground_set=tuple(int(k) for k in np.flatnonzero(ground)),
        tol=tol,
    )


def _check_cap(n: int, settings: Optional[Settings]) -> None:
    cap = resolve(settings).enumeration_cap
    if n > cap:
        raise EnumerationCapExceeded("n=%d exceeds the enumeration cap %d" % (n, cap))


def enumerate_spectrum(
    eval_fn: Callable[[List[int]], float], n: int, settings: Optional[Settings] = None
) -> Spectrum:
    """Evaluate ``eval_fn`` on all 2**n assignments (bit lists) and build the spectrum

    :raises EnumerationCapExceeded: if n is above ``Settings.enumeration_cap``
    """
    _check_cap(n, settings)
    values = np.fromiter(
        (eval_fn(Assignment.from_int(k, n)) for k in range(1 << n)),
        dtype=np.float64,
        count=1 << n,
    )
    log.debug("enumerated %d assignments", values.size)
    return spectrum_from_values(values, n, settings)


def gap_ratio(s: Spectrum) -> float:
    """``(lambda2 - lambda1) / lambda1``

    :raises UndefinedGapRatio: for a constant landscape or ``lambda1 <= tol``
    """
    if s.lambda2 is None:
        raise UndefinedGapRatio("constant landscape has no gap")
    if s.lambda1 <= s.tol:
        raise UndefinedGapRatio(
            "ground energy %r is not positive; shift the objectives first" % s.lambda1
        )
    return (s.lambda2 - s.lambda1) / s.lambda1


def relative_gap(s: Spectrum) -> float:
    """``(lambda2 - lambda1) / (lambda_max - lambda1)``, invariant under ``a*v + c`` for a > 0"""
    if s.lambda2 is None:
        raise UndefinedGapRatio("constant landscape has no gap")
    return (s.lambda2 - s.lambda1) / (s.lambda_max - s.lambda1)


def threshold_p(M: int, r: float) -> float:
    """``log(M) / log(r + 1)``; every integer p above it recovers the ground space"""
    if M < 1:
        raise InvalidParameter("M must be >= 1, got %r" % M)
    if not r > 0:
        raise InvalidParameter("gap ratio must be > 0, got %r" % r)
    return math.log(M) / math.log1p(r)


def smallest_recovering_p(M: int, r: float) -> int:
    """Smallest integer strictly above ``threshold_p``"""
    return int(math.floor(threshold_p(M, r))) + 1


def p_for_accuracy(M: int, factor: float) -> int:
    """Smallest p with ``M**(-1/p) >= factor``.

    The two sandwich bounds then differ by at most the multiplicative
    ``factor``; ``p = ceil(log M / -log factor)``.
    """
    if M < 1:
        raise InvalidParameter("M must be >= 1, got %r" % M)
    if not 0 < factor < 1:
        raise InvalidParameter("factor must be in (0, 1), got %r" % factor)
    if M == 1:
        return 1
    p = max(1, math.ceil(math.log(M) / -math.log(factor)))
    while M ** (-1.0 / p) < factor:
        p += 1
    return p


def lp_roots(table: np.ndarray, p: int) -> np.ndarray:
    """``h_(p)**(1/p)`` per assignment, computed as ``max * ||u / max||_p`` so it cannot overflow"""
    top = table.max(axis=0)
    safe = np.where(top > 0, top, 1.0)
    return top * np.sum((table / safe) ** p, axis=0) ** (1.0 / p)


def sandwich_violations(table: np.ndarray, p: int, relative: bool = False) -> np.ndarray:
    """Per-assignment signed violation of ``M**(-1/p) root <= h_max <= root``"""
    if int(p) != p or p < 1:
        raise InvalidParameter("p must be an integer >= 1, got %r" % (p,))
    M = table.shape[0]
    h_max = table.max(axis=0)
    root = lp_roots(table, int(p))
    lower = M ** (-1.0 / p) * root - h_max
    upper = h_max - root
    worst = np.maximum(lower, upper)
    if relative:
        worst = worst / np.maximum(1.0, np.abs(h_max))
    return worst


def check_sandwich(
    mo: MultiObjective, p: int, relative: bool = False, settings: Optional[Settings] = None
) -> float:
    """Largest signed violation of the sandwich inequality over all assignments.

    Non-positive (up to rounding) whenever the objectives are nonnegative.
    """
    _check_cap(mo.n, settings)
    return float(sandwich_violations(objective_values(mo, settings), p, relative).max())


def recommended_p(mo: MultiObjective, settings: Optional[Settings] = None) -> int:
    """``ceil(p0) + 1``, the smallest level at which gap growth is guaranteed

    :raises UndefinedGapRatio: if ``h_max`` is constant or not positive
    """
    _check_cap(mo.n, settings)
    table = objective_values(mo, settings)
    s_max = spectrum_from_values(table.max(axis=0), mo.n, settings)
    return int(math.ceil(threshold_p(mo.M, gap_ratio(s_max)))) + 1


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of checking the recovery guarantee on one instance.

    ``recovery_guaranteed`` is ``p_used > p0``. Under it a unique minimizer
    must be recovered exactly and a degenerate one must contain the
    approximation's minimizers. ``ratio_growth_guaranteed`` additionally needs
    ``p_used - 1 >= p0``, the condition under which ``r_p >= r_max`` follows
    from the value bounds.
    """

    n: int
    M: int
    p_used: int
    p0: float
    r_max: float
    r_p: float
    r_tilde_p: Optional[float]
    relative_gap_max: float
    relative_gap_p: Optional[float]
    lambda1: float
    lambda2: float
    nu1: float
    nu2: Optional[float]
    ratio_bound: float
    ratio_bound_holds: bool
    ground_degeneracy: int
    ground_set_max: Tuple[int, ...]
    ground_set_p: Tuple[int, ...]
    same_ground_space: bool
    ground_subset: bool
    degeneracy_broken: bool
    ratio_grew: bool
    recovery_guaranteed: bool
    ratio_growth_guaranteed: bool
    sandwich_max_violation: float

    @property
    def unique_minimizer(self) -> bool:
        return self.ground_degeneracy == 1

    def violations(self, sandwich_tol: float = 1e-9) -> List[str]:
        """Guarantees that failed on this instance (empty when everything holds)"""
        out = []
        if self.sandwich_max_violation > sandwich_tol:
            out.append("sandwich violated by %r" % self.sandwich_max_violation)
        if self.recovery_guaranteed:
            if self.unique_minimizer and not self.same_ground_space:
                out.append("ground space not recovered at p=%d > p0=%r" % (self.p_used, self.p0))
            if not self.ground_subset:
                out.append("h_(p) minimizers outside the ground set at p=%d" % self.p_used)
            if self.unique_minimizer and not self.ratio_bound_holds:
                out.append("nu2/nu1 below lambda2**p / (M lambda1**p)")
        if self.ratio_growth_guaranteed and not self.ratio_grew:
            out.append("gap ratio shrank: r_p=%r < r_max=%r" % (self.r_p, self.r_max))
        return out

    def holds(self, sandwich_tol: float = 1e-9) -> bool:
        return not self.violations(sandwich_tol)

    def to_json(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["ground_set_max"] = list(self.ground_set_max)
        payload["ground_set_p"] = list(self.ground_set_p)
        return payload


def separation_ratio(hp: np.ndarray, ground_set: Sequence[int]) -> Optional[float]:
    """``min_{b not in G} h_(p)(b) / max_{b in G} h_(p)(b) - 1``.

    The relative gap between the approximation's levels on the ideal solutions
    ``G`` and the first non-ideal state; ``None`` if every assignment is ideal.
    """
    inside = np.zeros(hp.shape, dtype=bool)
    inside[list(ground_set)] = True
    if inside.all():
        return None
    top = float(hp[inside].max())
    return float(hp[~inside].min()) / top - 1.0


def _ratio_bound(lambda1: float, lambda2: float, M: int, p: int) -> float:
    try:
        return math.pow(lambda2 / lambda1, p) / M
    except OverflowError:
        return math.inf


def verify_theorem(
    mo: MultiObjective,
    p: int,
    symbolic: bool = False,
    settings: Optional[Settings] = None,
) -> VerificationReport:
    """Enumerate ``h_max`` and ``h_(p)`` (sum mode) and compare their ground spaces and gaps.

    :param bool symbolic: evaluate ``h_(p)`` through its expanded polynomial
        instead of numeric powers
    :raises EnumerationCapExceeded: above the enumeration cap
    :raises UndefinedGapRatio: if ``h_max`` is constant or not positive
    """
    cfg = resolve(settings)
    _check_cap(mo.n, cfg)
    if int(p) != p or p < 1:
        raise InvalidParameter("p must be an integer >= 1, got %r" % (p,))
    p = int(p)
    table = objective_values(mo, cfg)
    s_max = spectrum_from_values(table.max(axis=0), mo.n, cfg)
    r_max = gap_ratio(s_max)
    p0 = threshold_p(mo.M, r_max)

    if symbolic:
        hp = build_hp(mo, p, "sum", symbolic=True, settings=cfg).symbolic_or_raise().evaluate_all(cfg)
    else:
        hp = hp_values(table, p, "sum")
    s_p = spectrum_from_values(hp, mo.n, cfg)
    try:
        r_p = gap_ratio(s_p)
    except UndefinedGapRatio:
        log.debug("h_(p) is constant at p=%d; reporting r_p = 0", p)
        r_p = 0.0

    assert s_max.lambda2 is not None
    bound = _ratio_bound(s_max.lambda1, s_max.lambda2, mo.M, p)
    nu_ratio = s_p.lambda2 / s_p.lambda1 if s_p.lambda2 is not None else 1.0
    ground_max = set(s_max.ground_set)
    ground_p = set(s_p.ground_set)
    recovery = p > p0
    report = VerificationReport(
        n=mo.n,
        M=mo.M,
        p_used=p,
        p0=p0,
        r_max=r_max,
        r_p=r_p,
        r_tilde_p=separation_ratio(hp, s_max.ground_set),
        relative_gap_max=relative_gap(s_max),
        relative_gap_p=relative_gap(s_p) if s_p.lambda2 is not None else None,
        lambda1=s_max.lambda1,
        lambda2=s_max.lambda2,
        nu1=s_p.lambda1,
        nu2=s_p.lambda2,
        ratio_bound=bound,
        ratio_bound_holds=nu_ratio >= bound * (1.0 - cfg.degeneracy_tol),
        ground_degeneracy=s_max.degeneracy,
        ground_set_max=s_max.ground_set,
        ground_set_p=s_p.ground_set,
        same_ground_space=ground_p == ground_max,
        ground_subset=ground_p <= ground_max,
        degeneracy_broken=s_max.degeneracy >= 2 and s_p.degeneracy < s_max.degeneracy,
        ratio_grew=r_p + cfg.degeneracy_tol * max(1.0, r_max) >= r_max,
        recovery_guaranteed=recovery,
        ratio_growth_guaranteed=recovery and s_max.degeneracy == 1 and p - 1 >= p0,
        sandwich_max_violation=float(sandwich_violations(table, p, relative=True).max()),
    )
    log.debug(
        "verify n=%d M=%d p=%d: r_max=%.6g p0=%.6g r_p=%.6g same=%s",
        mo.n,
        mo.M,
        p,
        r_max,
        p0,
        r_p,
        report.same_ground_space,
    )
    return report


def landscape_rows(
    mo: MultiObjective,
    p_values: Sequence[int],
    normalization: Normalization = "sum",
    settings: Optional[Settings] = None,
) -> List[Dict[str, Any]]:
    """Per-assignment plot data: ``h_max`` and the p-th roots of ``h_(p)``.

    In mean mode the roots carry the extra factor ``M**(-1/p)``.
    """
    _check_cap(mo.n, settings)
    table = objective_values(mo, settings)
    h_max = table.max(axis=0)
    roots = {}
    for p in p_values:
        root = lp_roots(table, int(p))
        if normalization == "mean":
            root = root * mo.M ** (-1.0 / p)
        roots[int(p)] = root
    rows = []
    for k in range(1 << mo.n):
        row: Dict[str, Any] = {
            "assignment": k,
            "bits": Assignment.to_string(k, mo.n),
            "h_max": float(h_max[k]),
        }
        for p, root in roots.items():
            row["hp_root_%d" % p] = float(root[k])
        rows.append(row)
    return rows


def write_landscape_csv(rows: List[Dict[str, Any]], stream: IO[str]) -> None:
    if not rows:
        return
    writer = csv.writer(stream, lineterminator="\n")
    header = list(rows[0].keys())
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [format_float(row[h]) if isinstance(row[h], float) else row[h] for h in header]
        )


def write_spectrum_csv(s: Spectrum, stream: IO[str]) -> None:
    """``assignment,value`` rows in assignment order"""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["assignment", "value"])
    for k, v in enumerate(s.values):
        writer.writerow([k, format_float(float(v))])


def save_spectrum_binary(s: Spectrum, path: str) -> None:
    """Raw float64 values in assignment order (``numpy.save`` format)"""
    np.save(path, s.values)
