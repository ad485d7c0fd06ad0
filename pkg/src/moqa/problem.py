"""Objectives, constraint transforms and the degree-p approximation of their maximum."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from .config import Settings, resolve
from .exceptions import (
    DimensionMismatch,
    InvalidParameter,
    NoConstraintRecorded,
    NonFiniteValue,
    SymbolicBudgetExceeded,
)
from .poly import Polynomial, add, constant, from_json, make_poly, power, projected_power_terms, scale
from .utils import Bits

log = logging.getLogger(__name__)

Normalization = Literal["sum", "mean"]
ShiftMode = Literal["exact", "bound"]

NORMALIZATIONS = ("sum", "mean")
SHIFT_MODES = ("exact", "bound")


@dataclass(frozen=True)
class MultiObjective:
    """Ordered objectives ``h_1 .. h_M`` whose pointwise maximum is minimized.

    ``objectives`` already contain the joint additive ``shift``. ``gamma`` is
    only provenance; ``constraint`` (and ``extra_constraints`` for more than
    one inequality) are kept for violation checks.
    """

    n: int
    objectives: Tuple[Polynomial, ...]
    shift: float = 0.0
    gamma: float = 0.0
    constraint: Optional[Polynomial] = None
    extra_constraints: Tuple[Polynomial, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "objectives", tuple(self.objectives))
        object.__setattr__(self, "extra_constraints", tuple(self.extra_constraints))
        if not self.objectives:
            raise InvalidParameter("a multi-objective needs at least one objective")
        for h in self.objectives + self.constraints:
            if h.n != self.n:
                raise DimensionMismatch("objective over %d variables, expected %d" % (h.n, self.n))

    @property
    def M(self) -> int:
        return len(self.objectives)

    @property
    def constraints(self) -> Tuple[Polynomial, ...]:
        if self.constraint is None:
            return self.extra_constraints
        return (self.constraint,) + self.extra_constraints

    def to_json(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "gamma": self.gamma,
            "shift": self.shift,
            "objectives": [h.to_json() for h in self.objectives],
            "constraint": self.constraint.to_json() if self.constraint is not None else None,
            "extra_constraints": [g.to_json() for g in self.extra_constraints],
        }

    @classmethod
    def from_json(cls, payload: Dict[str, Any], settings: Optional[Settings] = None) -> "MultiObjective":
        constraint = payload.get("constraint")
        return cls(
            n=int(payload["n"]),
            objectives=tuple(from_json(h, settings) for h in payload["objectives"]),
            shift=float(payload.get("shift", 0.0)),
            gamma=float(payload.get("gamma", 0.0)),
            constraint=from_json(constraint, settings) if constraint else None,
            extra_constraints=tuple(
                from_json(g, settings) for g in payload.get("extra_constraints") or []
            ),
        )


@dataclass(frozen=True)
class Instance:
    """A constrained problem before the multi-objective transform.

    Mirrors the instance JSON: objective ``h``, optional inequality ``g >= 0``,
    optional equality ``f = 0``, regularization ``gamma`` and shift margin.
    """

    n: int
    gamma: float
    objective: Polynomial
    constraint: Optional[Polynomial] = None
    equality: Optional[Polynomial] = None
    shift_eta: float = 1.0
    extra_constraints: Tuple[Polynomial, ...] = field(default=())

    def to_json(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "n": self.n,
            "gamma": self.gamma,
            "objective": self.objective.to_json(),
            "constraint": self.constraint.to_json() if self.constraint is not None else None,
            "equality": self.equality.to_json() if self.equality is not None else None,
            "shift_eta": self.shift_eta,
        }
        if self.extra_constraints:
            payload["extra_constraints"] = [g.to_json() for g in self.extra_constraints]
        return payload

    @classmethod
    def from_json(cls, payload: Dict[str, Any], settings: Optional[Settings] = None) -> "Instance":
        def opt(key: str) -> Optional[Polynomial]:
            value = payload.get(key)
            return from_json(value, settings) if value else None

        try:
            return cls(
                n=int(payload["n"]),
                gamma=float(payload["gamma"]),
                objective=from_json(payload["objective"], settings),
                constraint=opt("constraint"),
                equality=opt("equality"),
                shift_eta=float(payload.get("shift_eta", resolve(settings).shift_eta)),
                extra_constraints=tuple(
                    from_json(g, settings) for g in payload.get("extra_constraints") or []
                ),
            )
        except KeyError as exc:
            raise ValueError("instance JSON lacks %s" % exc) from exc

    def to_objectives(
        self,
        mode: ShiftMode = "exact",
        eta: Optional[float] = None,
        settings: Optional[Settings] = None,
    ) -> MultiObjective:
        """Equality penalty, then inequality transform, then the joint shift"""
        h = self.objective
        if self.equality is not None:
            h = penalize_equality(h, self.equality, self.gamma, settings)
        gs = ([self.constraint] if self.constraint is not None else []) + list(
            self.extra_constraints
        )
        if gs:
            mo = inequalities_to_objectives(h, gs, self.gamma, settings)
        else:
            mo = MultiObjective(n=self.n, objectives=(h,), gamma=self.gamma)
        return joint_shift_nonneg(mo, self.shift_eta if eta is None else eta, mode, settings)


def qubo_objective(
    Q: Union[Sequence[Sequence[float]], np.ndarray],
    c: Union[Sequence[float], np.ndarray],
    const: float = 0.0,
    settings: Optional[Settings] = None,
) -> Polynomial:
    """``b^T Q b + c^T b + const`` for upper-triangular ``Q`` (diagonal included).

    The diagonal ``Q_ii x_i x_i`` collapses into the linear term.

    :raises DimensionMismatch: if Q is not n x n or c not of length n
    :raises InvalidParameter: if Q has entries below the diagonal
    """
    Q = np.asarray(Q, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if c.ndim != 1:
        raise DimensionMismatch("c must be a vector")
    n = c.shape[0]
    if Q.shape != (n, n):
        raise DimensionMismatch("Q has shape %s, expected (%d, %d)" % (Q.shape, n, n))
    if np.any(np.tril(Q, -1) != 0):
        raise InvalidParameter("Q must be upper triangular")
    raw: List[Tuple[List[int], float]] = [([], float(const))]
    for i in range(n):
        raw.append(([i], float(c[i])))
        for j in range(i, n):
            if Q[i, j] != 0:
                raw.append(([i, j], float(Q[i, j])))
    return make_poly(n, raw, settings=settings)


def linear_objective(a: Union[Sequence[float], np.ndarray], settings: Optional[Settings] = None) -> Polynomial:
    """``a^T b``"""
    a = np.asarray(a, dtype=np.float64)
    return make_poly(len(a), [([i], float(v)) for i, v in enumerate(a)], settings=settings)


def penalize_equality(
    h: Polynomial, f: Polynomial, gamma: float, settings: Optional[Settings] = None
) -> Polynomial:
    """``h + gamma * f**2``"""
    if gamma < 0:
        raise InvalidParameter("gamma must be >= 0, got %r" % gamma)
    if h.n != f.n:
        raise DimensionMismatch("h has %d variables, f has %d" % (h.n, f.n))
    if gamma == 0 or f.term_count() == 0:
        return h
    return add(h, scale(power(f, 2, settings), gamma, settings), settings)


def inequality_to_objectives(
    h: Polynomial, g: Polynomial, gamma: float, settings: Optional[Settings] = None
) -> MultiObjective:
    """Encode ``g(b) >= 0`` as ``max{h, h - gamma g}`` (unshifted, M = 2).

    ``max{h, h - gamma g} = h + gamma * max{0, -g}`` pointwise.
    """
    return inequalities_to_objectives(h, [g], gamma, settings)


def inequalities_to_objectives(
    h: Polynomial, gs: Sequence[Polynomial], gamma: float, settings: Optional[Settings] = None
) -> MultiObjective:
    """``[h, h - gamma g_1, ..., h - gamma g_K]`` for constraints ``g_k(b) >= 0``.

    The maximum equals ``h + gamma * max{0, -g_1, ..., -g_K}``, which is zero
    exactly on the feasible set.
    """
    if gamma <= 0:
        raise InvalidParameter("gamma must be > 0, got %r" % gamma)
    if not gs:
        raise InvalidParameter("at least one constraint is required")
    for g in gs:
        if g.n != h.n:
            raise DimensionMismatch("h has %d variables, g has %d" % (h.n, g.n))
    objectives = [h] + [add(h, scale(g, -gamma, settings), settings) for g in gs]
    return MultiObjective(
        n=h.n,
        objectives=tuple(objectives),
        gamma=gamma,
        constraint=gs[0],
        extra_constraints=tuple(gs[1:]),
    )


def objective_values(mo: MultiObjective, settings: Optional[Settings] = None) -> np.ndarray:
    """``(M, 2**n)`` table of every objective on every assignment"""
    return np.vstack([h.evaluate_all(settings) for h in mo.objectives])


def _coefficient_lower_bound(h: Polynomial) -> float:
    return h.constant + sum(c for m, c in h.items() if m != 0 and c < 0)


def joint_shift_nonneg(
    mo: MultiObjective,
    eta: float = 1.0,
    mode: ShiftMode = "exact",
    settings: Optional[Settings] = None,
) -> MultiObjective:
    """Add one constant ``c`` to every objective so that all values are ``>= eta``.

    ``exact`` enumerates all 2**n assignments and makes the smallest value
    exactly ``eta``; ``bound`` uses the constant plus all negative
    coefficients as a cheap lower bound. The argmin of ``h_max`` is unchanged.
    """
    if eta <= 0:
        raise InvalidParameter("eta must be > 0, got %r" % eta)
    if mode == "exact":
        lowest = float(objective_values(mo, settings).min())
    elif mode == "bound":
        lowest = min(_coefficient_lower_bound(h) for h in mo.objectives)
    else:
        raise InvalidParameter("unknown shift mode %r" % mode)
    c = eta - lowest
    log.debug("joint shift (%s): lowest %r, c = %r", mode, lowest, c)
    shifted = tuple(add(h, constant(mo.n, c), settings) for h in mo.objectives)
    return MultiObjective(
        n=mo.n,
        objectives=shifted,
        shift=mo.shift + c,
        gamma=mo.gamma,
        constraint=mo.constraint,
        extra_constraints=mo.extra_constraints,
    )


def h_max_eval(mo: MultiObjective, b: Bits) -> float:
    """Pointwise maximum of the objectives at ``b``"""
    return max(h.evaluate(b) for h in mo.objectives)


def h_max_values(table: np.ndarray) -> np.ndarray:
    return table.max(axis=0)


def _normalizer(M: int, normalization: Normalization) -> float:
    if normalization == "sum":
        return 1.0
    if normalization == "mean":
        return 1.0 / M
    raise InvalidParameter("normalization must be one of %s, got %r" % (NORMALIZATIONS, normalization))


def _check_p(p: int) -> int:
    if int(p) != p or p < 1:
        raise InvalidParameter("p must be an integer >= 1, got %r" % (p,))
    return int(p)


def hp_eval_direct(
    mo: MultiObjective, p: int, b: Bits, normalization: Normalization = "sum"
) -> float:
    """``sum_m h_m(b)**p`` (times ``1/M`` in mean mode) without symbolic expansion

    :raises NonFiniteValue: if the powers overflow
    """
    p = _check_p(p)
    factor = _normalizer(mo.M, normalization)
    try:
        total = factor * sum(h.evaluate(b) ** p for h in mo.objectives)
    except OverflowError as exc:
        raise NonFiniteValue("h_(p) overflowed at p=%d" % p) from exc
    if not np.isfinite(total):
        raise NonFiniteValue("h_(p) is not finite at p=%d" % p)
    return float(total)


def hp_values(table: np.ndarray, p: int, normalization: Normalization = "sum") -> np.ndarray:
    """Vectorized ``hp_eval_direct`` over an objective table"""
    p = _check_p(p)
    factor = _normalizer(table.shape[0], normalization)
    with np.errstate(over="ignore", invalid="ignore"):
        out = factor * np.sum(table**p, axis=0)
    if not np.all(np.isfinite(out)):
        log.warning("direct evaluation of h_(p) overflowed at p=%d", p)
        raise NonFiniteValue("h_(p) is not finite at p=%d" % p)
    return out


@dataclass(frozen=True)
class HpEvaluator:
    """The approximation ``h_(p) = sum_m h_m**p`` of ``h_max**p``.

    ``symbolic`` is the expanded polynomial when it fit the term budget;
    evaluation falls back to numeric powers of the objective values otherwise.
    """

    source: MultiObjective
    p: int
    normalization: Normalization = "sum"
    symbolic: Optional[Polynomial] = None

    def evaluate(self, b: Bits) -> float:
        if self.symbolic is not None:
            return self.symbolic.evaluate(b)
        return hp_eval_direct(self.source, self.p, b, self.normalization)

    def evaluate_direct(self, b: Bits) -> float:
        return hp_eval_direct(self.source, self.p, b, self.normalization)

    def evaluate_all(self, settings: Optional[Settings] = None) -> np.ndarray:
        """All 2**n values, numeric path"""
        return hp_values(objective_values(self.source, settings), self.p, self.normalization)

    def symbolic_or_raise(self) -> Polynomial:
        if self.symbolic is None:
            raise SymbolicBudgetExceeded(
                "h_(p) for p=%d was not expanded (term budget or request)" % self.p
            )
        return self.symbolic


def expand_hp(
    mo: MultiObjective,
    p: int,
    normalization: Normalization = "sum",
    settings: Optional[Settings] = None,
) -> Polynomial:
    """Symbolic ``sum_m h_m**p``.

    :raises SymbolicBudgetExceeded: if the projected total term count is over budget
    """
    p = _check_p(p)
    cfg = resolve(settings)
    projected = sum(projected_power_terms(h, p) for h in mo.objectives)
    if projected > cfg.term_budget:
        raise SymbolicBudgetExceeded(
            "h_(p) at p=%d projects %d terms, budget is %d" % (p, projected, cfg.term_budget)
        )
    total = power(mo.objectives[0], p, cfg)
    for h in mo.objectives[1:]:
        total = add(total, power(h, p, cfg), cfg)
    factor = _normalizer(mo.M, normalization)
    return total if factor == 1.0 else scale(total, factor, cfg)


def build_hp(
    mo: MultiObjective,
    p: int,
    normalization: Normalization = "sum",
    symbolic: Optional[bool] = None,
    settings: Optional[Settings] = None,
) -> HpEvaluator:
    """Build the degree-p approximation.

    :param bool symbolic: ``True`` tries the expansion, ``False`` skips it,
        ``None`` tries it only for ``p <= Settings.symbolic_p_max``
    """
    p = _check_p(p)
    _normalizer(mo.M, normalization)
    cfg = resolve(settings)
    want = symbolic if symbolic is not None else p <= cfg.symbolic_p_max
    expanded: Optional[Polynomial] = None
    if want:
        try:
            expanded = expand_hp(mo, p, normalization, cfg)
        except SymbolicBudgetExceeded as exc:
            log.warning("falling back to numeric h_(p): %s", exc)
    return HpEvaluator(source=mo, p=p, normalization=normalization, symbolic=expanded)


def constraint_violated(mo: MultiObjective, b: Bits) -> bool:
    """True iff some recorded constraint has ``g(b) < 0``

    :raises NoConstraintRecorded: if the multi-objective has no constraint
    """
    if not mo.constraints:
        raise NoConstraintRecorded("multi-objective carries no inequality constraint")
    return any(g.evaluate(b) < 0 for g in mo.constraints)


def violation_mask(mo: MultiObjective, settings: Optional[Settings] = None) -> np.ndarray:
    """Boolean array over all assignments, True where a constraint is violated"""
    if not mo.constraints:
        raise NoConstraintRecorded("multi-objective carries no inequality constraint")
    out = np.zeros(1 << mo.n, dtype=bool)
    for g in mo.constraints:
        out |= g.evaluate_all(settings) < 0
    return out
