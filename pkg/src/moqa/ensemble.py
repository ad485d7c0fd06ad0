"""Random QUBO ensembles with one linear inequality and their error statistics.

Instance ``i`` of a run with master seed ``s`` is drawn from
``numpy.random.SeedSequence(entropy=s, spawn_key=(i,))``, the same stream as
the i-th child of ``SeedSequence(s).spawn(...)``, so it does not depend on how
instances are distributed over workers.
"""

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import IO, Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .config import Settings, resolve
from .exceptions import DegenerateDenominator, InstanceError, InvalidParameter
from .problem import (
    NORMALIZATIONS,
    Instance,
    MultiObjective,
    Normalization,
    hp_values,
    linear_objective,
    objective_values,
    qubo_objective,
    violation_mask,
)
from .spectra import gap_ratio, spectrum_from_values, threshold_p
from .utils import Tolerance, format_float

log = logging.getLogger(__name__)

Seed = Union[int, np.random.SeedSequence]

ROW_HEADER = ["n", "p", "epsilon", "delta", "violation_rate", "mean_r", "count"]
BIN_HEADER = ["bin_lo", "bin_hi", "p", "epsilon", "count", "r_star"]


@dataclass(frozen=True)
class EnsembleConfig:
    """One experiment: ``num_instances`` random instances at size ``n``, several p."""

    n: int
    gamma: float
    num_instances: int
    p_values: Tuple[int, ...]
    master_seed: int = 0
    shift_eta: float = 1.0
    normalization: Normalization = "sum"
    bins: Optional[Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "p_values", tuple(sorted({int(p) for p in self.p_values})))
        if self.bins is not None:
            object.__setattr__(self, "bins", tuple(float(b) for b in self.bins))
        if self.num_instances < 1:
            raise InvalidParameter("num_instances must be >= 1")
        if not self.p_values or min(self.p_values) < 1:
            raise InvalidParameter("p_values must be non-empty and >= 1")
        if self.gamma <= 0:
            raise InvalidParameter("gamma must be > 0")
        if self.shift_eta <= 0:
            raise InvalidParameter("shift_eta must be > 0")
        if self.normalization not in NORMALIZATIONS:
            raise InvalidParameter("unknown normalization %r" % self.normalization)
        if self.bins is not None:
            if len(self.bins) < 2 or any(b >= a for a, b in zip(self.bins[1:], self.bins)):
                raise InvalidParameter("bins must be at least two strictly increasing edges")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidParameter("master_seed must be a 64-bit unsigned integer")

    def as_dict(self) -> Dict[str, Any]:
        payload = asdict(self)
        payload["p_values"] = list(self.p_values)
        payload["bins"] = list(self.bins) if self.bins is not None else None
        return payload


@dataclass(frozen=True)
class EnsembleRow:
    n: int
    p: int
    epsilon: float
    delta: float
    violation_rate: float
    mean_r: float
    count: int

    def as_csv(self) -> List[str]:
        return [
            str(self.n),
            str(self.p),
            format_float(self.epsilon),
            format_float(self.delta),
            format_float(self.violation_rate),
            format_float(self.mean_r),
            str(self.count),
        ]


@dataclass(frozen=True)
class BinRow:
    bin_lo: float
    bin_hi: float
    p: int
    epsilon: float
    count: int
    r_star: float

    def as_csv(self) -> List[str]:
        return [
            format_float(self.bin_lo),
            format_float(self.bin_hi),
            str(self.p),
            format_float(self.epsilon),
            str(self.count),
            format_float(self.r_star),
        ]


@dataclass(frozen=True)
class InstanceOutcome:
    """Statistics of one instance for every p of the run"""

    index: int
    r: float
    p0: float
    unique: bool
    M: int
    eps: Dict[int, int] = field(default_factory=dict)
    delta: Dict[int, float] = field(default_factory=dict)
    violated: Dict[int, int] = field(default_factory=dict)

    def guaranteed(self, p: int) -> bool:
        return self.unique and p > self.p0


def split_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Seed of instance ``index``; child ``index`` of ``SeedSequence(master_seed)``"""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))


def sample_qubo_data(n: int, seed: Seed) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Upper-triangular ``Q`` (diagonal included), linear ``c`` and constraint ``a``, all N(0, 1)"""
    rng = np.random.default_rng(seed)
    Q = np.zeros((n, n))
    rows, cols = np.triu_indices(n)
    Q[rows, cols] = rng.standard_normal(rows.size)
    c = rng.standard_normal(n)
    a = rng.standard_normal(n)
    return Q, c, a


def sample_problem(
    n: int, gamma: float, seed: Seed, eta: float = 1.0, settings: Optional[Settings] = None
) -> Instance:
    """Random ``min b^T Q b + c^T b`` subject to ``a^T b >= 0``"""
    Q, c, a = sample_qubo_data(n, seed)
    return Instance(
        n=n,
        gamma=gamma,
        objective=qubo_objective(Q, c, settings=settings),
        constraint=linear_objective(a, settings=settings),
        shift_eta=eta,
    )


def sample_instance(
    n: int, gamma: float, seed: Seed, eta: float = 1.0, settings: Optional[Settings] = None
) -> MultiObjective:
    """Shifted ``[h, h - gamma g]`` for a random constrained QUBO"""
    if gamma <= 0:
        raise InvalidParameter("gamma must be > 0, got %r" % gamma)
    return sample_problem(n, gamma, seed, eta, settings).to_objectives("exact", settings=settings)


def _first_minimizer(values: np.ndarray, tol: float) -> int:
    return int(np.flatnonzero(Tolerance.close_to(values, float(values.min()), tol))[0])


def _epsilon_delta(
    h_max: np.ndarray,
    hp: np.ndarray,
    violations: Optional[np.ndarray],
    tol: float,
) -> Tuple[int, float, int]:
    best = _first_minimizer(h_max, tol)
    chosen = _first_minimizer(hp, tol)
    optimum = float(h_max[best])
    if optimum <= tol:
        raise DegenerateDenominator(
            "minimum of h_max is %r; shift the objectives with a positive margin" % optimum
        )
    found = float(h_max[chosen])
    if Tolerance.equal(found, optimum, tol):
        eps, delta = 0, 0.0
    else:
        eps, delta = 1, (found - optimum) / optimum
    violated = int(bool(violations[chosen])) if violations is not None else 0
    return eps, delta, violated


def epsilon_delta(
    mo: MultiObjective,
    p: int,
    normalization: Normalization = "sum",
    settings: Optional[Settings] = None,
) -> Tuple[int, float, int]:
    """``(eps_i, delta_i, violated)`` comparing the minimizer of ``h_(p)`` to that of ``h_max``.

    Minimizers are tie-broken by the smallest assignment integer.

    :raises DegenerateDenominator: if ``min h_max`` is not positive
    """
    cfg = resolve(settings)
    table = objective_values(mo, cfg)
    violations = violation_mask(mo, cfg) if mo.constraints else None
    return _epsilon_delta(table.max(axis=0), hp_values(table, p, normalization), violations, cfg.degeneracy_tol)


def evaluate_instance(
    config: EnsembleConfig, index: int, settings: Optional[Settings] = None
) -> InstanceOutcome:
    """Sample instance ``index`` and collect its statistics for all p of the config

    :raises InstanceError: wrapping any failure, with the index attached
    """
    cfg = resolve(settings)
    try:
        mo = sample_instance(
            config.n, config.gamma, split_seed(config.master_seed, index), config.shift_eta, cfg
        )
        table = objective_values(mo, cfg)
        h_max = table.max(axis=0)
        spectrum = spectrum_from_values(h_max, mo.n, cfg)
        r = gap_ratio(spectrum)
        outcome = InstanceOutcome(
            index=index,
            r=r,
            p0=threshold_p(mo.M, r),
            unique=spectrum.degeneracy == 1,
            M=mo.M,
        )
        violations = violation_mask(mo, cfg)
        for p in config.p_values:
            hp = hp_values(table, p, config.normalization)
            eps, delta, violated = _epsilon_delta(h_max, hp, violations, cfg.degeneracy_tol)
            outcome.eps[p] = eps
            outcome.delta[p] = delta
            outcome.violated[p] = violated
    except InstanceError:
        raise
    except Exception as exc:
        raise InstanceError(index, exc) from exc
    return outcome


def run_instances(
    config: EnsembleConfig, workers: int = 1, settings: Optional[Settings] = None
) -> List[InstanceOutcome]:
    """All instance outcomes in index order, serially or on a process pool"""
    cfg = resolve(settings)
    indices = range(config.num_instances)
    work = partial(evaluate_instance, config, settings=cfg)
    if workers <= 1:
        outcomes = [work(i) for i in indices]
    else:
        chunk = max(1, config.num_instances // (4 * workers))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, indices, chunksize=chunk))
    log.info(
        "evaluated %d instances (n=%d, gamma=%r) on %d worker(s)",
        len(outcomes),
        config.n,
        config.gamma,
        max(1, workers),
    )
    return outcomes


def _theorem_failures(outcomes: Iterable[InstanceOutcome], p: int) -> int:
    return sum(1 for o in outcomes if o.guaranteed(p) and o.eps[p])


def aggregate(config: EnsembleConfig, outcomes: Sequence[InstanceOutcome]) -> List[EnsembleRow]:
    """Per-p means over the outcomes (ordered reduction by instance index)"""
    ordered = sorted(outcomes, key=lambda o: o.index)
    mean_r = float(np.mean([o.r for o in ordered]))
    rows = []
    for p in config.p_values:
        row = EnsembleRow(
            n=config.n,
            p=p,
            epsilon=float(np.mean([o.eps[p] for o in ordered])),
            delta=float(np.mean([o.delta[p] for o in ordered])),
            violation_rate=float(np.mean([o.violated[p] for o in ordered])),
            mean_r=mean_r,
            count=len(ordered),
        )
        failures = _theorem_failures(ordered, p)
        if failures:
            log.error("%d instance(s) above their threshold missed the optimum at p=%d", failures, p)
        if row.violation_rate > 0:
            log.warning(
                "n=%d p=%d: %.4g of the approximate minimizers violate the constraint",
                row.n,
                row.p,
                row.violation_rate,
            )
        rows.append(row)
    return rows


def sweep(
    config: EnsembleConfig, workers: int = 1, settings: Optional[Settings] = None
) -> List[EnsembleRow]:
    """eps / delta / violation rate for every p of the config"""
    return aggregate(config, run_instances(config, workers, settings))


def sweep_sizes(
    config: EnsembleConfig,
    sizes: Sequence[int],
    workers: int = 1,
    settings: Optional[Settings] = None,
) -> List[EnsembleRow]:
    """``sweep`` repeated for several n, rows in (n, p) order"""
    rows: List[EnsembleRow] = []
    for n in sorted(set(sizes)):
        rows.extend(sweep(_with_n(config, n), workers, settings))
    return rows


def _with_n(config: EnsembleConfig, n: int) -> EnsembleConfig:
    payload = asdict(config)
    payload["n"] = n
    return EnsembleConfig(**payload)


def r_star(M: int, p: int) -> float:
    """Gap ratio above which ``p`` is guaranteed to recover: ``M**(1/p) - 1``"""
    return M ** (1.0 / p) - 1.0


def bin_outcomes(config: EnsembleConfig, outcomes: Sequence[InstanceOutcome]) -> List[BinRow]:
    """Mean eps per (r bin, p). Bins are ``[lo, hi)``, the last one closed; empty bins keep count 0."""
    if config.bins is None:
        raise InvalidParameter("bin_by_ratio needs bin edges")
    edges = np.asarray(config.bins)
    ordered = sorted(outcomes, key=lambda o: o.index)
    r = np.array([o.r for o in ordered])
    which = np.searchsorted(edges, r, side="right") - 1
    which[r == edges[-1]] = len(edges) - 2
    outside = int(np.sum((which < 0) | (which >= len(edges) - 1)))
    if outside:
        log.info("%d instance(s) have r outside the bin edges", outside)
    M = ordered[0].M if ordered else 2
    rows = []
    for b in range(len(edges) - 1):
        members = [o for o, w in zip(ordered, which) if w == b]
        for p in config.p_values:
            eps = float(np.mean([o.eps[p] for o in members])) if members else math.nan
            rows.append(
                BinRow(
                    bin_lo=float(edges[b]),
                    bin_hi=float(edges[b + 1]),
                    p=p,
                    epsilon=eps,
                    count=len(members),
                    r_star=r_star(M, p),
                )
            )
    return rows


def bin_by_ratio(
    config: EnsembleConfig, workers: int = 1, settings: Optional[Settings] = None
) -> List[BinRow]:
    """eps per gap-ratio bin and p, plus the analytic threshold ``r*(p)``"""
    if config.bins is None:
        raise InvalidParameter("bin_by_ratio needs bin edges")
    return bin_outcomes(config, run_instances(config, workers, settings))


def write_rows_csv(rows: Iterable[EnsembleRow], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(ROW_HEADER)
    for row in rows:
        writer.writerow(row.as_csv())


def write_bins_csv(rows: Iterable[BinRow], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(BIN_HEADER)
    for row in rows:
        writer.writerow(row.as_csv())


def full_reproduction_configs(master_seed: int = 0) -> List[Tuple[str, EnsembleConfig, List[int]]]:
    """Full-size experiment configs; far too slow for CI.

    Returns ``(label, config, sizes)``; the error-statistics run sweeps every
    size in ``sizes``.
    """
    return [
        (
            "error-statistics",
            EnsembleConfig(
                n=4,
                gamma=120.0,
                num_instances=10000,
                p_values=tuple(range(1, 21)),
                master_seed=master_seed,
            ),
            list(range(4, 21)),
        ),
        (
            "gap-ratio-bins",
            EnsembleConfig(
                n=20,
                gamma=6.0,
                num_instances=10000,
                p_values=(5, 10, 20),
                master_seed=master_seed,
                bins=tuple(float(x) for x in np.round(np.linspace(0.0, 0.5, 26), 6)),
            ),
            [20],
        ),
    ]
