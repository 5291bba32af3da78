"""Dimension lower bounds from conditional-entropy estimates.

The chain is: a partition of the attractor hull at level N, per-cell upper
bounds on p_i * mu(S_i^{-1} D) (exact cylinder measures, or the certified
branch-and-bound engine), the concave f applied per cell, and finally

    dim_lower = (H - F - E) / lyapunov

where H is the entropy of the weights, F the summed conditional term, E an
explicit summation-error ledger, and lyapunov the weighted log contraction
rate rounded in the bound-safe direction.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core_math import (
    UNIT_ROUNDOFF,
    EntropyValue,
    div_down,
    f_ell,
    float_up,
    next_up,
)
from .errors import DomainError, PreconditionError
from .ifs import IFS1D, Interval, Partition, attractor_hull, generate_partition
from .measure_bounds import (
    UBConfig,
    exact_seed_measures,
    inverse_map_floats,
    measure_upper_bound,
    measure_upper_bound_batch,
)

__all__ = [
    "BoundReport",
    "conditional_entropy_upper",
    "dimension_lower_bound",
]

_U = UNIT_ROUNDOFF

# below this many engine queries the batch collects exact ell-adic values,
# so small-table numbers match the scalar engine bit for bit
_EXACT_QUERY_LIMIT = 20_000


def _normalize_mode(mode: str) -> str:
    m = str(mode).lower()
    if m in ("exact",):
        return "exact"
    if m in ("algorithm38", "alg38", "38"):
        return "algorithm38"
    raise DomainError(f"unknown measure mode {mode!r}")


# ---------------------------------------------------------------------------
# report type
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    """A certified dimension lower bound plus its full error ledger."""

    dim_lower: float
    numerator_entropy: EntropyValue      # H = sum of -p_i log p_i
    conditional_upper: EntropyValue      # F = sum over cells of f(y_1..y_ell)
    lyapunov: float                      # -sum p_i log rho_i, rounded up
    partition_cells: int
    measure_mode: str                    # "exact" | "algorithm38"
    summation_error: float               # subtracted from the numerator

    def to_json_dict(self) -> dict:
        return {
            "dim_lower": self.dim_lower,
            "numerator_entropy": self.numerator_entropy.value,
            "numerator_entropy_abs_error": self.numerator_entropy.abs_error,
            "conditional_upper": self.conditional_upper.value,
            "conditional_upper_abs_error": self.conditional_upper.abs_error,
            "lyapunov": self.lyapunov,
            "partition_cells": self.partition_cells,
            "measure_mode": self.measure_mode,
            "summation_error": self.summation_error,
        }

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)

    CSV_FIELDS = ("dim_lower", "numerator_entropy", "conditional_upper",
                  "lyapunov", "partition_cells", "measure_mode",
                  "summation_error")

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["%.17g" % self.dim_lower,
                    "%.17g" % self.numerator_entropy.value,
                    "%.17g" % self.conditional_upper.value,
                    "%.17g" % self.lyapunov,
                    self.partition_cells,
                    self.measure_mode,
                    "%.17g" % self.summation_error])
        return buf.getvalue().rstrip("\r\n")


# ---------------------------------------------------------------------------
# per-cell measure queries
# ---------------------------------------------------------------------------

def _clip(lo: float, hi: float, B: Interval) -> Tuple[float, float]:
    return max(lo, B.lo), min(hi, B.hi)


def _y_rows_algorithm38(ifs: IFS1D, partition: Partition, cfg: UBConfig,
                        jobs: int) -> List[List[float]]:
    """One row of y_i = p_i * ub(mu(S_i^{-1} D)) per partition cell.

    Preimages are taken with the same float inverse-map parameters the engine
    itself iterates, then clipped to B; cells whose preimage misses B entirely
    contribute an exact zero.
    """
    B = cfg.B
    params = [inverse_map_floats(m) for m in ifs.maps]
    p_floats = ifs.weights.floats()
    cells = partition.cells()

    qlo: List[float] = []
    qhi: List[float] = []
    slots: List[Tuple[int, int]] = []
    for ci, cell in enumerate(cells):
        a, b = cell.lo, cell.hi
        for mi, (M, c) in enumerate(params):
            lo, hi = _clip(M * a + c, M * b + c, B)
            if lo <= hi:
                qlo.append(lo)
                qhi.append(hi)
                slots.append((ci, mi))

    nq = len(qlo)
    use_exact = cfg.collect_exact and nq <= _EXACT_QUERY_LIMIT
    bcfg = UBConfig(B=B, L=cfg.L, gamma=cfg.gamma, coalesce=cfg.coalesce,
                    cap=cfg.cap, collect_exact=use_exact, chunk=cfg.chunk)
    if ifs.weights.is_uniform:
        br = measure_upper_bound_batch(ifs, np.array(qlo), np.array(qhi),
                                       bcfg, jobs=jobs)
        if use_exact:
            ubs = [float(x) for x in br.exact]
        else:
            ubs = br.bounds.tolist()
    else:
        ubs = [measure_upper_bound(ifs, Interval(qlo[i], qhi[i]), bcfg).upper_bound
               for i in range(nq)]

    rows = [[0.0] * ifs.ell for _ in cells]
    for (ci, mi), ub in zip(slots, ubs):
        rows[ci][mi] = p_floats[mi] * ub
    return rows


def _y_rows_exact(ifs: IFS1D, partition: Partition) -> List[List[float]]:
    """Exact y_i rows via the cylinder-measure solver.

    Needs exact map parameters and exact partition endpoints; preimages and
    hull intersections are done in exact arithmetic, so a preimage that is a
    point or misses the hull is a true zero, not a rounding artifact.
    """
    if not ifs.has_exact:
        raise PreconditionError("exact mode needs exact map parameters")
    if partition.breakpoints_exact is None:
        raise PreconditionError("exact mode needs exact partition endpoints")

    seeds = []
    slots: List[Tuple[int, int, int]] = []   # cell, map, seed index
    for ci, (a, b) in enumerate(partition.cells_exact()):
        for mi, m in enumerate(ifs.maps):
            pa = m.invert_exact(a)
            pb = m.invert_exact(b)
            slots.append((ci, mi, len(seeds)))
            seeds.append((pa, pb))

    measures = exact_seed_measures(ifs, seeds)

    rows = [[0.0] * ifs.ell for _ in range(partition.n_cells)]
    weights = ifs.weights
    for ci, mi, si in slots:
        mu = measures[si]
        if mu:
            rows[ci][mi] = float(weights[mi] * mu)
    return rows


# ---------------------------------------------------------------------------
# entropy pieces
# ---------------------------------------------------------------------------

def _fsum(rows: Sequence[Sequence[float]]) -> Tuple[float, int]:
    """Left-to-right sum of f over the rows; returns (sum, #nonzero terms)."""
    total = 0.0
    nonzero = 0
    for row in rows:
        term = f_ell(row)
        if term:
            nonzero += 1
        total += term
    return total, nonzero


def _ledger(n_cells: int, total_abs: float) -> float:
    """|E| <= (#cells - 1) * u * (total absolute sum), second order folded
    into an absolute 0.01u floor."""
    if n_cells < 1:
        return 0.0
    return next_up((n_cells - 1) * _U * total_abs + 0.01 * _U)


def conditional_entropy_upper(ifs: IFS1D, partition: Partition,
                              measure_mode: str = "exact",
                              cfg: Optional[UBConfig] = None,
                              jobs: int = 1) -> EntropyValue:
    """Upper bound on the conditional entropy term: sum over partition cells
    of f(y_1(D), ..., y_ell(D)) with y_i(D) >= p_i mu(S_i^{-1} D).

    Exact mode solves the cylinder measures exactly (y_i exact, the sum is
    the true value up to summation rounding); algorithm38 mode uses the
    certified iteration from measure_bounds, so each y_i is an upper bound
    and monotonicity of f keeps the whole sum an upper bound.
    """
    mode = _normalize_mode(measure_mode)
    hull = attractor_hull(ifs)
    span = partition.span
    if span.lo < hull.lo - 1e-12 or span.hi > hull.hi + 1e-12:
        raise PreconditionError("partition does not lie inside the hull")

    if mode == "exact":
        rows = _y_rows_exact(ifs, partition)
    else:
        if cfg is None:
            cfg = UBConfig(B=hull)
        rows = _y_rows_algorithm38(ifs, partition, cfg, jobs)

    value, _ = _fsum(rows)
    return EntropyValue(value=value,
                        abs_error=_ledger(partition.n_cells, value))


def _weight_entropy(ifs: IFS1D) -> EntropyValue:
    """H = sum of -p_i log p_i, one log call per distinct weight."""
    logs: Dict[Fraction, float] = {}
    total = 0.0
    for p in ifs.weights:
        if p == 0:
            continue
        lg = logs.get(p)
        if lg is None:
            lg = math.log(float(p))
            logs[p] = lg
        total += float(p) * (-lg)
    # each term carries ~2 ulps (log + multiply), plus the running sum
    err = next_up((ifs.ell + 2) * _U * abs(total))
    return EntropyValue(value=total, abs_error=err)


def _lyapunov_up(ifs: IFS1D) -> float:
    """-sum p_i log rho_i, inflated a hair so it errs on the large side."""
    total = 0.0
    for p, m in zip(ifs.weights.floats(), ifs.maps):
        total += p * (-math.log(m.ratio))
    return next_up(total * (1.0 + (2 * ifs.ell + 4) * _U))


def _is_selfsimilar_full(ifs: IFS1D) -> bool:
    """Weights equal to ratios (as exact values) force H = lyapunov."""
    ratios = []
    for m in ifs.maps:
        if m.ratio_exact is None:
            return False
        if isinstance(m.ratio_exact, Fraction):
            ratios.append(m.ratio_exact)
        else:
            return False
    return sorted(ratios) == sorted(ifs.weights)


def dimension_lower_bound(ifs: IFS1D, N: int, measure_mode: str = "exact",
                          cfg: Optional[UBConfig] = None,
                          jobs: int = 1,
                          partition: Optional[Partition] = None) -> BoundReport:
    """Certified lower bound for the dimension of the stationary measure.

    Builds the level-N partition of the hull (or uses the one passed in),
    bounds the conditional entropy per cell, and assembles
    (H - F - E) / lyapunov with every error term pushed in the direction
    that can only lower the result.
    """
    if N < 0:
        raise DomainError("partition level must be >= 0")
    mode = _normalize_mode(measure_mode)
    hull = attractor_hull(ifs)
    if cfg is None:
        cfg = UBConfig(B=hull)

    if partition is None:
        partition = generate_partition(ifs, N)
    conditional = conditional_entropy_upper(ifs, partition, mode, cfg, jobs)
    numerator = _weight_entropy(ifs)
    lyap = _lyapunov_up(ifs)
    serr = next_up(conditional.abs_error + numerator.abs_error)

    if conditional.value == 0.0 and _is_selfsimilar_full(ifs):
        # no overlap and p_i = rho_i: the true value is exactly 1 and every
        # error term above would only blur it, so report it exactly
        dim = 1.0
        serr = 0.0
    else:
        dim = div_down(numerator.value - conditional.value - serr, lyap)
        if dim < 0.0:
            dim = 0.0
        elif dim > 1.0:
            dim = 1.0

    return BoundReport(
        dim_lower=dim,
        numerator_entropy=numerator,
        conditional_upper=conditional,
        lyapunov=lyap,
        partition_cells=partition.n_cells,
        measure_mode=mode,
        summation_error=serr,
    )
