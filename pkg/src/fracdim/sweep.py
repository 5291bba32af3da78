"""Uniform dimension lower bounds over parameter intervals.

A single certified run of the conditional-entropy machinery at parameter
``beta`` only says something about that one ``beta``.  To cover a whole
interval the query rectangles are padded by an epsilon that absorbs how far
the preimages can drift as the parameter moves by ``delta``, and the final
quotient is taken against ``log(beta + delta)``; the resulting number is a
lower bound on the dimension simultaneously for every parameter in
``[beta, beta + delta]``.  A schedule of such cells tiles a range, and the
runner reduces the per-cell rows to a global minimum plus the set of cells
falling below a threshold.

Also here: the k-th power trick (``dim >= log2 / (k log beta)`` whenever
``beta^k >= 2``) and the closed-form bounds at the multinacci parameters,
with their interval-mass subroutine cross-checkable against the exact
cylinder solver.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .algebraic import multinacci_field
from .core_math import (UNIT_ROUNDOFF, div_down, float_down, float_up,
                        log_down, log_up, next_down, next_up)
from .entropy_bounds import _fsum, _ledger
from .errors import DomainError, FracdimError, PreconditionError
from .ifs import Interval, bernoulli_ifs, bernoulli_partition
from .measure_bounds import (UBConfig, exact_seed_measures,
                             inverse_map_floats, measure_upper_bound_batch)

_U = UNIT_ROUNDOFF
_SQRT2 = math.sqrt(2.0)

#: pad for the float preimage recursion of the two-map systems swept here
DEFAULT_GAMMA = 10.2 * 2.0 ** -53

#: cells whose uniform bound falls below this are reported as exceptional
DEFAULT_THRESHOLD = 0.9804094

# beyond this many queries the per-query exact mass ledgers cost more than
# they are worth; the certified float faces are inflated upward only, which
# is the safe direction for the y_i
_EXACT_QUERY_LIMIT = 20_000


@dataclass(frozen=True)
class SweepCell:
    """One tile [beta, beta + delta] of a parameter schedule.

    beta_text / delta_text carry the exact decimal strings a schedule file
    spelled, when the cell came from one; beta is then the decimal rounded
    down and delta rounded up so the float tile still covers the decimal one.
    """

    beta: float
    delta: float
    N: int
    L: int
    gamma: float = DEFAULT_GAMMA
    beta_text: Optional[str] = None
    delta_text: Optional[str] = None

    def __post_init__(self) -> None:
        if not (self.delta > 0.0 and math.isfinite(self.delta)):
            raise DomainError(f"need delta > 0, got {self.delta!r}")
        if not self.beta >= _SQRT2:
            raise DomainError(f"cell parameter {self.beta!r} below sqrt(2)")
        if Fraction(self.beta) + Fraction(self.delta) > 2:
            raise DomainError("cell sticks out past 2")
        if self.N < 1 or self.L < 1:
            raise DomainError("need N >= 1 and L >= 1")
        if not (0.0 < self.gamma < 1e-6):
            raise DomainError(f"implausible gamma {self.gamma!r}")

    @property
    def beta_end(self) -> float:
        return self.beta + self.delta


@dataclass(frozen=True)
class SweepRow:
    """Result for one cell: a bound valid on all of [beta, beta + delta],
    or a failure note (never an uncertified number)."""

    cell: SweepCell
    bound: float
    elapsed_seconds: float
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def epsilon(beta: float, delta: float) -> float:
    """Query pad absorbing a parameter move of delta upward from beta.

    (delta/beta)(1 + 3/beta^4) up to 1.5 inclusive, (delta/beta)(1 + 2/beta^3)
    above; evaluated exactly and rounded up.  The formula shrinks as beta
    grows, so evaluating at a rounded-down beta stays on the safe side.
    """
    if not (_SQRT2 <= beta <= 2.0):
        raise DomainError(f"pad formula only covers [sqrt(2), 2]; got {beta!r}")
    if not delta > 0.0:
        raise DomainError("need delta > 0")
    b, d = Fraction(beta), Fraction(delta)
    if beta <= 1.5:
        e = (d / b) * (1 + 3 / b ** 4)
    else:
        e = (d / b) * (1 + 2 / b ** 3)
    return float_up(e)


def uniform_lower_bound(cell: SweepCell, jobs: int = 1) -> SweepRow:
    """Certified lower bound on the dimension for every parameter in the
    cell, via level-N conditional entropy with epsilon-padded queries.

    Each partition cell [a, b] is padded to [a - eps, b + eps], pulled back
    through both inverse branches, clipped to [0, 1], and its mass bounded
    from above at depth L; f of the half-masses is summed in cell order, the
    summation ledger is subtracted, and the quotient is taken against
    log(beta + delta) rounded up.
    """
    t0 = time.monotonic()
    beta, delta = cell.beta, cell.delta
    eps = epsilon(beta, delta)

    # exact rational parameters so the inverse-branch floats are the
    # correctly rounded (beta, 0) and (beta, 1 - beta)
    ifs = bernoulli_ifs(Fraction(beta))
    part = bernoulli_partition(beta, cell.N)
    B = Interval(0.0, 1.0)
    params = [inverse_map_floats(m) for m in ifs.maps]

    qlo: List[float] = []
    qhi: List[float] = []
    slots: List[Tuple[int, int]] = []
    for ci, pcell in enumerate(part.cells()):
        a = pcell.lo - eps
        b = pcell.hi + eps
        for mi, (M, c) in enumerate(params):
            lo = max(M * a + c, 0.0)
            hi = min(M * b + c, 1.0)
            if lo <= hi:
                qlo.append(lo)
                qhi.append(hi)
                slots.append((ci, mi))

    nq = len(qlo)
    use_exact = nq <= _EXACT_QUERY_LIMIT
    cfg = UBConfig(B=B, L=cell.L, gamma=cell.gamma, collect_exact=use_exact)
    br = measure_upper_bound_batch(ifs, np.array(qlo), np.array(qhi), cfg,
                                   jobs=jobs)
    ubs = [float(x) for x in br.exact] if use_exact else br.bounds.tolist()

    rows = [[0.0, 0.0] for _ in range(part.n_cells)]
    for (ci, mi), ub in zip(slots, ubs):
        rows[ci][mi] = 0.5 * ub

    t, _ = _fsum(rows)
    err = _ledger(part.n_cells, t)
    num = log_down(2.0) - t - err
    den = log_up(next_up(beta + delta))
    bound = min(1.0, max(0.0, div_down(num, den)))
    return SweepRow(cell, bound, time.monotonic() - t0)


def power_trick_bound(beta: float, k: int) -> float:
    """log2 / (k log beta), rounded down; a dimension lower bound whenever
    beta^k reaches 2 (k-fold convolution square-trick)."""
    if not (isinstance(k, int) and k >= 1):
        raise DomainError(f"need an integer k >= 1, got {k!r}")
    if not beta > 1.0:
        raise DomainError(f"need beta > 1, got {beta!r}")
    bk = Fraction(beta) ** k
    if bk < 2:
        raise PreconditionError(
            f"beta^k = {float(bk)} < 2; the bound is not valid there")
    if bk == 2:
        return 1.0
    return div_down(log_down(2.0), next_up(k * log_up(beta)))


def _multinacci_root(degree: int) -> Tuple[float, float]:
    """Bracket of width <= 1e-15 around the largest root of
    x^degree - x^(degree-1) - ... - x - 1."""

    def poly(x: float) -> float:
        acc = 1.0
        for _ in range(degree):
            acc = acc * x - 1.0
        return acc

    lo, hi = 1.5, 2.0
    while hi - lo > 1e-15:
        mid = 0.5 * (lo + hi)
        if poly(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    return lo, hi


def multinacci_interval_measure(n: int) -> Fraction:
    """Exact mass of [0, beta - 1] for the degree-n multinacci system
    (largest root of x^n = x^(n-1) + ... + 1), via the cylinder solver.

    Closed form (2^n - 2)/(2^n - 1); kept as a genuinely independent
    computation so the closed form can be checked against it.
    """
    if n < 2:
        raise DomainError("need n >= 2")
    fld = multinacci_field(n)
    beta = fld.gen()
    ifs = bernoulli_ifs(beta)
    return exact_seed_measures(ifs, [(fld.from_rational(0), beta - 1)])[0]


def multinacci_bound(n: int) -> float:
    """Dimension lower bound (2^n - 2)/(2^n - 1) * log2 / log(root) valid on
    the parameter stretch between the degree-n and degree-(n+1) multinacci
    roots, rounded down."""
    if n < 2:
        raise DomainError("need n >= 2")
    _, root_hi = _multinacci_root(n + 1)
    mass = float_down(Fraction(2 ** n - 2, 2 ** n - 1))
    num = next_down(mass * log_down(2.0))
    den = log_up(root_hi)
    return div_down(num, den)


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class ScheduleBand:
    """One schedule line: cells of width delta starting at beta_start,
    beta_end being the start of the last cell (so the band covers
    [beta_start, beta_end + delta])."""

    beta_start: Decimal
    beta_end: Decimal
    N: int
    L: int
    delta: Decimal

    @property
    def n_cells(self) -> int:
        return int((self.beta_end - self.beta_start) / self.delta) + 1

    @property
    def cover_end(self) -> Decimal:
        return self.beta_end + self.delta


_SCHEDULE_COLUMNS = ("beta_start", "beta_end", "N", "L", "delta")


def parse_schedule_csv(path: str) -> List[ScheduleBand]:
    """Read a schedule file (columns beta_start, beta_end, N, L, delta;
    decimal strings taken at face value) and validate it as an exact tiling:
    band-internal widths must divide evenly and consecutive bands must be
    flush, in decimal arithmetic, no floats involved."""
    bands: List[ScheduleBand] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in _SCHEDULE_COLUMNS if c not in cols]
        if missing:
            raise DomainError(f"schedule file lacks columns {missing}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                band = ScheduleBand(beta_start=Decimal(rec["beta_start"]),
                                    beta_end=Decimal(rec["beta_end"]),
                                    N=int(rec["N"]), L=int(rec["L"]),
                                    delta=Decimal(rec["delta"]))
            except (ArithmeticError, ValueError) as exc:
                raise DomainError(f"bad schedule line {lineno}: {exc}") from exc
            bands.append(band)
    validate_schedule(bands)
    return bands


def validate_schedule(bands: Sequence[ScheduleBand]) -> None:
    prev: Optional[ScheduleBand] = None
    for band in bands:
        if band.delta <= 0:
            raise DomainError(f"band {band} has nonpositive delta")
        if band.beta_end < band.beta_start:
            raise DomainError(f"band {band} runs backwards")
        if (band.beta_end - band.beta_start) % band.delta != 0:
            raise DomainError(
                f"band at {band.beta_start} does not tile: width "
                f"{band.beta_end - band.beta_start} not a multiple of "
                f"{band.delta}")
        if prev is not None and band.beta_start != prev.cover_end:
            raise DomainError(
                f"schedule gap: band ending at {prev.cover_end} is followed "
                f"by one starting at {band.beta_start}")
        prev = band


def _decimal_str(d: Decimal) -> str:
    s = str(d.normalize())
    return s if "E" not in s else format(d.normalize(), "f")


def expand_schedule(bands: Sequence[ScheduleBand]) -> List[SweepCell]:
    """Turn bands into concrete cells.  The decimal left endpoint is rounded
    down to binary and the step widened to keep the float tile a superset of
    the decimal one."""
    validate_schedule(bands)
    cells: List[SweepCell] = []
    for band in bands:
        for j in range(band.n_cells):
            b_dec = band.beta_start + j * band.delta
            beta = float_down(Fraction(b_dec))
            delta = float_up(Fraction(b_dec + band.delta) - Fraction(beta))
            cells.append(SweepCell(beta=beta, delta=delta, N=band.N,
                                   L=band.L, beta_text=_decimal_str(b_dec),
                                   delta_text=_decimal_str(band.delta)))
    return cells


@dataclass(frozen=True)
class SweepSummary:
    threshold: float
    vacuous: bool
    certified: bool
    failed: int
    minimum: Optional[float] = None
    argmin_beta: Optional[float] = None
    exceptional: Tuple[SweepRow, ...] = ()

    @property
    def exceptional_range(self) -> Optional[Tuple[float, float]]:
        """Hull [min beta, max beta + delta] of the cells below threshold."""
        if not self.exceptional:
            return None
        return (min(r.cell.beta for r in self.exceptional),
                max(r.cell.beta_end for r in self.exceptional))


def run_schedule(cells: Sequence[SweepCell],
                 threshold: float = DEFAULT_THRESHOLD,
                 jobs: int = 1) -> Tuple[List[SweepRow], SweepSummary]:
    """Bound every cell and reduce: global minimum plus the cells whose bound
    drops below the threshold.  Cells are independent, results are keyed by
    position, and the reduction is a minimum, so any degree of parallelism
    gives byte-identical output.  A failed cell keeps its row (with the error
    recorded) but forfeits the certification claim.
    """
    cells = list(cells)
    if not cells:
        return [], SweepSummary(threshold=threshold, vacuous=True,
                                certified=False, failed=0)

    def one(cell: SweepCell) -> SweepRow:
        t0 = time.monotonic()
        try:
            return uniform_lower_bound(cell)
        except FracdimError as exc:
            return SweepRow(cell, math.nan, time.monotonic() - t0,
                            error=f"{type(exc).__name__}: {exc}")

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, cells))
    else:
        rows = [one(c) for c in cells]

    good = [r for r in rows if r.ok]
    failed = len(rows) - len(good)
    minimum = argmin = None
    if good:
        best = min(good, key=lambda r: r.bound)
        minimum, argmin = best.bound, best.cell.beta
    summary = SweepSummary(
        threshold=threshold, vacuous=False, certified=failed == 0,
        failed=failed, minimum=minimum, argmin_beta=argmin,
        exceptional=tuple(r for r in good if r.bound < threshold))
    return rows, summary


_ROW_COLUMNS = ("beta", "bound", "N", "L", "delta", "elapsed_seconds")


def rows_csv_text(rows: Sequence[SweepRow], stable: bool = False) -> str:
    """One line per cell, mirroring the result-table layout, numeric fields
    at 15 significant digits.  stable zeroes the timings so reruns diff
    clean."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(_ROW_COLUMNS)
    for r in rows:
        c = r.cell
        w.writerow([c.beta_text or "%.15g" % c.beta,
                    "%.15g" % r.bound if r.ok else f"failed: {r.error}",
                    c.N, c.L,
                    c.delta_text or "%.15g" % c.delta,
                    "0.0" if stable else "%.15g" % r.elapsed_seconds])
    return buf.getvalue()


def write_rows_csv(rows: Sequence[SweepRow], path: str,
                   stable: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(rows_csv_text(rows, stable))


def write_plot_csv(rows: Sequence[SweepRow], path: str) -> None:
    """(midpoint, bound) pairs for plotting; failed rows are skipped."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("beta_midpoint", "bound"))
        for r in rows:
            if r.ok:
                w.writerow(["%.15g" % (r.cell.beta + 0.5 * r.cell.delta),
                            "%.15g" % r.bound])
