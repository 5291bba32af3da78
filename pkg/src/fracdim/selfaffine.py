"""Dimension lower bounds for planar self-affine measures with diagonal
linear parts.

The system is two maps S_1(x, y) = (x/a, y/b) and
S_2(x, y) = (x/a + 1 - 1/a, y/b + 1 - 1/b) with 1 < a < b < 2 and equal
weights; the invariant measure projects to the one-dimensional overlapping
system with parameter a on the x-axis and to the parameter-b system on the
y-axis.  Writing C_x for the conditional entropy of the two-letter symbol
partition given the x-projection and C_xy for the same given the full
planar point, the measure's dimension is

    (1/log a - 1/log b) * (log 2 - C_x) + (log 2 - C_xy) / log b.

Both conditionals are bounded above by finite-partition computations: C_x
by the one-dimensional entropy pipeline verbatim, C_xy by the same cell
sum over a product grid of axis cylinder endpoints with planar measure
queries.  Since the assembled expression is decreasing in both
conditional-entropy upper bounds, directed rounding turns the two finite
computations into a certified lower bound on the dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .core_math import (
    EntropyValue,
    WeightVector,
    div_down,
    div_up,
    f_ell,
    float_down,
    float_up,
    log_down,
    log_up,
    next_down,
)
from .entropy_bounds import _ledger
from .errors import DomainError, PreconditionError
from .ifs import (
    IFS1D,
    Box2D,
    Interval,
    Partition,
    bernoulli_ifs,
    bernoulli_partition,
)
from .measure_bounds import (
    UBConfig,
    inverse_map_floats,
    measure_upper_bound_2d_batch,
)

__all__ = ["DiagonalIFS2D", "PlanarBoundReport", "selfaffine_lower_bound"]

#: below this many grid queries the planar engine is asked for exact
#: rational frontier weights instead of rounded float bounds
_EXACT_QUERY_LIMIT = 1 << 17

#: default cap on the planar grid depth; cells grow like 4**level, so the
#: grid is held at this depth even when the x-projection level N exceeds it
_GRID_LEVEL_CAP = 6


def _coerce_param(value):
    """(float, exact-or-None) for a map parameter given as float, Fraction,
    int, or decimal string."""
    if isinstance(value, float):
        return value, None
    exact = Fraction(value)
    return float(exact), exact


class DiagonalIFS2D:
    """The two-map diagonal system on the unit square.

    Parameters may be exact (Fraction / decimal string), which propagates
    exact arithmetic into the axis systems, or plain floats.
    component_maps pairs the x- and y-parts per map for the planar engine.
    """

    def __init__(self, alpha, beta):
        af, ax = _coerce_param(alpha)
        bf, bx = _coerce_param(beta)
        if not (1.0 < af < bf < 2.0):
            raise DomainError(
                f"need 1 < alpha < beta < 2, got alpha={af}, beta={bf}")
        self.alpha = af
        self.beta = bf
        self.alpha_exact = ax
        self.beta_exact = bx
        self._x = bernoulli_ifs(ax if ax is not None else af)
        self._y = bernoulli_ifs(bx if bx is not None else bf)
        self.component_maps = tuple(zip(self._x.maps, self._y.maps))
        self.weights = WeightVector.equal(2)

    @property
    def x_ifs(self) -> IFS1D:
        return self._x

    @property
    def y_ifs(self) -> IFS1D:
        return self._y

    def __repr__(self):
        return f"DiagonalIFS2D(alpha={self.alpha!r}, beta={self.beta!r})"


@dataclass(frozen=True)
class PlanarBoundReport:
    """Certified lower bound with the two conditional-entropy pieces.

    cond_x / cond_xy are upper bounds (value + abs_error is what the
    assembly consumed); level / grid_level are the axis cylinder depths
    behind the 1D partition and the planar grid.
    """

    dim_lower: float
    cond_x: EntropyValue
    cond_xy: EntropyValue
    level: int
    grid_level: int
    cells_x: int
    cells_xy: int
    measure_mode: str

    def to_json_dict(self) -> dict:
        return {
            "dim_lower": self.dim_lower,
            "cond_x": self.cond_x.value,
            "cond_x_err": self.cond_x.abs_error,
            "cond_xy": self.cond_xy.value,
            "cond_xy_err": self.cond_xy.abs_error,
            "level": self.level,
            "grid_level": self.grid_level,
            "cells_x": self.cells_x,
            "cells_xy": self.cells_xy,
            "measure_mode": self.measure_mode,
        }


def _grid_rows(ifs2d: DiagonalIFS2D, xpart: Partition, ypart: Partition,
               cfg: UBConfig, jobs: int, measure_mode: str):
    """Per-grid-cell rows (p_1*ub_1, p_2*ub_2) of planar preimage masses.

    The preimage of cell D under S_i is a box, taken per axis with the same
    float inverse parameters the engine iterates and clipped to B; an empty
    clip is an exact zero.
    """
    B = cfg.B
    if not isinstance(B, Box2D) or B.is_empty:
        raise PreconditionError("planar queries need a nonempty Box2D B")
    params = [(inverse_map_floats(mx), inverse_map_floats(my))
              for mx, my in ifs2d.component_maps]
    p_floats = ifs2d.weights.floats()
    xcells = xpart.cells()
    ycells = ypart.cells()
    n_cells = len(xcells) * len(ycells)

    qx_lo = []
    qx_hi = []
    qy_lo = []
    qy_hi = []
    slots = []
    for ci, cx in enumerate(xcells):
        for cj, cy in enumerate(ycells):
            for mi, ((Mx, cxo), (My, cyo)) in enumerate(params):
                xlo = max(Mx * cx.lo + cxo, B.x.lo)
                xhi = min(Mx * cx.hi + cxo, B.x.hi)
                ylo = max(My * cy.lo + cyo, B.y.lo)
                yhi = min(My * cy.hi + cyo, B.y.hi)
                if xlo <= xhi and ylo <= yhi:
                    qx_lo.append(xlo)
                    qx_hi.append(xhi)
                    qy_lo.append(ylo)
                    qy_hi.append(yhi)
                    slots.append((ci * len(ycells) + cj, mi))

    nq = len(qx_lo)
    use_exact = measure_mode == "exact" and nq <= _EXACT_QUERY_LIMIT
    bcfg = UBConfig(B=B, L=cfg.L, gamma=cfg.gamma, coalesce=cfg.coalesce,
                    cap=cfg.cap, collect_exact=use_exact, chunk=cfg.chunk)
    br = measure_upper_bound_2d_batch(
        ifs2d, np.array(qx_lo), np.array(qx_hi),
        np.array(qy_lo), np.array(qy_hi), bcfg, jobs=jobs)
    if use_exact and br.exact is not None:
        ubs = [float(x) for x in br.exact]
    else:
        ubs = br.bounds.tolist()

    rows = [[0.0, 0.0] for _ in range(n_cells)]
    for (cell, mi), ub in zip(slots, ubs):
        rows[cell][mi] = p_floats[mi] * ub
    return rows


def _conditional_entropy_2d(ifs2d: DiagonalIFS2D, xpart: Partition,
                            ypart: Partition, cfg: UBConfig, jobs: int,
                            measure_mode: str) -> EntropyValue:
    rows = _grid_rows(ifs2d, xpart, ypart, cfg, jobs, measure_mode)
    total = 0.0
    nonzero = 0
    for row in rows:
        term = f_ell(row)
        if term:
            nonzero += 1
        total += term
    return EntropyValue(total, _ledger(nonzero, abs(total)))


def _float_bounds(value_f: float, exact) -> Tuple[float, float]:
    if exact is None:
        return value_f, value_f
    return float_down(exact), float_up(exact)


def selfaffine_lower_bound(ifs2d: DiagonalIFS2D, N: int,
                           cfg: Optional[UBConfig] = None,
                           grid_level: Optional[int] = None,
                           measure_mode: str = "alg38",
                           jobs: int = 1) -> PlanarBoundReport:
    """Certified dimension lower bound from level-N conditional entropies.

    N is the axis cylinder depth for the x-projection term; grid_level is
    the depth of the endpoint grid behind the planar term, which is
    quadratically more expensive in cells and therefore defaults to
    min(N, 6) rather than tracking N.  measure_mode "exact" requests exact
    rational planar frontier masses and the exact cylinder solver on the
    x-axis; "alg38" uses the certified float engine for both.
    """
    if N < 1:
        raise DomainError("level must be >= 1")
    gl = min(N, _GRID_LEVEL_CAP) if grid_level is None else grid_level
    if gl < 1:
        raise DomainError("grid level must be >= 1")
    if measure_mode not in ("exact", "alg38"):
        raise DomainError(f"unknown measure mode {measure_mode!r}")
    if cfg is None:
        unit = Interval(0.0, 1.0)
        cfg = UBConfig(B=Box2D(unit, unit))
    if not isinstance(cfg.B, Box2D):
        raise PreconditionError("cfg.B must be a Box2D for the planar term")

    gx, gy = cfg.gamma if isinstance(cfg.gamma, tuple) else (cfg.gamma,) * 2
    from .entropy_bounds import conditional_entropy_upper

    # slowly contracting maps keep ~1e5 live regions per query at depth 40,
    # so bound peak memory by handing the engine small query chunks
    chunk = 32 if cfg.chunk is None else cfg.chunk
    xpart = bernoulli_partition(ifs2d.alpha, N, ifs2d.alpha_exact)
    cfg_x = UBConfig(B=cfg.B.x, L=cfg.L, gamma=gx, coalesce=cfg.coalesce,
                     cap=cfg.cap, collect_exact=False, chunk=chunk)
    cond_x = conditional_entropy_upper(ifs2d.x_ifs, xpart,
                                       measure_mode=measure_mode,
                                       cfg=cfg_x, jobs=jobs)

    gx_part = xpart if gl == N else bernoulli_partition(
        ifs2d.alpha, gl, ifs2d.alpha_exact)
    gy_part = bernoulli_partition(ifs2d.beta, gl, ifs2d.beta_exact)
    cond_xy = _conditional_entropy_2d(ifs2d, gx_part, gy_part,
                                      replace(cfg, chunk=chunk), jobs,
                                      measure_mode)

    # assembly, each step rounded toward a valid lower bound
    a_lo, a_hi = _float_bounds(ifs2d.alpha, ifs2d.alpha_exact)
    b_lo, b_hi = _float_bounds(ifs2d.beta, ifs2d.beta_exact)
    log2_dn = log_down(2.0)
    ex = next_down(log2_dn - (cond_x.value + cond_x.abs_error))
    exy = next_down(log2_dn - (cond_xy.value + cond_xy.abs_error))
    ex = max(ex, 0.0)
    exy = max(exy, 0.0)
    factor = next_down(div_down(1.0, log_up(a_hi)) -
                       div_up(1.0, log_down(b_lo)))
    factor = max(factor, 0.0)
    dim = next_down(next_down(factor * ex) + div_down(exy, log_up(b_hi)))
    dim = min(max(dim, 0.0), 2.0)
    return PlanarBoundReport(
        dim_lower=dim,
        cond_x=cond_x,
        cond_xy=cond_xy,
        level=N,
        grid_level=gl,
        cells_x=xpart.n_cells,
        cells_xy=gx_part.n_cells * gy_part.n_cells,
        measure_mode=measure_mode,
    )
