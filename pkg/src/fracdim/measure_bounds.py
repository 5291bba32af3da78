"""Certified upper bounds on the measure of intervals (and boxes) under a
self-similar measure, plus an exact rational solver for cylinder measures.

The branch-and-bound engine maintains a frontier of weighted regions (t, E)
with the invariant  mu(A) <= u_absorbed + sum of t*mu(E)  at every stage, so
stopping anywhere yields a valid upper bound.  Children are produced by the
float recursion  E' = [fl(fl(M*lo)+c) - gamma, fl(fl(M*hi)+c) + gamma] ^ B
where M, c are the correctly rounded inverse-map parameters and the gamma pad
absorbs every rounding error (including the error of M, c themselves against
the exact map), so E' is guaranteed to contain the true preimage clipped to B.
Children covering all of B are absorbed into the accumulator with their weight;
empty children are dropped.

With equal weights all weights are exact ell-adic rationals p*ell^-n and the
final bound carries no floating error at all; the general-weights branch keeps
float weights inflated by (1+gamma) per multiplication and adds an explicit
summation-error term at the end.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .algebraic import FieldElement
from .core_math import UNIT_ROUNDOFF, float_up, next_up
from .errors import (
    FracdimError,
    DomainError,
    NotFinitelyResolvable,
    PreconditionError,
)
from .ifs import Box2D, IFS1D, Interval, Similarity1D, attractor_hull

#: default cap on branch-and-bound regions processed in one query
DEFAULT_NODE_CAP = 10 ** 8

_CAP_ENV = "FRACDIM_CELL_CAP"

_U = UNIT_ROUNDOFF
_U_FRAC = Fraction(1, 2 ** 53)


def node_cap() -> int:
    raw = os.environ.get(_CAP_ENV)
    if raw:
        try:
            return int(raw)
        except ValueError:
            pass
    return DEFAULT_NODE_CAP


# ---------------------------------------------------------------------------
# configuration / results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightedRegion:
    """One (t, E) frontier entry; weight is an exact Fraction in the
    equal-weights branch and a float in the general branch."""

    weight: object
    region: Union[Interval, Box2D]


@dataclass
class UBConfig:
    """Engine parameters: bounding region B (with S_i(B) inside B, checked at
    run time against the maps), iteration depth L, and the preimage pad gamma
    (None selects a certified automatic pad derived from the maps)."""

    B: Union[Interval, Box2D]
    L: int = 40
    gamma: Optional[Union[float, Tuple[float, float]]] = None
    coalesce: bool = False
    cap: Optional[int] = None
    collect_exact: bool = True
    #: batch-engine queries per chunk; None keeps the engine default.  Slowly
    #: contracting maps hold ~1e5 frontier regions per query at L=40, so
    #: peak memory is proportional to this.
    chunk: Optional[int] = None

    def __post_init__(self):
        if self.L < 1:
            raise DomainError("iteration depth must be >= 1")
        if self.chunk is not None and self.chunk < 1:
            raise DomainError("chunk must be >= 1")
        for g in self._gammas():
            if g is not None:
                if not (g > 0) or not math.isfinite(g):
                    raise DomainError("gamma must be a positive finite float")
                if g < UNIT_ROUNDOFF:
                    raise DomainError(
                        "gamma below the unit roundoff cannot pad the "
                        "recursion's rounding errors")

    def _gammas(self):
        if isinstance(self.gamma, tuple):
            return self.gamma
        return (self.gamma,)


@dataclass
class UBResult:
    """Certified bound u* >= mu(A) plus bookkeeping.  terminated_early means
    the frontier emptied at depth_reached < L (deeper runs return the same
    value); resource_capped means the node cap stopped the run and the bound
    is the still-valid partial value."""

    upper_bound: float
    depth_reached: int
    terminated_early: bool
    regions_processed: int
    exact: Optional[Fraction] = None
    resource_capped: bool = False
    alive_regions: int = 0
    levels: Optional[tuple] = None


# ---------------------------------------------------------------------------
# inverse-map parameters and the automatic pad
# ---------------------------------------------------------------------------

def _exact_params(m: Similarity1D):
    if m.has_exact:
        return m.ratio_exact, m.offset_exact
    return Fraction(m.ratio), Fraction(m.offset)


def inverse_map_floats(m: Similarity1D) -> Tuple[float, float]:
    """Correctly rounded (M, c) with S^-1(x) = M*x + c for the map's exact
    parameters (the float parameters' own rationals when no exact ones)."""
    r, o = _exact_params(m)
    if isinstance(r, FieldElement) or isinstance(o, FieldElement):
        fld = r.field if isinstance(r, FieldElement) else o.field
        minv = 1 / r if isinstance(r, FieldElement) else fld.from_rational(1 / r)
        return fld.float_nearest(minv), fld.float_nearest(-o / r)
    return float(1 / r), float(-o / r)


def fixed_point_fraction(m: Similarity1D) -> Fraction:
    r, o = _exact_params(m)
    if isinstance(r, FieldElement) or isinstance(o, FieldElement):
        fld = r.field if isinstance(r, FieldElement) else o.field
        fp = o / (1 - r)
        lo, hi = fld.float_bounds(fp)
        if lo == hi:
            return Fraction(lo)
        return None  # irrational fixed point; caller falls back
    return o / (1 - r)


def auto_gamma(maps: Sequence[Similarity1D], B: Interval) -> float:
    """Certified pad for the float preimage recursion over B: covers the
    parameter rounding of (M, c), both arithmetic roundings, and the rounding
    of the pad subtraction/addition itself.  First-order budget
    u*(3*M|x| + 3*|Mx+c| + |c|) with the quadratic remainder absorbed by an
    explicit (1+16u) inflation; everything evaluated exactly, rounded up."""
    X = max(abs(Fraction(B.lo)), abs(Fraction(B.hi)))
    worst = Fraction(0)
    for m in maps:
        M, c = inverse_map_floats(m)
        Mf, cf = abs(Fraction(M)), Fraction(c)
        ymax = max(abs(Mf * Fraction(B.lo) + cf), abs(Mf * Fraction(B.hi) + cf))
        worst = max(worst, 3 * Mf * X + 3 * ymax + abs(cf))
    g = _U_FRAC * worst * (1 + 16 * _U_FRAC)
    return next_up(max(float_up(g), UNIT_ROUNDOFF))


def _check_invariance(maps: Sequence[Similarity1D], B: Interval) -> None:
    # S_i(B) inside B for an increasing affine map <=> B contains its fixed
    # point; checked exactly (irrational fixed points via certified floats)
    lo, hi = Fraction(B.lo), Fraction(B.hi)
    for m in maps:
        fp = fixed_point_fraction(m)
        if fp is None:
            r, o = _exact_params(m)
            fld = r.field if isinstance(r, FieldElement) else o.field
            flo, fhi = fld.float_bounds(o / (1 - r))
            ok = lo <= Fraction(flo) and Fraction(fhi) <= hi
        else:
            ok = lo <= fp <= hi
        if not ok:
            raise PreconditionError(
                f"bounding interval {B} is not invariant under map {m}")


def _resolve_gamma(maps, B, gamma) -> float:
    return auto_gamma(maps, B) if gamma is None else float(gamma)


# ---------------------------------------------------------------------------
# scalar reference engine
# ---------------------------------------------------------------------------

def measure_upper_bound(ifs: IFS1D, A: Interval, cfg: Optional[UBConfig] = None,
                        record_levels: bool = False) -> UBResult:
    """Upper bound on mu(A) for the stationary measure of the IFS.

    Requires A inside cfg.B (default B: the attractor hull).  Equal weights
    run the exact-counting branch (result carries the exact Fraction); general
    weights run the float branch with an explicit error term.
    """
    if cfg is None:
        cfg = UBConfig(B=attractor_hull(ifs))
    B = cfg.B
    if not isinstance(B, Interval) or B.is_empty:
        raise PreconditionError("cfg.B must be a nonempty Interval")
    if not A.is_empty and not B.contains_interval(A):
        raise PreconditionError(f"query {A} not contained in B {B}")
    _check_invariance(ifs.maps, B)
    gamma = _resolve_gamma(ifs.maps, B, cfg.gamma)

    if A.is_empty:
        return UBResult(0.0, 0, True, 0, exact=Fraction(0))

    params = [inverse_map_floats(m) for m in ifs.maps]
    if ifs.weights.is_uniform:
        return _scalar_counting(ifs.ell, params, A, B, cfg, gamma, record_levels)
    return _scalar_general(ifs.weights.floats(), params, A, B, cfg, gamma)


def _pad_clip(lo: float, hi: float, blo: float, bhi: float, gamma: float):
    """Initial state: the query padded by gamma (so float-computed query
    endpoints are covered by the certificate), clipped to B."""
    lo = lo - gamma
    hi = hi + gamma
    if lo < blo:
        lo = blo
    if hi > bhi:
        hi = bhi
    return lo, hi


def _scalar_counting(ell, params, A, B, cfg, gamma, record_levels) -> UBResult:
    cap = node_cap() if cfg.cap is None else cfg.cap
    blo, bhi = B.lo, B.hi
    frontier: List[Tuple[int, float, float]] = [
        (1, *_pad_clip(A.lo, A.hi, blo, bhi, gamma))]
    processed = 1
    absorbed: List[Tuple[int, int]] = []  # (level, count)
    levels = [] if record_levels else None
    depth = 0
    capped = False
    for n in range(1, cfg.L + 1):
        if processed + ell * len(frontier) > cap:
            capped = True
            break
        children: List[Tuple[int, float, float]] = []
        absorbed_n = 0
        for M, c in params:
            for cnt, lo, hi in frontier:
                nl = (M * lo + c) - gamma
                nh = (M * hi + c) + gamma
                if nl <= blo and nh >= bhi:
                    absorbed_n += cnt
                    continue
                clo = nl if nl > blo else blo
                chi = nh if nh < bhi else bhi
                if clo <= chi:
                    children.append((cnt, clo, chi))
        if cfg.coalesce:
            merged: Dict[Tuple[float, float], int] = {}
            for cnt, lo, hi in children:
                merged[(lo, hi)] = merged.get((lo, hi), 0) + cnt
            children = [(cnt, lo, hi) for (lo, hi), cnt in merged.items()]
        if absorbed_n:
            absorbed.append((n, absorbed_n))
        processed += len(children)
        frontier = children
        depth = n
        if levels is not None:
            levels.append((n, tuple(frontier), absorbed_n))
        if not frontier:
            break

    total = Fraction(0)
    for n, cnt in absorbed:
        total += Fraction(cnt, ell ** n)
    alive = sum(cnt for cnt, _, _ in frontier)
    if alive:
        total += Fraction(alive, ell ** depth)
    return UBResult(
        upper_bound=float_up(total),
        depth_reached=depth,
        terminated_early=not frontier and not capped and depth < cfg.L,
        regions_processed=processed,
        exact=total if cfg.collect_exact else None,
        resource_capped=capped,
        alive_regions=len(frontier),
        levels=tuple(levels) if levels is not None else None,
    )


def _scalar_general(weights, params, A, B, cfg, gamma) -> UBResult:
    cap = node_cap() if cfg.cap is None else cfg.cap
    blo, bhi = B.lo, B.hi
    one_plus = 1.0 + gamma
    frontier: List[Tuple[float, float, float]] = [
        (1.0, *_pad_clip(A.lo, A.hi, blo, bhi, gamma))]
    processed = 1
    acc = 0.0
    n_add = 0
    depth = 0
    capped = False
    for n in range(1, cfg.L + 1):
        if processed + len(weights) * len(frontier) > cap:
            capped = True
            break
        children: List[Tuple[float, float, float]] = []
        for p, (M, c) in zip(weights, params):
            for t, lo, hi in frontier:
                nl = (M * lo + c) - gamma
                nh = (M * hi + c) + gamma
                tw = (t * p) * one_plus
                if nl <= blo and nh >= bhi:
                    acc += tw
                    n_add += 1
                    continue
                clo = nl if nl > blo else blo
                chi = nh if nh < bhi else bhi
                if clo <= chi:
                    children.append((tw, clo, chi))
        processed += len(children)
        frontier = children
        depth = n
        if not frontier:
            break
    for t, _, _ in frontier:
        acc += t
        n_add += 1
    # one-sided summation slack: n_add*u*sum plus a 0.01u absolute floor
    delta = next_up(n_add * _U * acc + 0.01 * _U)
    return UBResult(
        upper_bound=next_up(acc + delta),
        depth_reached=depth,
        terminated_early=not frontier and not capped and depth < cfg.L,
        regions_processed=processed,
        exact=None,
        resource_capped=capped,
        alive_regions=len(frontier),
    )


# ---------------------------------------------------------------------------
# batched engine (equal weights): same recursion vectorized over many queries
# ---------------------------------------------------------------------------

@dataclass
class BatchUBResult:
    bounds: np.ndarray                 # certified float upper bounds
    exact: Optional[List[Fraction]]    # per-query exact values (if collected)
    depth_reached: int                 # max depth over the batch
    regions_processed: int
    resource_capped: bool
    alive_final: np.ndarray            # surviving region count per query


def measure_upper_bound_batch(ifs: IFS1D, lo: np.ndarray, hi: np.ndarray,
                              cfg: UBConfig, jobs: int = 1,
                              chunk: int = 1 << 18) -> BatchUBResult:
    """measure_upper_bound for many intervals at once (equal weights only).

    Bit-for-bit the scalar recursion, vectorized; per-query results do not
    depend on chunking or on jobs.  bounds[i] is a certified upper bound
    assembled with upward rounding; exact Fractions are collected when
    cfg.collect_exact (slower; meant for small batches).
    """
    if not ifs.weights.is_uniform:
        raise PreconditionError("batched bounds require equal weights")
    B = cfg.B
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if lo.shape != hi.shape or lo.ndim != 1:
        raise DomainError("query arrays must be equal-length 1D")
    if lo.size and (lo.min() < B.lo or hi.max() > B.hi):
        raise PreconditionError("all queries must lie inside B")
    _check_invariance(ifs.maps, B)
    gamma = _resolve_gamma(ifs.maps, B, cfg.gamma)
    params = [inverse_map_floats(m) for m in ifs.maps]

    nq = lo.size
    if nq == 0:
        return BatchUBResult(np.zeros(0), [] if cfg.collect_exact else None,
                             0, 0, False, np.zeros(0, dtype=np.int64))

    if cfg.chunk is not None:
        chunk = cfg.chunk
    spans = [(s, min(s + chunk, nq)) for s in range(0, nq, chunk)]
    results = [None] * len(spans)

    def run(idx):
        s, e = spans[idx]
        results[idx] = _batch_chunk(ifs.ell, params, lo[s:e], hi[s:e],
                                    B, cfg, gamma)

    if jobs > 1 and len(spans) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            list(ex.map(run, range(len(spans))))
    else:
        for i in range(len(spans)):
            run(i)

    bounds = np.concatenate([r[0] for r in results])
    alive = np.concatenate([r[3] for r in results])
    exact = None
    if cfg.collect_exact:
        exact = []
        for r in results:
            exact.extend(r[1])
    return BatchUBResult(
        bounds=bounds,
        exact=exact,
        depth_reached=max(r[2] for r in results),
        regions_processed=sum(r[4] for r in results),
        resource_capped=any(r[5] for r in results),
        alive_final=alive,
    )


def _batch_chunk(ell, params, qlo, qhi, B, cfg, gamma):
    cap = node_cap() if cfg.cap is None else cfg.cap
    nq = qlo.size
    blo, bhi = B.lo, B.hi
    lo = np.maximum(qlo - gamma, blo)
    hi = np.minimum(qhi + gamma, bhi)
    qid = np.arange(nq, dtype=np.int64)
    processed = nq
    # the node budget is per logical query, so a batch gets nq times the cap
    budget = cap * nq
    capped = False
    depth = 0

    pows_up = [None] + [float_up(Fraction(1, ell ** n)) for n in range(1, cfg.L + 1)]
    acc = np.zeros(nq, dtype=np.float64)
    events = [] if cfg.collect_exact else None

    for n in range(1, cfg.L + 1):
        if lo.size == 0:
            break
        if processed + ell * lo.size > budget:
            capped = True
            break
        alive_lo, alive_hi, alive_qid = [], [], []
        absorbed_ids = []
        for M, c in params:
            nl = (M * lo + c) - gamma
            nh = (M * hi + c) + gamma
            absorbed = (nl <= blo) & (nh >= bhi)
            clo = np.maximum(nl, blo)
            chi = np.minimum(nh, bhi)
            keep = ~absorbed & (clo <= chi)
            absorbed_ids.append(qid[absorbed])
            alive_lo.append(clo[keep])
            alive_hi.append(chi[keep])
            alive_qid.append(qid[keep])
        ids_n = np.concatenate(absorbed_ids)
        if ids_n.size:
            cnts = np.bincount(ids_n, minlength=nq).astype(np.float64)
            acc += cnts * pows_up[n]
            if events is not None:
                nz = np.nonzero(cnts)[0]
                events.append((n, nz, cnts[nz].astype(np.int64)))
        lo = np.concatenate(alive_lo)
        hi = np.concatenate(alive_hi)
        qid = np.concatenate(alive_qid)
        processed += lo.size
        depth = n

    alive_cnt = np.bincount(qid, minlength=nq)
    if alive_cnt.any():
        tail_up = pows_up[depth] if depth else 1.0
        acc += alive_cnt.astype(np.float64) * tail_up

    # inflate for the <= 2 roundings per level plus assembly roundings
    bounds = np.nextafter(acc * (1.0 + (2 * cfg.L + 8) * _U), np.inf)
    bounds[acc == 0.0] = 0.0

    exact = None
    if cfg.collect_exact:
        exact = [Fraction(0)] * nq
        for n, ids, cnts in events:
            p = Fraction(1, ell ** n)
            for i, cnt in zip(ids.tolist(), cnts.tolist()):
                exact[i] += cnt * p
        ptail = Fraction(1, ell ** depth)
        for i, cnt in enumerate(alive_cnt.tolist()):
            if cnt:
                exact[i] += cnt * ptail
        bounds = np.array([float_up(x) for x in exact])
    return bounds, exact, depth, alive_cnt, processed, capped


# ---------------------------------------------------------------------------
# diagonal 2D variant
# ---------------------------------------------------------------------------

def measure_upper_bound_2d(ifs2d, A: Box2D, cfg: UBConfig) -> UBResult:
    """Upper bound on mu(A) for a diagonal planar system (preimages of boxes
    are boxes, handled axis by axis with per-axis pads)."""
    res = measure_upper_bound_2d_batch(
        ifs2d,
        np.array([A.x.lo]), np.array([A.x.hi]),
        np.array([A.y.lo]), np.array([A.y.hi]), cfg)
    return UBResult(
        upper_bound=float(res.bounds[0]),
        depth_reached=res.depth_reached,
        terminated_early=res.depth_reached < cfg.L and not res.resource_capped
        and res.alive_final[0] == 0,
        regions_processed=res.regions_processed,
        exact=res.exact[0] if res.exact is not None else None,
        resource_capped=res.resource_capped,
        alive_regions=int(res.alive_final[0]),
    )


def measure_upper_bound_2d_batch(ifs2d, xlo, xhi, ylo, yhi, cfg: UBConfig,
                                 jobs: int = 1, chunk: int = 1 << 17):
    """Batched diagonal-2D branch and bound (equal weights only)."""
    maps = ifs2d.component_maps  # sequence of (x-map, y-map) Similarity1D pairs
    if not ifs2d.weights.is_uniform:
        raise PreconditionError("2D engine requires equal weights")
    B = cfg.B
    if not isinstance(B, Box2D) or B.is_empty:
        raise PreconditionError("cfg.B must be a nonempty Box2D")
    xmaps = [mx for mx, _ in maps]
    ymaps = [my for _, my in maps]
    _check_invariance(xmaps, B.x)
    _check_invariance(ymaps, B.y)
    if isinstance(cfg.gamma, tuple):
        gx, gy = cfg.gamma
        gx = _resolve_gamma(xmaps, B.x, gx)
        gy = _resolve_gamma(ymaps, B.y, gy)
    else:
        gx = _resolve_gamma(xmaps, B.x, cfg.gamma)
        gy = _resolve_gamma(ymaps, B.y, cfg.gamma)
    px = [inverse_map_floats(m) for m in xmaps]
    py = [inverse_map_floats(m) for m in ymaps]

    xlo = np.asarray(xlo, dtype=np.float64)
    xhi = np.asarray(xhi, dtype=np.float64)
    ylo = np.asarray(ylo, dtype=np.float64)
    yhi = np.asarray(yhi, dtype=np.float64)
    nq = xlo.size
    if not (xlo.shape == xhi.shape == ylo.shape == yhi.shape):
        raise DomainError("query arrays must agree in shape")
    if nq and (xlo.min() < B.x.lo or xhi.max() > B.x.hi
               or ylo.min() < B.y.lo or yhi.max() > B.y.hi):
        raise PreconditionError("all query boxes must lie inside B")
    if nq == 0:
        return BatchUBResult(np.zeros(0), [] if cfg.collect_exact else None,
                             0, 0, False, np.zeros(0, dtype=np.int64))

    if cfg.chunk is not None:
        chunk = cfg.chunk
    spans = [(s, min(s + chunk, nq)) for s in range(0, nq, chunk)]
    results = [None] * len(spans)

    def run(idx):
        s, e = spans[idx]
        results[idx] = _batch_chunk_2d(
            len(maps), px, py, xlo[s:e], xhi[s:e], ylo[s:e], yhi[s:e],
            B, cfg, gx, gy)

    if jobs > 1 and len(spans) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            list(ex.map(run, range(len(spans))))
    else:
        for i in range(len(spans)):
            run(i)

    bounds = np.concatenate([r[0] for r in results])
    alive = np.concatenate([r[3] for r in results])
    exact = None
    if cfg.collect_exact:
        exact = []
        for r in results:
            exact.extend(r[1])
    return BatchUBResult(
        bounds=bounds,
        exact=exact,
        depth_reached=max(r[2] for r in results),
        regions_processed=sum(r[4] for r in results),
        resource_capped=any(r[5] for r in results),
        alive_final=alive,
    )


def _batch_chunk_2d(ell, px, py, qxlo, qxhi, qylo, qyhi, B, cfg, gx, gy):
    cap = node_cap() if cfg.cap is None else cfg.cap
    nq = qxlo.size
    bxlo, bxhi, bylo, byhi = B.x.lo, B.x.hi, B.y.lo, B.y.hi
    xlo = np.maximum(qxlo - gx, bxlo)
    xhi = np.minimum(qxhi + gx, bxhi)
    ylo = np.maximum(qylo - gy, bylo)
    yhi = np.minimum(qyhi + gy, byhi)
    qid = np.arange(nq, dtype=np.int64)
    processed = nq
    budget = cap * nq
    capped = False
    depth = 0

    pows_up = [None] + [float_up(Fraction(1, ell ** n)) for n in range(1, cfg.L + 1)]
    acc = np.zeros(nq, dtype=np.float64)
    events = [] if cfg.collect_exact else None

    for n in range(1, cfg.L + 1):
        if xlo.size == 0:
            break
        if processed + ell * xlo.size > budget:
            capped = True
            break
        keep_parts = []
        absorbed_ids = []
        for (Mx, cx), (My, cy) in zip(px, py):
            nxl = (Mx * xlo + cx) - gx
            nxh = (Mx * xhi + cx) + gx
            nyl = (My * ylo + cy) - gy
            nyh = (My * yhi + cy) + gy
            absorbed = ((nxl <= bxlo) & (nxh >= bxhi)
                        & (nyl <= bylo) & (nyh >= byhi))
            cxl = np.maximum(nxl, bxlo)
            cxh = np.minimum(nxh, bxhi)
            cyl = np.maximum(nyl, bylo)
            cyh = np.minimum(nyh, byhi)
            keep = ~absorbed & (cxl <= cxh) & (cyl <= cyh)
            absorbed_ids.append(qid[absorbed])
            keep_parts.append((cxl[keep], cxh[keep], cyl[keep], cyh[keep],
                               qid[keep]))
        ids_n = np.concatenate(absorbed_ids)
        if ids_n.size:
            cnts = np.bincount(ids_n, minlength=nq).astype(np.float64)
            acc += cnts * pows_up[n]
            if events is not None:
                nz = np.nonzero(cnts)[0]
                events.append((n, nz, cnts[nz].astype(np.int64)))
        xlo = np.concatenate([p[0] for p in keep_parts])
        xhi = np.concatenate([p[1] for p in keep_parts])
        ylo = np.concatenate([p[2] for p in keep_parts])
        yhi = np.concatenate([p[3] for p in keep_parts])
        qid = np.concatenate([p[4] for p in keep_parts])
        processed += xlo.size
        depth = n

    alive_cnt = np.bincount(qid, minlength=nq)
    if alive_cnt.any():
        tail_up = pows_up[depth] if depth else 1.0
        acc += alive_cnt.astype(np.float64) * tail_up
    bounds = np.nextafter(acc * (1.0 + (2 * cfg.L + 8) * _U), np.inf)
    bounds[acc == 0.0] = 0.0

    exact = None
    if cfg.collect_exact:
        exact = [Fraction(0)] * nq
        for n, ids, cnts in events:
            p = Fraction(1, ell ** n)
            for i, cnt in zip(ids.tolist(), cnts.tolist()):
                exact[i] += cnt * p
        ptail = Fraction(1, ell ** depth)
        for i, cnt in enumerate(alive_cnt.tolist()):
            if cnt:
                exact[i] += cnt * ptail
        bounds = np.array([float_up(x) for x in exact])
    return bounds, exact, depth, alive_cnt, processed, capped


# ---------------------------------------------------------------------------
# exact cylinder measures
# ---------------------------------------------------------------------------

DEFAULT_ORBIT_CAP = 500_000


def exact_cylinder_measures(ifs: IFS1D, seeds, cap: int = DEFAULT_ORBIT_CAP):
    """Exact mu for every interval in the closed orbit of the seeds under
    J -> S_i^{-1}(J) ^ hull, solving mu(J) = sum p_i mu(S_i^{-1}J ^ hull)
    with mu(hull)=1 and mu(point)=mu(empty)=0 in exact arithmetic.

    Seeds may be float Intervals (endpoints taken as their exact binary64
    rationals) or (lo, hi) pairs of Fractions / FieldElements.  Returns a dict
    keyed by canonical endpoint pairs (Fractions, or coefficient tuples for
    field elements); measures are exact Fractions.  Raises
    NotFinitelyResolvable if the orbit fails to close within the cap.
    """
    per_seed, full = _exact_closure(ifs, seeds, cap)
    return full


def exact_seed_measures(ifs: IFS1D, seeds,
                        cap: int = DEFAULT_ORBIT_CAP) -> List[Fraction]:
    """Like exact_cylinder_measures, but returns a list aligned with seeds
    (duplicate and degenerate seeds welcome)."""
    per_seed, full = _exact_closure(ifs, seeds, cap)
    return per_seed


def _exact_closure(ifs: IFS1D, seeds, cap: int):
    exact_maps = [_exact_params(m) for m in ifs.maps]
    fld = None
    for r, o in exact_maps:
        if isinstance(r, FieldElement):
            fld = r.field
        elif isinstance(o, FieldElement):
            fld = o.field

    def lift(v):
        if fld is not None and not isinstance(v, FieldElement):
            return fld.from_rational(Fraction(v))
        if fld is None and not isinstance(v, Fraction):
            return Fraction(v)
        return v

    exact_maps = [(lift(r), lift(o)) for r, o in exact_maps]
    fps = [o / (1 - r) for r, o in exact_maps]
    hull_lo, hull_hi = min(fps), max(fps)

    def key(a, b):
        if isinstance(a, FieldElement):
            return (a.coeffs, b.coeffs)
        return (a, b)

    def canon(seed):
        if isinstance(seed, Interval):
            if seed.is_empty:
                raise DomainError("empty seed interval")
            a, b = lift(seed.lo), lift(seed.hi)
        else:
            a, b = lift(seed[0]), lift(seed[1])
        # clip to the hull; measures live there
        if a < hull_lo:
            a = hull_lo
        if b > hull_hi:
            b = hull_hi
        return a, b

    weights = list(ifs.weights)

    # breadth-first closure
    consts: Dict[tuple, Fraction] = {}
    edges: Dict[tuple, List[Tuple[Fraction, tuple]]] = {}
    nodes: Dict[tuple, Tuple[object, object]] = {}
    order: List[tuple] = []
    stack = []
    seed_keys = []
    for seed in seeds:
        a, b = canon(seed)
        k = key(a, b)
        seed_keys.append((k, a, b))
        if k not in nodes and not (a > b):
            nodes[k] = (a, b)
            order.append(k)
            stack.append(k)

    while stack:
        if len(nodes) > cap:
            raise NotFinitelyResolvable(
                f"cylinder orbit exceeded {cap} intervals without closing")
        k = stack.pop()
        a, b = nodes[k]
        if a == b:
            consts[k] = Fraction(0)
            edges[k] = []
            continue
        if a == hull_lo and b == hull_hi:
            consts[k] = Fraction(1)
            edges[k] = []
            continue
        const = Fraction(0)
        out: List[Tuple[Fraction, tuple]] = []
        for p, (r, o) in zip(weights, exact_maps):
            ca = (a - o) / r
            cb = (b - o) / r
            if ca < hull_lo:
                ca = hull_lo
            if cb > hull_hi:
                cb = hull_hi
            if ca > cb or ca == cb:
                continue  # empty or a point: measure zero (mu has no atoms)
            if ca == hull_lo and cb == hull_hi:
                const += p
                continue
            ck = key(ca, cb)
            if ck not in nodes:
                nodes[ck] = (ca, cb)
                order.append(ck)
                stack.append(ck)
            out.append((p, ck))
        consts[k] = const
        edges[k] = out

    values = _solve_orbit(order, edges, consts)
    for k, v in values.items():
        if not (0 <= v <= 1):
            raise FracdimError(
                f"solver produced a measure outside [0,1]: {v}")

    per_seed = []
    full = dict(values)
    for k, a, b in seed_keys:
        if a > b or a == b:
            per_seed.append(Fraction(0))
            full.setdefault(k, Fraction(0))
        else:
            per_seed.append(values[k])
    return per_seed, full


def _solve_orbit(order, edges, consts):
    """Solve x_k = const_k + sum coeff*x_child over the orbit graph: Tarjan
    condensation, then back-substitution with per-component exact Gaussian
    elimination for the cyclic parts."""
    sccs = _tarjan(order, edges)
    values: Dict[tuple, Fraction] = {}
    # Tarjan emits components in reverse topological order of the
    # condensation (children before parents), so solve in emission order
    for comp in sccs:
        comp_set = set(comp)
        if len(comp) == 1 and all(ck not in comp_set
                                  for _, ck in edges[comp[0]]):
            k = comp[0]
            values[k] = consts[k] + sum(
                (p * values[ck] for p, ck in edges[k]), Fraction(0))
            continue
        idx = {k: i for i, k in enumerate(comp)}
        m = len(comp)
        # (I - C) x = d
        mat = [[Fraction(0)] * m for _ in range(m)]
        rhs = [Fraction(0)] * m
        for k in comp:
            i = idx[k]
            mat[i][i] = Fraction(1)
            rhs[i] = consts[k]
            for p, ck in edges[k]:
                if ck in idx:
                    mat[i][idx[ck]] -= p
                else:
                    rhs[i] += p * values[ck]
        sol = _gauss(mat, rhs)
        for k, x in zip(comp, sol):
            values[k] = x
    return values


def _tarjan(order, edges):
    index = {}
    low = {}
    onstack = set()
    stack = []
    sccs = []
    counter = [0]
    for root in order:
        if root in index:
            continue
        work = [(root, iter(edges[root]))]
        index[root] = low[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        onstack.add(root)
        while work:
            node, it = work[-1]
            advanced = False
            for _, child in it:
                if child not in index:
                    index[child] = low[child] = counter[0]
                    counter[0] += 1
                    stack.append(child)
                    onstack.add(child)
                    work.append((child, iter(edges[child])))
                    advanced = True
                    break
                if child in onstack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    onstack.remove(w)
                    comp.append(w)
                    if w == node:
                        break
                sccs.append(comp)
    return sccs


def _gauss(mat, rhs):
    m = len(mat)
    for col in range(m):
        piv = next((r for r in range(col, m) if mat[r][col] != 0), None)
        if piv is None:
            raise FracdimError("singular linear system in cylinder solver")
        if piv != col:
            mat[col], mat[piv] = mat[piv], mat[col]
            rhs[col], rhs[piv] = rhs[piv], rhs[col]
        inv = 1 / mat[col][col]
        mat[col] = [v * inv for v in mat[col]]
        rhs[col] = rhs[col] * inv
        for r in range(m):
            if r != col and mat[r][col] != 0:
                f = mat[r][col]
                mat[r] = [a - f * b for a, b in zip(mat[r], mat[col])]
                rhs[r] = rhs[r] - f * rhs[col]
    return rhs
