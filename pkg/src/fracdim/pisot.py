"""Dimension upper bounds at Pisot parameters via matrix families.

For a Pisot parameter the stationary measure admits a finite presentation:
a family of nonnegative matrices A_1..A_k whose normalized products encode
cylinder masses of a shift-invariant measure eta on {1..k}^N,

    eta([i_1 .. i_n]) = v_L A_{i_1} ... A_{i_n} v_R,

with v_L, v_R the positive left/right eigenvectors of H = sum A_i for the
top eigenvalue 1, scaled so v_L . v_R = 1.  The dimension of the measure
equals h_eta(shift)/log(beta), and the conditional-entropy increments

    u_n = sum_{|I|=n+1} phi(eta([I])) - sum_{|J|=n} phi(eta([J]))

decrease to h_eta, so u_n/log(beta) is a certified upper bound at every
level.  This module loads and saves such families, computes their Perron
data, evaluates eta on cylinders, forms the u_n sequence and matrix-pressure
diagnostics, and can construct the family for a Pisot parameter in (1, 2)
from its minimal polynomial by closing the subdivision automaton of
normalized overlap configurations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .algebraic import FieldElement, NumberField
from .core_math import div_up, float_down, log_down, next_up
from .errors import (
    ConvergenceError,
    DomainError,
    PreconditionError,
    ResourceLimitError,
)

__all__ = [
    "MatrixFamily",
    "PerronData",
    "load_family",
    "save_family",
    "perron",
    "eta_cylinder",
    "entropy_upper_seq",
    "pressure_estimate",
    "pisot_dim_upper",
    "dim_upper_table",
    "construct_family",
]

DEFAULT_RADIUS_TOL = 1e-8
DEFAULT_NODE_BUDGET = 50_000_000
_PERRON_TOL = 1e-14
_PERRON_MAX_ITERS = 1_000_000

# entries are (row, col, value) with 0-based indices and exact rational value
Triple = Tuple[int, int, Fraction]


@dataclass(frozen=True)
class PerronData:
    """Top eigenvalue of H with its positive eigenvector pair.

    v_left and v_right satisfy v_left @ H ~ lam * v_left and
    H @ v_right ~ lam * v_right to within `residual`, every component is
    strictly positive, and v_left @ v_right == 1 after normalization.
    """

    lam: float
    v_left: np.ndarray
    v_right: np.ndarray
    residual: float
    iterations: int


class MatrixFamily:
    """k nonnegative d x d matrices with verified spectral structure.

    Entries are exact rationals (sparse triples) so files round-trip
    bit-exactly; numerics run on float CSR copies.  When the top eigenvalue
    of H = sum A_i is not 1 within tolerance the family still loads but is
    flagged and all numeric matrices are divided by it, since the cylinder
    functional eta requires eigenvalue exactly 1.
    """

    def __init__(self, k: int, d: int,
                 triples: Sequence[Sequence[Triple]],
                 beta_hint: Optional[str] = None,
                 radius_tol: float = DEFAULT_RADIUS_TOL):
        if k < 2:
            raise DomainError(f"a family needs k >= 2 matrices, got {k}")
        if d < 1:
            raise DomainError(f"matrix dimension must be >= 1, got {d}")
        if len(triples) != k:
            raise DomainError(f"expected {k} matrices, got {len(triples)}")
        clean: List[Tuple[Triple, ...]] = []
        for mi, entries in enumerate(triples, start=1):
            seen = set()
            rows = []
            for (r, c, v) in entries:
                if not (0 <= r < d and 0 <= c < d):
                    raise DomainError(
                        f"matrix {mi}: entry ({r},{c}) outside a {d}x{d} matrix")
                if (r, c) in seen:
                    raise DomainError(f"matrix {mi}: duplicate entry ({r},{c})")
                seen.add((r, c))
                v = Fraction(v)
                if v < 0:
                    raise DomainError(f"matrix {mi}: negative entry at ({r},{c})")
                if v != 0:
                    rows.append((r, c, v))
            clean.append(tuple(sorted(rows)))
        self.k = k
        self.d = d
        self.triples: Tuple[Tuple[Triple, ...], ...] = tuple(clean)
        self.beta_hint = beta_hint
        self._radius_tol = radius_tol
        self._csr: Optional[List[sp.csr_matrix]] = None
        self._csr_T: Optional[List[sp.csr_matrix]] = None
        self._H: Optional[sp.csr_matrix] = None
        self._perron: Optional[PerronData] = None
        self.radius_ok: Optional[bool] = None
        self.scale: float = 1.0

    # -- numeric views -------------------------------------------------------

    def _raw_csr(self) -> List[sp.csr_matrix]:
        mats = []
        for entries in self.triples:
            if entries:
                r, c, v = zip(*entries)
                data = np.array([float(x) for x in v])
                m = sp.csr_matrix((data, (r, c)), shape=(self.d, self.d))
            else:
                m = sp.csr_matrix((self.d, self.d))
            mats.append(m)
        return mats

    @property
    def H(self) -> sp.csr_matrix:
        """sum of the (rescaled) matrices as float CSR."""
        self._ensure_numeric()
        return self._H

    def matrices(self) -> List[sp.csr_matrix]:
        """Float CSR copies, rescaled so H has top eigenvalue ~1."""
        self._ensure_numeric()
        return self._csr

    def matrices_T(self) -> List[sp.csr_matrix]:
        self._ensure_numeric()
        return self._csr_T

    @property
    def perron(self) -> PerronData:
        self._ensure_numeric()
        return self._perron

    def _ensure_numeric(self) -> None:
        if self._perron is not None:
            return
        mats = self._raw_csr()
        H = sum(mats[1:], mats[0])
        _check_irreducible(H)
        pd = perron(H)
        self.radius_ok = abs(pd.lam - 1.0) <= self._radius_tol
        if not self.radius_ok:
            # eta needs eigenvalue exactly 1; rescale and recompute so the
            # rest of the pipeline sees a unit-radius family
            self.scale = pd.lam
            mats = [m / pd.lam for m in mats]
            H = H / pd.lam
            pd = perron(H)
        self._csr = mats
        self._csr_T = [m.transpose().tocsr() for m in mats]
        self._H = H
        self._perron = pd
        # row-support incidence: entry (i, r) set when A_i has a nonzero in
        # row r; lets the word enumeration skip symbols a frontier chunk
        # cannot reach instead of multiplying k mostly-zero products
        rows_ij = []
        cols_ij = []
        for i, entries in enumerate(self.triples):
            for r in {r for (r, _, _) in entries}:
                rows_ij.append(i)
                cols_ij.append(r)
        self._row_support = sp.csr_matrix(
            (np.ones(len(rows_ij)), (rows_ij, cols_ij)),
            shape=(self.k, self.d))

    def symbol_support(self) -> sp.csr_matrix:
        self._ensure_numeric()
        return self._row_support


def _check_irreducible(H: sp.csr_matrix) -> None:
    """H irreducible == its support digraph strongly connected."""
    n_comp, _ = sp.csgraph.connected_components(
        H, directed=True, connection="strong")
    if n_comp != 1:
        raise DomainError(
            f"H = sum A_i is reducible ({n_comp} communicating classes); "
            "the cylinder functional is ill-defined")


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def load_family(path: str, radius_tol: float = DEFAULT_RADIUS_TOL) -> MatrixFamily:
    """Read a family file.

    Format: a header line `k d`, then one line per nonzero entry
    `matrix row col value` with matrix in 1..k, row/col in 0..d-1 and value
    a nonnegative rational like `1/2`.  An optional `beta <string>` line
    carries the parameter the family belongs to; `#` starts a comment.
    """
    header = None
    beta_hint = None
    entries: List[List[Triple]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if header is None:
                if len(parts) != 2:
                    raise DomainError(f"{path}:{lineno}: expected header `k d`")
                try:
                    k, d = int(parts[0]), int(parts[1])
                except ValueError as exc:
                    raise DomainError(f"{path}:{lineno}: bad header: {exc}") from exc
                header = (k, d)
                entries = [[] for _ in range(k)]
                continue
            if parts[0] == "beta":
                if len(parts) != 2:
                    raise DomainError(f"{path}:{lineno}: beta needs one value")
                beta_hint = parts[1]
                continue
            if len(parts) != 4:
                raise DomainError(
                    f"{path}:{lineno}: expected `matrix row col value`")
            try:
                mi, r, c = int(parts[0]), int(parts[1]), int(parts[2])
                v = Fraction(parts[3])
            except (ValueError, ZeroDivisionError) as exc:
                raise DomainError(f"{path}:{lineno}: {exc}") from exc
            if not 1 <= mi <= header[0]:
                raise DomainError(
                    f"{path}:{lineno}: matrix index {mi} outside 1..{header[0]}")
            if v < 0:
                raise DomainError(f"{path}:{lineno}: negative entry")
            entries[mi - 1].append((r, c, v))
    if header is None:
        raise DomainError(f"{path}: empty family file")
    fam = MatrixFamily(header[0], header[1], entries,
                       beta_hint=beta_hint, radius_tol=radius_tol)
    fam._ensure_numeric()  # validate irreducibility and radius eagerly
    return fam


def save_family(family: MatrixFamily, path: str) -> None:
    """Write `family` so that load_family round-trips bit-exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{family.k} {family.d}\n")
        if family.beta_hint is not None:
            fh.write(f"beta {family.beta_hint}\n")
        for mi, entries in enumerate(family.triples, start=1):
            for (r, c, v) in entries:
                fh.write(f"{mi} {r} {c} {v}\n")


# ---------------------------------------------------------------------------
# Perron data
# ---------------------------------------------------------------------------

def perron(H, tol: float = _PERRON_TOL,
           max_iters: int = _PERRON_MAX_ITERS) -> PerronData:
    """Positive eigenvector pair of an irreducible nonnegative matrix.

    Power iteration on H + I (the shift kills oscillation on periodic
    support graphs), with the eigenvalue re-estimated periodically from the
    two-sided Rayleigh quotient; stops when both one-sided residuals drop
    below tol * max(1, lam).
    """
    H = sp.csr_matrix(H, dtype=np.float64)
    n = H.shape[0]
    if H.shape[0] != H.shape[1]:
        raise DomainError("H must be square")
    HT = H.transpose().tocsr()
    vr = np.full(n, 1.0 / n)
    vl = np.full(n, 1.0 / n)
    lam = 1.0
    for it in range(1, max_iters + 1):
        vr_new = H @ vr + vr
        vl_new = HT @ vl + vl
        sr = vr_new.sum()
        sl = vl_new.sum()
        if not (sr > 0 and sl > 0):
            raise ConvergenceError("iteration collapsed; H is not irreducible "
                                   "nonnegative")
        vr, vl = vr_new / sr, vl_new / sl
        if it % 5 == 0 or it == 1:
            denom = float(vl @ vr)
            if denom <= 0:
                raise ConvergenceError("left/right vectors became orthogonal")
            lam = float(vl @ (H @ vr)) / denom
            res_r = float(np.max(np.abs(H @ vr - lam * vr)))
            res_l = float(np.max(np.abs(HT @ vl - lam * vl)))
            if max(res_r, res_l) <= tol * max(1.0, abs(lam)):
                if vr.min() <= 0.0 or vl.min() <= 0.0:
                    raise ConvergenceError(
                        "converged to a vector with nonpositive entries; "
                        "H is not irreducible")
                vl = vl / float(vl @ vr)
                return PerronData(lam=lam, v_left=vl, v_right=vr,
                                  residual=max(res_r, res_l), iterations=it)
    raise ConvergenceError(
        f"no convergence to residual {tol} in {max_iters} iterations; "
        "a looser tolerance may help")


# ---------------------------------------------------------------------------
# cylinder measures and entropy increments
# ---------------------------------------------------------------------------

def eta_cylinder(family: MatrixFamily, word: Sequence[int]) -> float:
    """v_L A_{i_1} ... A_{i_n} v_R; the empty word gives v_L . v_R = 1."""
    pd = family.perron
    mats_T = family.matrices_T()
    row = pd.v_left
    for s in word:
        if not 1 <= s <= family.k:
            raise DomainError(f"symbol {s} outside 1..{family.k}")
        row = mats_T[s - 1] @ row
    return float(row @ pd.v_right)


# phi accumulation runs in the widest native float so per-word rounding
# bias stays harmless even across tens of millions of words; on platforms
# where long double is plain double the error ledger widens to match
_EPS_ACC = float(np.finfo(np.longdouble).eps) / 2


def _level_phi_sums(family: MatrixFamily, depth: int,
                    node_budget: int
                    ) -> Tuple[list, List[int], List[float]]:
    """phi-sums of eta over all positive words of length 0..depth.

    Breadth-first while the frontier is small, then chunked depth-first so
    memory stays bounded; zero rows are dropped exactly (all entries are
    nonnegative, so a float zero row means a combinatorially zero
    cylinder).  Deterministic for fixed inputs.

    Returns (sums, counts, errs).  sums[t] is a long-double scalar: the
    matrix products run in double (their error is relative and tiny), but
    phi evaluation and summation carry a per-word rounding bias that adds
    up across the word count, so those run extended.  errs[t] bounds the
    accumulation error of sums[t]: pairwise summation inside a chunk costs
    about ceil(log2 m) roundings per term, each phi evaluation a few more,
    and the scalar accumulation across chunks one per chunk.
    """
    pd = family.perron
    mats_T = family.matrices_T()
    support = family.symbol_support()
    vR = pd.v_right
    d = family.d
    zero_ld = np.longdouble(0.0)
    sums = [zero_ld] * (depth + 1)
    counts = [0] * (depth + 1)
    errs = [0.0] * (depth + 1)
    abs_acc = [0.0] * (depth + 1)   # running sum of |phi| + mass per level
    chunks_seen = [0] * (depth + 1)
    visited = 0

    chunk_rows = max(128, min(16384, 4_000_000 // max(d, 1)))

    def account(W: np.ndarray, level: int) -> None:
        nonlocal visited
        m = W.shape[0]
        visited += m
        if visited > node_budget:
            raise ResourceLimitError(
                f"cylinder enumeration exceeded {node_budget} nodes at word "
                f"length {level}; the largest feasible level here is "
                f"{max(level - 2, 0)}")
        eta = (W @ vR).astype(np.longdouble)
        phi = np.zeros_like(eta)
        pos = eta > 0
        phi[pos] = -eta[pos] * np.log(eta[pos])
        part = np.sum(phi)
        mass = float(np.sum(eta))
        sums[level] = sums[level] + part
        abs_acc[level] += abs(float(part)) + mass
        counts[level] += m
        chunks_seen[level] += 1
        height = int(np.ceil(np.log2(max(m, 2))))
        errs[level] += _EPS_ACC * (height + 6) * (abs(float(part)) + mass)

    def finalize() -> None:
        for t in range(depth + 1):
            # cross-chunk scalar accumulation, one rounding per chunk
            errs[t] += _EPS_ACC * (chunks_seen[t] + 1) * abs_acc[t]
            errs[t] = float(np.nextafter(errs[t], math.inf))

    def extend(W: np.ndarray, sym: int) -> np.ndarray:
        C = (mats_T[sym] @ W.T).T
        keep = C.sum(axis=1) > 0.0
        return C[keep] if not keep.all() else C

    def active_symbols(W: np.ndarray) -> np.ndarray:
        # a symbol can only fire where the chunk touches its matrix's rows
        colmask = (W != 0.0).any(axis=0).astype(np.float64)
        return np.flatnonzero(support @ colmask)

    def descend(W: np.ndarray, level: int) -> None:
        account(W, level)
        if level == depth:
            return
        for sym in active_symbols(W):
            C = extend(W, sym)
            if C.shape[0]:
                descend(C, level + 1)

    W = pd.v_left.reshape(1, d)
    level = 0
    while level < depth and W.shape[0] * family.k <= chunk_rows:
        account(W, level)
        blocks = []
        for sym in active_symbols(W):
            C = extend(W, sym)
            if C.shape[0]:
                blocks.append(C)
        if not blocks:
            finalize()
            return sums, counts, errs
        W = np.vstack(blocks)
        level += 1
    for start in range(0, W.shape[0], chunk_rows):
        descend(W[start:start + chunk_rows], level)
    finalize()
    return sums, counts, errs


def entropy_upper_seq(family: MatrixFamily, n: int,
                      node_budget: int = DEFAULT_NODE_BUDGET) -> float:
    """The n-th conditional-entropy increment u_n, in nats.

    u_n = sum_{|I|=n+1} phi(eta([I])) - sum_{|J|=n} phi(eta([J])) is an
    upper bound for the entropy of eta and is nonincreasing in n.  The
    value returned is the plain (deterministic-order) difference; the
    summation-error ledger is folded in by pisot_dim_upper, which is the
    certified consumer.
    """
    if n < 0:
        raise DomainError("level must be >= 0")
    sums, _, _ = _level_phi_sums(family, n + 1, node_budget)
    return float(sums[n + 1] - sums[n])


def pressure_estimate(family: MatrixFamily, q: float, n: int,
                      node_budget: int = DEFAULT_NODE_BUDGET) -> float:
    """(1/n) log sum_{|I|=n} ||A_I||^q with the max-row-sum norm.

    Finite-n approximant of the matrix pressure (diagnostic; for q >= 1
    subadditivity makes it an upper approximant).  At q = 1 the value
    tends to 0 for a family whose H has top eigenvalue 1.
    """
    if q <= 0:
        raise DomainError("pressure exponent must be > 0")
    if n < 1:
        raise DomainError("level must be >= 1")
    mats = family.matrices()
    d = family.d
    total = 0.0
    visited = 0
    chunk_rows = max(256, 1_000_000 // max(d, 1))

    # rows carry (A_w @ 1)^T for words grown on the left; the max-row-sum
    # norm of A_w is the max entry, and summing over all words of length n
    # is order-insensitive because reversal permutes the index set
    def descend(C: np.ndarray, level: int) -> None:
        nonlocal total, visited
        visited += C.shape[0]
        if visited > node_budget:
            raise ResourceLimitError(
                f"pressure enumeration exceeded {node_budget} nodes")
        if level == n:
            norms = C.max(axis=1)
            total += float(np.sum(norms ** q))
            return
        for sym in range(family.k):
            child = (mats[sym] @ C.T).T
            keep = child.sum(axis=1) > 0.0
            child = child[keep] if not keep.all() else child
            if child.shape[0]:
                descend(child, level + 1)

    C = np.ones((1, d))
    level = 0
    while level < n and C.shape[0] * family.k <= chunk_rows:
        blocks = []
        for sym in range(family.k):
            child = (mats[sym] @ C.T).T
            keep = child.sum(axis=1) > 0.0
            child = child[keep] if not keep.all() else child
            if child.shape[0]:
                blocks.append(child)
        if not blocks:
            return -math.inf
        C = np.vstack(blocks)
        level += 1
        visited += C.shape[0]
    if level == n:
        norms = C.max(axis=1)
        total = float(np.sum(norms ** q))
    else:
        for start in range(0, C.shape[0], chunk_rows):
            descend(C[start:start + chunk_rows], level)
    if total <= 0.0:
        return -math.inf
    return math.log(total) / n


def _beta_lower_float(beta) -> float:
    if isinstance(beta, FieldElement):
        return beta.field.float_bounds(beta)[0]
    if isinstance(beta, (int, Fraction)):
        return float_down(Fraction(beta))
    b = float(beta)
    if not math.isfinite(b):
        raise DomainError(f"parameter must be finite, got {beta!r}")
    return b


def pisot_dim_upper(family: MatrixFamily, beta, n: int,
                    node_budget: int = DEFAULT_NODE_BUDGET) -> float:
    """Certified upper bound u_n / log(beta) on the measure dimension.

    The numerator is rounded up by the summation-error ledger of both
    phi-sums and the denominator log(beta) is rounded down, so the emitted
    number can only err upward (modulo the family's correctness).
    """
    if n < 0:
        raise DomainError("level must be >= 0")
    blo = _beta_lower_float(beta)
    if blo <= 1.0:
        raise DomainError(f"parameter must exceed 1, got {beta!r}")
    sums, _, errs = _level_phi_sums(family, n + 1, node_budget)
    # subtract in extended precision, then round the numerator up once
    u_up = next_up(float((sums[n + 1] + errs[n + 1]) - (sums[n] - errs[n])))
    if u_up < 0.0:
        u_up = 0.0
    return div_up(u_up, log_down(blo))


def dim_upper_table(family: MatrixFamily, beta, n: int,
                    node_budget: int = DEFAULT_NODE_BUDGET
                    ) -> List[Tuple[int, float, float]]:
    """Rows (level, entropy increment rounded up, dimension upper bound)
    for levels 1..n, from a single enumeration pass.

    Each row applies the same error-ledger assembly as pisot_dim_upper, so
    the last row matches pisot_dim_upper(family, beta, n) exactly.
    """
    if n < 1:
        raise DomainError("level must be >= 1")
    blo = _beta_lower_float(beta)
    if blo <= 1.0:
        raise DomainError(f"parameter must exceed 1, got {beta!r}")
    sums, _, errs = _level_phi_sums(family, n + 1, node_budget)
    lden = log_down(blo)
    rows = []
    for i in range(1, n + 1):
        u_up = next_up(float((sums[i + 1] + errs[i + 1]) - (sums[i] - errs[i])))
        if u_up < 0.0:
            u_up = 0.0
        rows.append((i, u_up, div_up(u_up, lden)))
    return rows


# ---------------------------------------------------------------------------
# family construction from a minimal polynomial
# ---------------------------------------------------------------------------

# A configuration is the exact shape of one subdivision window: its length
# and the offsets of the length-1 windows covering it, all measured in the
# scale of the current refinement level.  Pisot parameters admit finitely
# many configurations, which is what terminates the closure below.
_Config = Tuple[FieldElement, Tuple[FieldElement, ...]]


def _pisot_check(coeffs_desc: Sequence[int]) -> None:
    """All conjugates strictly inside the unit circle, one real root in (1,2)."""
    roots = np.roots(np.array(coeffs_desc, dtype=np.float64))
    in_range = [r for r in roots if abs(r.imag) < 1e-9 and 1.0 < r.real < 2.0]
    if len(in_range) != 1:
        raise PreconditionError(
            "expected exactly one real root in (1, 2), found "
            f"{len(in_range)}")
    beta = in_range[0].real
    conj = [abs(r) for r in roots if abs(r - in_range[0]) > 1e-9]
    if conj and max(conj) >= 1.0 - 1e-8:
        raise PreconditionError(
            f"not a Pisot polynomial: a conjugate has modulus {max(conj):.12f}")
    if beta <= 1.0 or beta >= 2.0:
        raise PreconditionError(f"root {beta} outside (1, 2)")


def _subdivide(cfg: _Config, x: FieldElement, o2: FieldElement,
               beta: FieldElement):
    """Children of one configuration with their transition matrices.

    Covering windows sit at [-r, -r+1]; their two subwindows are
    [-r, -r+x] and [-r+o2, -r+1] with x = 1/beta and o2 = 1 - x.  New cut
    points inside (0, ell) induce the child configurations; each child is
    rescaled by beta back to unit-window normalization.  Transition entry
    (i, j) collects weight 1/2 for every subwindow of covering window i
    that lands on child offset slot j.
    """
    ell, offs = cfg
    fld = ell.field
    zero = fld.zero()
    cuts = set()
    for r in offs:
        for cand in (x - r, o2 - r):
            if zero < cand < ell:
                cuts.add(cand)
    pts = [zero] + sorted(cuts) + [ell]
    half = Fraction(1, 2)
    children = []
    for t, t1 in zip(pts, pts[1:]):
        ell_child = beta * (t1 - t)
        cover = []  # (child offset, parent slot)
        for i, r in enumerate(offs):
            for left in (-r, o2 - r):
                if left <= t and t1 <= left + x:
                    cover.append((beta * (t - left), i))
        slots: List[FieldElement] = sorted({off for off, _ in cover})
        index = {off: j for j, off in enumerate(slots)}
        T = [[Fraction(0)] * len(slots) for _ in range(len(offs))]
        for off, i in cover:
            T[i][index[off]] += half
        children.append(((ell_child, tuple(slots)), T))
    return children


def _closed_classes(n_states: int, edges: Sequence[Tuple[int, int]]):
    """Strongly connected components with no edges leaving them."""
    rows = np.array([a for a, _ in edges] + [0], dtype=np.int64)
    cols = np.array([b for _, b in edges] + [0], dtype=np.int64)
    data = np.ones(len(edges) + 1)
    g = sp.csr_matrix((data, (rows, cols)), shape=(n_states, n_states))
    n_comp, labels = sp.csgraph.connected_components(
        g, directed=True, connection="strong")
    leaves = set(range(n_comp))
    for a, b in edges:
        if labels[a] != labels[b]:
            leaves.discard(labels[a])
    return [
        [s for s in range(n_states) if labels[s] == comp]
        for comp in sorted(leaves)
    ]


def construct_family(minpoly: Sequence[int], *,
                     experimental_ok: bool = False,
                     max_states: int = 20_000,
                     radius_tol: float = DEFAULT_RADIUS_TOL) -> MatrixFamily:
    """Build the matrix family for the Pisot root in (1, 2) of `minpoly`.

    `minpoly` lists integer coefficients from the leading term down to the
    constant (so x^3 - x^2 - 1 is (1, -1, 0, -1)).  The subdivision
    automaton of exact overlap configurations is closed, restricted to its
    unique closed communicating class, and emitted as one matrix per core
    state (collecting every transition into it), embedded into dimension
    d = total offset slots.  When two children of one window share a
    configuration (the golden ratio does this) the colliding states are
    split by occurrence index, the minimal refinement that keeps state
    words in bijection with subdivision histories; without that the
    entropy bound could undercount.  A word of length n+1 pins down n
    subdivision steps, so bound levels sit one above subdivision depth.
    The output always passes the same invariant checks as load_family plus
    a cylinder-mass normalization check; correctness beyond that is
    validated empirically against independently known dimension values.

    The constructor is experimental and must be opted into.
    """
    if not experimental_ok:
        raise PreconditionError(
            "construct_family is experimental; pass experimental_ok=True "
            "(or use a shipped, validated family file)")
    if isinstance(minpoly, (int, float)):
        raise PreconditionError(
            "a minimal polynomial (coefficient sequence) is required, "
            f"got the bare number {minpoly!r}")
    coeffs_desc = [int(c) for c in minpoly]
    if len(coeffs_desc) < 3:
        raise PreconditionError("the polynomial must have degree >= 2")
    if coeffs_desc[0] != 1:
        raise PreconditionError("the minimal polynomial must be monic")
    _pisot_check(coeffs_desc)

    fld = NumberField(list(reversed(coeffs_desc)), root_bracket=(1, 2))
    beta = fld.gen()
    x = fld.one() / beta
    o2 = fld.one() - x

    # states are (configuration, occurrence) pairs; the occurrence index
    # separates same-parent children that land on one configuration
    root = ((fld.one(), (fld.zero(),)), 0)
    states: Dict[Tuple[_Config, int], int] = {root: 0}
    order: List[Tuple[_Config, int]] = [root]
    out_edges: List[List[Tuple[int, List[List[Fraction]]]]] = []
    subdiv_cache: Dict[_Config, list] = {}
    todo = [0]
    while todo:
        si = todo.pop(0)
        if si >= len(out_edges):
            out_edges.extend([] for _ in range(si - len(out_edges) + 1))
        cfg = order[si][0]
        if cfg not in subdiv_cache:
            subdiv_cache[cfg] = _subdivide(cfg, x, o2, beta)
        kids = []
        occ_counts: Dict[_Config, int] = {}
        for child_cfg, T in subdiv_cache[cfg]:
            occ = occ_counts.get(child_cfg, 0)
            occ_counts[child_cfg] = occ + 1
            child_key = (child_cfg, occ)
            ci = states.get(child_key)
            if ci is None:
                ci = len(order)
                if ci >= max_states:
                    raise ResourceLimitError(
                        f"configuration closure exceeded {max_states} states")
                states[child_key] = ci
                order.append(child_key)
                todo.append(ci)
            kids.append((ci, T))
        out_edges[si] = kids

    plain_edges = [(a, b) for a, kids in enumerate(out_edges)
                   for b, _ in kids]
    classes = _closed_classes(len(order), plain_edges)
    if len(classes) != 1:
        raise DomainError(
            f"expected one closed communicating class, found {len(classes)}")
    core = classes[0]
    core_index = {s: i for i, s in enumerate(core)}

    slot_base: Dict[int, int] = {}
    d = 0
    for s in core:
        slot_base[s] = d
        d += len(order[s][0][1])

    matrices: List[List[Triple]] = [[] for _ in core]
    for s in core:
        for target, T in out_edges[s]:
            if target not in core_index:
                raise DomainError(
                    "closed class has an escaping edge; closure is inconsistent")
            entries = matrices[core_index[target]]
            rb, cb = slot_base[s], slot_base[target]
            for i, row in enumerate(T):
                for j, v in enumerate(row):
                    if v:
                        entries.append((rb + i, cb + j, v))

    beta_hint = repr(fld.float_nearest(beta))
    fam = MatrixFamily(len(matrices), d, matrices,
                       beta_hint=beta_hint, radius_tol=radius_tol)
    fam._ensure_numeric()
    if not fam.radius_ok:
        raise DomainError(
            f"constructed family has top eigenvalue {fam.scale!r}, not 1; "
            "the subdivision closure is inconsistent")
    for n in (1, 2, 3):
        mass = _total_mass(fam, n)
        if abs(mass - 1.0) > 1e-10:
            raise DomainError(
                f"cylinder masses at length {n} sum to {mass!r}, not 1")
    return fam


def _total_mass(family: MatrixFamily, n: int) -> float:
    pd = family.perron
    vec = pd.v_right
    H = family.H
    for _ in range(n):
        vec = H @ vec
    return float(pd.v_left @ vec)
