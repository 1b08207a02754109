"""Generalized Cantor sets, their distance functions and self-similar measures.

The set ``C_lam`` is the attractor in ``[-1/2, 1/2]`` of the two maps
``t -> lam*t - (1-lam)/2`` and ``t -> lam*t + (1-lam)/2``.  Products
``C_lam^m`` carry the product of the uniform self-similar measures.

Level-``k`` cells are the images of ``[-1/2, 1/2]^m`` under ``k``-fold
compositions of the maps; there are ``2^{mk}`` of them, each of width
``lam^k`` and measure ``2^{-mk}``.  Their vertices lie in the set.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BudgetError, DomainError
from .results import QuadResult

DISTANCE_TOL = 1e-14
DEFAULT_CELL_BUDGET = 2**18


class Regime(str, Enum):
    MATCHING = "matching"
    SUB = "sub"
    SUPER = "super"


@dataclass(frozen=True)
class CantorParams:
    lam: float
    m: int
    dim: float

    def __post_init__(self):
        if not 0.0 < self.lam < 0.5:
            raise DomainError(f"contraction ratio must lie in (0, 1/2), got {self.lam}")
        if self.m < 1:
            raise DomainError(f"number of factors must be positive, got {self.m}")
        if not 0.0 < self.dim < self.m:
            raise DomainError(f"dimension must lie in (0, m), got {self.dim}")

    @classmethod
    def from_lambda(cls, lam: float, m: int = 1) -> CantorParams:
        return cls(lam, m, m * math.log(2.0) / math.log(1.0 / lam))

    @property
    def max_level(self) -> int:
        """Deepest level whose cell width stays above the distance tolerance."""
        return max(1, int(math.log(DISTANCE_TOL) / math.log(self.lam)))


def dimension_params(regime: Regime | str, d: int, p0: float) -> CantorParams | None:
    """Cantor parameters that make the construction critical at ``p0``.

    Matching returns ``None`` (the contact set is a point).  Sub uses
    ``p0 = d - D`` with ``m = d - 1``; Super uses ``p0 = (d - D)/(1 - D)``
    with ``m = 1``.  In both cases ``lam = 2^{-m/D}``.
    """
    regime = Regime(regime)
    if d < 2:
        raise DomainError(f"ambient dimension must be at least 2, got {d}")
    if regime is Regime.MATCHING:
        if not math.isclose(p0, d, rel_tol=0, abs_tol=1e-12):
            raise DomainError(f"matching regime needs p0 = d = {d}, got {p0}")
        return None
    if regime is Regime.SUB:
        if not 1.0 < p0 < d:
            raise DomainError(f"sub regime needs 1 < p0 < d = {d}, got {p0}")
        m = d - 1
        dim = d - p0
    else:
        if not p0 > d:
            raise DomainError(f"super regime needs p0 > d = {d}, got {p0}")
        m = 1
        dim = (p0 - d) / (p0 - 1.0)
    lam = 2.0 ** (-m / dim)
    return CantorParams(lam, m, dim)


@dataclass(frozen=True)
class FractalConfig:
    """Regime, ambient dimension and critical exponent of one construction.

    The domain is always the cube ``(-1, 1)^d``.
    """

    regime: Regime
    d: int
    p0: float
    cantor: CantorParams | None = None

    @classmethod
    def build(cls, regime: Regime | str, d: int, p0: float | None = None) -> FractalConfig:
        regime = Regime(regime)
        if p0 is None:
            if regime is not Regime.MATCHING:
                raise DomainError("p0 is required outside the matching regime")
            p0 = float(d)
        return cls(regime, int(d), float(p0), dimension_params(regime, d, p0))

    @property
    def dim(self) -> float:
        return 0.0 if self.cantor is None else self.cantor.dim

    @property
    def lam(self) -> float:
        return math.nan if self.cantor is None else self.cantor.lam

    @property
    def grad_decay(self) -> float:
        """Power a with |grad u| <~ r^{-a} near the contact set."""
        return 1.0 - self.dim if self.regime is Regime.SUPER else 1.0

    @property
    def flux_decay(self) -> float:
        """Power a with |b| <~ r^{-a} near the contact set."""
        if self.regime is Regime.SUB:
            return self.d - 1.0 - self.dim
        return self.d - 1.0

    def scale(self, x: np.ndarray) -> np.ndarray:
        """The length governing the singular behaviour near the contact set."""
        x = np.asarray(x, dtype=float)
        if self.regime is Regime.MATCHING:
            return np.linalg.norm(x, axis=-1)
        if self.regime is Regime.SUB:
            return np.abs(x[..., -1])
        return np.linalg.norm(x[..., :-1], axis=-1)

    def tail_exponent(self, decay: float, power: float, weight_power: float = 0.0) -> float:
        """Exponent k with  int_{dist ~ r} r^{w} (r^{-decay})^{power} ~ r^k.

        The singular sets of both fields have Lebesgue measure ~ r^{d - D}
        at scale r.
        """
        return self.d - self.dim - decay * power + weight_power

    def distance_to_contact(self, x: np.ndarray) -> np.ndarray:
        """Euclidean distance to the contact set."""
        x = np.asarray(x, dtype=float)
        if self.regime is Regime.MATCHING:
            return np.linalg.norm(x, axis=-1)
        lam = self.cantor.lam
        if self.regime is Regime.SUB:
            dc = cantor_distance(x[..., :-1], lam)
            return np.hypot(dc, x[..., -1])
        dc = cantor_distance_1d(x[..., -1], lam)
        return np.hypot(np.linalg.norm(x[..., :-1], axis=-1), dc)


def cantor_nearest_1d(x, lam: float) -> np.ndarray:
    """Nearest point of ``C_lam`` to each entry of ``x``.

    Descends through the hull intervals: outside a hull the nearest point
    is its endpoint, in the gap it is the nearer gap endpoint, otherwise it
    lies in the child whose hull contains ``x``.
    """
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    out = np.empty_like(flat)
    centre = np.zeros_like(flat)
    half = 0.5
    active = np.arange(flat.size)
    while active.size:
        xa = flat[active]
        c = centre[active]
        lo = c - half
        hi = c + half
        below = xa <= lo
        above = xa >= hi
        out[active[below]] = lo[below]
        out[active[above]] = hi[above]
        inner = ~(below | above)
        if 2.0 * half < DISTANCE_TOL:
            out[active[inner]] = xa[inner]
            break
        gap_lo = lo + 2.0 * lam * half
        gap_hi = hi - 2.0 * lam * half
        in_gap = inner & (xa > gap_lo) & (xa < gap_hi)
        nearer_lo = xa - gap_lo <= gap_hi - xa
        out[active[in_gap & nearer_lo]] = gap_lo[in_gap & nearer_lo]
        out[active[in_gap & ~nearer_lo]] = gap_hi[in_gap & ~nearer_lo]
        go = inner & ~in_gap
        shift = (1.0 - lam) * half
        centre[active[go]] = np.where(xa[go] <= c[go], c[go] - shift, c[go] + shift)
        active = active[go]
        half *= lam
    return out.reshape(x.shape)


def cantor_distance_1d(x, lam: float) -> np.ndarray:
    """Distance from ``x`` to ``C_lam``; scalars in, scalars out."""
    x = np.asarray(x, dtype=float)
    return np.abs(x - cantor_nearest_1d(x, lam))


def cantor_distance(xbar, lam: float, return_nearest: bool = False):
    """Distance from points in R^m (last axis) to the product set ``C_lam^m``."""
    xbar = np.asarray(xbar, dtype=float)
    nearest = cantor_nearest_1d(xbar, lam)
    dist = np.linalg.norm(xbar - nearest, axis=-1)
    if return_nearest:
        return dist, nearest
    return dist


def level_points(lam: float, m: int, k: int, nodes: str = "centers") -> tuple[np.ndarray, np.ndarray]:
    """Quadrature nodes and weights of the level-``k`` rule for ``mu_lam^m``.

    ``nodes="centers"`` uses the ``2^{mk}`` cell centres with equal weights.
    ``nodes="endpoints"`` uses the ``2^m`` vertices of every cell (all in the
    set) with weight ``2^{-m(k+1)}``.
    """
    offsets = np.array([0.0])
    for j in range(k):
        step = 0.5 * (1.0 - lam) * lam**j
        offsets = np.concatenate([offsets - step, offsets + step])
    if nodes == "endpoints":
        half = 0.5 * lam**k
        offsets = np.concatenate([offsets - half, offsets + half])
    elif nodes != "centers":
        raise ValueError(f"unknown node rule {nodes!r}")
    grids = np.meshgrid(*([offsets] * m), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    weights = np.full(pts.shape[0], 1.0 / pts.shape[0])
    return pts, weights


def cantor_integrate(
    f: Callable[[np.ndarray], np.ndarray],
    lam: float,
    m: int = 1,
    depth: int | None = None,
    nodes: str = "centers",
    budget: int = DEFAULT_CELL_BUDGET,
) -> QuadResult:
    """Integrate ``f`` against ``mu_lam^m`` with the level-``depth`` cell rule.

    ``f`` receives an ``(N, m)`` array.  The error estimate is the sampled
    oscillation of ``f`` between each cell centre and its vertices, which
    estimates the modulus of continuity at the cell radius.
    """
    if depth is None:
        depth = 18 if m == 1 else 9
    if depth < 1:
        raise DomainError("depth must be at least 1")
    if 2 ** (m * depth) > budget:
        raise BudgetError(f"2^{m * depth} level-{depth} cells exceed the budget of {budget}")
    centres, weights = level_points(lam, m, depth, "centers")
    fc = np.asarray(f(centres), dtype=float)
    half = 0.5 * lam**depth
    osc = np.zeros(fc.shape[0])
    for signs in itertools.product((-1.0, 1.0), repeat=m):
        fv = np.asarray(f(centres + half * np.array(signs)), dtype=float)
        osc = np.maximum(osc, np.abs(fv - fc).reshape(fc.shape[0], -1).max(axis=1))
    if nodes == "endpoints":
        pts, w = level_points(lam, m, depth, "endpoints")
        value = np.tensordot(w, np.asarray(f(pts), dtype=float), axes=1)
    else:
        value = np.tensordot(weights, fc, axes=1)
    return QuadResult(value=value, error_estimate=float(osc.max()), cells=centres.shape[0])


_PRUNE, _DESCEND, _RESOLVED = 0, 1, 2


def leaf_level(scale: np.ndarray, lam: float, resolution: float, cap: int) -> np.ndarray:
    """Smallest level whose cell width is at most ``resolution * scale``."""
    scale = np.asarray(scale, dtype=float)
    with np.errstate(divide="ignore"):
        lvl = np.ceil(np.log(resolution * scale) / math.log(lam))
    lvl = np.where(np.isfinite(lvl), lvl, cap)
    return np.clip(lvl, 0, cap).astype(int)


def cantor_tree_sum(
    n_points: int,
    lam: float,
    m: int,
    target_level: np.ndarray,
    classify: Callable,
    kernel: Callable,
    out_shape: tuple = (),
) -> np.ndarray:
    """Pruned sum over the cell tree of ``mu_lam^m`` for many points at once.

    For every point ``i`` this computes ``sum_v w_v kernel(i, v)`` over the
    vertices ``v`` of the level-``target_level[i]`` cells, skipping subtrees
    on which the kernel is known to vanish and short-cutting subtrees on
    which it is constant.

    ``classify(idx, centres, half)`` returns ``(codes, values)`` where
    ``codes`` is 0 (prune), 1 (descend) or 2 (constant, given by ``values``)
    for each (point, cell) pair.  ``kernel(idx, nodes)`` evaluates the
    integrand at set points ``nodes`` of shape ``(K, m)``.
    """
    out = np.zeros((n_points,) + tuple(out_shape))
    idx = np.arange(n_points)
    centres = np.zeros((n_points, m))
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=m)))
    nv = signs.shape[0]
    level = 0
    target_level = np.asarray(target_level)
    while idx.size:
        half = 0.5 * lam**level
        mass = 2.0 ** (-m * level)
        codes, values = classify(idx, centres, half)
        res = codes == _RESOLVED
        if res.any():
            np.add.at(out, idx[res], mass * values[res])
        live = codes == _DESCEND
        leaf = live & (target_level[idx] <= level)
        if leaf.any():
            li = np.repeat(idx[leaf], nv)
            verts = (centres[leaf][:, None, :] + half * signs[None]).reshape(-1, m)
            np.add.at(out, li, (mass / nv) * kernel(li, verts))
        go = live & ~leaf
        idx = np.repeat(idx[go], nv)
        centres = (centres[go][:, None, :] + (1.0 - lam) * half * signs[None]).reshape(-1, m)
        level += 1
    return out
