"""Adaptive tensor-Gauss quadrature on the cube and its faces.

Cells are dyadic subcubes.  Every cell is integrated with the 3-point Gauss
rule and with the same rule on its children; the children's sum is kept
when the two agree.  Cells near the contact set are refined regardless,
down to the exclusion depth, and the innermost tube is skipped.  What the
tube would contribute is extrapolated from the dyadic shells around it,
assuming the integrand decays like ``r^kappa`` per shell at scale ``r``:
once as a safety-scaled bound on its size, once as a signed geometric
continuation of the last shells.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .cantor import FractalConfig
from .results import QuadResult

_GAUSS_X = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 9.0
TAIL_SAFETY = 2.0
TAIL_FIT_SHELLS = 4
# points per integrand call
EVAL_CHUNK = 1 << 17


@dataclass(frozen=True)
class QuadPolicy:
    max_depth: int = 20
    refine_near_S: bool = True
    delta: float = 1e-6
    atol: float = 1e-8
    rtol: float = 1e-4
    gtol: float = 1e-7
    min_depth: int = 2
    budget: int = 2_000_000

    @property
    def tube_depth(self) -> int:
        """Level whose tube cells are skipped (cell size about delta)."""
        return min(self.max_depth, max(self.min_depth, math.ceil(math.log2(2.0 / self.delta))))


def _reference_rule(k: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes on [0, 1]^k and weights summing to 1."""
    pts = np.array(list(itertools.product((_GAUSS_X + 1.0) / 2.0, repeat=k)))
    wts = np.prod(np.array(list(itertools.product(_GAUSS_W / 2.0, repeat=k))), axis=1)
    return pts, wts


def _child_offsets(k: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=k)))


def _gauss_cells(f, lower: np.ndarray, size: float, embed, ref) -> np.ndarray:
    """Gauss value of ``f`` on each cube ``lower + [0, size]^k``; shape (M, K)."""
    pts, wts = ref
    m, k = lower.shape
    step = max(1, EVAL_CHUNK // pts.shape[0])
    out = []
    for i in range(0, m, step):
        part = lower[i:i + step]
        x = (part[:, None, :] + size * pts[None]).reshape(-1, k)
        vals = np.asarray(f(embed(x)), dtype=float).reshape(part.shape[0], pts.shape[0], -1)
        out.append(size**k * np.einsum("q,mqc->mc", wts, vals))
    return np.concatenate(out)


def _tail(shells: dict, depth: int, kappa, ncomp: int, crude: np.ndarray) -> np.ndarray:
    if kappa is None:
        return np.abs(crude)
    if kappa <= 0:
        return np.full(ncomp, np.inf)
    fit = [j for j in range(depth - TAIL_FIT_SHELLS, depth) if j in shells]
    if not fit:
        return np.abs(crude)
    const = np.max([np.abs(shells[j]) * 2.0 ** (j * kappa) for j in fit], axis=0)
    return TAIL_SAFETY * const * 2.0 ** (-depth * kappa) / (1.0 - 2.0 ** (-kappa))


def _signed_tail(shells: dict, depth: int, kappa, ncomp: int) -> np.ndarray:
    """Geometric continuation of the last shells (self-similar integrands)."""
    if kappa is None or kappa <= 0:
        return np.zeros(ncomp)
    fit = [j for j in range(depth - TAIL_FIT_SHELLS, depth) if j in shells]
    if not fit:
        return np.zeros(ncomp)
    ratio = 2.0 ** (-kappa * len(fit))
    return np.sum([shells[j] for j in fit], axis=0) * ratio / (1.0 - ratio)


def adaptive_box(
    f: Callable,
    k: int,
    embed: Callable = lambda x: x,
    tube_distance: Callable | None = None,
    policy: QuadPolicy = QuadPolicy(),
    tail_exponent: float | None = None,
) -> QuadResult:
    """Adaptive integration of ``f`` over ``(-1, 1)^k``.

    ``tube_distance(x)`` gives the distance of embedded points to the
    singular set; cells within a few cell-widths of it are always refined.
    """
    ref = _reference_rule(k)
    offs = _child_offsets(k)
    level = policy.min_depth
    size = 2.0 / 2**level
    grid = np.arange(2**level) * size - 1.0
    lower = np.array(list(itertools.product(grid, repeat=k)))
    parent = _gauss_cells(f, lower, size, embed, ref)
    ncomp = parent.shape[1]
    vol_box = 2.0**k
    floor = policy.atol + policy.gtol * np.abs(parent).sum(axis=0)
    tag = np.full(lower.shape[0], -1)
    value = np.zeros(ncomp)
    error = np.zeros(ncomp)
    shells: dict[int, np.ndarray] = {}
    crude = np.zeros(ncomp)
    cells = lower.shape[0]
    partial = False
    tube_depth = policy.tube_depth if tube_distance is not None and policy.refine_near_S else None
    while lower.shape[0]:
        half = size / 2.0
        child_lower = (lower[:, None, :] + half * offs[None]).reshape(-1, k)
        child = _gauss_cells(f, child_lower, half, embed, ref).reshape(lower.shape[0], offs.shape[0], ncomp)
        refined = child.sum(axis=1)
        disc = np.abs(refined - parent)
        cells += child_lower.shape[0]
        if tube_depth is not None:
            centre = embed(lower + half)
            tube = tube_distance(centre) < (1.0 + math.sqrt(len(centre[0]))) * size / 2.0
        else:
            tube = np.zeros(lower.shape[0], dtype=bool)
        tag = np.where((tag < 0) & ~tube, level - 1, tag)
        thresh = np.maximum(floor * size**k / vol_box, policy.rtol * np.abs(refined))
        good = np.all(disc <= thresh, axis=1)
        last = level >= policy.max_depth or cells > policy.budget
        if cells > policy.budget:
            partial = True
        accept = ~tube & (good | last)
        if last and np.any(~tube & ~good):
            partial = partial or level < policy.max_depth
        excluded = tube & ((tube_depth is not None and level >= tube_depth) | last)
        value += refined[accept].sum(axis=0)
        error += disc[accept].sum(axis=0)
        for j in np.unique(tag[accept]):
            shells[int(j)] = shells.get(int(j), 0.0) + refined[accept & (tag == j)].sum(axis=0)
        crude += refined[excluded].sum(axis=0)
        go = ~(accept | excluded)
        lower = child_lower.reshape(lower.shape[0], offs.shape[0], k)[go].reshape(-1, k)
        parent = child[go].reshape(-1, ncomp)
        tag = np.repeat(tag[go], offs.shape[0])
        size = half
        level += 1
    depth = tube_depth if tube_depth is not None else 0
    if tube_depth is not None:
        tail = _tail(shells, depth, tail_exponent, ncomp, crude)
        signed = _signed_tail(shells, depth, tail_exponent, ncomp)
    else:
        tail = signed = np.zeros(ncomp)
    squeeze = (lambda a: float(a[0])) if ncomp == 1 else (lambda a: a)
    return QuadResult(
        value=squeeze(value),
        error_estimate=squeeze(error),
        cells=int(cells),
        excluded_mass_bound=squeeze(tail),
        tail_estimate=squeeze(signed),
        partial=partial,
        shells=shells,
    )


def integrate_volume(
    f: Callable,
    config: FractalConfig,
    policy: QuadPolicy = QuadPolicy(),
    tail_exponent: float | None = None,
) -> QuadResult:
    """Integrate ``f`` over ``(-1, 1)^d`` avoiding the contact set of ``config``.

    ``f`` maps ``(N, d)`` points to ``(N,)`` or ``(N, K)`` values.  With
    ``tail_exponent`` set, ``excluded_mass_bound`` is the shell-extrapolated
    bound on the skipped tube (safety factor 2); without it, it is the crude
    Gauss estimate of the tube cells.
    """
    return adaptive_box(f, config.d, tube_distance=config.distance_to_contact, policy=policy,
                        tail_exponent=tail_exponent)


def face_embedding(d: int, axis: int, side: float) -> Callable:
    def embed(y: np.ndarray) -> np.ndarray:
        return np.insert(y, axis, side, axis=1)

    return embed


def integrate_surface(g: Callable, d: int, face: tuple[int, float], policy: QuadPolicy = QuadPolicy()) -> QuadResult:
    """Integrate ``g`` over the face ``{x_axis = side}`` of the cube."""
    axis, side = face
    return adaptive_box(g, d - 1, embed=face_embedding(d, axis, float(side)), policy=policy)


def all_faces(d: int):
    return [(i, s) for i in range(d) for s in (-1.0, 1.0)]
