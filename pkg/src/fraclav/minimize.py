"""Discrete minimization of the modular energy on a uniform grid.

Grid functions live on the nodes of the uniform grid with ``n`` nodes per
axis on [-1, 1]^d.  Each cell gets the forward-difference gradient taken at
its lower corner, and phi is evaluated at the cell centre, so the discrete
energy is a convex function of the nodal values.

The solver descends on the interior nodes only.  Directions are gradients
preconditioned by the discrete Dirichlet Laplacian (exact for the quadratic
energy), step lengths come from the Barzilai-Borwein rule and are cut back
until the Armijo condition holds, so the energy never increases.
"""

from __future__ import annotations

import csv
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .fields import fractal_fields
from .orlicz import OrliczModel

ARMIJO = 1e-4
MAX_BACKTRACK = 80


@dataclass(frozen=True)
class SolverPolicy:
    max_iter: int = 5000
    rtol: float = 1e-10
    window: int = 10
    precondition: bool = True


@dataclass
class GridFunction:
    """Nodal values on the uniform grid; boundary nodes hold fixed data."""

    n: int
    values: np.ndarray
    boundary_mask: np.ndarray

    @property
    def d(self) -> int:
        return self.values.ndim

    @property
    def h(self) -> float:
        return 2.0 / (self.n - 1)

    @classmethod
    def from_function(cls, f: Callable, n: int, d: int) -> GridFunction:
        x = grid_nodes(n, d)
        vals = np.asarray(f(x), dtype=float).reshape((n,) * d)
        return cls(n, vals, boundary_mask(n, d))

    def nodes(self) -> np.ndarray:
        return grid_nodes(self.n, self.d)

    def copy(self) -> GridFunction:
        return GridFunction(self.n, self.values.copy(), self.boundary_mask.copy())


def grid_nodes(n: int, d: int) -> np.ndarray:
    """Node coordinates, shape (n^d, d), in C order of the value array."""
    g = np.linspace(-1.0, 1.0, n)
    return np.stack(np.meshgrid(*([g] * d), indexing="ij"), axis=-1).reshape(-1, d)


def boundary_mask(n: int, d: int) -> np.ndarray:
    m = np.zeros((n,) * d, dtype=bool)
    for a in range(d):
        idx = [slice(None)] * d
        idx[a] = 0
        m[tuple(idx)] = True
        idx[a] = n - 1
        m[tuple(idx)] = True
    return m


def cell_centres(n: int, d: int) -> np.ndarray:
    h = 2.0 / (n - 1)
    g = -1.0 + h * (np.arange(n - 1) + 0.5)
    return np.stack(np.meshgrid(*([g] * d), indexing="ij"), axis=-1).reshape(-1, d)


def _lower(d: int) -> tuple:
    return tuple(slice(0, -1) for _ in range(d))


def _upper(a: int, d: int) -> tuple:
    return tuple(slice(1, None) if b == a else slice(0, -1) for b in range(d))


def _cell_gradients(values: np.ndarray, h: float) -> np.ndarray:
    """Forward differences at each cell's lower corner, shape (cells, d)."""
    d = values.ndim
    lo = values[_lower(d)]
    return np.stack([(values[_upper(a, d)] - lo).reshape(-1) / h for a in range(d)], axis=1)


class _Energy:
    """E(v) = h^d sum_cells phi(c, scale |grad_h v|) with its gradient."""

    def __init__(self, model: OrliczModel, n: int, d: int, scale: float = 1.0):
        self.model = model
        self.n = n
        self.d = d
        self.h = 2.0 / (n - 1)
        self.vol = self.h**d
        self.scale = scale
        self.centres = cell_centres(n, d)

    def value(self, values: np.ndarray) -> float:
        g = np.linalg.norm(_cell_gradients(values, self.h), axis=1)
        return float(self.vol * np.sum(self.model.phi(self.centres, self.scale * g)))

    def gradient(self, values: np.ndarray) -> np.ndarray:
        grads = _cell_gradients(values, self.h)
        norm = np.linalg.norm(grads, axis=1)
        dphi = self.model.phi_prime(self.centres, self.scale * norm)
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(norm > 0, self.scale * dphi / norm, 0.0)
        flux = (self.vol / self.h) * coef[:, None] * grads
        shape = (self.n - 1,) * self.d
        out = np.zeros_like(values)
        for a in range(self.d):
            fa = flux[:, a].reshape(shape)
            out[_upper(a, self.d)] += fa
            out[_lower(self.d)] -= fa
        return out


def discrete_energy(model: OrliczModel, w: GridFunction, scale: float = 1.0) -> float:
    """Discrete F(scale * w): forward-difference gradients, phi at cell centres."""
    return _Energy(model, w.n, w.d, scale).value(w.values)


class _LaplacePreconditioner:
    """Inverse of the Dirichlet 5-point (2d+1-point) Laplacian on interior nodes."""

    def __init__(self, n: int, d: int):
        m = n - 2
        k = np.arange(1, m + 1)
        self.sine = np.sqrt(2.0 / (m + 1)) * np.sin(np.pi * np.outer(k, k) / (m + 1))
        lam1 = 2.0 - 2.0 * np.cos(np.pi * k / (m + 1))
        self.eig = sum(np.meshgrid(*([lam1] * d), indexing="ij"))
        self.d = d
        self.h = 2.0 / (n - 1)

    def _transform(self, a: np.ndarray) -> np.ndarray:
        for ax in range(self.d):
            a = np.moveaxis(np.tensordot(self.sine, a, axes=([1], [ax])), 0, ax)
        return a

    def apply(self, g: np.ndarray) -> np.ndarray:
        inner = tuple(slice(1, -1) for _ in range(self.d))
        out = np.zeros_like(g)
        out[inner] = self._transform(self._transform(g[inner]) / self.eig) / self.h ** (self.d - 2)
        return out


@dataclass
class MinimizeResult:
    w: GridFunction
    energy: float
    initial_energy: float
    iterations: int
    converged: bool
    grad_norm: float
    log: list = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return not self.converged

    def summary(self) -> dict:
        return {"energy": self.energy, "initial_energy": self.initial_energy, "iterations": self.iterations,
                "converged": self.converged, "partial": self.partial, "grad_norm": self.grad_norm}


def fractal_data(config) -> Callable:
    """u on grid nodes; nodes on the contact set, where u is undefined, get 0."""

    def f(x):
        u = fractal_fields(x, config, want=("u",)).u
        return np.where(np.isfinite(u), u, 0.0)

    return f


def minimize_w(model: OrliczModel, t: float, n: int = 65, policy: SolverPolicy = SolverPolicy(),
               data: Callable | None = None, init: str | np.ndarray = "interpolant",
               d: int | None = None) -> MinimizeResult:
    """Minimize F over grid functions equal to t * data on the boundary.

    ``data`` defaults to the fractal u of ``model.config``; it only matters
    on boundary nodes unless ``init`` is "interpolant".  Iterates are kept
    in units of t (w = t v), which keeps huge t within range.  ``init`` is
    "interpolant", "zero" (interior zero) or an array of nodal values of v.
    """
    if n < 3:
        raise DomainError(f"need at least 3 nodes per axis, got {n}")
    if data is None:
        if model.config is None:
            raise DomainError("boundary data required for a model without a configuration")
        data = fractal_data(model.config)
        d = model.config.d
    if d is None:
        raise DomainError("dimension required with explicit boundary data")
    v = GridFunction.from_function(data, n, d)
    mask = v.boundary_mask
    if isinstance(init, str):
        if init == "zero":
            v.values[~mask] = 0.0
        elif init != "interpolant":
            raise DomainError(f"unknown initialisation {init!r}")
    else:
        v.values[~mask] = np.asarray(init, dtype=float).reshape(v.values.shape)[~mask]

    energy = _Energy(model, n, d, scale=t)
    prec = _LaplacePreconditioner(n, d) if policy.precondition else None
    vals = v.values
    e = energy.value(vals)
    e0 = e
    history = [e]
    log = [(0, e, 0.0, math.nan)]
    grad = np.where(mask, 0.0, energy.gradient(vals))
    step = None
    prev = None
    converged = False
    it = 0
    for it in range(1, policy.max_iter + 1):
        direc = -(prec.apply(grad) if prec else grad)
        slope = float(np.sum(grad * direc))
        if not slope < 0:
            converged = True
            break
        if step is None:
            step = e / -slope if e > 0 else 1.0
        elif prev is not None:
            # Barzilai-Borwein in the preconditioned metric: s.y / y.P^-1 y
            ds, dg = vals - prev[0], grad - prev[1]
            sy = float(np.sum(ds * dg))
            ypy = float(np.sum(dg * (prec.apply(dg) if prec else dg)))
            step = sy / ypy if sy > 0 and ypy > 0 else 2.0 * step
        for _ in range(MAX_BACKTRACK):
            trial = vals + step * direc
            et = energy.value(trial)
            if et <= e + ARMIJO * step * slope:
                break
            step /= 2.0
        else:
            converged = True
            break
        prev = (vals, grad)
        vals, e = trial, et
        grad = np.where(mask, 0.0, energy.gradient(vals))
        history.append(e)
        gnorm = float(np.linalg.norm(grad))
        log.append((it, e, step, gnorm))
        if len(history) > policy.window:
            ref = history[-1 - policy.window]
            if ref - e <= policy.rtol * abs(ref):
                converged = True
                break
    v.values = vals
    w = GridFunction(n, t * vals, mask)
    return MinimizeResult(w, e, e0, it, converged, float(np.linalg.norm(grad)), log)


def write_field_csv(path, w: GridFunction) -> None:
    """Columns x1..xd, value, boundary in C order of the nodes."""
    x = w.nodes()
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow([f"x{i + 1}" for i in range(w.d)] + ["value", "boundary"])
        for row, val, b in zip(x, w.values.reshape(-1), w.boundary_mask.reshape(-1)):
            out.writerow([repr(float(c)) for c in row] + [repr(float(val)), int(b)])


def write_log_csv(path, result: MinimizeResult) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["iteration", "energy", "step", "grad_norm"])
        for row in result.log:
            out.writerow([row[0]] + [repr(float(c)) for c in row[1:]])
