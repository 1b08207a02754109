"""Building-block fields, transition functions and the three fractal regimes.

All evaluators are vectorized: points come in as an ``(N, d)`` array and
every field is returned with a leading axis of length ``N``.  Writing
``x = (xbar, z)`` with ``z = x_d``:

* ``u`` is a bounded function whose gradient is supported away from the
  support of ``b``,
* ``A`` is skew-symmetric and ``b`` is its row-wise divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from dataclasses import fields as dc_fields

import numpy as np

from .cantor import (
    FractalConfig,
    Regime,
    cantor_distance,
    cantor_nearest_1d,
    cantor_tree_sum,
    leaf_level,
)
from .errors import SingularPointError

RAMP_STEEPNESS = 0.6
# sup of the ramp derivative for the steepness above, rounded up
RAMP_SLOPE = 1.4913
EXCLUSION_RADIUS = 1e-6
# Cantor cells are resolved down to this fraction of the local length scale
CANTOR_RESOLUTION = 1.0 / 256.0
ETA_INNER = 4.0 / 6.0
ETA_OUTER = 5.0 / 6.0


def ramp(s):
    """Smooth monotone step: 0 for s <= 0, 1 for s >= 1, C-infinity in between."""
    s = np.asarray(s, dtype=float)
    t = np.clip(s, 1e-300, 1.0 - 1e-16)
    with np.errstate(over="ignore", divide="ignore"):
        arg = 0.5 * RAMP_STEEPNESS * (1.0 / t - 1.0 / (1.0 - t))
    val = 0.5 * (1.0 - np.tanh(arg))
    return np.where(s <= 0.0, 0.0, np.where(s >= 1.0, 1.0, val))


def ramp_prime(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    t = np.where(inside, s, 0.5)
    val = ramp(t)
    slope = RAMP_STEEPNESS * (1.0 / t**2 + 1.0 / (1.0 - t) ** 2) * val * (1.0 - val)
    return np.where(inside, slope, 0.0)


def theta(t):
    """Transition with 1_{(1/2, inf)} <= theta <= 1_{(1/4, inf)}."""
    return ramp(4.0 * np.asarray(t, dtype=float) - 1.0)


def theta_prime(t):
    return 4.0 * ramp_prime(4.0 * np.asarray(t, dtype=float) - 1.0)


def falling(ratio, tau1: float, tau2: float):
    """Value and ratio-derivative of the ramp that is 1 below tau1, 0 above tau2."""
    s = (tau2 - np.asarray(ratio, dtype=float)) / (tau2 - tau1)
    return ramp(s), -ramp_prime(s) / (tau2 - tau1)


def sphere_normalization(d: int) -> float:
    """Twice the area of the unit sphere in R^{d-1}.

    This makes each of the two faces x_d = +-1 carry half of the unit
    boundary pairing while |u| = 1 there (4 for d = 2, 4*pi for d = 3).
    """
    k = d - 1
    return 2.0 * 2.0 * math.pi ** (k / 2.0) / math.gamma(k / 2.0)


@dataclass
class FieldSample:
    u: np.ndarray | None
    grad_u: np.ndarray | None
    A: np.ndarray | None
    b: np.ndarray | None
    near_singular: np.ndarray

    def __len__(self):
        return self.near_singular.shape[0]


@dataclass
class LocalizedSample(FieldSample):
    eta: np.ndarray = None
    grad_eta: np.ndarray = None
    u_in: np.ndarray = None
    grad_u_in: np.ndarray = None
    u_bd: np.ndarray = None
    grad_u_bd: np.ndarray = None
    A_in: np.ndarray | None = None
    A_bd: np.ndarray | None = None
    b_in: np.ndarray = None
    b_bd: np.ndarray = None


def _as_points(x, d: int | None = None) -> np.ndarray:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if d is not None and x.shape[1] != d:
        raise ValueError(f"expected points in R^{d}, got shape {x.shape}")
    return x


def _skew_from(vec: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Matrix g * [[0, -xbar], [xbar^T, 0]] for rows of ``vec`` = xbar."""
    n, k = vec.shape
    out = np.zeros((n, k + 1, k + 1))
    out[:, :k, k] = -g[:, None] * vec
    out[:, k, :k] = g[:, None] * vec
    return out


def _block_parts(xbar: np.ndarray, z: np.ndarray, want: set, sigma: float) -> dict:
    """Building block at relative positions (xbar, z), vectorized."""
    d = xbar.shape[1] + 1
    r = np.linalg.norm(xbar, axis=1)
    az = np.abs(z)
    sz = np.sign(z)
    rs = np.where(r > 0, r, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(r > 0, az / rs, np.inf)
        down = np.where(az > 0, r / np.where(az > 0, az, 1.0), np.inf)
    out = {}
    if "u" in want:
        out["u"] = sz * theta(up)
    if "grad_u" in want:
        tp = np.where(np.isfinite(up), theta_prime(np.where(np.isfinite(up), up, 0.0)), 0.0)
        g = np.zeros((xbar.shape[0], d))
        g[:, :-1] = (sz * tp * (-az / rs**3))[:, None] * xbar
        g[:, -1] = tp / rs
        out["grad_u"] = g
    if "A" in want:
        gval = theta(down) * rs ** (1 - d) / sigma
        gval = np.where(r > 0, gval, 0.0)
        out["A"] = _skew_from(xbar, gval)
    if "b" in want:
        dfin = np.where(np.isfinite(down), down, 0.0)
        tp = np.where(np.isfinite(down), theta_prime(dfin), 0.0)
        azs = np.where(az > 0, az, 1.0)
        coef = tp * rs ** (2 - d) / sigma
        b = np.zeros((xbar.shape[0], d))
        b[:, :-1] = (coef * sz / azs**2)[:, None] * xbar
        b[:, -1] = coef / azs
        out["b"] = np.where((r > 0)[:, None], b, 0.0)
    return out


def building_block(x, d: int | None = None, want=("u", "grad_u", "A", "b")) -> FieldSample:
    """The revised Zhikov fields u_d, A_d, b_d at points ``x`` (not the origin)."""
    x = _as_points(x, d)
    d = x.shape[1]
    if np.any(np.all(x == 0.0, axis=1)):
        raise SingularPointError("the building block is undefined at the origin")
    parts = _block_parts(x[:, :-1], x[:, -1], set(want), sphere_normalization(d))
    near = np.linalg.norm(x, axis=1) < EXCLUSION_RADIUS
    return FieldSample(parts.get("u"), parts.get("grad_u"), parts.get("A"), parts.get("b"), near)


def rho(x, config: FractalConfig, tau1: float = 2.0, tau2: float = 4.0):
    """Smooth indicator of a cone-like neighbourhood of the contact set.

    Sub: ratio = d(xbar, C^m)/|x_d|.  Super: ratio = d(x_d, C)/|xbar|.
    Returns the value (1 for ratio <= tau1, 0 for ratio >= tau2) and the
    gradient, which uses the nearest-point direction of the distance.
    """
    x = _as_points(x, config.d)
    lam = config.cantor.lam
    if config.regime is Regime.SUB:
        dist, near = cantor_distance(x[:, :-1], lam, return_nearest=True)
        scale = np.abs(x[:, -1])
        if np.any((scale == 0) & (dist == 0)):
            raise SingularPointError("rho is undefined on the contact set")
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(scale > 0, dist / np.where(scale > 0, scale, 1.0), np.inf)
        val, dval = falling(ratio, tau1, tau2)
        dval = np.where(np.isfinite(ratio), dval, 0.0)
        ds = np.where(dist > 0, dist, 1.0)
        ss = np.where(scale > 0, scale, 1.0)
        grad = np.zeros_like(x)
        grad[:, :-1] = (dval / (ds * ss))[:, None] * (x[:, :-1] - near)
        grad[:, -1] = -dval * dist * np.sign(x[:, -1]) / ss**2
        return val, grad
    if config.regime is Regime.SUPER:
        xbar = x[:, :-1]
        near = cantor_nearest_1d(x[:, -1], lam)
        dist = np.abs(x[:, -1] - near)
        scale = np.linalg.norm(xbar, axis=1)
        if np.any((scale == 0) & (dist == 0)):
            raise SingularPointError("rho is undefined on the contact set")
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(scale > 0, dist / np.where(scale > 0, scale, 1.0), np.inf)
        val, dval = falling(ratio, tau1, tau2)
        dval = np.where(np.isfinite(ratio), dval, 0.0)
        ss = np.where(scale > 0, scale, 1.0)
        grad = np.zeros_like(x)
        grad[:, :-1] = (-dval * dist / ss**3)[:, None] * xbar
        grad[:, -1] = dval * np.sign(x[:, -1] - near) / ss
        return val, grad
    raise ValueError("rho is only defined for the sub and super regimes")


def _box_distances(xbar: np.ndarray, centres: np.ndarray, half: float):
    """Min and max Euclidean distance from points to axis-aligned cubes."""
    gap = np.abs(xbar - centres)
    near = np.linalg.norm(np.maximum(gap - half, 0.0), axis=1)
    far = np.linalg.norm(gap + half, axis=1)
    return near, far


def _target_levels(scale, config: FractalConfig, depth, n: int) -> np.ndarray:
    cap = config.cantor.max_level
    if depth is None:
        return leaf_level(scale, config.cantor.lam, CANTOR_RESOLUTION, cap)
    return np.clip(np.broadcast_to(np.asarray(depth, dtype=int), (n,)), 0, cap)


def _sub_convolution(x, config: FractalConfig, which: str, depth=None) -> np.ndarray:
    """(mu^{d-1} x delta_0) * A_d or * b_d at points ``x``."""
    d = config.d
    m = d - 1
    lam = config.cantor.lam
    sigma = sphere_normalization(d)
    xbar = x[:, :-1]
    z = x[:, -1]
    az = np.abs(z)
    target = _target_levels(az, config, depth, x.shape[0])

    if which == "b":
        def classify(idx, centres, half):
            near, far = _box_distances(xbar[idx], centres, half)
            zero = (near >= 0.5 * az[idx]) | (far <= 0.25 * az[idx])
            return np.where(zero, 0, 1), None

        def kernel(idx, nodes):
            return _block_parts(xbar[idx] - nodes, z[idx], {"b"}, sigma)["b"]

        return cantor_tree_sum(x.shape[0], lam, m, target, classify, kernel, (d,))

    def classify(idx, centres, half):
        near, far = _box_distances(xbar[idx], centres, half)
        codes = np.where(far <= 0.25 * az[idx], 0, 1)
        values = None
        if d == 2:
            flat = (near > 0) & (near >= 0.5 * az[idx])
            codes = np.where(flat, 2, codes)
            sgn = np.sign(xbar[idx, 0] - centres[:, 0]) / sigma
            values = np.zeros((idx.size, 2, 2))
            values[:, 0, 1] = -sgn
            values[:, 1, 0] = sgn
        return codes, values

    def kernel(idx, nodes):
        return _block_parts(xbar[idx] - nodes, z[idx], {"A"}, sigma)["A"]

    return cantor_tree_sum(x.shape[0], lam, m, target, classify, kernel, (d, d))


def _super_convolution(x, config: FractalConfig, which: str, depth=None) -> np.ndarray:
    """(delta_0^{d-1} x mu) * u_d or * grad u_d at points ``x``."""
    d = config.d
    lam = config.cantor.lam
    sigma = sphere_normalization(d)
    xbar = x[:, :-1]
    z = x[:, -1]
    r = np.linalg.norm(xbar, axis=1)
    target = _target_levels(r, config, depth, x.shape[0])

    def classify(idx, centres, half):
        s_lo = z[idx] - centres[:, 0] - half
        s_hi = z[idx] - centres[:, 0] + half
        rr = r[idx]
        pos = s_lo >= 0.5 * rr
        neg = s_hi <= -0.5 * rr
        flat_zero = np.maximum(np.abs(s_lo), np.abs(s_hi)) <= 0.25 * rr
        codes = np.ones(idx.size, dtype=int)
        codes[flat_zero] = 0
        if which == "u":
            codes[pos | neg] = 2
            return codes, np.where(pos, 1.0, -1.0)
        codes[pos | neg] = 0
        return codes, None

    def kernel(idx, nodes):
        return _block_parts(xbar[idx], z[idx] - nodes[:, 0], {which}, sigma)[which]

    shape = () if which == "u" else (d,)
    return cantor_tree_sum(x.shape[0], lam, 1, target, classify, kernel, shape)


def fractal_fields(x, config: FractalConfig, want=("u", "grad_u", "A", "b"), depth=None) -> FieldSample:
    """Fields u, grad u, A, b of the configured regime at points ``x``.

    ``depth`` fixes the Cantor level of the convolutions (an int or one
    level per point); by default it adapts to the distance from the
    contact set.  Points within ``EXCLUSION_RADIUS`` of the contact set are
    flagged ``near_singular``; exact hits of the contact set get NaN.
    """
    x = _as_points(x, config.d)
    want = set(want)
    near = config.distance_to_contact(x) < EXCLUSION_RADIUS
    on_set = config.distance_to_contact(x) == 0.0
    if config.regime is Regime.MATCHING:
        xs = np.where(on_set[:, None], 1.0, x)
        parts = _block_parts(xs[:, :-1], xs[:, -1], want, sphere_normalization(config.d))
    else:
        xs = np.where(on_set[:, None], 0.5, x)
        parts = {}
        if config.regime is Regime.SUB:
            if want & {"u", "grad_u"}:
                val, grad = rho(xs, config)
                sz = np.sign(xs[:, -1])
                parts["u"] = sz * val
                parts["grad_u"] = sz[:, None] * grad
            if "A" in want:
                parts["A"] = _sub_convolution(xs, config, "A", depth)
            if "b" in want:
                parts["b"] = _sub_convolution(xs, config, "b", depth)
        else:
            if "u" in want:
                parts["u"] = _super_convolution(xs, config, "u", depth)
            if "grad_u" in want:
                parts["grad_u"] = _super_convolution(xs, config, "grad_u", depth)
            if want & {"A", "b"}:
                xbar = xs[:, :-1]
                r = np.linalg.norm(xbar, axis=1)
                rs = np.where(r > 0, r, 1.0)
                g = np.where(r > 0, rs ** (1 - config.d), 0.0) / sphere_normalization(config.d)
                val, grad = rho(xs, config)
                if "A" in want:
                    parts["A"] = _skew_from(xbar, g * val)
                if "b" in want:
                    b = np.zeros_like(xs)
                    b[:, :-1] = -(g * grad[:, -1])[:, None] * xbar
                    b[:, -1] = g * np.einsum("ij,ij->i", xbar, grad[:, :-1])
                    parts["b"] = b
    for key, v in parts.items():
        if v is not None and on_set.any():
            v[on_set] = np.nan
    keep = {k: (parts.get(k) if k in want else None) for k in ("u", "grad_u", "A", "b")}
    return FieldSample(near_singular=near, **keep)


def cutoff_eta(x, d: int | None = None):
    """Tensor-product cutoff: 1 on [-4/6, 4/6]^d, 0 outside (-5/6, 5/6)^d."""
    x = _as_points(x, d)
    width = ETA_OUTER - ETA_INNER
    s = (ETA_OUTER - np.abs(x)) / width
    f = ramp(s)
    fp = -np.sign(x) * ramp_prime(s) / width
    eta = np.prod(f, axis=1)
    grad = np.empty_like(x)
    for i in range(x.shape[1]):
        grad[:, i] = fp[:, i] * np.prod(np.delete(f, i, axis=1), axis=1)
    return eta, grad


ETA_GRAD_BOUND_PER_AXIS = RAMP_SLOPE / (ETA_OUTER - ETA_INNER)


def localized_fields(x, config: FractalConfig, with_A: bool = False, depth=None,
                     want=("u", "grad_u", "b")) -> LocalizedSample:
    """Fields split by the cutoff into an interior part and a boundary part.

    u° = eta u, u^b = (1 - eta) u, b° = eta b + A grad eta and
    b^b = (1 - eta) b - A grad eta.  ``A`` itself is only needed where
    grad eta is nonzero; it is returned everywhere when ``with_A`` is set.
    Leaving "b" out of ``want`` skips the flux side entirely.
    """
    x = _as_points(x, config.d)
    want = set(want) | {"u", "grad_u"}
    base = fractal_fields(x, config, want=tuple(want), depth=depth)
    eta, geta = cutoff_eta(x)
    u, gu, b = base.u, base.grad_u, base.b
    out = LocalizedSample(
        u=u,
        grad_u=gu,
        A=None,
        b=b,
        near_singular=base.near_singular,
        eta=eta,
        grad_eta=geta,
        u_in=eta * u,
        grad_u_in=eta[:, None] * gu + u[:, None] * geta,
        u_bd=(1.0 - eta) * u,
        grad_u_bd=(1.0 - eta)[:, None] * gu - u[:, None] * geta,
    )
    if "b" not in want:
        return out
    shell = np.any(geta != 0.0, axis=1)
    a_geta = np.zeros_like(x)
    if with_A:
        A = fractal_fields(x, config, want=("A",), depth=depth).A
        a_geta = np.einsum("nij,nj->ni", A, geta)
        out.A = A
        out.A_in = eta[:, None, None] * A
        out.A_bd = (1.0 - eta)[:, None, None] * A
    elif shell.any():
        sub_depth = depth if depth is None or np.ndim(depth) == 0 else np.asarray(depth)[shell]
        As = fractal_fields(x[shell], config, want=("A",), depth=sub_depth).A
        a_geta[shell] = np.einsum("nij,nj->ni", As, geta[shell])
    out.b_in = eta[:, None] * b + a_geta
    out.b_bd = (1.0 - eta)[:, None] * b - a_geta
    return out


def sample_as_dict(sample: FieldSample) -> dict:
    return {f.name: getattr(sample, f.name) for f in dc_fields(sample)}
