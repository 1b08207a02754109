"""Generalized Orlicz integrands, their conjugates and norm diagnostics.

Every model splits the cube into a gradient side, where ``grad u`` lives,
and a flux side, where ``b`` lives.  ``flux_side`` is a smooth indicator
that is 0 on the first and 1 on the second; the three models only differ
in what they place on each side:

* variable exponent: ``t^p(x)/p(x)`` with ``p = p-`` on the gradient side,
* double phase: ``t^p/p + a(x) t^q/q`` with ``a = 0`` on the gradient side,
* weighted: ``(omega(x) t)^p/p`` with a small weight on the gradient side.

Points are ``(N, d)`` arrays.  Arguments ``t`` broadcast as ``(N,)`` or
``(N, K)``, the second form evaluating K scalings at once.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .cantor import FractalConfig, Regime, cantor_distance, cantor_distance_1d
from .errors import BudgetError, DomainError
from .fields import falling

CONJUGATE_TOL = 1e-12
LUXEMBURG_TOL = 1e-10
WEAK_GAMMAS = 2.0 ** np.arange(math.floor(math.log2(1e-3)), math.ceil(math.log2(1e9)) + 1)
FLUX_SIDE_TAU = (0.5, 2.0)


def log_modulus(t, kappa: float):
    """sigma(t) = log(e + 1/t)^(-kappa), with sigma(0) = 0."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        inv = np.where(t > 0, 1.0 / np.where(t > 0, t, 1.0), np.inf)
    return np.where(t > 0, np.log(math.e + inv) ** (-kappa), 0.0)


def weight_scale(x, config: FractalConfig) -> np.ndarray:
    """|x_d|, or |xbar| in the super regime; the length the weights are powers of."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if config.regime is Regime.SUPER:
        return np.linalg.norm(x[:, :-1], axis=1)
    return np.abs(x[:, -1])


def _ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))


def _side_ratio(x, config: FractalConfig) -> np.ndarray:
    """A ratio that is small near supp b and large near supp grad u."""
    z = np.abs(x[:, -1])
    r = np.linalg.norm(x[:, :-1], axis=1)
    if config.regime is Regime.MATCHING:
        return _ratio(r, z)
    if config.regime is Regime.SUB:
        return _ratio(cantor_distance(x[:, :-1], config.lam), z)
    return _ratio(r, cantor_distance_1d(x[:, -1], config.lam))


def flux_side(x, config: FractalConfig) -> np.ndarray:
    """Smooth indicator: 1 near supp b, 0 near supp grad u, values in [0, 1].

    It is 1 where the side ratio is at most 1/2 and 0 where it is at least 2.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    val, _ = falling(_side_ratio(x, config), *FLUX_SIDE_TAU)
    return val


def flux_side_sharp(x, config: FractalConfig) -> np.ndarray:
    """Indicator of the flux side with the cut at ratio 1."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return (_side_ratio(x, config) < 1.0).astype(float)


def _col(c: np.ndarray, t: np.ndarray) -> np.ndarray:
    return c[:, None] if t.ndim == 2 else c


@dataclass
class OrliczModel:
    """Pointwise integrand phi(x, t) with its conjugate.

    ``delta2_exponent`` is the largest power in phi, so phi(x, 2t) <=
    2^delta2_exponent phi(x, t).  ``nabla2_exponent`` is the smallest, so
    phi(x, g t) <= g^nabla2_exponent phi(x, t) for g in (0, 1].
    ``tail_powers`` maps "grad" and "flux" to (power, weight power) of the
    integrands phi(|grad u|) and phi*(|b|) near the contact set, or None
    when no power law applies.
    """

    kind: str
    config: FractalConfig | None
    params: dict
    delta2_exponent: float
    nabla2_exponent: float
    tail_powers: dict = field(default_factory=dict)

    def phi(self, x, t):
        raise NotImplementedError

    def phi_prime(self, x, t):
        raise NotImplementedError

    def phi_second(self, x, t):
        raise NotImplementedError

    def phi_star(self, x, s):
        return legendre_solve(self, x, s)

    @property
    def closed_conjugate(self) -> bool:
        return False

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}


class PowerModel(OrliczModel):
    """phi(x, t) = (omega(x) t)^p(x) / p(x)."""

    def __init__(self, kind, config, params, exponent: Callable, weight: Callable | None,
                 p_range: tuple[float, float], tail_powers=None):
        super().__init__(kind, config, params, p_range[1], p_range[0], tail_powers or {})
        self._exponent = exponent
        self._weight = weight

    def exponent(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.broadcast_to(np.asarray(self._exponent(x), dtype=float), (x.shape[0],))

    def weight(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self._weight is None:
            return np.ones(x.shape[0])
        return np.asarray(self._weight(x), dtype=float)

    def _coeffs(self, x, t):
        t = np.asarray(t, dtype=float)
        return _col(self.exponent(x), t), _col(self.weight(x), t), t

    def phi(self, x, t):
        p, w, t = self._coeffs(x, t)
        return (w * t) ** p / p

    def phi_prime(self, x, t):
        p, w, t = self._coeffs(x, t)
        return w**p * t ** (p - 1.0)

    def phi_second(self, x, t):
        p, w, t = self._coeffs(x, t)
        with np.errstate(divide="ignore"):
            return (p - 1.0) * w**p * t ** (p - 2.0)

    def phi_star(self, x, s):
        p, w, s = self._coeffs(x, s)
        q = p / (p - 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (s / w) ** q / q
        return np.where(s == 0, 0.0, out)

    @property
    def closed_conjugate(self) -> bool:
        return True


class DoublePhaseModel(OrliczModel):
    """phi(x, t) = t^p/p + a(x) t^q/q."""

    def __init__(self, config, params, coefficient: Callable, tail_powers=None):
        super().__init__("double_phase", config, params, params["q"], params["p"], tail_powers or {})
        self.p = params["p"]
        self.q = params["q"]
        self._coefficient = coefficient

    def coefficient(self, x) -> np.ndarray:
        return np.asarray(self._coefficient(np.atleast_2d(np.asarray(x, dtype=float))), dtype=float)

    def phi(self, x, t):
        t = np.asarray(t, dtype=float)
        a = _col(self.coefficient(x), t)
        return t**self.p / self.p + a * t**self.q / self.q

    def phi_prime(self, x, t):
        t = np.asarray(t, dtype=float)
        a = _col(self.coefficient(x), t)
        return t ** (self.p - 1.0) + a * t ** (self.q - 1.0)

    def phi_second(self, x, t):
        t = np.asarray(t, dtype=float)
        a = _col(self.coefficient(x), t)
        with np.errstate(divide="ignore"):
            return (self.p - 1.0) * t ** (self.p - 2.0) + a * (self.q - 1.0) * t ** (self.q - 2.0)

    def psi(self, x, s):
        """Upper bound for phi* from the q-phase alone; infinite where a = 0."""
        s = np.asarray(s, dtype=float)
        a = _col(self.coefficient(x), s)
        qc = self.q / (self.q - 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(a > 0, np.where(a > 0, a, 1.0) ** (-1.0 / (self.q - 1.0)), np.inf)
            return np.where(s == 0, 0.0, scale * s**qc / qc)


def legendre_solve(model: OrliczModel, x, s, tol: float = CONJUGATE_TOL) -> np.ndarray:
    """sup_t (s t - phi(x, t)) through the first-order condition phi'(x, t) = s.

    The root is bracketed by doubling and halving from t = 1, then found by
    Newton steps that fall back to geometric bisection whenever they leave
    the bracket.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    s = np.asarray(s, dtype=float)
    shape = s.shape
    xs = np.repeat(x, shape[1], axis=0) if s.ndim == 2 else x
    sv = s.reshape(-1)
    out = np.zeros_like(sv)
    live = sv > 0
    if not live.any():
        return out.reshape(shape)
    xl, sl = xs[live], sv[live]

    def dphi(t, idx=slice(None)):
        return model.phi_prime(xl[idx], t)

    lo = np.ones_like(sl)
    hi = np.ones_like(sl)
    for _ in range(2100):
        up = dphi(hi) < sl
        if not up.any():
            break
        hi = np.where(up, hi * 2.0, hi)
        lo = np.where(up, hi / 2.0, lo)
    for _ in range(2100):
        down = dphi(lo) > sl
        if not down.any():
            break
        hi = np.where(down, lo, hi)
        lo = np.where(down, lo / 2.0, lo)
    t = np.sqrt(lo * hi)
    for _ in range(200):
        g = dphi(t) - sl
        lo = np.where(g < 0, t, lo)
        hi = np.where(g > 0, t, hi)
        if np.all((hi - lo <= tol * hi) | (np.abs(g) <= tol * sl)):
            break
        with np.errstate(divide="ignore", invalid="ignore"):
            step = t - g / model.phi_second(xl, t)
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        t = np.where(bad, np.sqrt(lo * hi), step)
    out[live] = sl * t - model.phi(xl, t)
    return out.reshape(shape)


def conjugate(model: OrliczModel, x, s) -> np.ndarray:
    """phi*(x, s); closed form for power models, the Legendre solver otherwise."""
    if model.closed_conjugate:
        return model.phi_star(x, s)
    return legendre_solve(model, x, s)


# ---------------------------------------------------------------------------
# model constructors


def power_model(p: float, d: int | None = None) -> PowerModel:
    """Constant-exponent model t^p/p."""
    if not p > 1.0:
        raise DomainError(f"exponent must exceed 1, got {p}")
    return PowerModel("power", None, {"p": float(p)}, lambda x: p, None, (p, p),
                      tail_powers={"grad": (p, 0.0), "flux": (p / (p - 1.0), 0.0)})


def variable_exponent_model(config: FractalConfig, p_minus: float, p_plus: float,
                            continuous: bool = False, kappa: float = 0.5) -> PowerModel:
    """Exponent p- on the gradient side and p+ on the flux side.

    The discontinuous version switches at side ratio 1.  The continuous
    version blends p0 - A sigma and p0 + A sigma through ``flux_side``,
    where sigma is the log modulus of the weight scale and
    A = min(p0 - p-, p+ - p0).
    """
    p0 = config.p0
    if not 1.0 < p_minus < p0 < p_plus:
        raise DomainError(f"need 1 < p- < p0 < p+, got p-={p_minus}, p0={p0}, p+={p_plus}")
    params = {"p_minus": p_minus, "p_plus": p_plus, "continuous": bool(continuous)}
    if continuous:
        if not 0.0 < kappa < 1.0:
            raise DomainError(f"modulus parameter must lie in (0, 1), got {kappa}")
        params["kappa"] = kappa
        amp = min(p0 - p_minus, p_plus - p0)

        def exponent(x):
            sig = amp * log_modulus(weight_scale(x, config), kappa)
            h = flux_side(x, config)
            return (p0 - sig) * (1.0 - h) + (p0 + sig) * h

        tails = {}
    else:

        def exponent(x):
            return p_minus + (p_plus - p_minus) * flux_side_sharp(x, config)

        tails = {"grad": (p_minus, 0.0), "flux": (p_plus / (p_plus - 1.0), 0.0)}
    return PowerModel("variable_exponent", config, params, exponent, None, (p_minus, p_plus), tails)


def double_phase_threshold(p0: float, alpha: float, d: int) -> float:
    """Smallest admissible q for exponent p0 and Hoelder order alpha."""
    return p0 + alpha * max(1.0, (p0 - 1.0) / (d - 1.0))


def double_phase_p0(p: float, q: float, alpha: float, d: int) -> float:
    """p0 = p + min(0.1, slack/2), with slack = q - threshold(p)."""
    slack = q - double_phase_threshold(p, alpha, d)
    if not slack > 0:
        raise DomainError(
            f"need q > p + alpha*max(1, (p-1)/(d-1)) = {double_phase_threshold(p, alpha, d):.6g}, got q={q}")
    step = min(0.1, slack / 2.0)
    while not q > double_phase_threshold(p + step, alpha, d):
        step /= 2.0
    return p + step


def regime_for(p0: float, d: int) -> Regime:
    if math.isclose(p0, d, rel_tol=0.0, abs_tol=1e-12):
        return Regime.MATCHING
    return Regime.SUB if p0 < d else Regime.SUPER


def double_phase_model(config: FractalConfig, p: float, q: float, alpha: float) -> DoublePhaseModel:
    """Double phase with a = s^alpha * flux_side, s the weight scale.

    The coefficient vanishes on the gradient side and equals s^alpha on
    the flux side.
    """
    if not alpha > 0:
        raise DomainError(f"Hoelder order must be positive, got {alpha}")
    if not 1.0 < p < config.p0:
        raise DomainError(f"need 1 < p < p0 = {config.p0}, got p={p}")
    bound = double_phase_threshold(config.p0, alpha, config.d)
    if not q > bound:
        raise DomainError(f"need q > p0 + alpha*max(1, (p0-1)/(d-1)) = {bound:.6g}, got q={q}")

    def coefficient(x):
        return weight_scale(x, config) ** alpha * flux_side(x, config)

    qc = q / (q - 1.0)
    tails = {"grad": (p, 0.0), "flux": (qc, -alpha / (q - 1.0))}
    params = {"p": p, "q": q, "alpha": alpha}
    return DoublePhaseModel(config, params, coefficient, tails)


def weighted_gamma(config: FractalConfig, p: float) -> float:
    """The critical weight exponent attached to the regime's p0."""
    d, p0 = config.d, config.p0
    if config.regime is Regime.MATCHING:
        return 1.0 - d / p
    if config.regime is Regime.SUB:
        return 1.0 - p0 / p
    return (d - 1.0) / p * (p - p0) / (p0 - 1.0)


def weighted_epsilon_max(config: FractalConfig, alpha: float, beta: float) -> float:
    """Largest eps with eps s^beta <= s^alpha on the cube (s the weight scale)."""
    smax = math.sqrt(config.d - 1.0) if config.regime is Regime.SUPER else 1.0
    return smax ** (alpha - beta)


def weighted_model(config: FractalConfig, p: float, alpha: float, beta: float, eps: float) -> PowerModel:
    """(omega t)^p/p with omega between eps s^beta and s^alpha.

    omega equals the lower envelope eps s^beta on the gradient side and the
    upper envelope s^alpha on the flux side.
    """
    if not p > 1.0:
        raise DomainError(f"exponent must exceed 1, got {p}")
    k = config.d - 1.0 if config.regime is Regime.SUPER else 1.0
    lo, hi = -k / p, k * (1.0 - 1.0 / p)
    gamma = weighted_gamma(config, p)
    if not lo < alpha < gamma < beta < hi:
        raise DomainError(
            f"need {lo:.6g} < alpha < gamma < beta < {hi:.6g} with gamma = {gamma:.6g}, "
            f"got alpha={alpha}, beta={beta}")
    emax = weighted_epsilon_max(config, alpha, beta)
    if not 0.0 < eps <= emax:
        raise DomainError(f"need 0 < eps <= {emax:.6g}, got {eps}")

    def lower(x):
        return eps * weight_scale(x, config) ** beta

    def upper(x):
        with np.errstate(divide="ignore"):
            return weight_scale(x, config) ** alpha

    def omega(x):
        h = flux_side(x, config)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = lower(x) * (1.0 - h) + upper(x) * h
        return np.where(h == 1.0, upper(x), np.where(h == 0.0, lower(x), w))

    pc = p / (p - 1.0)
    tails = {"grad": (p, beta * p), "flux": (pc, -alpha * pc)}
    params = {"p": p, "alpha": alpha, "beta": beta, "eps": eps}
    model = PowerModel("weighted", config, params, lambda x: p, omega, (p, p), tails)
    model.omega_minus = lower
    model.omega_plus = upper
    model.gamma = gamma
    return model


def build_model(config: FractalConfig, spec: dict) -> OrliczModel:
    """Model from a serialized parameter dict (the output of ``to_dict``)."""
    spec = dict(spec)
    kind = spec.pop("kind")
    if kind == "power":
        return power_model(**spec)
    if kind == "variable_exponent":
        return variable_exponent_model(config, **spec)
    if kind == "double_phase":
        return double_phase_model(config, **spec)
    if kind == "weighted":
        return weighted_model(config, **spec)
    raise DomainError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# norms


def modular(model: OrliczModel, x, values, weights) -> float:
    return float(np.sum(weights * model.phi(x, np.abs(values))))


def luxemburg_norm(model: OrliczModel, x, values, weights, tol: float = LUXEMBURG_TOL) -> float:
    """inf{g > 0 : sum_i w_i phi(x_i, |f_i|/g) <= 1} for a sampled function.

    Returns inf when no tested scale brings the modular down to 1.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    f = np.abs(np.asarray(values, dtype=float))
    w = np.asarray(weights, dtype=float)
    if not np.any((f > 0) & (w > 0)):
        return 0.0

    def rho(g):
        with np.errstate(over="ignore", invalid="ignore"):
            val = modular(model, x, f / g, w)
        return val if np.isfinite(val) else math.inf

    lo = hi = 1.0
    while rho(hi) > 1.0:
        lo, hi = hi, hi * 2.0
        if hi > 1e300:
            return math.inf
    while rho(lo) <= 1.0:
        hi, lo = lo, lo / 2.0
        if lo < 1e-300:
            return 0.0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if rho(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return hi


def adapted_samples(d: int, level: int, tube_distance: Callable | None = None,
                    samples_per_axis: int = 4, budget: int = 4_000_000) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint samples of a dyadic partition of (-1, 1)^d with volumes.

    Cells within a few widths of the singular set are split down to
    ``level``; elsewhere the partition stops at the first level where a
    cell is far enough.  Cells still near the set at ``level`` are left
    out, so the samples cover the cube minus a thin tube.  Each leaf
    carries ``samples_per_axis^d`` midpoints.
    """
    k = samples_per_axis
    sub = (np.array(list(itertools.product(range(k), repeat=d))) + 0.5) / k
    start = min(level, 2)
    size = 2.0 / 2**start
    grid = np.arange(2**start) * size - 1.0
    lower = np.array(list(itertools.product(grid, repeat=d)))
    leaves_lo, leaves_size = [], []
    j = start
    offs = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
    while lower.shape[0]:
        if tube_distance is None:
            near = np.zeros(lower.shape[0], dtype=bool)
        else:
            near = tube_distance(lower + size / 2.0) < (1.0 + math.sqrt(d)) * size
        leaves_lo.append(lower[~near])
        leaves_size.append(np.full((~near).sum(), size))
        if j >= level:
            break
        lower = (lower[near][:, None, :] + (size / 2.0) * offs[None]).reshape(-1, d)
        size /= 2.0
        j += 1
        if sum(a.shape[0] for a in leaves_lo) * k**d > budget:
            raise BudgetError("sample budget exceeded")
    lo = np.concatenate(leaves_lo)
    sz = np.concatenate(leaves_size)
    pts = (lo[:, None, :] + sz[:, None, None] * sub[None]).reshape(-1, d)
    vol = np.repeat(sz**d / k**d, sub.shape[0])
    return pts, vol


def weak_lp_from_samples(values, volumes, p: float, gammas=WEAK_GAMMAS) -> float:
    """sup over the gamma grid of gamma * |{|f| > gamma}|^(1/p)."""
    f = np.abs(np.asarray(values, dtype=float))
    order = np.argsort(f)
    fs = f[order]
    tail = np.concatenate([np.cumsum(np.asarray(volumes)[order][::-1])[::-1], [0.0]])
    idx = np.searchsorted(fs, gammas, side="right")
    return float(np.max(gammas * tail[idx] ** (1.0 / p)))


def weak_lp_estimate(f: Callable, p: float, d: int, level: int, tube_distance: Callable | None = None,
                     samples_per_axis: int = 4, gammas=WEAK_GAMMAS) -> float:
    """Weak-L^p quasi-norm of ``f`` on (-1, 1)^d from an adapted sample set."""
    if not p >= 1.0:
        raise DomainError(f"weak-Lebesgue exponent must be at least 1, got {p}")
    pts, vol = adapted_samples(d, level, tube_distance, samples_per_axis)
    return weak_lp_from_samples(f(pts), vol, p, gammas)


def strong_lp_modular(f: Callable, p: float, d: int, level: int, tube_distance: Callable | None = None,
                      samples_per_axis: int = 4) -> float:
    """Midpoint estimate of int |f|^p on the same adapted sample set."""
    pts, vol = adapted_samples(d, level, tube_distance, samples_per_axis)
    return float(np.sum(vol * np.abs(f(pts)) ** p))


# ---------------------------------------------------------------------------
# Muckenhoupt


def muckenhoupt_profile(weight: Callable, p: float, d: int, max_level: int, quad_levels: int = 3,
                        budget: int = 1 << 22) -> list[float]:
    """Largest A_p product over the dyadic cubes of each level 0..max_level.

    Cube averages of ``a`` and ``a^(-1/(p-1))`` come from the 3-point Gauss
    rule on the cells ``quad_levels`` below ``max_level``, summed up the
    tree.  A non-finite average gives inf.
    """
    if not p > 1.0:
        raise DomainError(f"need p > 1, got {p}")
    fine = max_level + quad_levels
    n = 2**fine
    if n**d > budget:
        raise BudgetError(f"{n}^{d} quadrature cells exceed the budget {budget}")
    gx = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
    gw = np.array([5.0, 8.0, 5.0]) / 18.0
    h = 2.0 / n
    nodes = (np.arange(n)[:, None] * h - 1.0 + h * (gx[None] + 1.0) / 2.0).reshape(-1)
    w1 = np.tile(gw * h, n)
    ia = np.zeros((n,) * d)
    ib = np.zeros((n,) * d)
    # integrate slab by slab along the first axis to bound memory
    rest = np.array(list(itertools.product(nodes, repeat=d - 1)))
    wrest = np.prod(np.array(list(itertools.product(w1, repeat=d - 1))), axis=1)
    for i in range(n):
        xs = np.arange(3 * i, 3 * i + 3)
        pts = np.concatenate([np.repeat(nodes[xs], rest.shape[0])[:, None], np.tile(rest, (3, 1))], axis=1)
        wts = np.repeat(w1[xs], rest.shape[0]) * np.tile(wrest, 3)
        a = np.asarray(weight(pts), dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            dual = a ** (-1.0 / (p - 1.0))
        shape = (3,) + (n, 3) * (d - 1)
        va = (wts * a).reshape(shape)
        vb = (wts * dual).reshape(shape)
        axes = (0,) + tuple(2 + 2 * j for j in range(d - 1))
        ia[i] = va.sum(axis=axes)
        ib[i] = vb.sum(axis=axes)
    out = []
    for lev in range(fine, -1, -1):
        if lev <= max_level:
            vol = (2.0 / 2**lev) ** d
            with np.errstate(invalid="ignore", over="ignore"):
                prod = (ia / vol) * (ib / vol) ** (p - 1.0)
            prod = np.where(np.isfinite(ia) & np.isfinite(ib), prod, np.inf)
            out.append(float(np.max(prod)))
        if lev:
            m = ia.shape[0] // 2
            ia = ia.reshape((m, 2) * d).sum(axis=tuple(range(1, 2 * d, 2)))
            ib = ib.reshape((m, 2) * d).sum(axis=tuple(range(1, 2 * d, 2)))
    return out[::-1]


def muckenhoupt_check(weight: Callable, p: float, d: int, max_level: int, quad_levels: int = 3) -> float:
    """Estimated A_p constant: the sup over dyadic cubes up to ``max_level``."""
    return max(muckenhoupt_profile(weight, p, d, max_level, quad_levels))


def muckenhoupt_weights(model: PowerModel) -> dict:
    """The A_p weights a = omega^p of a weighted model's two envelopes."""
    p = model.params["p"]
    return {
        "lower": lambda x: model.omega_minus(x) ** p,
        "upper": lambda x: model.omega_plus(x) ** p,
    }


def muckenhoupt_levels(weight: Callable, p: float, d: int, levels, quad_levels: int = 3) -> list[float]:
    """``muckenhoupt_check`` for each max level; flat for A_p weights."""
    return [muckenhoupt_check(weight, p, d, lev, quad_levels) for lev in levels]
