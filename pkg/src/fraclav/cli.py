"""Command-line front end: experiment configs in, JSON reports and CSV data out.

Config files are JSON with the keys of ``ExperimentConfig``; flags given on
the command line override them.  Every report embeds the resolved config.
Exit codes: 0 when every check in scope passes, 1 when one fails, 2 when
the config cannot be parsed or violates a parameter constraint.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import verify
from .cantor import FractalConfig
from .errors import BudgetError, DomainError
from .fields import fractal_fields
from .integrate import QuadPolicy
from .minimize import SolverPolicy, minimize_w, write_field_csv, write_log_csv
from .orlicz import build_model, double_phase_p0, regime_for

COMMANDS = ("sample-field", "verify", "gap", "certify", "minimize", "norms")
POLICY_KEYS = ("max_depth", "delta", "budget")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    regime: str = "matching"
    d: int = 2
    p0: float | None = None
    model: dict | None = None
    quadrature: dict = field(default_factory=dict)
    solver: dict = field(default_factory=lambda: {"n": 65})
    grid: int = 101
    seed: int = 0
    output: str = "."

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        cfg = cls(**data)
        bad = set(cfg.quadrature) - set(POLICY_KEYS)
        if bad:
            raise ConfigError(f"unknown quadrature keys: {sorted(bad)}")
        bad = set(cfg.solver) - {"n", "max_iter", "rtol", "window", "t"}
        if bad:
            raise ConfigError(f"unknown solver keys: {sorted(bad)}")
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def resolve(cfg: ExperimentConfig):
    """FractalConfig and model (or None); double phase fixes its own p0 and regime."""
    model_spec = dict(cfg.model) if cfg.model else None
    if model_spec and model_spec.get("kind") == "double_phase":
        p0 = double_phase_p0(model_spec["p"], model_spec["q"], model_spec["alpha"], cfg.d)
        cfg.regime, cfg.p0 = regime_for(p0, cfg.d).value, p0
    config = FractalConfig.build(cfg.regime, cfg.d, cfg.p0)
    cfg.p0 = config.p0
    if not model_spec:
        return config, None
    if model_spec.get("kind") == "weighted" and model_spec.get("eps", "constructed") == "constructed":
        model = verify.constructed_weighted_model(config, model_spec["p"], model_spec["alpha"],
                                                  model_spec["beta"])
        return config, model
    return config, build_model(config, model_spec)


def _overrides(cfg: ExperimentConfig) -> dict:
    return {k: v for k, v in cfg.quadrature.items() if k in POLICY_KEYS}


def _policy(base: QuadPolicy, cfg: ExperimentConfig) -> QuadPolicy:
    return dataclasses.replace(base, **_overrides(cfg))


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(verify._jsonable(obj), indent=2, sort_keys=True) + "\n")


def _finish(records, cfg: ExperimentConfig, out: Path, name: str) -> int:
    rep = verify.report(records, cfg.to_dict())
    _write_json(out / name, rep)
    failed = [r for r in records if not r.passed]
    for r in failed:
        print(f"FAIL {r.claim}: measured {r.measured:.6g}, tolerance {r.tolerance:.6g}", file=sys.stderr)
    return 0 if not failed else 1


# ---------------------------------------------------------------------------
# commands


def cmd_sample_field(cfg, config, model, out: Path) -> int:
    g = np.linspace(-1.0, 1.0, cfg.grid)
    x = np.stack(np.meshgrid(*([g] * config.d), indexing="ij"), axis=-1).reshape(-1, config.d)
    s = fractal_fields(x, config, want=("u", "grad_u", "b"))
    cols = [f"x{i + 1}" for i in range(config.d)] + ["u"]
    cols += [f"grad_u{i + 1}" for i in range(config.d)] + [f"b{i + 1}" for i in range(config.d)]
    data = np.column_stack([x, s.u, s.grad_u, s.b])
    with open(out / "field.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        w.writerows([[repr(float(v)) for v in row] for row in data])
    return 0


def cmd_verify(cfg, config, model, out: Path) -> int:
    records = verify.field_records(config, cfg.seed, _overrides(cfg))
    records += verify.cantor_records(config, cfg.seed)
    if model is not None:
        records += verify.model_records(model, cfg.seed, cfg.solver.get("n", 65), _overrides(cfg))
    return _finish(records, cfg, out, "verify.json")


def _need_model(model):
    if model is None:
        raise ConfigError("this command needs a model in the config")


def cmd_gap(cfg, config, model, out: Path) -> int:
    _need_model(model)
    gap = verify.gap_scan(model, policy=_policy(verify.ENERGY_POLICY, cfg))
    body = {"schema": verify.REPORT_SCHEMA, "config": cfg.to_dict(), "model": model.to_dict(),
            "pass": gap.found, "gap": {**dataclasses.asdict(gap), "found": gap.found}}
    _write_json(out / "gap.json", body)
    with open(out / "gap_curve.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "F", "G"])
        for row in zip(gap.t_grid, gap.F_values, gap.G_values):
            w.writerow([repr(float(v)) for v in row])
    if not gap.found:
        print(f"FAIL no t with G < {gap.threshold}: min G = {min(gap.G_values):.6g}, "
              f"S_in(u_in) = {gap.S_circ_u_circ:.6g}, F(t u_in)/t at the smallest t = {gap.ratio_small_t:.6g}",
              file=sys.stderr)
        return 1
    return 0


def cmd_certify(cfg, config, model, out: Path) -> int:
    _need_model(model)
    cs = verify.duality_certificate(model, policy=_policy(verify.ENERGY_POLICY, cfg))
    ok = cs.best is not None and cs.best.relative_margin >= 0.05
    body = {"schema": verify.REPORT_SCHEMA, "config": cfg.to_dict(), "model": model.to_dict(), "pass": ok,
            "coupling": cs.coupling, "certificate": cs.best.to_json() if cs.best else None, "curve": cs.curve,
            "constants": getattr(model, "constants", None)}
    _write_json(out / "certificate.json", body)
    if not ok:
        print("FAIL no certificate with margin >= 0.05 ts on the coupling curve", file=sys.stderr)
    return 0 if ok else 1


def cmd_minimize(cfg, config, model, out: Path) -> int:
    _need_model(model)
    sv = dict(cfg.solver)
    n = sv.pop("n", 65)
    t = sv.pop("t", None)
    policy = SolverPolicy(**sv)
    cert = None
    if t is None:
        cert = verify.duality_certificate(model, policy=_policy(verify.ENERGY_POLICY, cfg)).best
        if cert is None:
            print("FAIL no certificate to take t from; set solver.t", file=sys.stderr)
            return 1
        t = cert.t
    res = minimize_w(model, float(t), n, policy)
    write_field_csv(out / "minimizer.csv", res.w)
    write_log_csv(out / "minimizer_log.csv", res)
    summary = {"t": float(t), "n": n, **res.summary()}
    ok = res.energy <= res.initial_energy
    if cert is not None:
        bound = cert.t * cert.s - cert.Fstar_sb
        summary.update({"s": cert.s, "h_side_bound": bound, "beats_bound": bool(res.energy < bound)})
        ok = ok and res.energy < bound
    body = {"schema": verify.REPORT_SCHEMA, "config": cfg.to_dict(), "model": model.to_dict(),
            "pass": bool(ok), "summary": summary}
    _write_json(out / "minimize.json", body)
    if not ok:
        print(f"FAIL minimizer energy {res.energy:.6g} does not beat the bound", file=sys.stderr)
    return 0 if ok else 1


def cmd_norms(cfg, config, model, out: Path) -> int:
    records = []
    for which in ("grad_u", "b"):
        si = verify.sharp_integrability(config, which)
        ok = si["weak_change"] < 0.02 and min(si["strong_growth"]) >= 0.05
        records.append(verify.Record(f"sharp integrability of {which}", "weak-L^r but not L^r at the sharp r",
                                     si["weak_change"], 0.02, ok, si))
    return _finish(records, cfg, out, "norms.json")


HANDLERS = {
    "sample-field": cmd_sample_field,
    "verify": cmd_verify,
    "gap": cmd_gap,
    "certify": cmd_certify,
    "minimize": cmd_minimize,
    "norms": cmd_norms,
}


# ---------------------------------------------------------------------------
# argument handling


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fraclav", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON experiment config")
    ap.add_argument("--regime", choices=("matching", "sub", "super"))
    ap.add_argument("--d", type=int)
    ap.add_argument("--p0", type=float)
    ap.add_argument("--model", help="model kind: variable_exponent, double_phase, weighted, power")
    ap.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                    help="model parameter, repeatable (values parsed as JSON)")
    ap.add_argument("--max-depth", type=int)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--budget", type=int)
    ap.add_argument("--n", type=int, help="minimizer nodes per axis")
    ap.add_argument("--t", type=float, help="minimizer boundary scale (default: certificate t)")
    ap.add_argument("--grid", type=int, help="sample-field nodes per axis")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory")
    return ap


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    for key in ("regime", "d", "p0", "grid", "seed"):
        val = getattr(args, key)
        if val is not None:
            setattr(cfg, key, val)
    if args.out is not None:
        cfg.output = args.out
    if args.model is not None:
        cfg.model = {"kind": args.model}
    if args.param:
        if cfg.model is None:
            raise ConfigError("--param needs a model")
        for item in args.param:
            key, sep, val = item.partition("=")
            if not sep:
                raise ConfigError(f"--param expects KEY=VALUE, got {item!r}")
            cfg.model[key] = _parse_value(val)
    for key in POLICY_KEYS:
        val = getattr(args, key)
        if val is not None:
            cfg.quadrature[key] = val
    if args.n is not None:
        cfg.solver["n"] = args.n
    if args.t is not None:
        cfg.solver["t"] = args.t
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        config, model = resolve(cfg)
    except (ConfigError, DomainError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return HANDLERS[args.command](cfg, config, model, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except BudgetError as exc:
        print(f"FAIL budget exhausted: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
