"""Config-driven experiment runner.

A config is a flat ``key = value`` file with dotted sections; see
``docs/config.md`` for the schema. ``run_config`` executes one experiment and
returns a ReportBundle; ``emit_report`` writes ``<kind>.csv`` or
``<kind>.json`` into the output directory.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import records
from .bounds import (build_bundle, c1_limit_check, estimate_eta,
                     scaling_experiment, vertical_curve)
from .disks import C_M, DELTA_M, SIGMA, DiskFamily, fill_disk, stokes_sweep
from .distance import OptimizerConfig, estimate_upper, reachability_probe
from .fields import GridSpec, HoelderField, hoelder_norm_estimate, synth_weierstrass
from .forms import MODEL_KINDS, MetricChart, build_model
from .paths import Polyline

KINDS = ("synth", "norm", "dist", "probe", "stokes", "fill", "scaling", "limits")
EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


def _int(lo=None):
    def conv(name, text):
        try:
            v = int(text)
        except ValueError:
            raise ConfigError(f"{name} must be an integer, got {text!r}") from None
        if lo is not None and v < lo:
            raise ConfigError(f"{name} must be >= {lo}")
        return v
    return conv


def _float(lo=None, hi=None, open_lo=False, open_hi=False, message=None):
    def conv(name, text):
        try:
            v = float(text)
        except ValueError:
            raise ConfigError(f"{name} must be a number, got {text!r}") from None
        bad = (not math.isfinite(v)
               or (lo is not None and (v <= lo if open_lo else v < lo))
               or (hi is not None and (v >= hi if open_hi else v > hi)))
        if bad:
            lb = "(" if open_lo else "["
            rb = ")" if open_hi else "]"
            raise ConfigError(message or f"{name} must lie in {lb}{lo},{hi}{rb}")
        return v
    return conv


def _choice(options):
    def conv(name, text):
        if text not in options:
            raise ConfigError(f"{name} must be one of {', '.join(options)}; got {text!r}")
        return text
    return conv


def _floats(length=None, positive=False):
    def conv(name, text):
        try:
            vals = records.parse_float_list(text)
        except ValueError:
            raise ConfigError(f"{name} must be a comma-separated list of numbers") from None
        if length is not None and len(vals) != length:
            raise ConfigError(f"{name} must have {length} entries")
        if not vals or not all(math.isfinite(v) for v in vals):
            raise ConfigError(f"{name} must be a nonempty list of finite numbers")
        if positive and min(vals) <= 0:
            raise ConfigError(f"{name} entries must be positive")
        return vals
    return conv


def _bool(name, text):
    if text.lower() in ("1", "true", "yes"):
        return True
    if text.lower() in ("0", "false", "no"):
        return False
    raise ConfigError(f"{name} must be true or false")


THETA = _float(0.0, 1.0, True, True, "theta must lie in (0,1)")
POS = _float(0.0, None, True)
NONNEG = _float(0.0)

# key -> (converter, default); a default of None means optional/absent.
SCHEMA: dict[str, tuple[Callable, object]] = {
    "kind": (_choice(KINDS), None),
    "seed": (_int(0), None),
    "chart.period": (POS, 1.0),
    "model.kind": (_choice(MODEL_KINDS), "heisenberg"),
    "model.theta": (THETA, 0.5),
    "model.amplitude": (NONNEG, 0.05),
    "model.seed": (_int(0), 0),
    "model.lambda": (_float(2.0), 4.0),
    "model.depth": (_int(0), 8),
    "constants.c_M": (POS, C_M),
    "constants.delta_M": (POS, DELTA_M),
    "constants.sigma": (POS, SIGMA),
    "constants.K": (POS, None),
    "constants.eta": (POS, None),
    "constants.trials": (_int(1), 1000),
    "optimizer.segments": (_int(2), 32),
    "optimizer.modes": (_int(0), 3),
    "optimizer.restarts": (_int(1), 8),
    "optimizer.endpoint_tol": (POS, 1e-4),
    "optimizer.endpoint_rel_tol": (POS, 1e-2),
    "optimizer.defect_tol": (POS, 0.1),
    "optimizer.step_budget": (_int(1), 200),
    "optimizer.penalty_schedule": (_floats(positive=True), [100.0, 1e3, 1e4, 1e5, 1e6]),
    "optimizer.random_directions": (_int(0), 4),
    "optimizer.jacobian_step": (POS, 1e-3),
    "field.theta": (THETA, 0.5),
    "field.lambda": (_float(2.0), 4.0),
    "field.depth": (_int(0), 8),
    "field.amplitude": (NONNEG, 1.0),
    "field.seed": (_int(0), 0),
    "field.period": (POS, 1.0),
    "grid.resolution": (_int(2), 33),
    "grid.pair_budget": (_int(1), 20000),
    "grid.seed": (_int(0), 0),
    "synth.samples": (_int(1), 4096),
    "dist.p": (_floats(3), [0.0, 0.0, 0.0]),
    "dist.q": (_floats(3), None),
    "probe.p": (_floats(3), [0.0, 0.0, 0.0]),
    "probe.eps": (POS, 0.1),
    "probe.samples": (_int(1), 256),
    "probe.segments": (_int(2), 64),
    "stokes.trials": (_int(1), 1000),
    "stokes.family": (_choice(("mixed", "flat", "wavy")), "mixed"),
    "stokes.radius_min": (POS, 0.01),
    "stokes.radius_max": (POS, 0.07),
    "fill.shape": (_choice(("circle", "ellipse", "wavy")), "circle"),
    "fill.radius": (POS, 0.05),
    "fill.aspect": (_float(0.0, 1.0, True), 0.5),
    "fill.segments": (_int(3), 64),
    "fill.smoothing_iters": (_int(0), 200),
    "scaling.p": (_floats(3), [0.0, 0.0, 0.0]),
    "scaling.epsilons": (_floats(positive=True), None),
    "scaling.pairs": (_int(3), 20),
    "scaling.check_bound": (_bool, False),
    "limits.c_M": (POS, 1 / (4 * math.pi)),
    "limits.K": (POS, 1.0),
    "limits.alpha_norm": (POS, 1.0),
    "limits.sin_phi0": (_float(0.0, 1.0, True), 1.0),
    "limits.theta_min": (THETA, 0.9),
    "limits.theta_max": (THETA, 0.999),
    "limits.count": (_int(2), 25),
}


def parse_config(text: str, seed_override: int | None = None) -> dict[str, object]:
    """Validate a config text. Absent keys take their documented defaults."""
    try:
        raw = records.loads(text)
    except records.RecordError as exc:
        raise ConfigError(str(exc)) from None
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(unknown))
    if seed_override is not None:
        raw["seed"] = str(seed_override)
    for required in ("kind", "seed"):
        if required not in raw:
            raise ConfigError(f"{required} is required")
    cfg = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            cfg[key] = conv(key, raw[key])
        elif default is not None:
            cfg[key] = default
    if cfg["kind"] == "dist" and "dist.q" not in cfg:
        raise ConfigError("dist.q is required")
    if cfg["stokes.radius_min"] > cfg["stokes.radius_max"]:
        raise ConfigError("stokes.radius_min must not exceed stokes.radius_max")
    if cfg["limits.theta_min"] >= cfg["limits.theta_max"]:
        raise ConfigError("limits.theta_min must be below limits.theta_max")
    if "scaling.epsilons" in cfg and len(cfg["scaling.epsilons"]) < 3:
        raise ConfigError("scaling.epsilons needs at least 3 values")
    return cfg


def config_text(cfg: dict[str, object]) -> str:
    return records.dumps(cfg)


@dataclass
class ReportBundle:
    kind: str
    config: dict[str, object]
    config_hash: str
    columns: list[str]
    rows: list[list[object]]
    summary: dict[str, object]
    assertions: dict[str, bool]
    constants: dict[str, object] | None = None
    timing: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.assertions.values())

    def to_json(self) -> str:
        # timing is excluded so that reruns emit identical bytes
        return json.dumps({
            "kind": self.kind, "config": self.config, "config_hash": self.config_hash,
            "summary": self.summary, "assertions": self.assertions, "passed": self.passed,
            "constants": self.constants, "columns": self.columns, "rows": self.rows,
        }, sort_keys=True, indent=1, default=_jsonable)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()


def _jsonable(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"cannot serialize {type(v).__name__}")


def bundle_from_json(text: str) -> ReportBundle:
    d = json.loads(text)
    return ReportBundle(d["kind"], d["config"], d["config_hash"], d["columns"], d["rows"],
                        d["summary"], d["assertions"], d["constants"])


def _optimizer(cfg) -> OptimizerConfig:
    return OptimizerConfig(
        segments=cfg["optimizer.segments"], modes=cfg["optimizer.modes"],
        restarts=cfg["optimizer.restarts"], endpoint_tol=cfg["optimizer.endpoint_tol"],
        endpoint_rel_tol=cfg["optimizer.endpoint_rel_tol"], defect_tol=cfg["optimizer.defect_tol"],
        step_budget=cfg["optimizer.step_budget"],
        penalty_schedule=tuple(cfg["optimizer.penalty_schedule"]),
        random_directions=cfg["optimizer.random_directions"],
        jacobian_step=cfg["optimizer.jacobian_step"], seed=cfg["seed"])


def _model(cfg):
    chart = MetricChart(cfg["chart.period"])
    return build_model(cfg["model.kind"], cfg["model.theta"], cfg["model.amplitude"],
                       cfg["model.seed"], chart, cfg["model.lambda"], cfg["model.depth"])


def _field(cfg) -> HoelderField:
    return synth_weierstrass(cfg["field.theta"], cfg["field.lambda"], cfg["field.depth"],
                             cfg["field.amplitude"], cfg["field.seed"], cfg["field.period"])


def _base_constants(cfg) -> dict[str, object]:
    return {"constants.c_M": cfg["constants.c_M"], "constants.delta_M": cfg["constants.delta_M"],
            "constants.sigma": cfg["constants.sigma"]}


def _family(cfg) -> DiskFamily:
    return DiskFamily(cfg["stokes.family"], (cfg["stokes.radius_min"], cfg["stokes.radius_max"]),
                      sigma=cfg["constants.sigma"])


def _run_synth(cfg):
    f = _field(cfg)
    rng = np.random.default_rng(cfg["seed"])
    pts = rng.uniform(-f.period / 2, f.period / 2, size=(cfg["synth.samples"], 3))
    vals = f(pts)
    shifted = f(pts + f.period)
    rows = [[*map(float, p), float(v)] for p, v in zip(pts, vals)]
    summary = {"record": f.to_record(), "sample_sup": float(np.max(np.abs(vals))),
               "sup_bound": f.sup_bound, "analytic_norm_bound": f.analytic_norm_bound}
    assertions = {"sup_within_bound": bool(np.max(np.abs(vals)) <= f.sup_bound * (1 + 1e-12)),
                  "periodic": bool(np.allclose(vals, shifted, atol=1e-9 * max(f.sup_bound, 1.0)))}
    return ["x", "y", "z", "value"], rows, summary, assertions, _base_constants(cfg)


def _run_norm(cfg):
    f = _field(cfg)
    rows = []
    n = cfg["grid.resolution"]
    resolutions = sorted({min(n, r) for r in (9, 17, n)})
    half = f.period / 2
    for res in resolutions:
        est = hoelder_norm_estimate(f, f.theta, ([-half] * 3, [half] * 3),
                                    GridSpec(res, cfg["grid.pair_budget"], cfg["grid.seed"]))
        rows.append([res, float(est), f.analytic_norm_bound])
    summary = {"estimate": rows[-1][1], "analytic_norm_bound": f.analytic_norm_bound,
               "record": f.to_record()}
    assertions = {"below_analytic_bound": all(r[1] <= r[2] for r in rows)}
    return ["resolution", "estimate", "analytic_bound"], rows, summary, assertions, _base_constants(cfg)


def _run_dist(cfg):
    alpha, model = _model(cfg)
    est = estimate_upper(alpha, cfg["dist.p"], cfg["dist.q"], _optimizer(cfg), MetricChart(cfg["chart.period"]))
    rows = [[*map(float, v)] for v in est.path.vertices]
    summary = json.loads(est.to_json())
    summary["model"] = model.to_record()
    assertions = {"converged": est.converged}
    return ["x", "y", "z"], rows, summary, assertions, _base_constants(cfg)


def _run_probe(cfg):
    alpha, model = _model(cfg)
    rep = reachability_probe(alpha, cfg["probe.p"], cfg["probe.eps"], cfg["probe.samples"], cfg["seed"],
                             cfg["probe.segments"])
    p = np.asarray(cfg["probe.p"], float)
    rows = [[*map(float, q), float(np.linalg.norm(q - p))] for q in rep.points]
    eps = rep.eps
    summary = {"eps": eps, "max_dz": rep.max_dz, "fiber_reach": rep.fiber_reach, "max_dr": rep.max_dr,
               "fiber_tol": rep.fiber_tol, "dido_bound": eps**2 / (4 * math.pi), "model": model.to_record()}
    assertions = {}
    if cfg["model.kind"] == "heisenberg":
        ceiling = (eps * (1 + 1.01 * rep.fiber_tol)) ** 2 / (4 * math.pi)
        assertions["fiber_reach_below_dido"] = rep.fiber_reach <= ceiling
    if cfg["model.kind"] == "foliation":
        assertions["no_vertical_reach"] = rep.max_dz <= 1e-12
    return ["x", "y", "z", "d_r"], rows, summary, assertions, _base_constants(cfg)


def _run_stokes(cfg):
    alpha, model = _model(cfg)
    theta = cfg["model.theta"]
    samples = stokes_sweep(alpha.normalized(), theta, _family(cfg), cfg["stokes.trials"], cfg["seed"])
    rows = [[s.boundary_integral, s.boundary_length, s.area, s.ratio, s.normalized_ratio] for s in samples]
    ratios = np.array([s.normalized_ratio for s in samples])
    summary = {"K_hat": float(ratios.max()), "trials": len(samples), "model": model.to_record()}
    assertions = {"finite": bool(np.all(np.isfinite(ratios)))}
    if "constants.K" in cfg:
        assertions["below_configured_K"] = float(ratios.max()) <= cfg["constants.K"]
    consts = _base_constants(cfg) | {"constants.K_hat": summary["K_hat"]}
    return ["boundary_integral", "boundary_length", "area", "ratio", "normalized_ratio"], rows, summary, \
        assertions, consts


def _fill_loop(cfg) -> Polyline:
    n, r = cfg["fill.segments"], cfg["fill.radius"]
    t = 2 * math.pi * np.arange(n) / n
    if cfg["fill.shape"] == "circle":
        pts = np.stack([r * np.cos(t), r * np.sin(t), 0 * t], 1)
    elif cfg["fill.shape"] == "ellipse":
        pts = np.stack([r * np.cos(t), cfg["fill.aspect"] * r * np.sin(t), 0 * t], 1)
    else:
        rad = r * (1 + 0.2 * np.sin(3 * t))
        pts = np.stack([rad * np.cos(t), rad * np.sin(t), 0.3 * r * np.sin(2 * t)], 1)
    return Polyline(pts, closed=True)


def _run_fill(cfg):
    loop = _fill_loop(cfg)
    disk = fill_disk(loop, cfg["fill.smoothing_iters"], delta_M=cfg["constants.delta_M"], c_M=cfg["constants.c_M"])
    rows = [[*map(float, v)] for v in disk.vertices]
    summary = {"area": disk.area, "boundary_length": disk.boundary_length, "max_offset": disk.max_offset,
               "area_bound": disk.c_M * disk.boundary_length**2,
               "offset_bound": disk.c_M * disk.boundary_length,
               "vertices": len(disk.vertices), "triangles": len(disk.triangles)}
    assertions = {"isoperimetric": disk.isoperimetric_ok, "neighborhood": disk.neighborhood_ok}
    return ["x", "y", "z"], rows, summary, assertions, _base_constants(cfg)


def _run_scaling(cfg):
    alpha, model = _model(cfg)
    theta = cfg["model.theta"]
    opt = _optimizer(cfg)
    chart = MetricChart(cfg["chart.period"])
    p = cfg["scaling.p"]
    bundle = None
    if cfg["scaling.check_bound"]:
        K = cfg.get("constants.K")
        if K is None:
            samples = stokes_sweep(alpha.normalized(), theta, _family(cfg), cfg["constants.trials"], cfg["seed"])
            K = max(s.normalized_ratio for s in samples)
        eta = cfg.get("constants.eta")
        if eta is None:
            eta = estimate_eta(alpha, p, min(cfg["constants.delta_M"], cfg["constants.sigma"]), opt).eta
        bundle = build_bundle(alpha, theta, vertical_curve(p, eta, chart), K, eta, cfg["constants.c_M"],
                              cfg["constants.delta_M"], cfg["constants.sigma"])
    eps = cfg.get("scaling.epsilons")
    if eps is None:
        top = 0.95 * bundle.rho if bundle else 0.1
        eps = list(np.geomspace(top, top / 20, cfg["scaling.pairs"]))
    eps = sorted(eps, reverse=True)
    if bundle is not None and eps[0] >= bundle.rho:
        raise ConfigError(f"scaling.epsilons must lie below rho = {bundle.rho!r}")
    res = scaling_experiment(alpha, theta, vertical_curve(p, eps[0], chart), eps, opt, bundle, chart)
    flags = [int(res.converged[i] and not math.isnan(res.lower_bound[i]) and res.dhat[i] < res.lower_bound[i])
             for i in range(len(eps))]
    rows = [[float(res.epsilons[i]), float(res.d_r[i]), float(res.dhat[i]),
             "" if math.isnan(res.lower_bound[i]) else float(res.lower_bound[i]), flags[i],
             int(res.converged[i]), float(res.endpoint_gaps[i]), float(res.defects[i])]
            for i in range(len(eps))]
    summary = res.summary()
    summary["model"] = model.to_record()
    assertions = {"no_violations": res.violations == 0, "all_converged": not res.partial}
    consts = bundle.to_record() if bundle else _base_constants(cfg)
    return ["epsilon", "d_r", "d_hat", "lower_bound", "violation", "converged", "endpoint_gap", "defect"], \
        rows, summary, assertions, consts


def _run_limits(cfg):
    thetas = np.linspace(cfg["limits.theta_min"], cfg["limits.theta_max"], cfg["limits.count"])
    table = c1_limit_check(cfg["limits.c_M"], cfg["limits.K"], cfg["limits.alpha_norm"],
                           cfg["limits.sin_phi0"], thetas)
    rows = [[float(t), float(c)] for t, c in zip(table.thetas, table.values)]
    summary = {"limit": table.limit, "rel_gap_at_end": float(table.rel_gap_at_end), "monotone": table.monotone}
    assertions = {"monotone": bool(table.monotone), "finite": bool(table.finite),
                  "within_1pct_at_end": bool(table.rel_gap_at_end <= 1e-2)}
    consts = {"constants.c_M": cfg["limits.c_M"], "constants.K": cfg["limits.K"],
              "constants.alpha_norm": cfg["limits.alpha_norm"], "constants.sin_phi0": cfg["limits.sin_phi0"]}
    return ["theta", "C"], rows, summary, assertions, consts


RUNNERS = {"synth": _run_synth, "norm": _run_norm, "dist": _run_dist, "probe": _run_probe,
           "stokes": _run_stokes, "fill": _run_fill, "scaling": _run_scaling, "limits": _run_limits}


def run_parsed(cfg: dict[str, object]) -> ReportBundle:
    t0 = time.perf_counter()
    try:
        columns, rows, summary, assertions, consts = RUNNERS[cfg["kind"]](cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        # domain errors raised by the library on configured values
        raise ConfigError(str(exc)) from None
    return ReportBundle(cfg["kind"], dict(cfg), records.content_hash(cfg), columns, rows, summary,
                        {k: bool(v) for k, v in assertions.items()}, consts,
                        {"seconds": time.perf_counter() - t0})


def run_config(path: str | Path, seed: int | None = None, kind: str | None = None) -> ReportBundle:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = parse_config(text, seed)
    if kind is not None and cfg["kind"] != kind:
        raise ConfigError(f"config kind {cfg['kind']!r} does not match subcommand {kind!r}")
    return run_parsed(cfg)


def emit_report(bundle: ReportBundle, fmt: str = "csv", out: str | Path = ".") -> Path:
    if fmt not in ("csv", "json"):
        raise ValueError("format must be csv or json")
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        target = out / f"{bundle.kind}.{fmt}"
        target.write_text(bundle.to_csv() if fmt == "csv" else bundle.to_json())
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc.strerror}") from exc
    return target


def _verify() -> int:
    from .checks import run_all

    failed = 0
    for res in run_all():
        print(res.line(), flush=True)
        failed += not res.passed
    return EXIT_PASS if failed == 0 else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holderlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*KINDS, "run"):
        sp = sub.add_parser(name, help="run a config" if name == "run" else f"run a {name} experiment")
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--seed", type=int, default=None, metavar="N")
        sp.add_argument("--out", default=".", metavar="DIR")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sub.add_parser("verify", help="run the acceptance criteria")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _verify()
    try:
        bundle = run_config(args.config, args.seed, None if args.command == "run" else args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        target = emit_report(bundle, args.format, args.out)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    status = "PASS" if bundle.passed else "FAIL"
    failed = [k for k, v in bundle.assertions.items() if not v]
    print(f"{status} {bundle.kind} {target} hash={bundle.config_hash}" + (f" failed={','.join(failed)}" if failed else ""))
    return EXIT_PASS if bundle.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
