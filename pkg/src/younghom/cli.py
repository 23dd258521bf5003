"""Command-line front end.

Subcommands::

    younghom measure    --config C --out DIR [--seed N]
    younghom solve      --config C --out DIR
    younghom experiment NAME [--config C] --out DIR [--bands M] [--groups G] [--seed N]
    younghom compare    --ref A.csv --test B.csv

``--out`` defaults to ``$YOUNGHOM_OUT/<subcommand>`` when the environment
variable is set. Exit codes: 0 success, 2 config error, 3 data missing
(experiment skipped), 4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import experiments, spectra, transport, young
from .experiments import ConfigError, ExperimentConfig

EXIT_OK, EXIT_CONFIG, EXIT_SKIPPED, EXIT_NUMERIC = 0, 2, 3, 4
OUT_ENV = "YOUNGHOM_OUT"

log = logging.getLogger("younghom")


class MissingData(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Opacity specifications shared by ``measure`` and ``solve``
# ---------------------------------------------------------------------------


def opacity_from_spec(spec: dict):
    """Build an opacity evaluator from a config entry.

    Models: ``elsasser`` (beta, epsilon), ``table`` (path, scale),
    ``synthetic`` (n_lines, seed, temperature, pressure), ``constant``
    (value), ``step`` (values, period).
    """
    model = spec.get("model")
    if model == "elsasser":
        p = spectra.ElsasserParams(spec.get("beta", 1.0), spec.get("epsilon", 1.0e-4))
        return lambda E: spectra.elsasser_opacity(E, p)
    if model == "table":
        path = spec.get("path")
        if path is None or not Path(path).exists():
            raise MissingData(f"cross-section file {path!r} not available")
        table = spectra.load_cross_section(path)
        scale = float(spec.get("scale", 1.0))
        return lambda E: scale * table(E)
    if model == "synthetic":
        s = spectra.SyntheticLineSpectrum.random(spec.get("n_lines", 400), spec.get("seed", 0))
        T = spec.get("temperature", 296.0)
        p = spec.get("pressure", 101325.0)
        return lambda nu: spectra.synthetic_line_opacity(s, nu, T, p)
    if model == "constant":
        v = float(spec["value"])
        return lambda E: np.full(np.shape(E), v)
    if model == "step":
        return experiments.step_opacity(spec["values"], spec.get("period", 1.0))
    raise ConfigError(f"unknown opacity model {model!r}")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _out_dir(args, name) -> Path:
    if args.out:
        return Path(args.out)
    root = os.environ.get(OUT_ENV)
    if not root:
        raise ConfigError(f"--out not given and ${OUT_ENV} not set")
    return Path(root) / name


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

MEASURE_DEFAULTS = dict(
    kind="measure",
    energy_range=[0.0, 1.0],
    groups=1,
    bands=30,
    spacing="linear",
    n_samples=100_000,
    sampler="stratified",
    seed=0,
    representative="midpoint",
    value_range=None,
)


def cmd_measure(args) -> int:
    cfg = {**MEASURE_DEFAULTS, **_read_json(args.config)}
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = _out_dir(args, "measure")
    out.mkdir(parents=True, exist_ok=True)
    groups = young.GroupGrid.uniform(*cfg["energy_range"], cfg["groups"])
    kind = cfg["kind"]
    diag = {}
    if kind == "measure":
        sigma = opacity_from_spec(cfg["opacity"])
        obj = young.build_measure(
            sigma,
            groups,
            cfg["bands"],
            cfg["spacing"],
            cfg["n_samples"],
            cfg["sampler"],
            cfg["seed"],
            cfg["representative"],
            cfg["value_range"],
        )
        diag["row_sums"] = [float(r.probabilities.sum()) for r in obj.rows]
        diag["clamped"] = [r.clamped for r in obj.rows]
        name = "measure.json"
    elif kind == "joint":
        s_ref = opacity_from_spec(cfg["opacity"])
        s_tgt = opacity_from_spec(cfg.get("target", cfg["opacity"]))
        grp = groups[0]
        pts = young.sample_points(grp, cfg["n_samples"], cfg["sampler"], cfg["seed"])
        v_ref, v_tgt = s_ref(pts), s_tgt(pts)
        b_ref = young.make_bands(None, grp, cfg["bands"], cfg["spacing"], samples=v_ref)
        b_tgt = young.make_bands(None, grp, cfg.get("target_bands", cfg["bands"]), cfg["spacing"], samples=v_tgt)
        obj = young.estimate_joint_measure(None, None, grp, b_ref, b_tgt, len(pts), samples=(v_ref, v_tgt))
        p = obj.probabilities
        diag["row_sums"] = [float(p.sum())]
        diag["clamped"] = [obj.clamped]
        diag["diagonal"] = bool(p.shape[0] == p.shape[1] and np.count_nonzero(p - np.diag(np.diag(p))) == 0)
        name = "joint.json"
    elif kind == "kappa":
        layers = [opacity_from_spec(s) for s in cfg["layers"]]
        obj = young.build_kappa_table(
            layers,
            groups,
            cfg.get("reference_layer", 1) - 1,
            cfg["bands"],
            cfg["spacing"],
            cfg["n_samples"],
            cfg["sampler"],
            cfg["seed"],
            cfg.get("target_bands"),
            cfg["representative"],
            cfg.get("normalize", True),
        )
        diag["row_sums"] = [float(r.probabilities.sum()) for r in obj.measure.rows]
        diag["empty_bands"] = [np.flatnonzero(r.probabilities == 0).tolist() for r in obj.measure.rows]
        name = "kappa.json"
    else:
        raise ConfigError(f"unknown measure kind {kind!r}")
    young.save(obj, out / name)
    _dump(out / "config.json", cfg)
    _dump(out / "diagnostics.json", diag)
    print(json.dumps(diag, sort_keys=True))
    return EXIT_OK


SOLVE_DEFAULTS = dict(
    method="homogenized",
    source="flat",
    emission=False,
    energy_range=[0.0, 1.0],
    groups=1,
    bands=30,
    spacing="linear",
    n_samples=100_000,
    sampler="stratified",
    seed=0,
    representative="midpoint",
    n_x=10,
    quadrature_order=8,
    fine_points=100_001,
)


def cmd_solve(args) -> int:
    cfg = {**SOLVE_DEFAULTS, **_read_json(args.config)}
    out = _out_dir(args, "solve")
    out.mkdir(parents=True, exist_ok=True)
    sigma = opacity_from_spec(cfg["opacity"])
    source = experiments.watt_per_kev if cfg["source"] == "watt" else np.ones_like
    lo, hi = cfg["energy_range"]
    groups = young.GroupGrid.uniform(lo, hi, cfg["groups"])
    x = np.linspace(0.0, 1.0, cfg["n_x"])
    quad = transport.gauss_legendre(cfg["quadrature_order"])
    problem = transport.SlabProblem(sigma, source, groups, x, emission=cfg["emission"])
    grids = [transport.fine_grid(g, cfg["fine_points"]) for g in groups]
    method = cfg["method"]
    if method == "exact":
        prof = transport.exact_group_scalar_flux(problem, quad, grids)
    elif method == "homogenized":
        meas = young.build_measure(
            sigma, groups, cfg["bands"], cfg["spacing"], cfg["n_samples"], cfg["sampler"], cfg["seed"], cfg["representative"]
        )
        S = transport.group_source_integrals(problem, grids)
        prof = transport.homogenized_scalar_flux(meas, S, quad, x, emission=cfg["emission"])
    elif method == "planck":
        pts = np.union1d(np.concatenate([g[0] for g in grids]), groups.boundaries)
        sig_g, S_g = transport.planck_weighted_constants(problem, groups.boundaries, pts)
        prof = transport.multigroup_scalar_flux(sig_g, S_g, quad, x)
    else:
        raise ConfigError(f"unknown method {method!r}")
    prof.save(out / "profile.csv")
    _dump(out / "config.json", cfg)
    print(f"{prof.method}: {len(prof.values)} points written to {out / 'profile.csv'}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    raw = _read_json(args.config) if args.config else {}
    raw.setdefault("problem", args.name)
    if raw["problem"] != args.name:
        raise ConfigError(f"config is for {raw['problem']!r}, not {args.name!r}")
    for flag in ("bands", "groups", "seed"):
        if getattr(args, flag) is not None:
            raw[flag] = getattr(args, flag)
    cfg = ExperimentConfig.from_dict(raw).resolved()
    out = _out_dir(args, args.name)
    report = experiments.run(cfg)
    experiments.write_report(report, out)
    for note in report.notes:
        log.info(note)
    if report.status == "skipped":
        print("; ".join(report.notes), file=sys.stderr)
        return EXIT_SKIPPED
    for name, err in sorted(report.max_errors.items()):
        print(f"{name:>16s}  params={report.parameter_counts[name]!s:>6}  max_rel_err={err:.3e}")
    return EXIT_OK


def cmd_compare(args) -> int:
    ref = transport.FluxProfile.from_csv(args.ref)
    test = transport.FluxProfile.from_csv(args.test)
    err, worst, excluded = experiments.relative_error(test, ref)
    print(f"max_rel_err={worst!r} points={err.size} excluded={len(excluded)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="younghom", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", help="estimate and store a discrete Young measure / joint measure / kappa table")
    m.add_argument("--config", required=True)
    m.add_argument("--out")
    m.add_argument("--seed", type=int)
    m.set_defaults(func=cmd_measure)

    s = sub.add_parser("solve", help="solve one slab problem and write a flux profile")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("experiment", help="run a benchmark comparison")
    e.add_argument("name", choices=experiments.PROBLEMS)
    e.add_argument("--config")
    e.add_argument("--out")
    e.add_argument("--bands", type=int)
    e.add_argument("--groups", type=int)
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_experiment)

    c = sub.add_parser("compare", help="relative error between two flux profiles")
    c.add_argument("--ref", required=True)
    c.add_argument("--test", required=True)
    c.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, spectra.CrossSectionFormatError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MissingData, experiments.DataMissing) as exc:
        print(f"data-dependent run skipped: {exc}", file=sys.stderr)
        return EXIT_SKIPPED
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
