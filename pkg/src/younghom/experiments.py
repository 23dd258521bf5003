"""Drivers for the three benchmark problems.

Each ``run_*`` function takes an :class:`ExperimentConfig`, solves the
problem line by line, with the homogenised multiband method and with
Planck-weighted multigroup baselines, and returns a
:class:`ComparisonReport`. :func:`write_report` turns a report into CSV
profiles plus a JSON summary; the output depends only on the config and
the data files.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import spectra, transport, young
from .transport import FluxProfile

logger = logging.getLogger(__name__)

PROBLEMS = ("elsasser", "iron", "atmosphere")

_DEFAULTS = {
    "elsasser": dict(
        groups=1,
        bands=30,
        spacing="linear",
        n_samples=1_000_000,
        n_x=10,
        fine_resolution=64,
        baseline_groups=[1],
        energy_range=[0.0, 1.0],
    ),
    "iron": dict(
        groups=4,
        bands=40,
        spacing="linear",
        n_samples=1_000_000,
        n_x=10,
        fine_resolution=None,
        baseline_groups=[1024, 4096, 16384, 65536],
        energy_range=[50.002, 1.0e4],
    ),
    "atmosphere": dict(
        groups=10,
        bands=7,
        spacing="logarithmic",
        n_samples=None,
        n_x=100,
        fine_resolution=200_001,
        baseline_groups=[70, 2500, 5000],
        energy_range=[1000.0, 2000.0],
    ),
}


class ConfigError(ValueError):
    pass


class DataMissing(RuntimeError):
    """A data-dependent experiment was asked to run without its data."""


@dataclass
class ExperimentConfig:
    """Settings of one run.

    ``None`` fields take problem-specific defaults in :meth:`resolved`.
    ``fine_resolution`` is points per line spacing for the Elsasser model,
    the number of frequency points for the atmosphere, and unused for iron
    (the tabulated nodes are the fine grid). ``reference_layer`` is
    1-based. Setting ``max_lower_state_energy`` and
    ``pressure_broadening_exponent`` to zero makes every layer's synthetic
    opacity a multiple of one cross section.
    """

    problem: str = "elsasser"
    groups: int | None = None
    bands: int | None = None
    spacing: str | None = None
    sampler: str = "stratified"
    seed: int = 0
    n_samples: int | None = None
    quadrature_order: int = 8
    n_x: int | None = None
    fine_resolution: int | None = None
    baseline_groups: list[int] | None = None
    energy_range: list[float] | None = None
    representative: str = "midpoint"
    # elsasser
    beta: float = 1.0
    epsilon: float = 1.0e-4
    emission: bool = False
    constant_opacity: float | None = None
    # iron
    cross_section: str | None = None
    density_scale: float = 1.0
    source: str = "watt"
    opacity_model: str = "table"
    step_values: list[float] = field(default_factory=lambda: [0.5, 2.0, 7.0])
    step_period: float = 1.0
    # atmosphere
    atmosphere: str | None = None
    layer_cross_sections: list[str] | None = None
    reference_layer: int = 6
    target_bands: int | None = None
    normalize_kappa: bool = True
    n_lines: int = 400
    spectrum_seed: int = 0
    max_lower_state_energy: float = 2500.0
    pressure_broadening_exponent: float = 1.0
    surface_temperature: float = spectra.SURFACE_TEMPERATURE
    upward_only: bool = True

    def resolved(self) -> "ExperimentConfig":
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEMS)}")
        filled = dataclasses.replace(self)
        for key, value in _DEFAULTS[self.problem].items():
            if getattr(filled, key) is None:
                setattr(filled, key, value)
        filled.validate()
        return filled

    def validate(self) -> None:
        for name in ("groups", "bands", "quadrature_order", "n_x"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"{name} must be a positive integer")
        if self.n_samples is not None and self.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        if self.spacing is not None and self.spacing not in young.SPACINGS:
            raise ConfigError(f"spacing must be one of {young.SPACINGS}")
        if self.sampler not in young.SAMPLERS:
            raise ConfigError(f"sampler must be one of {young.SAMPLERS}")
        if self.representative not in young.REPRESENTATIVES:
            raise ConfigError(f"representative must be one of {young.REPRESENTATIVES}")
        if self.quadrature_order % 2:
            raise ConfigError("quadrature_order must be even")
        if self.n_x is not None and self.n_x < 2 and self.problem == "atmosphere":
            raise ConfigError("atmosphere needs n_x >= 2")
        if any(g < 1 for g in self.baseline_groups or []):
            raise ConfigError("baseline group counts must be positive")
        if self.max_lower_state_energy < 0:
            raise ConfigError("max_lower_state_energy must be nonnegative")
        if self.source not in ("watt", "flat"):
            raise ConfigError("source must be 'watt' or 'flat'")
        if self.opacity_model not in ("table", "step"):
            raise ConfigError("opacity_model must be 'table' or 'step'")
        for name in ("cross_section", "atmosphere"):
            path = getattr(self, name)
            if path is not None and not isinstance(path, str):
                raise ConfigError(f"{name} must be a path string")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d)


@dataclass
class ComparisonReport:
    config: ExperimentConfig
    profiles: dict[str, FluxProfile] = field(default_factory=dict)
    errors: dict[str, np.ndarray] = field(default_factory=dict)
    status: str = "ok"
    reference: str = "line-by-line"
    extras: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def parameter_counts(self) -> dict[str, int | None]:
        return {k: p.parameter_count for k, p in self.profiles.items() if k != self.reference}

    @property
    def max_errors(self) -> dict[str, float]:
        return {k: float(np.nanmax(v)) for k, v in self.errors.items()}

    def add(self, name: str, profile: FluxProfile) -> None:
        profile.metadata.setdefault("config_hash", self.config.digest())
        self.profiles[name] = profile
        if name != self.reference:
            self.errors[name] = relative_error(profile, self.profiles[self.reference])[0]

    def summary(self) -> dict:
        return {
            "problem": self.config.problem,
            "status": self.status,
            "config_hash": self.config.digest(),
            "config": self.config.to_dict(),
            "reference": self.reference,
            "parameter_counts": self.parameter_counts,
            "max_relative_error": self.max_errors,
            "notes": self.notes,
            **{k: v for k, v in self.extras.items() if not isinstance(v, dict) or "table" not in v},
        }


def relative_error(test: FluxProfile, reference: FluxProfile):
    """Pointwise and maximum ``|test - ref| / ref``.

    Points where the reference vanishes are excluded (NaN in the pointwise
    array) and listed.
    """
    if test.positions.shape != reference.positions.shape or not np.allclose(
        test.positions, reference.positions, rtol=1e-12, atol=1e-12
    ):
        raise ValueError("profiles are sampled at different positions")
    ref = reference.values
    ok = ref > 0
    err = np.full(ref.shape, np.nan)
    err[ok] = np.abs(test.values[ok] - ref[ok]) / ref[ok]
    excluded = np.flatnonzero(~ok).tolist()
    return err, (float(np.max(err[ok])) if ok.any() else float("nan")), excluded


def _baseline_grid(points, boundaries) -> np.ndarray:
    return np.union1d(points, boundaries)


# ---------------------------------------------------------------------------
# Elsasser band model
# ---------------------------------------------------------------------------


def elsasser_band_probabilities(edges, beta: float) -> np.ndarray:
    """Exact band probabilities of the Elsasser measure from its CDF,
    ``F(xi) = 1 - arccos(cosh b - (cosh b + 1)/xi) / pi``."""
    ch = np.cosh(beta)
    arg = np.clip(ch - (ch + 1.0) / np.asarray(edges, dtype=float), -1.0, 1.0)
    return np.diff(1.0 - np.arccos(arg) / np.pi)


def run_elsasser(config: ExperimentConfig) -> ComparisonReport:
    cfg = config.resolved()
    report = ComparisonReport(cfg)
    params = spectra.ElsasserParams(cfg.beta, cfg.epsilon)
    if cfg.constant_opacity is not None:
        value = float(cfg.constant_opacity)

        def sigma(E):
            return np.full(np.shape(E), value)

        value_range = None
    else:

        def sigma(E):
            return spectra.elsasser_opacity(E, params)

        value_range = (1.0, params.c_beta)

    lo, hi = cfg.energy_range
    groups = young.GroupGrid.uniform(lo, hi, cfg.groups)
    x = np.linspace(0.0, 1.0, cfg.n_x)
    quad = transport.gauss_legendre(cfg.quadrature_order)
    problem = transport.SlabProblem(sigma, np.ones_like, groups, x, emission=cfg.emission)

    grids = []
    for grp in groups:
        n = int(round((grp[1] - grp[0]) / cfg.epsilon)) * cfg.fine_resolution + 1
        grids.append(transport.fine_grid(grp, max(n, 2)))
    ref = transport.exact_group_scalar_flux(problem, quad, grids)
    ref.metadata["fine_points_per_line"] = cfg.fine_resolution
    report.add("line-by-line", ref)

    measure = young.build_measure(
        sigma, groups, cfg.bands, cfg.spacing, cfg.n_samples, cfg.sampler, cfg.seed, cfg.representative, value_range
    )
    S = transport.group_source_integrals(problem, grids)
    report.add("homogenized", transport.homogenized_scalar_flux(measure, S, quad, x, emission=cfg.emission))

    points = np.concatenate([g[0] for g in grids])
    for G in cfg.baseline_groups:
        bnd = np.linspace(lo, hi, G + 1)
        sig_g, S_g = transport.planck_weighted_constants(problem, bnd, _baseline_grid(points, bnd))
        report.add(f"planck-{G}", transport.multigroup_scalar_flux(sig_g, S_g, quad, x))

    if cfg.constant_opacity is None:
        row = measure.rows[0]
        edges = row.bands.boundaries
        report.extras["measure_comparison"] = {
            "table": True,
            "representative": row.representatives.tolist(),
            "discrete_probability": row.probabilities.tolist(),
            "analytic_probability": elsasser_band_probabilities(edges, cfg.beta).tolist(),
            "discrete_density": (row.probabilities / np.diff(edges)).tolist(),
            "analytic_density": young.elsasser_measure_density(row.representatives, cfg.beta).tolist(),
        }
    return report


# ---------------------------------------------------------------------------
# Iron with a Watt fission source
# ---------------------------------------------------------------------------


def step_opacity(values, period: float):
    """Periodic piecewise-constant opacity taking ``values`` on equal
    sub-intervals of each period."""
    vals = np.asarray(values, dtype=float)
    k = vals.size

    def sigma(E):
        phase = np.mod(np.asarray(E, dtype=float) / period, 1.0)
        return vals[np.minimum((phase * k).astype(np.intp), k - 1)]

    return sigma


def watt_per_kev(E_kev):
    """Watt spectrum with energies in keV (per keV)."""
    return spectra.watt_spectrum(np.asarray(E_kev, dtype=float) * 1.0e-3) * 1.0e-3


def run_iron(config: ExperimentConfig) -> ComparisonReport:
    """Iron slab with a Watt source.

    With ``opacity_model='table'`` the cross section comes from
    ``cross_section``; a missing file yields a report with status
    ``"skipped"``. ``opacity_model='step'`` replaces it with a periodic
    step function resolved exactly by aligned midpoint grids.
    """
    cfg = config.resolved()
    report = ComparisonReport(cfg)
    lo, hi = cfg.energy_range
    groups = young.GroupGrid.uniform(lo, hi, cfg.groups)
    x = np.linspace(0.0, 1.0, cfg.n_x)
    quad = transport.gauss_legendre(cfg.quadrature_order)
    source = watt_per_kev if cfg.source == "watt" else np.ones_like

    if cfg.opacity_model == "step":
        base = step_opacity(cfg.step_values, cfg.step_period)

        def sigma(E):
            return cfg.density_scale * base(np.asarray(E, dtype=float) - lo)

        k = len(cfg.step_values)
        per_group = [int(round((b - a) / cfg.step_period)) for a, b in groups]
        grids = [transport.fine_grid(grp, n * k * 16, "midpoint") for grp, n in zip(groups, per_group)]
        # stratified samples then sit at cell centres, one per step piece
        n_samples = per_group[0] * k * 16
        nodes = np.concatenate([g[0] for g in grids])
        report.notes.append("synthetic periodic step cross section; fine grid aligned with steps")
    else:
        path = cfg.cross_section
        if path is None or not Path(path).exists():
            report.status = "skipped"
            report.notes.append(f"data-dependent experiment skipped: cross-section file {path!r} not available")
            return report
        table = spectra.load_cross_section(path)
        e0, e1 = table.domain
        if lo < e0 or hi > e1:
            raise ConfigError(f"energy range [{lo}, {hi}] not covered by table [{e0}, {e1}]")

        def sigma(E):
            return cfg.density_scale * table(E)

        grids = [transport.table_grid(table.energies, grp) for grp in groups]
        n_samples = cfg.n_samples
        nodes = table.energies[(table.energies >= lo) & (table.energies <= hi)]
        report.notes.append("line-by-line fine grid: tabulated nodes plus group boundaries, trapezoid rule")

    problem = transport.SlabProblem(sigma, source, groups, x)
    report.add("line-by-line", transport.exact_group_scalar_flux(problem, quad, grids))

    measure = young.build_measure(
        sigma, groups, cfg.bands, cfg.spacing, n_samples, cfg.sampler, cfg.seed, cfg.representative
    )
    S = transport.group_source_integrals(problem, grids)
    report.add("homogenized", transport.homogenized_scalar_flux(measure, S, quad, x))

    for G in cfg.baseline_groups:
        bnd = np.linspace(lo, hi, G + 1)
        if cfg.opacity_model == "step":
            # midpoint grids do not contain the boundaries; use a fine
            # trapezoid grid aligned with the step pieces instead
            pts = np.union1d(np.linspace(lo, hi, sum(len(g[0]) for g in grids) + 1), bnd)
        else:
            pts = _baseline_grid(nodes, bnd)
        sig_g, S_g = transport.planck_weighted_constants(problem, bnd, pts)
        report.add(f"planck-{G}", transport.multigroup_scalar_flux(sig_g, S_g, quad, x))
    return report


# ---------------------------------------------------------------------------
# Layered atmosphere
# ---------------------------------------------------------------------------


def atmosphere_opacities(cfg: ExperimentConfig, layers, nu) -> np.ndarray:
    """Absorption coefficients (1/m) of every layer on the grid ``nu``."""
    if cfg.layer_cross_sections is not None:
        if len(cfg.layer_cross_sections) != len(layers):
            raise ConfigError("one cross-section file per layer required")
        out = []
        for layer, path in zip(layers, cfg.layer_cross_sections):
            if not Path(path).exists():
                raise DataMissing(f"cross-section file {path!r} not available")
            tab = spectra.load_cross_section(path)
            out.append(layer.volume_fraction * layer.air_density * tab(nu))
        return np.array(out)
    spec = spectra.SyntheticLineSpectrum.random(
        cfg.n_lines,
        cfg.spectrum_seed,
        nu_range=tuple(cfg.energy_range),
        max_lower_state_energy=cfg.max_lower_state_energy,
        pressure_broadening_exponent=cfg.pressure_broadening_exponent,
    )
    return np.array([spectra.layer_opacity(spec, layer, nu) for layer in layers])


def run_atmosphere(config: ExperimentConfig) -> ComparisonReport:
    cfg = config.resolved()
    report = ComparisonReport(cfg)
    if cfg.atmosphere is not None:
        if not Path(cfg.atmosphere).exists():
            report.status = "skipped"
            report.notes.append(f"data-dependent experiment skipped: atmosphere file {cfg.atmosphere!r} not available")
            return report
        layers = spectra.load_atmosphere(cfg.atmosphere)
    else:
        layers = spectra.standard_atmosphere()
    K = len(layers)
    if not 1 <= cfg.reference_layer <= K:
        raise ConfigError(f"reference_layer must lie in 1..{K}")
    try:
        nu = np.linspace(*cfg.energy_range, cfg.fine_resolution)
        sig = atmosphere_opacities(cfg, layers, nu)
    except DataMissing as exc:
        report.status = "skipped"
        report.notes.append(f"data-dependent experiment skipped: {exc}")
        return report

    interfaces = np.array([layers[0].height_lo] + [L.height_hi for L in layers]) * 1000.0
    temps = np.array([L.temperature for L in layers])
    quad = transport.gauss_legendre(cfg.quadrature_order)
    T0 = cfg.surface_temperature
    B = spectra.planck_function(nu[None, :], temps[:, None])
    B0 = spectra.planck_function(nu, T0)
    w = transport.trapezoid_weights(nu)
    report.notes.append("opacity: " + ("tabulated per-layer files" if cfg.layer_cross_sections else "synthetic Lorentz lines"))

    ref = transport.layered_outgoing_flux(
        interfaces, sig, B, B0, quad, cfg.n_x, w, cfg.upward_only, method="line-by-line"
    )
    report.add("line-by-line", ref)

    # homogenised: reference-layer measure, conditional opacities per layer
    lo, hi = cfg.energy_range
    groups = young.GroupGrid.uniform(lo, hi, cfg.groups)
    evaluators = [spectra.TabulatedCrossSection(nu, s) for s in sig]
    n_samples = cfg.n_samples or int(round((cfg.fine_resolution - 1) / cfg.groups))
    kt = young.build_kappa_table(
        evaluators,
        groups,
        cfg.reference_layer - 1,
        cfg.bands,
        cfg.spacing,
        n_samples,
        cfg.sampler,
        cfg.seed,
        cfg.target_bands,
        cfg.representative,
        cfg.normalize_kappa,
    )
    B_grid = np.union1d(nu, groups.boundaries)
    B_fine = spectra.planck_function(B_grid[None, :], temps[:, None])
    B_i = np.array([transport.cumulative_on_boundaries(B_grid, b, groups.boundaries) for b in B_fine])
    B0_i = transport.cumulative_on_boundaries(B_grid, spectra.planck_function(B_grid, T0), groups.boundaries)
    opac, src, bottom, weights = [], [], [], []
    for i, row in enumerate(kt.measure.rows):
        for j in np.flatnonzero(row.probabilities > 0):
            opac.append(kt.kappa[i][j])
            src.append(B_i[:, i])
            bottom.append(B0_i[i])
            weights.append(row.probabilities[j])
    hom = transport.layered_outgoing_flux(
        interfaces,
        np.array(opac).T,
        np.array(src).T,
        np.array(bottom),
        quad,
        cfg.n_x,
        np.array(weights),
        cfg.upward_only,
        method="homogenized",
        parameter_count=kt.measure.parameter_count,
    )
    hom.metadata.update(kt.provenance)
    report.add("homogenized", hom)
    report.extras["kappa_table"] = {"table": True, "value": young.kappa_to_dict(kt)}

    for G in cfg.baseline_groups:
        bnd = np.linspace(lo, hi, G + 1)
        grid = _baseline_grid(nu, bnd)
        sig_grid = np.array([np.interp(grid, nu, s) for s in sig])
        B_g = spectra.planck_function(grid[None, :], temps[:, None])
        sig_g = np.empty((K, G))
        src_g = np.empty((K, G))
        for k in range(K):
            # S = sigma B, so int S/sigma = int B
            S_int = transport.cumulative_on_boundaries(grid, sig_grid[k] * B_g[k], bnd)
            src_g[k] = transport.cumulative_on_boundaries(grid, B_g[k], bnd)
            sig_g[k] = S_int / src_g[k]
        bottom_g = transport.cumulative_on_boundaries(grid, spectra.planck_function(grid, T0), bnd)
        prof = transport.layered_outgoing_flux(
            interfaces, sig_g, src_g, bottom_g, quad, cfg.n_x, None, cfg.upward_only, method=f"planck-{G}", parameter_count=G
        )
        report.add(f"planck-{G}", prof)

    counts = report.parameter_counts
    planck = {k: v for k, v in counts.items() if k.startswith("planck-")}
    if planck:
        largest = max(planck, key=planck.get)
        report.extras["parameter_ratio"] = planck[largest] / counts["homogenized"]
        report.extras["parameter_ratio_baseline"] = largest
    return report


RUNNERS = {"elsasser": run_elsasser, "iron": run_iron, "atmosphere": run_atmosphere}


def run(config: ExperimentConfig) -> ComparisonReport:
    return RUNNERS[config.resolved().problem](config)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------


def write_report(report: ComparisonReport, outdir) -> Path:
    """Write profiles, tables and ``summary.json`` into ``outdir``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(report.config.to_dict(), indent=1, sort_keys=True) + "\n")
    for name, prof in report.profiles.items():
        prof.save(out / f"{name}.csv")
    for name, err in report.errors.items():
        FluxProfile(report.profiles[name].positions, np.nan_to_num(err, nan=0.0), f"relative-error-{name}").to_csv(
            out / f"error_{name}.csv"
        )
    mc = report.extras.get("measure_comparison")
    if mc:
        keys = ["representative", "discrete_probability", "analytic_probability", "discrete_density", "analytic_density"]
        with (out / "measure_comparison.csv").open("w", encoding="utf-8") as fh:
            fh.write(",".join(keys) + "\n")
            for vals in zip(*(mc[k] for k in keys)):
                fh.write(",".join(repr(float(v)) for v in vals) + "\n")
    kt = report.extras.get("kappa_table")
    if kt:
        (out / "kappa_table.json").write_text(json.dumps(kt["value"], indent=1, sort_keys=True, allow_nan=False) + "\n")
    (out / "summary.json").write_text(json.dumps(report.summary(), indent=1, sort_keys=True) + "\n")
    return out
