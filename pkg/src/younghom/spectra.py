"""Opacity models, emission sources and physical tables.

Everything here is a pure function of immutable inputs. Opacity evaluators
are plain callables ``sigma(E) -> array`` so that analytic models and
tabulated data can be used interchangeably by the measure estimators and
the transport solvers.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import constants

# Dry-air gas constant, J/(kg K).
R_DRY_AIR = 287.05

# Second radiation constant h c / k in cm K (frequencies in cm^-1).
C2_CM_K = constants.h * constants.c / constants.k * 100.0
# 2 h c^2 folded for nu in cm^-1, giving W / (m^2 sr cm^-1).
C1_CM = 2.0 * constants.h * constants.c**2 * 1.0e8


class CrossSectionFormatError(ValueError):
    """Raised when a cross-section file or table is malformed."""


# ---------------------------------------------------------------------------
# Tabulated cross sections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TabulatedCrossSection:
    """Sorted ``(energy, value)`` samples evaluated by linear interpolation.

    Instances are callable: ``table(E)`` is ``interpolate(table, E)``.
    """

    energies: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        e = np.array(self.energies, dtype=float)
        v = np.array(self.values, dtype=float)
        if e.ndim != 1 or v.ndim != 1 or e.shape != v.shape:
            raise CrossSectionFormatError("energies and values must be 1-d arrays of equal length")
        if e.size < 2:
            raise CrossSectionFormatError("a table needs at least two samples")
        if not np.all(np.isfinite(e)) or not np.all(np.isfinite(v)):
            raise CrossSectionFormatError("non-finite entries in table")
        bad = np.flatnonzero(np.diff(e) <= 0)
        if bad.size:
            raise CrossSectionFormatError(f"energies not strictly increasing at index {bad[0] + 1}")
        neg = np.flatnonzero(v < 0)
        if neg.size:
            raise CrossSectionFormatError(f"negative value at index {neg[0]}")
        e.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "values", v)

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.energies[0]), float(self.energies[-1])

    def __len__(self):
        return self.energies.size

    def __call__(self, E):
        return interpolate(self, E)


def interpolate(table: TabulatedCrossSection, E):
    """Piecewise-linear interpolation of ``table`` at ``E``.

    No extrapolation: any ``E`` outside ``[energies[0], energies[-1]]``
    raises ``ValueError``.
    """
    E_arr = np.asarray(E, dtype=float)
    lo, hi = table.domain
    if np.any(E_arr < lo) or np.any(E_arr > hi) or np.any(np.isnan(E_arr)):
        raise ValueError(f"energy outside tabulated range [{lo!r}, {hi!r}]")
    out = np.interp(E_arr, table.energies, table.values)
    return out if out.ndim else float(out)


def load_cross_section(path, label: str | None = None) -> TabulatedCrossSection:
    """Read a two-column ``energy value`` text file.

    Lines starting with ``#`` and blank lines are ignored. Errors name the
    offending line number (1-based).
    """
    path = Path(path)
    energies, values = [], []
    prev = None
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise CrossSectionFormatError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
            try:
                e, v = float(parts[0]), float(parts[1])
            except ValueError as exc:
                raise CrossSectionFormatError(f"{path}:{lineno}: cannot parse numbers") from exc
            if not (np.isfinite(e) and np.isfinite(v)):
                raise CrossSectionFormatError(f"{path}:{lineno}: non-finite entry")
            if prev is not None and e <= prev:
                raise CrossSectionFormatError(f"{path}:{lineno}: energies must be strictly ascending")
            if v < 0:
                raise CrossSectionFormatError(f"{path}:{lineno}: negative cross-section value")
            energies.append(e)
            values.append(v)
            prev = e
    return TabulatedCrossSection(np.array(energies), np.array(values), label or path.name)


def save_cross_section(table: TabulatedCrossSection, path) -> None:
    """Write ``table`` in the format read by :func:`load_cross_section`.

    Floats are written with ``repr`` so the round trip is exact.
    """
    with Path(path).open("w", encoding="utf-8") as fh:
        if table.label:
            fh.write(f"# {table.label}\n")
        for e, v in zip(table.energies.tolist(), table.values.tolist()):
            fh.write(f"{e!r} {v!r}\n")


# ---------------------------------------------------------------------------
# Elsasser band model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ElsasserParams:
    beta: float = 1.0
    epsilon: float = 1.0e-4

    def __post_init__(self):
        if not self.beta > 0 or not self.epsilon > 0:
            raise ValueError("Elsasser parameters must be positive")

    @property
    def c_beta(self) -> float:
        """Upper end of the opacity range, (cosh b + 1)/(cosh b - 1)."""
        ch = np.cosh(self.beta)
        return float((ch + 1.0) / (ch - 1.0))


def elsasser_opacity(E, params: ElsasserParams):
    """Opacity of an infinite array of equally spaced, equal-strength
    Lorentz lines; values lie in ``[1, c_beta]`` and are ``epsilon``-periodic."""
    ch = np.cosh(params.beta)
    # reduce the phase first so large E keeps full periodic accuracy
    phase = np.mod(np.asarray(E, dtype=float) / params.epsilon, 1.0)
    out = (ch + 1.0) / (ch - np.cos(2.0 * np.pi * phase))
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WattParams:
    """Watt fission spectrum ``c exp(-E/a) sinh(sqrt(b E))`` with E in MeV."""

    a: float = 0.988
    b: float = 2.2249

    def __post_init__(self):
        if not self.a > 0 or not self.b > 0:
            raise ValueError("Watt parameters a, b must be positive")

    @property
    def c(self) -> float:
        a, b = self.a, self.b
        return float(np.exp(-a * b / 4.0) / np.sqrt(np.pi * a**3 * b / 4.0))


def watt_spectrum(E, params: WattParams = WattParams()):
    E_arr = np.asarray(E, dtype=float)
    if np.any(E_arr < 0):
        raise ValueError("Watt spectrum is defined for E >= 0")
    out = params.c * np.exp(-E_arr / params.a) * np.sinh(np.sqrt(params.b * E_arr))
    return out if out.ndim else float(out)


def planck_function(nu, T):
    """Planck spectral radiance per unit wavenumber.

    ``nu`` in cm^-1 and ``T`` in K; result in W m^-2 sr^-1 (cm^-1)^-1.
    """
    nu_arr = np.asarray(nu, dtype=float)
    T_arr = np.asarray(T, dtype=float)
    if np.any(nu_arr <= 0) or np.any(T_arr <= 0):
        raise ValueError("Planck function needs nu > 0 and T > 0")
    with np.errstate(over="ignore"):
        out = C1_CM * nu_arr**3 / np.expm1(C2_CM_K * nu_arr / T_arr)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Atmosphere
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtmosphereLayer:
    height_lo: float  # km
    height_hi: float  # km
    temperature: float  # K
    pressure: float  # Pa
    volume_fraction: float

    def __post_init__(self):
        if not self.height_lo < self.height_hi:
            raise ValueError("layer needs height_lo < height_hi")
        if not self.temperature > 0 or not self.pressure > 0:
            raise ValueError("layer temperature and pressure must be positive")
        if not 0.0 <= self.volume_fraction <= 1.0:
            raise ValueError("volume fraction must lie in [0, 1]")

    @property
    def air_density(self) -> float:
        """kg/m^3 from the ideal gas law for dry air."""
        return self.pressure / (R_DRY_AIR * self.temperature)

    @property
    def thickness_m(self) -> float:
        return (self.height_hi - self.height_lo) * 1000.0


# 1976 US standard atmosphere, 12 homogeneous layers.
_STANDARD_LAYERS = (
    (0, 1, 281.65, 8.98746e4, 0.0081),
    (1, 2, 275.15, 7.94952e4, 0.0077),
    (2, 3, 268.65, 7.01085e4, 0.0059),
    (3, 4, 262.15, 6.16402e4, 0.0028),
    (4, 5, 255.65, 5.40199e4, 0.0016),
    (5, 6, 249.15, 4.71810e4, 0.0008),
    (6, 7, 242.65, 4.10607e4, 0.0003),
    (7, 8, 236.15, 3.55998e4, 7.96e-5),
    (8, 9, 229.65, 3.07425e4, 3.21e-5),
    (9, 10, 223.15, 2.64363e4, 1.78e-5),
    (10, 12, 216.65, 1.93304e4, 6.94e-6),
    (12, 15, 216.65, 1.20446e4, 3.84e-6),
)

# Surface temperature used for the bottom boundary radiance.
SURFACE_TEMPERATURE = 288.15


def standard_atmosphere() -> list[AtmosphereLayer]:
    return [AtmosphereLayer(float(lo), float(hi), T, p, r) for lo, hi, T, p, r in _STANDARD_LAYERS]


ATMOSPHERE_CSV_HEADER = ("height_lo", "height_hi", "temperature", "pressure", "volume_fraction")


def load_atmosphere(path) -> list[AtmosphereLayer]:
    """Read layers from a CSV with header
    ``height_lo,height_hi,temperature,pressure,volume_fraction``."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != ATMOSPHERE_CSV_HEADER:
            raise ValueError(f"{path}: header must be {','.join(ATMOSPHERE_CSV_HEADER)}")
        layers = [AtmosphereLayer(*(float(row[k]) for k in ATMOSPHERE_CSV_HEADER)) for row in reader]
    if not layers:
        raise ValueError(f"{path}: no layers")
    for below, above in zip(layers, layers[1:]):
        if below.height_hi != above.height_lo:
            raise ValueError(f"{path}: layers are not contiguous at {below.height_hi} km")
    return layers


def save_atmosphere(layers, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ATMOSPHERE_CSV_HEADER)
        for L in layers:
            writer.writerow([repr(float(getattr(L, k))) for k in ATMOSPHERE_CSV_HEADER])


# ---------------------------------------------------------------------------
# Synthetic Lorentzian line spectrum
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticLineSpectrum:
    """Sum of Lorentz lines standing in for a line-list derived cross section.

    Strengths are given at ``reference_temperature`` and scale with a
    Boltzmann factor ``exp(-c2 E'' (1/T - 1/T_ref))`` built from per-line
    lower-state energies, so lines do not all move together with
    temperature. Half widths scale as ``(p / reference_pressure) **
    pressure_broadening_exponent``. Units: cm^-1 for frequencies and
    widths, strengths in m^2 kg^-1 cm^-1.
    """

    line_centers: np.ndarray
    line_strengths: np.ndarray
    lower_state_energies: np.ndarray
    reference_width: float = 0.07
    pressure_broadening_exponent: float = 1.0
    nu_range: tuple[float, float] = (1000.0, 2000.0)
    reference_temperature: float = 296.0
    reference_pressure: float = 101325.0
    seed: int | None = None

    def __post_init__(self):
        c = np.asarray(self.line_centers, dtype=float)
        s = np.asarray(self.line_strengths, dtype=float)
        e = np.asarray(self.lower_state_energies, dtype=float)
        if not (c.shape == s.shape == e.shape) or c.ndim != 1:
            raise ValueError("line arrays must be 1-d and of equal length")
        if np.any(s <= 0):
            raise ValueError("line strengths must be positive")
        if not self.reference_width > 0:
            raise ValueError("reference width must be positive")
        for name, arr in (("line_centers", c), ("line_strengths", s), ("lower_state_energies", e)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def random(
        cls,
        n_lines: int = 400,
        seed: int = 0,
        nu_range=(1000.0, 2000.0),
        log10_strength_range=(-2.0, 2.0),
        max_lower_state_energy: float = 2500.0,
        **kwargs,
    ) -> "SyntheticLineSpectrum":
        """Draw a reproducible random line list."""
        rng = np.random.default_rng(seed)
        lo, hi = nu_range
        centers = np.sort(rng.uniform(lo, hi, n_lines))
        strengths = 10.0 ** rng.uniform(*log10_strength_range, n_lines)
        energies = rng.uniform(0.0, max_lower_state_energy, n_lines)
        return cls(centers, strengths, energies, nu_range=tuple(nu_range), seed=seed, **kwargs)

    def width(self, p: float) -> float:
        return self.reference_width * (p / self.reference_pressure) ** self.pressure_broadening_exponent

    def strengths_at(self, T: float) -> np.ndarray:
        return self.line_strengths * np.exp(
            -C2_CM_K * self.lower_state_energies * (1.0 / T - 1.0 / self.reference_temperature)
        )


def synthetic_line_opacity(spec: SyntheticLineSpectrum, nu, T: float, p: float, chunk: int = 4096):
    """Lorentz-line cross section ``sum_l S_l(T) g(nu - c_l)/pi / ((nu - c_l)^2 + g^2)``."""
    nu_arr = np.asarray(nu, dtype=float)
    lo, hi = spec.nu_range
    if np.any(nu_arr < lo) or np.any(nu_arr > hi):
        raise ValueError(f"frequency outside spectrum range [{lo}, {hi}]")
    flat = nu_arr.ravel()
    out = np.zeros_like(flat)
    if spec.line_centers.size == 0:
        return out.reshape(nu_arr.shape) if nu_arr.ndim else 0.0
    g = spec.width(p)
    amp = spec.strengths_at(T) * (g / np.pi)
    centers = spec.line_centers
    g2 = g * g
    for start in range(0, flat.size, chunk):
        d = flat[start : start + chunk, None] - centers[None, :]
        out[start : start + chunk] = (amp / (d * d + g2)).sum(axis=1)
    out = out.reshape(nu_arr.shape)
    return out if out.ndim else float(out)


def layer_opacity(spec: SyntheticLineSpectrum, layer: AtmosphereLayer, nu):
    """Absorption coefficient (1/m) of a layer: fraction x air density x
    cross section, treating the volume fraction as a mass fraction."""
    return layer.volume_fraction * layer.air_density * synthetic_line_opacity(
        spec, nu, layer.temperature, layer.pressure
    )
