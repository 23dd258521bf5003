"""Closed-form slab transport solvers without scattering.

Every solve reduces to evaluating ``q (1 - exp(-sigma s)) / sigma`` along
the path length ``s = distance / |mu|`` to the inflow boundary, so no
spatial discretisation is involved. Three ways of treating the energy
variable are provided: line-by-line on a fine grid, homogenised with a
discrete Young measure, and multigroup with Planck-weighted opacities.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .young import DiscreteYoungMeasure, GroupGrid, MeasureRow

# Below this opacity the series of (1 - exp(-sigma s))/sigma is used.
SMALL_SIGMA = 1.0e-12


@dataclass(frozen=True)
class AngularQuadrature:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if mu.shape != w.shape or mu.ndim != 1:
            raise ValueError("nodes and weights must be 1-d of equal length")
        if np.any(mu == 0):
            raise ValueError("zero direction cosine in quadrature")
        if np.any(w <= 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def positive(self) -> np.ndarray:
        return np.flatnonzero(self.nodes > 0)

    @property
    def negative(self) -> np.ndarray:
        return np.flatnonzero(self.nodes < 0)

    def __len__(self):
        return self.nodes.size


def gauss_legendre(n: int) -> AngularQuadrature:
    """``n``-point Gauss-Legendre rule on [-1, 1]; ``n`` must be even."""
    if n < 2 or n % 2:
        raise ValueError("Gauss-Legendre order must be even and >= 2")
    mu, w = np.polynomial.legendre.leggauss(n)
    # exact symmetry keeps mirrored directions bit-identical
    half = n // 2
    mu_pos = 0.5 * (mu[half:] - mu[:half][::-1])
    w_pos = 0.5 * (w[half:] + w[:half][::-1])
    mu = np.concatenate([-mu_pos[::-1], mu_pos])
    w = np.concatenate([w_pos[::-1], w_pos])
    return AngularQuadrature(mu, w)


# ---------------------------------------------------------------------------
# Single slab
# ---------------------------------------------------------------------------


def path_length(x, mu: float, L: float = 1.0):
    """Distance to the inflow boundary divided by ``|mu|``."""
    if mu == 0:
        raise ValueError("mu = 0 is not a transport direction")
    x = np.asarray(x, dtype=float)
    return (x if mu > 0 else L - x) / abs(mu)


def attenuation(sigma, s):
    """``(1 - exp(-sigma s)) / sigma``, continuous through ``sigma = 0``."""
    sigma, s = np.broadcast_arrays(np.asarray(sigma, dtype=float), np.asarray(s, dtype=float))
    out = np.empty(sigma.shape)
    small = np.abs(sigma) < SMALL_SIGMA
    big = ~small
    out[big] = -np.expm1(-sigma[big] * s[big]) / sigma[big]
    z = sigma[small] * s[small]
    out[small] = s[small] * (1.0 - z / 2.0 + z * z / 6.0)
    return out if out.ndim else float(out)


def exact_slab_intensity(sigma, S, x, mu: float, L: float = 1.0):
    """Intensity of ``mu psi' + sigma psi = S`` on ``[0, L]`` with vacuum
    inflow, at energy-resolved ``sigma`` and ``S``."""
    return np.asarray(S, dtype=float) * attenuation(sigma, path_length(x, mu, L))


@dataclass
class SlabProblem:
    """Slab ``[0, L]`` with opacity ``sigma(E)`` and source ``source(E)``.

    With ``emission=True`` the right-hand side is ``sigma(E) * source(E)``
    (thermal emission with a smooth Planck-like ``source``), otherwise it is
    ``source(E)`` itself.
    """

    sigma: Callable
    source: Callable
    groups: GroupGrid
    x: np.ndarray
    L: float = 1.0
    emission: bool = False

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if not self.L > 0:
            raise ValueError("slab length must be positive")
        if np.any(self.x < 0) or np.any(self.x > self.L):
            raise ValueError("spatial points must lie in [0, L]")

    def rhs(self, E, sigma_vals=None):
        q = np.asarray(self.source(E), dtype=float)
        if self.emission:
            q = q * (self.sigma(E) if sigma_vals is None else sigma_vals)
        return q


@dataclass
class FluxProfile:
    positions: np.ndarray
    values: np.ndarray
    method: str = ""
    parameter_count: int | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.positions.shape != self.values.shape:
            raise ValueError("positions and values must match")

    def to_csv(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("x,value\n")
            for x, v in zip(self.positions.tolist(), self.values.tolist()):
                fh.write(f"{x!r},{v!r}\n")

    def sidecar(self) -> dict:
        return {"method": self.method, "parameter_count": self.parameter_count, **self.metadata}

    def save(self, path) -> None:
        """Write ``path`` (CSV) and ``path`` + ``.json`` sidecar."""
        self.to_csv(path)
        Path(str(path) + ".json").write_text(json.dumps(self.sidecar(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def from_csv(cls, path) -> "FluxProfile":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        meta = {}
        side = Path(str(path) + ".json")
        if side.exists():
            meta = json.loads(side.read_text())
        method = meta.pop("method", "")
        count = meta.pop("parameter_count", None)
        return cls(data[:, 0], data[:, 1], method, count, meta)


# ---------------------------------------------------------------------------
# Fine energy grids
# ---------------------------------------------------------------------------


def trapezoid_weights(points) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    h = np.diff(points)
    w = np.zeros_like(points)
    w[:-1] += 0.5 * h
    w[1:] += 0.5 * h
    return w


def fine_grid(group, n: int, rule: str = "trapezoid"):
    """Points and weights of an ``n``-point composite rule on ``group``."""
    a, b = map(float, group)
    if rule == "trapezoid":
        pts = np.linspace(a, b, n)
        return pts, trapezoid_weights(pts)
    if rule == "midpoint":
        h = (b - a) / n
        return a + h * (np.arange(n) + 0.5), np.full(n, h)
    raise ValueError(f"unknown rule {rule!r}")


def table_grid(nodes, group):
    """Tabulated nodes inside ``group`` plus the group ends, with trapezoid
    weights; this is exact integration of the linear interpolant of any
    quantity that is linear between nodes."""
    a, b = map(float, group)
    nodes = np.asarray(nodes, dtype=float)
    inner = nodes[(nodes > a) & (nodes < b)]
    pts = np.concatenate([[a], inner, [b]])
    return pts, trapezoid_weights(pts)


# ---------------------------------------------------------------------------
# Line-by-line and homogenised scalar flux
# ---------------------------------------------------------------------------


def exact_group_intensity(problem: SlabProblem, x, mu: float, points, weights):
    """``int_group psi(x, mu, E) dE`` by the supplied rule."""
    sig = np.asarray(problem.sigma(points), dtype=float)
    q = problem.rhs(points, sig) * weights
    s = path_length(np.atleast_1d(x), mu, problem.L)
    return np.array([np.dot(q, attenuation(sig, si)) for si in s])


def exact_group_scalar_flux(problem: SlabProblem, quadrature: AngularQuadrature, grids) -> FluxProfile:
    """Line-by-line scalar flux ``sum_p w_p sum_i int_i psi dE``.

    ``grids`` holds one ``(points, weights)`` pair per group; the caller is
    responsible for resolving the opacity structure.
    """
    if len(grids) != problem.groups.n_groups:
        raise ValueError("one fine grid per group required")
    phi = np.zeros(problem.x.shape)
    n_fine = 0
    for points, weights in grids:
        n_fine += len(points)
        sig = np.asarray(problem.sigma(points), dtype=float)
        q = problem.rhs(points, sig) * weights
        for mu, w in zip(quadrature.nodes, quadrature.weights):
            for k, s in enumerate(path_length(problem.x, mu, problem.L)):
                phi[k] += w * np.dot(q, attenuation(sig, s))
    return FluxProfile(problem.x.copy(), phi, "line-by-line", None, {"fine_points": n_fine})


def homogenized_group_intensity(row: MeasureRow, S_i: float, x, mu: float, L: float = 1.0, emission: bool = False):
    """Group-integrated homogenised intensity.

    ``S_i`` is the group integral of the source. With ``emission=True`` each
    band solves ``mu Psi' + s_j Psi = s_j S_i`` instead of ``= S_i``.
    """
    keep = row.probabilities > 0
    p = row.probabilities[keep]
    sig = row.representatives[keep]
    s = np.atleast_1d(path_length(x, mu, L))
    g = attenuation(sig[None, :], s[:, None])
    if emission:
        g = g * sig[None, :]
    out = S_i * (g @ p)
    return out if np.ndim(x) else float(out[0])


def homogenized_scalar_flux(
    measure: DiscreteYoungMeasure,
    source_integrals,
    quadrature: AngularQuadrature,
    x,
    L: float = 1.0,
    emission: bool = False,
) -> FluxProfile:
    x = np.asarray(x, dtype=float)
    S = np.asarray(source_integrals, dtype=float)
    phi = np.zeros(x.shape)
    for row, S_i in zip(measure.rows, S):
        for mu, w in zip(quadrature.nodes, quadrature.weights):
            phi += w * homogenized_group_intensity(row, S_i, x, mu, L, emission)
    return FluxProfile(x.copy(), phi, "homogenized", measure.parameter_count, dict(measure.provenance))


def group_source_integrals(problem: SlabProblem, grids) -> np.ndarray:
    """Group integrals of the smooth source (``source``, not ``sigma*source``)."""
    return np.array([np.dot(problem.source(p), w) for p, w in grids])


# ---------------------------------------------------------------------------
# Planck-weighted multigroup baseline
# ---------------------------------------------------------------------------


def planck_weighted_group(S_vals, sigma_vals, weights) -> tuple[float, float]:
    """``(sigma_g, S_g)`` with ``sigma_g = int S / int S/sigma`` and
    ``S_g = int S``.

    The group equation is ``mu psi' + sigma_g psi = sigma_g int S/sigma``
    whose right-hand side equals ``S_g``.
    """
    S_vals = np.asarray(S_vals, dtype=float)
    sigma_vals = np.asarray(sigma_vals, dtype=float)
    if np.any(sigma_vals <= 0):
        raise ValueError("Planck-weighted closure needs sigma > 0 throughout the group")
    S_g = float(np.dot(S_vals, weights))
    inv = float(np.dot(S_vals / sigma_vals, weights))
    if inv == 0:
        # no source in the group: any opacity gives psi_g = 0
        return float(np.dot(sigma_vals, weights) / np.sum(weights)), 0.0
    return S_g / inv, S_g


def cumulative_on_boundaries(points, values, boundaries) -> np.ndarray:
    """Trapezoid integrals of ``values`` between consecutive ``boundaries``,
    all of which must be among ``points``."""
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    idx = np.searchsorted(points, boundaries)
    if np.any(idx >= points.size) or not np.array_equal(points[idx], boundaries):
        raise ValueError("group boundaries must be grid points")
    seg = 0.5 * np.diff(points) * (values[1:] + values[:-1])
    # per-group pairwise sums; differencing a cumsum loses ~N eps
    return np.array([seg[a:b].sum() for a, b in zip(idx[:-1], idx[1:])])


def planck_weighted_constants(problem: SlabProblem, boundaries, points):
    """Planck-weighted ``(sigma_g, S_g)`` for many groups at once.

    ``points`` is a fine grid containing every boundary; integrals use the
    trapezoid rule on it.
    """
    points = np.asarray(points, dtype=float)
    sig = np.asarray(problem.sigma(points), dtype=float)
    if np.any(sig <= 0):
        raise ValueError("Planck-weighted closure needs sigma > 0")
    S = problem.rhs(points, sig)
    S_g = cumulative_on_boundaries(points, S, boundaries)
    inv = cumulative_on_boundaries(points, S / sig, boundaries)
    with np.errstate(invalid="ignore", divide="ignore"):
        sigma_g = np.where(inv > 0, S_g / inv, 1.0)
    return sigma_g, S_g


def multigroup_scalar_flux(sigma_g, S_g, quadrature: AngularQuadrature, x, L: float = 1.0) -> FluxProfile:
    x = np.asarray(x, dtype=float)
    sigma_g = np.asarray(sigma_g, dtype=float)
    S_g = np.asarray(S_g, dtype=float)
    phi = np.zeros(x.shape)
    for mu, w in zip(quadrature.nodes, quadrature.weights):
        s = path_length(x, mu, L)
        phi += w * (attenuation(sigma_g[None, :], s[:, None]) @ S_g)
    return FluxProfile(x.copy(), phi, f"planck-{sigma_g.size}", int(sigma_g.size))


# ---------------------------------------------------------------------------
# Layered media
# ---------------------------------------------------------------------------


def layer_positions(interfaces, n_x: int) -> np.ndarray:
    """``n_x`` equispaced points per layer including both ends, so interior
    interfaces appear twice."""
    z = np.asarray(interfaces, dtype=float)
    return np.concatenate([np.linspace(a, b, n_x) for a, b in zip(z[:-1], z[1:])])


def layered_march(interfaces, opacity, source, mu: float, n_x: int, bottom=None, top=None):
    """Intensities in a stack of homogeneous layers for direction ``mu``.

    ``opacity`` and ``source`` have shape ``(K, N)`` (layer by channel,
    a channel being a fine frequency or a group/band pair). Each layer
    solves ``mu psi' + s psi = s B``. Upward directions start from
    ``bottom`` at the first interface, downward ones from ``top`` (default
    zero) at the last. Returns ``(positions, psi)`` with ``psi`` of shape
    ``(K * n_x, N)``.
    """
    if mu == 0:
        raise ValueError("mu = 0 is not a transport direction")
    z = np.asarray(interfaces, dtype=float)
    sig = np.atleast_2d(np.asarray(opacity, dtype=float))
    B = np.atleast_2d(np.asarray(source, dtype=float))
    K = z.size - 1
    if K < 1 or np.any(np.diff(z) <= 0):
        raise ValueError("interfaces must be strictly increasing")
    if sig.shape != B.shape or sig.shape[0] != K:
        raise ValueError(f"need opacity and source of shape ({K}, N), got {sig.shape} and {B.shape}")
    N = sig.shape[1]
    psi = np.empty((K * n_x, N))
    frac = np.linspace(0.0, 1.0, n_x)
    if mu > 0:
        inflow = np.zeros(N) if bottom is None else np.broadcast_to(np.asarray(bottom, dtype=float), (N,))
        order = range(K)
    else:
        inflow = np.zeros(N) if top is None else np.broadcast_to(np.asarray(top, dtype=float), (N,))
        order = range(K - 1, -1, -1)
    for k in order:
        dz = z[k + 1] - z[k]
        # depth travelled from the entry face of the layer
        depth = (frac if mu > 0 else frac[::-1]) * dz / abs(mu)
        tau = depth[:, None] * sig[k][None, :]
        trans = np.exp(-tau)
        block = trans * inflow[None, :] - np.expm1(-tau) * B[k][None, :]
        psi[k * n_x : (k + 1) * n_x] = block
        inflow = block[-1] if mu > 0 else block[0]
    return layer_positions(z, n_x), psi


def outgoing_flux(
    psi,
    quadrature: AngularQuadrature,
    positions,
    channel_weights=None,
    upward_only: bool = True,
    method: str = "",
    parameter_count: int | None = None,
) -> FluxProfile:
    """``F(x) = sum_p w_p mu_p sum_c c_w psi_p(x, c)``.

    ``psi`` has shape ``(n_nodes, P, N)`` or, with channels already
    reduced, ``(n_nodes, P)``; rows for nodes that do not contribute may
    hold anything. Only ``mu_p > 0`` contribute when ``upward_only``.
    """
    psi = np.asarray(psi, dtype=float)
    if psi.ndim == 3:
        cw = np.ones(psi.shape[2]) if channel_weights is None else np.asarray(channel_weights, dtype=float)
        psi = psi @ cw
    nodes = quadrature.positive if upward_only else np.arange(len(quadrature))
    F = np.zeros(psi.shape[1])
    for p in nodes:
        F += quadrature.weights[p] * quadrature.nodes[p] * psi[p]
    return FluxProfile(np.asarray(positions, dtype=float), F, method, parameter_count)


def layered_outgoing_flux(
    interfaces,
    opacity,
    source,
    bottom,
    quadrature: AngularQuadrature,
    n_x: int,
    channel_weights=None,
    upward_only: bool = True,
    block: int = 4096,
    method: str = "",
    parameter_count: int | None = None,
) -> FluxProfile:
    """March every direction and reduce channels block by block so that
    problems with ~10^5 channels fit in memory."""
    opacity = np.atleast_2d(np.asarray(opacity, dtype=float))
    source = np.atleast_2d(np.asarray(source, dtype=float))
    N = opacity.shape[1]
    cw = np.ones(N) if channel_weights is None else np.asarray(channel_weights, dtype=float)
    bottom = np.broadcast_to(np.asarray(bottom, dtype=float), (N,))
    nodes = quadrature.positive if upward_only else np.arange(len(quadrature))
    positions = layer_positions(interfaces, n_x)
    reduced = np.zeros((len(quadrature), positions.size))
    for p in nodes:
        mu = quadrature.nodes[p]
        for start in range(0, N, block):
            sl = slice(start, start + block)
            _, psi = layered_march(interfaces, opacity[:, sl], source[:, sl], mu, n_x, bottom=bottom[sl])
            reduced[p] += psi @ cw[sl]
    return outgoing_flux(reduced, quadrature, positions, None, upward_only, method, parameter_count)
