"""Discrete Young measures of rapidly varying opacities.

A group ``[E_i, E_{i+1}]`` is summarised by a handful of opacity bands and
the fraction of the group on which the opacity falls into each band. The
fractions are estimated by sampling the opacity and counting.

Band membership is half-open, ``[s_j, s_{j+1})``, with the last band
closed on the right so that no sample is counted twice.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

SPACINGS = ("linear", "logarithmic")
SAMPLERS = ("stratified", "uniform")
REPRESENTATIVES = ("midpoint", "left", "mean")


@dataclass(frozen=True)
class GroupGrid:
    boundaries: np.ndarray

    def __post_init__(self):
        b = np.array(self.boundaries, dtype=float)
        if b.ndim != 1 or b.size < 2 or np.any(np.diff(b) <= 0):
            raise ValueError("group boundaries must be strictly increasing with at least 2 entries")
        b.flags.writeable = False
        object.__setattr__(self, "boundaries", b)

    @classmethod
    def uniform(cls, lo: float, hi: float, n_groups: int) -> "GroupGrid":
        return cls(np.linspace(lo, hi, n_groups + 1))

    @property
    def n_groups(self) -> int:
        return self.boundaries.size - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.boundaries)

    def __iter__(self):
        b = self.boundaries.tolist()
        return iter(zip(b[:-1], b[1:]))

    def __getitem__(self, i) -> tuple[float, float]:
        return float(self.boundaries[i]), float(self.boundaries[i + 1])


@dataclass(frozen=True)
class BandRow:
    """Band boundaries of one group.

    ``constant`` marks a group on which the opacity did not vary; it then
    has a single band of zero width.
    """

    boundaries: np.ndarray
    mode: str = "linear"
    constant: bool = False

    def __post_init__(self):
        b = np.array(self.boundaries, dtype=float)
        if self.mode not in SPACINGS:
            raise ValueError(f"unknown spacing {self.mode!r}")
        if b.ndim != 1 or b.size < 2:
            raise ValueError("a band row needs at least two boundaries")
        if self.constant:
            if b.size != 2 or b[0] != b[1]:
                raise ValueError("a constant band row has exactly one zero-width band")
        elif np.any(np.diff(b) <= 0):
            raise ValueError("band boundaries must be strictly increasing")
        b.flags.writeable = False
        object.__setattr__(self, "boundaries", b)

    @property
    def m(self) -> int:
        return self.boundaries.size - 1

    def representatives(self, rule: str = "midpoint", values=None) -> np.ndarray:
        """Atom locations. ``mean`` needs the sampled ``values`` and falls
        back to the midpoint in empty bands."""
        lo, hi = self.boundaries[:-1], self.boundaries[1:]
        if self.constant:
            return lo.copy()
        if rule == "mean":
            if values is None:
                raise ValueError("the 'mean' rule needs sampled values")
            v = np.asarray(values, dtype=float)
            idx, _ = self.assign(v)
            counts = np.bincount(idx, minlength=self.m)
            sums = np.bincount(idx, weights=v, minlength=self.m)
            mid = self.representatives("midpoint")
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(counts > 0, np.clip(sums / counts, lo, hi), mid)
        if rule == "left":
            return lo.copy()
        if rule != "midpoint":
            raise ValueError(f"unknown representative rule {rule!r}")
        if self.mode == "logarithmic":
            return np.sqrt(lo * hi)
        return 0.5 * (lo + hi)

    def assign(self, values) -> tuple[np.ndarray, int]:
        """Band index of every value and the number of values clamped into
        an extreme band because they fell outside the row."""
        v = np.asarray(values, dtype=float)
        b = self.boundaries
        if self.constant:
            return np.zeros(v.shape, dtype=np.intp), int(np.count_nonzero(v != b[0]))
        idx = np.searchsorted(b, v, side="right") - 1
        idx[v == b[-1]] = self.m - 1
        below = idx < 0
        above = idx >= self.m
        clamped = int(np.count_nonzero(below) + np.count_nonzero(above))
        idx[below] = 0
        idx[above] = self.m - 1
        return idx, clamped


# ---------------------------------------------------------------------------
# Sampling and band construction
# ---------------------------------------------------------------------------


def sample_points(group, n_samples: int, sampler: str = "stratified", seed: int | None = None) -> np.ndarray:
    """Sample energies in ``group``.

    ``stratified`` places one point at the centre of each of ``n_samples``
    equal cells; ``uniform`` draws iid uniform points from ``seed``.
    """
    a, b = map(float, group)
    if not b > a:
        raise ValueError("group must have positive width")
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if sampler == "stratified":
        return a + (b - a) * (np.arange(n_samples) + 0.5) / n_samples
    if sampler == "uniform":
        return np.random.default_rng(seed).uniform(a, b, n_samples)
    raise ValueError(f"unknown sampler {sampler!r}")


def make_bands(
    sigma,
    group,
    m: int,
    mode: str = "linear",
    n_scan: int = 100_000,
    value_range: tuple[float, float] | None = None,
    samples=None,
) -> BandRow:
    """Build ``m`` bands spanning the opacity range on ``group``.

    The range is the min/max of ``sigma`` over ``n_scan`` stratified points
    (or over ``samples`` if given), unless ``value_range`` fixes it.
    """
    if m < 1:
        raise ValueError("need at least one band")
    if mode not in SPACINGS:
        raise ValueError(f"unknown spacing {mode!r}")
    if value_range is None:
        vals = np.asarray(samples if samples is not None else sigma(sample_points(group, n_scan)))
        lo, hi = float(vals.min()), float(vals.max())
    else:
        lo, hi = map(float, value_range)
    if not hi >= lo:
        raise ValueError("empty opacity range")
    if hi == lo:
        return BandRow(np.array([lo, lo]), mode, constant=True)
    if mode == "logarithmic":
        if lo <= 0:
            raise ValueError("logarithmic bands need strictly positive opacity")
        edges = np.geomspace(lo, hi, m + 1)
    else:
        edges = np.linspace(lo, hi, m + 1)
    # pin the ends so extreme samples are never clamped by rounding
    edges[0], edges[-1] = lo, hi
    return BandRow(edges, mode)


# ---------------------------------------------------------------------------
# Discrete Young measure
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MeasureRow:
    """Atoms of the discrete Young measure on one group."""

    bands: BandRow
    representatives: np.ndarray
    probabilities: np.ndarray
    n_samples: int
    clamped: int = 0

    @property
    def m(self) -> int:
        return self.bands.m

    def expectation(self, f) -> float:
        """``sum_j p_j f(sigma_j)``."""
        keep = self.probabilities > 0
        return float(np.dot(self.probabilities[keep], f(self.representatives[keep])))


def estimate_measure(
    sigma,
    group,
    bands: BandRow,
    n_samples: int,
    sampler: str = "stratified",
    seed: int | None = None,
    representative: str = "midpoint",
    samples=None,
) -> MeasureRow:
    """Estimate band probabilities on ``group`` by counting samples.

    ``samples`` may carry pre-evaluated opacity values, in which case
    ``sigma`` and the sampler are not used.
    """
    if samples is None:
        values = np.asarray(sigma(sample_points(group, n_samples, sampler, seed)), dtype=float)
    else:
        values = np.asarray(samples, dtype=float)
        n_samples = values.size
    idx, clamped = bands.assign(values)
    if clamped:
        logger.debug("clamped %d of %d samples into extreme bands", clamped, n_samples)
    counts = np.bincount(idx, minlength=bands.m)
    p = counts / n_samples
    reps = bands.representatives(representative, values)
    return MeasureRow(bands, reps, p, int(n_samples), clamped)


@dataclass
class DiscreteYoungMeasure:
    groups: GroupGrid
    rows: list[MeasureRow]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.rows) != self.groups.n_groups:
            raise ValueError("one measure row per group required")

    @property
    def parameter_count(self) -> int:
        return sum(r.m for r in self.rows)


def build_measure(
    sigma,
    groups: GroupGrid,
    m: int,
    mode: str = "linear",
    n_samples: int = 100_000,
    sampler: str = "stratified",
    seed: int = 0,
    representative: str = "midpoint",
    value_range=None,
) -> DiscreteYoungMeasure:
    """Bands and probabilities for every group.

    Band ranges come from the same samples used for counting, so nothing
    is clamped unless ``value_range`` is given. Group ``i`` draws from
    ``default_rng([seed, i])`` under the uniform sampler.
    """
    rows = []
    for i, grp in enumerate(groups):
        pts = sample_points(grp, n_samples, sampler, seed=[seed, i])
        vals = np.asarray(sigma(pts), dtype=float)
        bands = make_bands(None, grp, m, mode, value_range=value_range, samples=vals)
        rows.append(estimate_measure(None, grp, bands, n_samples, representative=representative, samples=vals))
    prov = dict(seed=seed, n_samples=n_samples, sampler=sampler, spacing=mode, representative=representative)
    return DiscreteYoungMeasure(groups, rows, prov)


def elsasser_measure_density(xi, beta: float):
    """Probability density of Elsasser opacity values on ``(1, c_beta)``.

    The density does not depend on energy. It is normalised to one and has
    inverse square-root singularities at both ends of the support; zero is
    returned outside ``(1, c_beta)`` and ``inf`` at the endpoints.
    """
    xi = np.asarray(xi, dtype=float)
    ch = np.cosh(beta)
    c_beta = (ch + 1.0) / (ch - 1.0)
    out = np.zeros_like(xi)
    inside = (xi > 1.0) & (xi < c_beta)
    x = xi[inside]
    # 1 - x^-2 (x ch - ch - 1)^2 written as a product to avoid cancellation
    root = np.sqrt((ch * ch - 1.0) * (c_beta - x) * (x - 1.0)) / x
    out[inside] = (ch + 1.0) / (np.pi * x * x * root)
    out[(xi == 1.0) | (xi == c_beta)] = np.inf
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Joint measures and conditional opacities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JointRow:
    """Joint band probabilities ``p[j, j']`` on one group.

    ``j`` indexes reference-temperature bands, ``j'`` target-temperature
    bands.
    """

    bands_ref: BandRow
    bands_target: BandRow
    probabilities: np.ndarray
    n_samples: int
    clamped: int = 0

    @property
    def marginal(self) -> np.ndarray:
        return self.probabilities.sum(axis=1)


def estimate_joint_measure(
    sigma_ref,
    sigma_target,
    group,
    bands_ref: BandRow,
    bands_target: BandRow,
    n_samples: int,
    sampler: str = "stratified",
    seed: int | None = None,
    samples=None,
) -> JointRow:
    """Count shared samples falling in reference band ``j`` and target
    band ``j'``. ``samples`` may be a pair of pre-evaluated arrays."""
    if samples is None:
        pts = sample_points(group, n_samples, sampler, seed)
        v_ref = np.asarray(sigma_ref(pts), dtype=float)
        v_tgt = np.asarray(sigma_target(pts), dtype=float)
    else:
        v_ref, v_tgt = (np.asarray(s, dtype=float) for s in samples)
        n_samples = v_ref.size
    i_ref, c_ref = bands_ref.assign(v_ref)
    i_tgt, c_tgt = bands_target.assign(v_tgt)
    flat = np.bincount(i_ref * bands_target.m + i_tgt, minlength=bands_ref.m * bands_target.m)
    p = flat.reshape(bands_ref.m, bands_target.m) / n_samples
    return JointRow(bands_ref, bands_target, p, int(n_samples), c_ref + c_tgt)


def conditional_kappa(joint: JointRow, target_representatives, normalize: bool = True):
    """Conditional mean of the target opacity in each reference band.

    Returns ``(kappa, empty)`` where ``empty`` lists reference bands with
    zero marginal; their ``kappa`` is NaN. With ``normalize=False`` the
    joint row is summed without dividing by the marginal.
    """
    sig = np.asarray(target_representatives, dtype=float)
    num = joint.probabilities @ sig
    marg = joint.marginal
    empty = np.flatnonzero(marg == 0)
    if not normalize:
        kappa = num.astype(float)
    else:
        with np.errstate(invalid="ignore", divide="ignore"):
            kappa = num / marg
    kappa[empty] = np.nan
    return kappa, empty.tolist()


@dataclass
class KappaTable:
    """Reference measure plus per-layer effective opacities.

    ``kappa[i][j, k]`` is the opacity of band ``j`` of group ``i`` in
    layer ``k``; entries of empty bands are NaN.
    """

    measure: DiscreteYoungMeasure
    kappa: list[np.ndarray]
    reference_layer: int
    provenance: dict = field(default_factory=dict)

    @property
    def n_layers(self) -> int:
        return self.kappa[0].shape[1]


def build_kappa_table(
    layer_opacities,
    groups: GroupGrid,
    reference_layer: int,
    m: int,
    mode: str = "logarithmic",
    n_samples: int = 20_000,
    sampler: str = "stratified",
    seed: int = 0,
    target_bands: int | None = None,
    representative: str = "midpoint",
    normalize: bool = True,
) -> KappaTable:
    """Measure of the reference layer and conditional opacities of every
    layer given reference-band membership.

    ``layer_opacities`` is a sequence of evaluators, one per layer.
    ``target_bands`` defaults to ``m``.
    """
    mt = m if target_bands is None else target_bands
    rows, kappas = [], []
    for i, grp in enumerate(groups):
        pts = sample_points(grp, n_samples, sampler, seed=[seed, i])
        values = [np.asarray(s(pts), dtype=float) for s in layer_opacities]
        v_ref = values[reference_layer]
        b_ref = make_bands(None, grp, m, mode, samples=v_ref)
        rows.append(estimate_measure(None, grp, b_ref, n_samples, representative=representative, samples=v_ref))
        k_i = np.empty((b_ref.m, len(values)))
        for k, v in enumerate(values):
            if k == reference_layer:
                b_t = b_ref
            else:
                b_t = make_bands(None, grp, mt, mode, samples=v)
            joint = estimate_joint_measure(None, None, grp, b_ref, b_t, n_samples, samples=(v_ref, v))
            reps = b_t.representatives(representative, v)
            k_i[:, k], _ = conditional_kappa(joint, reps, normalize)
        kappas.append(k_i)
    prov = dict(
        seed=seed,
        n_samples=n_samples,
        sampler=sampler,
        spacing=mode,
        representative=representative,
        target_bands=mt,
        normalized=normalize,
    )
    measure = DiscreteYoungMeasure(groups, rows, dict(prov))
    return KappaTable(measure, kappas, reference_layer, prov)


# ---------------------------------------------------------------------------
# Precomputed local measures
# ---------------------------------------------------------------------------


def local_probabilities(sigma, centers, width: float, bands: BandRow, n_samples: int, sampler="stratified", seed=0):
    """Band probabilities in windows ``[E - width/2, E + width/2]`` around
    each centre; returns an array of shape ``(len(centers), m)``."""
    out = np.empty((len(centers), bands.m))
    for k, E in enumerate(np.asarray(centers, dtype=float)):
        row = estimate_measure(sigma, (E - width / 2, E + width / 2), bands, n_samples, sampler, seed=[seed, k])
        out[k] = row.probabilities
    return out


def interpolate_probabilities(centers, table, E) -> np.ndarray:
    """Linearly interpolate precomputed band probabilities to energy ``E``."""
    centers = np.asarray(centers, dtype=float)
    table = np.asarray(table, dtype=float)
    if not centers[0] <= E <= centers[-1]:
        raise ValueError("energy outside precomputed range")
    p = np.array([np.interp(E, centers, table[:, j]) for j in range(table.shape[1])])
    return p / p.sum()


# ---------------------------------------------------------------------------
# Serialisation
# ---------------------------------------------------------------------------


def _bands_to_dict(b: BandRow) -> dict:
    return {"boundaries": b.boundaries.tolist(), "mode": b.mode, "constant": b.constant}


def _bands_from_dict(d) -> BandRow:
    return BandRow(np.array(d["boundaries"], dtype=float), d["mode"], d["constant"])


def _nan_to_none(a) -> list:
    return [None if np.isnan(v) else v for v in np.asarray(a, dtype=float).ravel().tolist()]


def measure_to_dict(measure: DiscreteYoungMeasure) -> dict:
    return {
        "kind": "discrete_young_measure",
        "groups": measure.groups.boundaries.tolist(),
        "provenance": measure.provenance,
        "rows": [
            {
                "bands": _bands_to_dict(r.bands),
                "representatives": r.representatives.tolist(),
                "probabilities": r.probabilities.tolist(),
                "n_samples": r.n_samples,
                "clamped": r.clamped,
            }
            for r in measure.rows
        ],
    }


def measure_from_dict(d) -> DiscreteYoungMeasure:
    if d.get("kind") != "discrete_young_measure":
        raise ValueError("not a measure table")
    rows = [
        MeasureRow(
            _bands_from_dict(r["bands"]),
            np.array(r["representatives"], dtype=float),
            np.array(r["probabilities"], dtype=float),
            int(r["n_samples"]),
            int(r["clamped"]),
        )
        for r in d["rows"]
    ]
    return DiscreteYoungMeasure(GroupGrid(np.array(d["groups"], dtype=float)), rows, dict(d["provenance"]))


def joint_to_dict(row: JointRow) -> dict:
    return {
        "kind": "joint_band_measure",
        "bands_ref": _bands_to_dict(row.bands_ref),
        "bands_target": _bands_to_dict(row.bands_target),
        "probabilities": row.probabilities.tolist(),
        "n_samples": row.n_samples,
        "clamped": row.clamped,
    }


def joint_from_dict(d) -> JointRow:
    if d.get("kind") != "joint_band_measure":
        raise ValueError("not a joint measure")
    return JointRow(
        _bands_from_dict(d["bands_ref"]),
        _bands_from_dict(d["bands_target"]),
        np.array(d["probabilities"], dtype=float),
        int(d["n_samples"]),
        int(d["clamped"]),
    )


def kappa_to_dict(table: KappaTable) -> dict:
    return {
        "kind": "kappa_table",
        "reference_layer": table.reference_layer,
        "provenance": table.provenance,
        "measure": measure_to_dict(table.measure),
        "kappa": [{"shape": list(k.shape), "values": _nan_to_none(k)} for k in table.kappa],
    }


def kappa_from_dict(d) -> KappaTable:
    if d.get("kind") != "kappa_table":
        raise ValueError("not a kappa table")
    kappa = [
        np.array([np.nan if v is None else v for v in k["values"]], dtype=float).reshape(k["shape"])
        for k in d["kappa"]
    ]
    return KappaTable(measure_from_dict(d["measure"]), kappa, int(d["reference_layer"]), dict(d["provenance"]))


_TO_DICT = {DiscreteYoungMeasure: measure_to_dict, JointRow: joint_to_dict, KappaTable: kappa_to_dict}
_FROM_DICT = {
    "discrete_young_measure": measure_from_dict,
    "joint_band_measure": joint_from_dict,
    "kappa_table": kappa_from_dict,
}


def dumps(obj) -> str:
    return json.dumps(_TO_DICT[type(obj)](obj), indent=1, sort_keys=True, allow_nan=False) + "\n"


def save(obj, path) -> None:
    """Write a measure, joint row or kappa table as JSON.

    Floats are emitted with shortest round-trip ``repr``, so loading gives
    back bit-identical arrays.
    """
    Path(path).write_text(dumps(obj), encoding="utf-8")


def load(path):
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return _FROM_DICT[d["kind"]](d)
    except KeyError as exc:
        raise ValueError(f"{path}: unrecognised table") from exc
