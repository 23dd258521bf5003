"""
Homogenising the Elsasser band model
====================================

A periodic row of equal Lorentz lines has the closed-form opacity
``sigma(E) = (cosh b + 1) / (cosh b - cos(2 pi E / eps))``. Its values
between 1 and ``c_b = (cosh b + 1)/(cosh b - 1)`` are distributed the same
way in every energy window wider than a few periods, which makes it the
cleanest test of the Young-measure idea: one group, a few dozen opacity
bands, and the flux through a unit slab should come out right to within a
fraction of a percent.

Run with ``python demos/elsasser_band_model.py``. A figure is written to
``elsasser_band_model.png`` when matplotlib is available.
"""

import numpy as np

from younghom import experiments, spectra, young
from younghom.experiments import ExperimentConfig

###############################################################################
# The opacity and its value distribution
# --------------------------------------
# Sample one period finely, then compare a histogram of the values with the
# analytic density. The density blows up at both ends of its support
# because the opacity lingers near its extrema.

params = spectra.ElsasserParams(beta=1.0, epsilon=1e-4)
E = np.linspace(0.0, params.epsilon, 20001)
sigma = spectra.elsasser_opacity(E, params)
print(f"c_beta = {params.c_beta:.4f}; sampled range [{sigma.min():.4f}, {sigma.max():.4f}]")

xi = np.linspace(1.01, params.c_beta - 0.01, 7)
for v, d in zip(xi, young.elsasser_measure_density(xi, params.beta)):
    print(f"  density({v:.3f}) = {d:.4f}")

###############################################################################
# Transport through the slab
# --------------------------
# The default experiment uses one group on [0, 1], 30 equispaced bands,
# 8 Gauss-Legendre directions and 10 points in the slab. The line-by-line
# reference integrates 64 points per line period.

report = experiments.run(ExperimentConfig(problem="elsasser"))
ref = report.profiles["line-by-line"]
hom = report.profiles["homogenized"]
print("\n     x    line-by-line   homogenized   rel.err")
for x, a, b, e in zip(ref.positions, ref.values, hom.values, report.errors["homogenized"]):
    print(f"  {x:5.3f}  {a:12.6f}  {b:12.6f}  {e:9.2e}")

###############################################################################
# More bands, smaller error
# -------------------------
# The error comes from replacing every band by a single atom, so it falls
# as the bands narrow. A single Planck-weighted group, for comparison, has
# no way to represent the spread of opacities at all.

for m in (5, 10, 20, 40):
    r = experiments.run(ExperimentConfig(problem="elsasser", bands=m))
    print(f"m = {m:3d}: max relative error {r.max_errors['homogenized']:.2e}")
print(f"one Planck-weighted group: {report.max_errors['planck-1']:.2e}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    plt = None

if plt is not None:
    mc = report.extras["measure_comparison"]
    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.5))
    ax0.plot(mc["representative"], mc["discrete_density"], "o", label="discrete")
    ax0.plot(mc["representative"], mc["analytic_density"], "-", label="analytic")
    ax0.set_xlabel("opacity")
    ax0.legend()
    ax1.plot(ref.positions, ref.values, "-", label="line-by-line")
    ax1.plot(hom.positions, hom.values, "o", label="homogenized")
    ax1.set_xlabel("x")
    ax1.legend()
    fig.tight_layout()
    fig.savefig("elsasser_band_model.png", dpi=120)
