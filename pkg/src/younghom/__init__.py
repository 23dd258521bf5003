"""Young-measure homogenization of slab transport with opacities that vary
rapidly in energy."""
from .spectra import (
    ElsasserParams,
    SyntheticLineSpectrum,
    TabulatedCrossSection,
    WattParams,
    elsasser_opacity,
    load_cross_section,
    planck_function,
    standard_atmosphere,
    watt_spectrum,
)
from .transport import FluxProfile, gauss_legendre
from .young import DiscreteYoungMeasure, GroupGrid, build_kappa_table, build_measure

__version__ = "0.1.0"
