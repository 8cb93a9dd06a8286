from .features import (
    GaitFeatures,
    NoCycleError,
    coefficient_of_variation,
    stance_phase_ratio,
    asymmetry_index,
    extract_features,
    features_to_csv,
)
from .spectral import Spectrogram, spectrogram
from .maps import PressureMap, rasterize_pressure_map, bilinear_resize

__all__ = [
    "GaitFeatures",
    "NoCycleError",
    "coefficient_of_variation",
    "stance_phase_ratio",
    "asymmetry_index",
    "extract_features",
    "features_to_csv",
    "Spectrogram",
    "spectrogram",
    "PressureMap",
    "rasterize_pressure_map",
    "bilinear_resize",
]
