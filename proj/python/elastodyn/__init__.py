"""Physics-informed networks for dynamic linear elasticity."""

from ._core import Model, PlaneWave, lhs, nrmse, train, verify_quick, wave_fields

__all__ = ["Model", "PlaneWave", "lhs", "nrmse", "train", "verify_quick", "wave_fields"]
__version__ = "0.1.0"
