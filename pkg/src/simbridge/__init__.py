"""Scene-to-physics pipeline with a threaded runtime, message bus, benchmarks and offline evaluation."""

from .errors import InputError, SimbridgeError, SimulationDiverged

__version__ = "0.1.0"

__all__ = ["InputError", "SimbridgeError", "SimulationDiverged", "__version__"]
