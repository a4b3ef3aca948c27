from .state import BodyState, Contact, SensorReading
from .world import SolverConfig, World, apply_external, eval_sensors, step

__all__ = ["BodyState", "Contact", "SensorReading", "SolverConfig", "World", "apply_external", "eval_sensors", "step"]
