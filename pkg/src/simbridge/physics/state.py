"""Plain records the stepper hands out."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SENSOR_ARITY = {"imu": 6, "force": 3, "pose": 7}


def frozen(values) -> np.ndarray:
    a = np.array(values, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class BodyState:
    id: str
    position: np.ndarray
    orientation: np.ndarray
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray


@dataclass
class Contact:
    body_a: str
    body_b: str
    point: np.ndarray
    normal: np.ndarray
    penetration: float
    normal_impulse: float = 0.0
    tangent_impulse: np.ndarray = field(default_factory=lambda: np.zeros(2))
    geom_a: str = ""
    geom_b: str = ""


@dataclass(frozen=True)
class SensorReading:
    sensor_id: str
    kind: str
    timestamp: float
    values: np.ndarray

    def __post_init__(self):
        if len(self.values) != SENSOR_ARITY[self.kind]:
            raise ValueError(f"{self.kind} reading needs {SENSOR_ARITY[self.kind]} values")
