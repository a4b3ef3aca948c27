from pathlib import Path

import pytest

from simbridge.scene import Mobility
from simbridge.spec.inertia import mass_properties
from simbridge.spec.model import Body, Geom, Joint, PhysicsSpec, Sensor, Site

FIXTURES = Path(__file__).parent / "fixtures"


def ball(bid, pos, r=0.5, m=1.0, e=0.0, mu=0.5):
    g = Geom(f"{bid}_geom", "sphere", (r,), friction=mu, restitution=e)
    mass, com, inertia = mass_properties([g], {}, mass=m)
    return Body(bid, None, Mobility.DYNAMIC, tuple(pos), (1.0, 0.0, 0.0, 0.0), mass, tuple(com),
                tuple(map(tuple, inertia)), [g], [Joint(f"{bid}_free", "free")])


def floor(mu=0.5):
    return Body("floor", geoms=[Geom("floor_geom", "box", (5.0, 5.0, 0.5), pos=(0.0, 0.0, -0.5), friction=mu)])


def resting_spec(with_sensors=True):
    """Unit-mass ball of radius 0.5 resting on a box floor whose top is z = 0."""
    spec = PhysicsSpec(bodies=[floor(), ball("b", (0.0, 0.0, 0.5))])
    if with_sensors:
        spec.sites = [Site("imu_site", "b")]
        spec.sensors = [Sensor("imu", "imu", "imu_site"), Sensor("contact", "force", "imu_site"),
                        Sensor("pose", "pose", "imu_site")]
    return spec


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def cache_env(tmp_path, monkeypatch):
    d = tmp_path / "cache"
    monkeypatch.setenv("SIM_CACHE_DIR", str(d))
    return d
