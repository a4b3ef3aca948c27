from .compiler import (
    ProcessedAssets,
    Topic,
    build_spec,
    compile_scene,
    derive_topics,
    merge_robot,
    process_scene,
    write_compiled,
)
from .mjcf import emit_xml, parse_xml
from .model import Actuator, Body, Geom, Joint, PhysicsSpec, Sensor, Site, spec_differences, specs_equivalent

__all__ = [
    "Actuator",
    "Body",
    "Geom",
    "Joint",
    "PhysicsSpec",
    "ProcessedAssets",
    "Sensor",
    "Site",
    "Topic",
    "build_spec",
    "compile_scene",
    "derive_topics",
    "emit_xml",
    "merge_robot",
    "parse_xml",
    "process_scene",
    "spec_differences",
    "specs_equivalent",
    "write_compiled",
]
