"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""


class SimbridgeError(Exception):
    exit_code = 1


class InputError(SimbridgeError, ValueError):
    """Bad user input: malformed files, invalid parameters, dangling references."""

    exit_code = 2


class SceneError(InputError):
    pass


class DuplicateIdError(SceneError):
    pass


class ObjParseError(InputError):
    pass


class MeshError(InputError):
    pass


class DegenerateError(MeshError):
    """Points are coplanar/collinear, so no 3-D hull exists."""


class NonWatertightError(MeshError):
    def __init__(self, boundary_edges):
        self.boundary_edges = sorted(boundary_edges)
        shown = ", ".join(f"{a}-{b}" for a, b in self.boundary_edges[:20])
        more = "" if len(self.boundary_edges) <= 20 else f" (+{len(self.boundary_edges) - 20} more)"
        super().__init__(f"mesh is not watertight; boundary edges: {shown}{more}")


class SpecError(InputError):
    pass


class XmlParseError(SpecError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class UnsupportedFeatureError(XmlParseError):
    pass


class EvalError(InputError):
    pass


class FrameError(InputError):
    pass


class TruncatedFrameError(FrameError):
    pass


class UnknownTagError(FrameError):
    pass


class OversizeFrameError(FrameError):
    pass


class KindMismatchError(InputError):
    pass


class SimulationDiverged(SimbridgeError):
    exit_code = 3

    def __init__(self, body):
        self.body = body
        super().__init__(f"simulation diverged: non-finite state in body {body!r}")


class RuntimeStateError(SimbridgeError, RuntimeError):
    pass
