"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Scenario configuration is malformed or inconsistent."""


class PhysicsError(ValueError):
    """Configuration is syntactically fine but physically infeasible."""


class OverlapError(PhysicsError):
    """More than one probe frame would be in flight at the same time."""


class GeometryError(ValueError):
    """Profiles or waterfall rows do not share the same position grid."""


class DetectionError(ValueError):
    """No tone / no gauge exceeded the detection threshold."""


class TraceFormatError(ValueError):
    """Binary trace file is malformed; `offset` points at the bad byte."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset
