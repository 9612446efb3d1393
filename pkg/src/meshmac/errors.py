"""Exception types shared across the simulator."""


class MeshMacError(Exception):
    """Base class for all simulator errors."""


class DisconnectedTopology(MeshMacError):
    """Raised when some node cannot reach the coordinator over radio links."""


class NotALink(MeshMacError):
    """Raised when a hidden-ratio query names two nodes that are not adjacent."""


class EmptyLinkSet(MeshMacError):
    """Raised when a network hidden percentage is requested over zero links."""


class TargetUnreachable(MeshMacError):
    """Radius calibration could not land within tolerance of the target.

    Carries the best probe found so the caller can decide whether to
    proceed with it anyway.
    """

    def __init__(self, target: float, best_radius: float, achieved: float):
        self.target = target
        self.best_radius = best_radius
        self.achieved = achieved
        super().__init__(
            f"no probed radius reached hidden target {target:.3f} "
            f"(best: radius={best_radius:.3f} achieved={achieved:.3f})"
        )


class OverflowGuard(MeshMacError):
    """Backoff window requested beyond the configured exponent ceiling."""


class IllegalTransition(MeshMacError):
    """A transaction state machine received an event it cannot handle."""


class ConfigError(MeshMacError):
    """A run was configured inconsistently (bad mode/schedule combination)."""


class ParseError(MeshMacError):
    """Scenario file missing or not syntactically valid."""


class ValidationError(MeshMacError):
    """Scenario file parsed but failed schema or range checks.

    Message always names the offending key.
    """


class NoTraffic(MeshMacError):
    """A rate metric was requested for a run that generated zero packets."""


class InsufficientSeeds(MeshMacError):
    """Aggregation over fewer than two per-seed values."""
