"""Exception types shared across the toolkit."""


class WindeqError(Exception):
    """Base class for all toolkit errors."""


class ZeroPositiveSequence(WindeqError):
    """Positive-sequence voltage too small to orient the control frame."""


class DegenerateSequenceVoltages(WindeqError):
    """Positive and negative sequence voltage magnitudes too close for the
    oscillation-mitigating current law (its denominator vanishes)."""


class OutOfRange(WindeqError):
    """Input outside the physically meaningful range of an operation."""


class NonFiniteState(WindeqError):
    """DC-link state left its admissible range, the configuration is unstable."""


class NonRadialTopology(WindeqError):
    """Collector network is not a radial set of feeder chains."""


class ZeroAggregateCurrent(WindeqError):
    """Equivalent impedance undefined because the member currents sum to zero."""


class EmptyCluster(WindeqError):
    """Aggregation requested over an empty member list."""


class HeterogeneousParams(WindeqError):
    """Members of one cluster differ in control constants that must be shared."""


class NotClusterThree(WindeqError):
    """A turbine handed to the ramp-recovery aggregation has no recovery margin."""


class SingularNetwork(WindeqError):
    """Sequence-network impedance configuration yields a singular solve."""


class MisalignedTraces(WindeqError):
    """Trace comparison requested on different time grids."""


class ParseError(WindeqError):
    """Input file could not be parsed."""

    def __init__(self, message: str, *, path: str | None = None, field: str | None = None):
        self.path = path
        self.field = field
        where = f" ({path})" if path else ""
        at = f" [field: {field}]" if field else ""
        super().__init__(f"{message}{where}{at}")


class ValidationError(WindeqError):
    """Input file parsed but violates a validation rule."""

    def __init__(self, message: str, *, rule: str):
        self.rule = rule
        super().__init__(f"{message} [rule: {rule}]")


class NoConvergence(WindeqError):
    """An iterative solve exhausted its iteration budget."""

    def __init__(self, message: str, *, iterations: int, residual: float, history=None):
        self.iterations = iterations
        self.residual = residual
        self.history = history
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")
