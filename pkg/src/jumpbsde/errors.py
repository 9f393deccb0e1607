"""Exception hierarchy shared by the engines and the CLI."""


class JumpBSDEError(Exception):
    pass


class ModelError(JumpBSDEError):
    """Coefficient evaluation failed or a model invariant is broken."""


class NumericalError(JumpBSDEError):
    """Base for failures of the numerical engines (CLI exit code 3)."""


class SimulationError(NumericalError):
    """Forward simulation produced a non-finite or exploding state."""


class RegressionError(NumericalError):
    """A conditional-expectation regression could not be solved."""


class GeneratorError(NumericalError):
    """The driver returned a non-finite value."""


class AssumptionError(JumpBSDEError):
    """A generator or model was refused because an audit failed."""


class ConfigError(JumpBSDEError):
    """Malformed experiment configuration (unknown key, bad value)."""
