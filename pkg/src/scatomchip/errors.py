"""Exception base shared by all modules; the CLI maps it to exit status 1."""


class SimulationError(Exception):
    """A physics or validation failure."""
