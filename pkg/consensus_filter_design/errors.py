"""Exceptions raised by the consensus filter design pipeline.

The start script maps these onto process exit codes:

    ConfigError       -> 2
    NumericalFailure  -> 3
"""

class ConsensusFilterError(Exception):
    """Root of all errors raised by this package."""

class ConfigError(ConsensusFilterError):
    """The experiment configuration is missing, unreadable or invalid.
       The message starts with the dotted path of the offending field.
    """

class NumericalFailure(ConsensusFilterError):
    """A numerical stage of the pipeline could not produce a result."""

class GraphError(NumericalFailure):
    """Graph construction or resampling failed."""

class SpectralError(NumericalFailure):
    """Spectrum, density or design-region computation failed."""

class WeightError(NumericalFailure):
    """Weight matrix construction failed (e.g. disconnected graph)."""

class DesignError(NumericalFailure):
    """Filter design failed."""

class LpError(DesignError):
    """The simplex solver stalled or met an infeasible/unbounded problem."""

class SimulationError(NumericalFailure):
    """Consensus simulation could not be carried out."""
