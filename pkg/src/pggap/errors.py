"""Exception types shared across the package."""


class SeriesTruncationError(RuntimeError):
    """An alternating series failed to converge within the term budget."""


class SamplerConvergenceError(RuntimeError):
    """A rejection sampler exceeded its iteration cap."""
