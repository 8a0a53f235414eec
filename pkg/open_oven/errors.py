class OpenOvenError(Exception):
    """Base class for every error raised by open_oven."""


class ConfigError(OpenOvenError):
    """Run configuration failed to parse or validate."""

    def __init__(self, message, path=None, line=None) -> None:
        """Keep the key path and source line for the report."""
        if isinstance(path, str):
            path = path.split(".")
        self.path = list(path or [])
        self.line = line
        where = ".".join(str(p) for p in self.path)
        if line is not None:
            where = f"{where} (line {line})" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class NumericalError(OpenOvenError):
    """A solver could not produce a trustworthy result."""


class NumericalBlowup(NumericalError):
    """Field magnitudes exploded, the time step is unstable."""


class NoConvergence(NumericalError):
    """A harmonic drive never reached a stationary dissipation level."""


class UnstableTimestep(NumericalError):
    """Explicit thermal step exceeds its stability bound."""


class PeakOverlap(NumericalError):
    """Half-power contour of a resonance merges with a neighbour."""


class BandOutsideTrappedRegime(OpenOvenError):
    """Requested band holds no trapped TM resonances."""


class AboveCutoff(OpenOvenError):
    """Frequency propagates in the air section, no evanescent decay."""


class GridTooLarge(OpenOvenError):
    """Automatic Yee grid exceeds the configured cell budget."""


class DisjointDomains(OpenOvenError):
    """Load region is empty on one of the meshes."""


class EmptyProfile(OpenOvenError):
    """Temperature profile has no breakpoints."""


class GridMismatch(OpenOvenError):
    """Power maps do not share a grid."""
