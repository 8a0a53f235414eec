"""Open-ended microwave oven: trapped TM modes, FDTD heating, cure, control."""

from .const import DOMAIN, VERSION
from .errors import OpenOvenError

__version__ = VERSION

__all__ = ["DOMAIN", "OpenOvenError", "__version__"]
