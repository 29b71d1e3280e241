"""Fidelity, angle and Bures distance between quantum channels, the channel
Fisher information, and lower bounds on the number of uses needed to
discriminate two channels perfectly."""

from .channels import ChannelPair, KrausChannel, ResourceLimitError
from .discrimination import BoundReport, report
from .fidelity import FidelityResult, angle, bures, fidelity, fidelity_tensor_power
from .fisher import ChannelFamily, QfiEstimate, path_length, qfi
from .matlin import NumericalError, ValidationError
from .sdp import SdpError

__version__ = "0.1.0"

__all__ = [
    "ChannelPair",
    "KrausChannel",
    "ResourceLimitError",
    "BoundReport",
    "report",
    "FidelityResult",
    "fidelity",
    "fidelity_tensor_power",
    "angle",
    "bures",
    "ChannelFamily",
    "QfiEstimate",
    "qfi",
    "path_length",
    "NumericalError",
    "ValidationError",
    "SdpError",
    "__version__",
]
