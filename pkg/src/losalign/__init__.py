"""Time-domain interference alignment for K-user line-of-sight channels.

Library layout:

* :mod:`losalign.channel` -- delay quantization, normalization, D-path reduction
* :mod:`losalign.graph` -- the time-indexed interference graph and exact oracle
* :mod:`losalign.dp` -- stationary dynamic program and independence rates
* :mod:`losalign.numtheory` -- half-rate feasibility tests and constructions
* :mod:`losalign.gap` -- progression-based achievability schedules
* :mod:`losalign.converse` -- bandwidth-scaling column-graph experiments
* :mod:`losalign.ofdm` -- frequency-domain precoders and ZF decoding
* :mod:`losalign.cli` -- batch experiment runner
"""

from .channel import (
    ChannelInstance,
    DPathChannel,
    NormalizedChannel,
    expand_dpath,
    normalize,
    quantize_delays,
    sample_channel,
)
from .errors import DegenerateChannelError, DomainError, SizeError
from .graph import (
    InterferenceGraph,
    PeriodicPattern,
    TransmitPattern,
    brute_force_optimum,
    build_graph,
    is_feasible,
    rate_report,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelInstance",
    "DPathChannel",
    "NormalizedChannel",
    "expand_dpath",
    "normalize",
    "quantize_delays",
    "sample_channel",
    "DegenerateChannelError",
    "DomainError",
    "SizeError",
    "InterferenceGraph",
    "PeriodicPattern",
    "TransmitPattern",
    "brute_force_optimum",
    "build_graph",
    "is_feasible",
    "rate_report",
    "__version__",
]
