"""Payment-channel admission control: online policies, the exact offline
optimum, workload generators, an experiment harness and cycle analysis."""

from .core import (
    ChannelState,
    CostLedger,
    CostParams,
    Direction,
    Transaction,
    TransactionStream,
)
from .offline import dp_solve, off_cost

__version__ = "0.1.0"

__all__ = [
    "ChannelState",
    "CostLedger",
    "CostParams",
    "Direction",
    "Transaction",
    "TransactionStream",
    "dp_solve",
    "off_cost",
]
