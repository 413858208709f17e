"""Massive-MIMO channel estimation with quantized observations."""
from .network import *  # noqa: F401,F403
from .estimators import *  # noqa: F401,F403
