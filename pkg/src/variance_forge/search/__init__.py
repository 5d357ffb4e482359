"""Search engines over perturbation-strategy pools, all maximizing pv."""

from .brute import brute_force
from .common import (
    SearchBudget,
    SearchTrace,
    TraceEntry,
    decode_real,
    encode_real,
)
from .ea import EaConfig, search_ea
from .rl import RlConfig, search_rl
from .smbo import SmboConfig, search_smbo
from .sway import SwayConfig, search_sway

ENGINE_NAMES = ("brute", "ea", "rl", "smbo", "sway")

__all__ = [
    "SearchBudget",
    "SearchTrace",
    "TraceEntry",
    "encode_real",
    "decode_real",
    "brute_force",
    "EaConfig",
    "search_ea",
    "RlConfig",
    "search_rl",
    "SmboConfig",
    "search_smbo",
    "SwayConfig",
    "search_sway",
    "ENGINE_NAMES",
]
