"""Lyapunov-assisted DNN partitioning and resource allocation for multi-user edge inference."""
from ._core import BACKEND
from .agent import PpoAgent, PpoHyper
from .allocators import AllocProblem, allocate_all
from .environment import EdgeEnv, SystemConfig, default_config, load_config, map_action
from .profiles import DnnProfile, LayerProfile, bundled_profile, load_profile
from .system_model import Allocation, UeSpec

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AllocProblem",
    "Allocation",
    "DnnProfile",
    "EdgeEnv",
    "LayerProfile",
    "PpoAgent",
    "PpoHyper",
    "SystemConfig",
    "UeSpec",
    "allocate_all",
    "bundled_profile",
    "default_config",
    "load_config",
    "load_profile",
    "map_action",
]
