from .common import UpdateClock, soft_update, train_step
from .ddpg import DdpgAgent, DdpgConfig, EpsilonSchedule, epsilon
from .sac import SacAgent, SacConfig

__all__ = [
    "DdpgAgent",
    "DdpgConfig",
    "EpsilonSchedule",
    "SacAgent",
    "SacConfig",
    "UpdateClock",
    "epsilon",
    "soft_update",
    "train_step",
]
