"""Energy-harvesting relay status-update network: simulator, baseline
relay-selection policies, DDQN-PER agent, exact small-MDP oracle, and an
experiment harness."""

from .env import (
    Action,
    Direction,
    RelayNetworkEnv,
    SimParams,
)

__all__ = ["Action", "Direction", "RelayNetworkEnv", "SimParams"]
__version__ = "0.1.0"
