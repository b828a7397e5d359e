"""Deterministic, seedable environments and the tabular MDP substrate."""

from .cartpole import (
    CartpoleEnv,
    CartpoleState,
    cartpole_batch_reset,
    cartpole_batch_step,
    cartpole_reset,
    cartpole_step,
)
from .cliff import CLIFF_COLS, CLIFF_ROWS, CliffEnv, CliffState, cliff_obs, cliff_step
from .tabular import (
    TabularMDP,
    cliff_tabular,
    flip_flop,
    mdp_step,
    one_way_chain,
    random_mdp,
    three_cycle,
    turf_tabular,
    two_action_chain,
)
from .turf import DEFAULT_TURF_MAP, TurfEnv, TurfGrid, parse_turf_map, turf_obs, turf_step

__all__ = [
    "CartpoleEnv", "CartpoleState", "cartpole_reset", "cartpole_step",
    "cartpole_batch_reset", "cartpole_batch_step",
    "CliffEnv", "CliffState", "cliff_step", "cliff_obs", "CLIFF_ROWS", "CLIFF_COLS",
    "TabularMDP", "mdp_step", "three_cycle", "one_way_chain", "flip_flop",
    "two_action_chain", "random_mdp", "cliff_tabular", "turf_tabular",
    "TurfEnv", "TurfGrid", "turf_step", "turf_obs", "parse_turf_map", "DEFAULT_TURF_MAP",
]
