"""Rate-adaptation policies.

Every policy exposes ``reset()`` and ``select(observation, env) -> kbps``.
"""

from .baselines import (
    BbaPolicy,
    MpcModel,
    MpcPolicy,
    RbaPolicy,
    bba_select,
    ladder_floor,
    mpc_select,
    rba_select,
    robust_throughput,
)
from .dqn import (
    COI,
    CONSTANT,
    DqnConfig,
    DqnPolicy,
    DqnResult,
    InsufficientSamples,
    ReplayBuffer,
    StateEncoder,
    Transition,
    dqn_select_action,
    dqn_train,
    load_agent,
    replay_sample,
    save_agent,
)
