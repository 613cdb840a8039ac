"""Smart-factory multi-agent RL workbench.

Simulation of a capacity-limited machine grid, counter-potential reward
shaping with static and scheduled weight schemes, value-based multi-agent
learners (independent DQN, VDN, QMIX) built on a small numpy neural core,
and a seeded experiment runner with CSV/SVG reporting.
"""

from .env import (
    Action,
    AgentState,
    CounterSnapshot,
    EmergencyProcess,
    EnvError,
    FactoryEnv,
    TaskBuckets,
)
from .experiments import (
    AggregateCurve,
    EpisodeRecord,
    ScenarioConfig,
    aggregate,
    emit_csv,
    emit_plot,
    load_config,
    run_scenario,
    run_single,
    scenario_preset,
)
from .exploration import EpsilonSchedule
from .layout import (
    Cell,
    FactoryLayout,
    LayoutError,
    default_layout,
    layout_from_dict,
    layout_to_dict,
    load_layout,
    open_layout,
)
from .learners import Learner, LearnerConfig, QmixMixer, global_state, vdn_mix
from .neural import (
    AdamState,
    DenseNet,
    Gradient,
    adam_init,
    adam_step,
    backward,
    forward,
    init_dense,
    load_checkpoint,
    reset_moments,
    save_checkpoint,
)
from .render import render_svg, render_text
from .replay import Batch, ReplayBuffer
from .rewards import (
    PotentialWeights,
    RewardScheme,
    ShapingConfig,
    active_weights,
    potential,
    scheme_table,
    shaped_reward,
)

__version__ = "0.1.0"
