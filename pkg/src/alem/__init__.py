"""Active-learning toolkit for training neural emulators under a labeling budget.

Selection is greedy k-center over model-output features, training rounds can be
warm-started with shrink-and-perturb, and evaluation focuses on the worst
percentiles of the per-sample loss distribution.
"""

__version__ = "0.1.0"

from .backend import active_backend, available_backends
from .nn import (
    AdamState,
    Conv1D,
    Dense,
    NetParams,
    ReLU,
    TrainConfig,
    adam_step,
    default_net_spec,
    forward,
    grad,
    init_net,
    l1_loss,
    per_layer_weight_sums,
    per_sample_l1,
    spec_to_string,
    string_to_spec,
    train,
)
from .coreset import (
    SelectionState,
    cover_radius,
    kcenter_bruteforce,
    kcenter_greedy,
    pairwise_min_update,
)
from .warmstart import SPConfig, shrink_and_perturb
from .oracles import (
    Oracle,
    OracleSpec,
    dump_coefficients,
    lipschitz_l1_bound,
    make_oracle,
    query,
    query_batch,
    sample_pool,
)
from .metrics import (
    TailReport,
    budget_to_match,
    check_lipschitz_empirical,
    coreset_loss,
    hoeffding_term,
    lipschitz_bound,
    lipschitz_bound_uniform,
    tail_mean,
    tail_report,
    theorem1_report,
)
from .loop import (
    BudgetSchedule,
    LabeledSet,
    RunResult,
    Strategy,
    parse_strategy,
    run_experiment,
    select_coreset,
    select_random,
)
