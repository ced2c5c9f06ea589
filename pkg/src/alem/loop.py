"""Active-learning rounds: select, query, (re)train, evaluate.

Round 1 is uniform random for every strategy, drawn from a stream that
does not depend on the strategy, so runs sharing a seed share their first
batch and any later divergence is attributable to the selector alone.
Later rounds either keep sampling at random or run greedy k-center over
the current model's outputs with the already-labeled points as initial
centers.

All reported numbers are pure functions of (oracle, schedule, strategy,
net spec, train config, seed); wall-clock timings are returned in a
separate structure so reports stay reproducible byte for byte.

The full pool is labeled up front for diagnostics (cover radii, core-set
loss over the pool). Those labels are free at desk scale and are not
counted against the budget, which tracks the selected indices only.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import metrics, nn, oracles
from .coreset import kcenter_greedy
from .seeding import (rng_for, subseed, TAG_VAL, TAG_TEST, TAG_SELECT,
                      TAG_NET_INIT, TAG_TRAIN)
from .warmstart import SPConfig, shrink_and_perturb


@dataclass(frozen=True)
class BudgetSchedule:
    budgets: tuple

    def __post_init__(self):
        object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))
        if not self.budgets:
            raise ValueError("empty schedule")
        if any(b < 1 for b in self.budgets):
            raise ValueError(f"budgets must be positive, got {self.budgets}")

    @property
    def rounds(self):
        return len(self.budgets)

    @property
    def total(self):
        return sum(self.budgets)

    @classmethod
    def uniform(cls, per_round, rounds):
        return cls((per_round,) * rounds)


@dataclass(frozen=True)
class Strategy:
    selector: str = "random"
    sp: SPConfig = None

    def __post_init__(self):
        if self.selector not in ("random", "coreset"):
            raise ValueError(f"unknown selector {self.selector!r}")

    @property
    def name(self):
        return self.selector + ("-sp" if self.sp is not None else "")


def parse_strategy(name, sp_shrink=0.5, sp_noise_std=0.1):
    base, dash, suffix = name.partition("-")
    if dash and suffix != "sp":
        raise ValueError(f"unknown strategy {name!r}")
    return Strategy(base, SPConfig(sp_shrink, sp_noise_std) if dash else None)


@dataclass
class LabeledSet:
    """Indices grouped by round plus their oracle outputs."""

    rounds: list = field(default_factory=list)
    labels: dict = field(default_factory=dict)

    def add_round(self, indices, outputs):
        indices = np.asarray(indices, dtype=np.int64)
        if len(indices) != len(outputs):
            raise ValueError("one output per index required")
        fresh = set(int(i) for i in indices)
        if len(fresh) != len(indices):
            raise ValueError("duplicate index within a round")
        if fresh & self.labels.keys():
            raise ValueError("index labeled twice across rounds")
        self.rounds.append(indices)
        for i, y in zip(indices, outputs):
            self.labels[int(i)] = y

    def all_indices(self):
        if not self.rounds:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(self.rounds)

    def __len__(self):
        return len(self.labels)


def select_random(pool_remaining, b, seed):
    """b of the remaining indices, uniform without replacement, ascending."""
    pool_remaining = np.asarray(pool_remaining, dtype=np.int64)
    if b > pool_remaining.size:
        raise ValueError(f"budget {b} exceeds remaining pool "
                         f"{pool_remaining.size}")
    picked = rng_for(seed, TAG_SELECT).choice(pool_remaining, size=int(b),
                                              replace=False)
    return np.sort(picked)


def select_coreset(net, pool_x, labeled_idx, b, metric="l1",
                   standardize=False, chunk_size=4096, backend=None):
    """k-center batch in model-output space; labeled points seed the cover.

    Runs the model over the whole pool (labeled rows included, they are
    the initial centers) and returns (selected indices in pick order,
    selection state).
    """
    feats = nn.forward(net, np.asarray(pool_x, dtype=net.dtype))
    if standardize:
        sd = feats.std(axis=0)
        sd[sd == 0.0] = 1.0
        feats = (feats - feats.mean(axis=0)) / sd
    state = kcenter_greedy(feats, int(b), initial=labeled_idx, metric=metric,
                           chunk_size=chunk_size, backend=backend)
    return state.added, state


@dataclass
class RunResult:
    report: dict
    train_seconds: list
    round_seconds: list
    plots: dict


def run_experiment(oracle, schedule, strategy, net_spec=None, train_cfg=None,
                   pool_size=2000, val_size=200, test_size=1000, seed=0,
                   metric="l1", standardize=False, chunk_size=4096,
                   gamma=0.05, backend=None, net_dtype=np.float64):
    """Run one strategy for all rounds of the schedule; see module docstring.

    Returns a RunResult whose report depends only on the inputs and whose
    timing lists carry the wall-clock side channel.
    """
    if isinstance(schedule, (list, tuple)):
        schedule = BudgetSchedule(tuple(schedule))
    if isinstance(strategy, str):
        strategy = parse_strategy(strategy)
    if train_cfg is None:
        train_cfg = nn.TrainConfig()
    if schedule.total > pool_size:
        raise ValueError(f"total budget {schedule.total} exceeds pool "
                         f"{pool_size}")

    pool_x = oracles.sample_pool(oracle, pool_size, seed)
    val_x = oracles.sample_pool(oracle, val_size, subseed(seed, TAG_VAL))
    test_x = oracles.sample_pool(oracle, test_size, subseed(seed, TAG_TEST))
    pool_y = oracles.query_batch(oracle, pool_x)
    val_y = oracles.query_batch(oracle, val_x)
    test_y = oracles.query_batch(oracle, test_x)

    if net_spec is None or net_spec == "auto":
        net_spec = nn.default_net_spec(oracle.spec.input_dim,
                                       oracle.spec.output_dim)
    lambda_eta = oracles.lipschitz_l1_bound(oracle)

    labeled = LabeledSet()
    net = None
    rounds_out = []
    train_seconds = []
    round_seconds = []
    final_test_losses = None
    final_test_pred = None

    for t in range(1, schedule.rounds + 1):
        t_round = time.perf_counter()
        b = schedule.budgets[t - 1]
        remaining = np.setdiff1d(np.arange(pool_size, dtype=np.int64),
                                 labeled.all_indices())
        delta_sel = None
        delta_sel_before = None
        if t == 1 or strategy.selector == "random":
            sel = select_random(remaining, b, subseed(seed, TAG_SELECT, t))
        else:
            sel, state = select_coreset(net, pool_x, labeled.all_indices(), b,
                                        metric=metric,
                                        standardize=standardize,
                                        chunk_size=chunk_size,
                                        backend=backend)
            delta_sel = state.radius
            delta_sel_before = state.radius_before
        if len(sel) != b:
            raise RuntimeError(f"round {t} selected {len(sel)} of {b}")
        labeled.add_round(sel, pool_y[np.asarray(sel)])

        if strategy.sp is not None and net is not None:
            start = shrink_and_perturb(net, replace(strategy.sp, seed=seed),
                                       round_index=t)
        else:
            start = nn.init_net(net_spec, subseed(seed, TAG_NET_INIT, t),
                                input_dim=oracle.spec.input_dim,
                                dtype=net_dtype)

        idx = labeled.all_indices()
        cfg_t = replace(train_cfg, seed=subseed(seed, TAG_TRAIN, t))
        t_train = time.perf_counter()
        net, tlog = nn.train(start, (pool_x[idx], pool_y[idx]),
                             (val_x, val_y), cfg_t)
        train_seconds.append(time.perf_counter() - t_train)

        bound = metrics.theorem1_report(net, pool_x, pool_y, idx,
                                        test_x, test_y,
                                        oracle_bound=oracle.out_cap,
                                        lambda_eta=lambda_eta, gamma=gamma,
                                        metric=metric, chunk_size=chunk_size,
                                        backend=backend)
        test_pred = nn.forward(net, test_x)
        test_losses = nn.per_sample_l1(test_pred, test_y)
        tails = metrics.tail_report(test_losses)
        rounds_out.append({
            "round": t,
            "labeled_count": len(labeled),
            "selected": [int(i) for i in sel],
            "mean_loss": tails.mean,
            "tail1": tails.tail1,
            "tail5": tails.tail5,
            "tail10": tails.tail10,
            "median_index": tails.median_index,
            "epochs_run": tlog.epochs_run,
            "best_epoch": tlog.best_epoch,
            "val_best": tlog.best_val,
            "train_loss_final": (tlog.train_loss[-1]
                                 if tlog.train_loss else None),
            "delta_selection_before": delta_sel_before,
            "delta_selection": delta_sel,
            "bound": bound,
        })
        round_seconds.append(time.perf_counter() - t_round)
        final_test_losses = test_losses
        final_test_pred = test_pred

    worst_k = max(1, -(-final_test_losses.size // 100))  # ceil of 1%
    order = np.argsort(final_test_losses, kind="stable")
    med_i = int(order[(final_test_losses.size - 1) // 2])
    plots = {
        "grid": oracle.grid.copy(),
        "median": {"index": med_i, "truth": test_y[med_i],
                   "prediction": final_test_pred[med_i]},
        "worst": [{"rank": r + 1, "index": int(i), "truth": test_y[int(i)],
                   "prediction": final_test_pred[int(i)]}
                  for r, i in enumerate(order[::-1][:worst_k])],
    }

    last = rounds_out[-1]
    report = {
        "format": "alem-report-v1",
        "generator": "pcg64",
        "oracle": {
            "kind": oracle.spec.kind,
            "coeff_seed": oracle.spec.coeff_seed,
            "input_dim": oracle.spec.input_dim,
            "output_dim": oracle.spec.output_dim,
            "noise_std": oracle.spec.noise_std,
            "out_cap": oracle.out_cap,
            "lambda_eta": lambda_eta,
        },
        "strategy": strategy.name,
        "sp": (None if strategy.sp is None
               else {"shrink": strategy.sp.shrink,
                     "noise_std": strategy.sp.noise_std}),
        "seed": int(seed),
        "pool_size": int(pool_size),
        "val_size": int(val_size),
        "test_size": int(test_size),
        "budgets": list(schedule.budgets),
        "budget_total": schedule.total,
        "round_1_rule": "uniform-random-shared",
        "net_spec": nn.spec_to_string(net_spec),
        "net_dtype": np.dtype(net_dtype).name,
        "train": {
            "minibatch_size": train_cfg.minibatch_size,
            "learning_rate": train_cfg.learning_rate,
            "max_epochs": train_cfg.max_epochs,
            "patience": train_cfg.patience,
        },
        "metric": metric,
        "standardize": bool(standardize),
        "gamma": float(gamma),
        "rounds": rounds_out,
        "final": {
            "labeled_total": last["labeled_count"],
            "mean_loss": last["mean_loss"],
            "tail1": last["tail1"],
            "tail5": last["tail5"],
            "tail10": last["tail10"],
        },
    }
    return RunResult(report, train_seconds, round_seconds, plots)
