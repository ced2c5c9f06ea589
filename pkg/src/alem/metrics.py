"""Loss-distribution metrics and the bound-diagnostic report.

The tail metrics summarize the worst end of per-sample losses. The bound
diagnostics assemble, for one trained round, the measured core-set loss
(LHS) against delta * lambda_l + hoeffding (RHS), with the hypervolume
term omitted; nothing here asserts the inequality, the report exists so
the components can be inspected.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import coreset, nn


def _as_losses(values, name="losses"):
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if arr.min() < 0:
        raise ValueError(f"{name} contains negative entries")
    return arr


def tail_mean(losses, p, band=False):
    """Mean of the worst p-fraction of losses.

    Takes the ceil(p*N) largest values ("worst 1%" = the 1% of samples
    with the highest loss). With band=True, only the one-percent-wide band
    ending at that rank is averaged, so band tails at 1%, 5%, 10% tile the
    outer tail instead of nesting; p must be >= 0.01 for the band form.
    """
    arr = _as_losses(losses)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"tail fraction must be in (0, 1], got {p}")
    n = arr.size
    # guard against float fuzz in p*n (0.1 * 100 is a hair above 10)
    k = math.ceil(p * n - 1e-9)
    k = min(max(k, 1), n)
    srt = np.sort(arr)[::-1]
    if not band:
        return float(srt[:k].mean())
    if p < 0.01:
        raise ValueError("band tails need p >= 0.01")
    k_lo = min(max(math.ceil((p - 0.01) * n - 1e-9), 0), k - 1)
    return float(srt[k_lo:k].mean())


@dataclass
class TailReport:
    mean: float
    tail1: float
    tail5: float
    tail10: float
    median_index: int
    n: int
    sorted_losses: np.ndarray = None


def tail_report(losses, include_sorted=False):
    """Standard summary: mean, worst 1/5/10% tails, median-sample index.

    median_index points into the ORIGINAL loss array (lower median for even
    length), so callers can pull the matching sample for plotting.
    """
    arr = _as_losses(losses)
    order = np.argsort(arr, kind="stable")
    med = int(order[(arr.size - 1) // 2])
    return TailReport(
        mean=float(arr.mean()),
        tail1=tail_mean(arr, 0.01),
        tail5=tail_mean(arr, 0.05),
        tail10=tail_mean(arr, 0.10),
        median_index=med,
        n=int(arr.size),
        sorted_losses=arr[order] if include_sorted else None,
    )


def coreset_loss(train_losses, pool_losses):
    """Absolute gap between the mean pool loss and the mean training loss."""
    a = _as_losses(train_losses, "train_losses")
    b = _as_losses(pool_losses, "pool_losses")
    return abs(float(b.mean()) - float(a.mean()))


def hoeffding_term(L, gamma, n):
    """sqrt(L^2 log(1/gamma) / (2n)), the concentration part of the bound."""
    if L < 0:
        raise ValueError(f"loss cap must be >= 0, got {L}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {gamma}")
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    return math.sqrt(L * L * math.log(1.0 / gamma) / (2.0 * n))


def lipschitz_bound(net):
    """Product over parameterized layers of the per-layer constants."""
    total = 1.0
    for a in nn.per_layer_weight_sums(net):
        total *= a
    return total


def lipschitz_bound_uniform(net):
    """max_d alpha_d raised to the layer count: same chain, one shared alpha."""
    alphas = nn.per_layer_weight_sums(net)
    return max(alphas) ** len(alphas)


@dataclass
class LipschitzCheck:
    n_pairs: int
    violations: int
    max_tightness: float   # max |dl| / (bound * ||dx||_1); <= 1 when clean
    bound: float


def check_lipschitz_empirical(net, pairs, q=1, rel_tol=1e-9):
    """Count violations of |l(x) - l(x~)| <= bound * ||x - x~||_1.

    The loss here is the SUM of absolute errors (the mean form's 1/dim
    factor is divided out so the bound and the check live on the same
    scale). Pairs with x == x~ are tightness 0 by definition.
    """
    if q != 1:
        raise ValueError("only q=1 is supported")
    bound = lipschitz_bound(net)
    violations = 0
    max_tightness = 0.0
    n_pairs = 0
    for x, xt, y in pairs:
        n_pairs += 1
        x = np.asarray(x, dtype=float)
        xt = np.asarray(xt, dtype=float)
        y = np.asarray(y, dtype=float)
        dx = float(np.abs(x - xt).sum())
        la = float(np.abs(nn.forward(net, x) - y).sum())
        lb = float(np.abs(nn.forward(net, xt) - y).sum())
        dl = abs(la - lb)
        if dx == 0.0:
            if dl > 0.0:
                violations += 1
            continue
        allowed = bound * dx
        if dl > allowed * (1.0 + rel_tol):
            violations += 1
        if allowed > 0:
            max_tightness = max(max_tightness, dl / allowed)
    return LipschitzCheck(n_pairs, violations, max_tightness, bound)


def theorem1_report(net, pool_x, pool_y, labeled_idx, test_x, test_y,
                    oracle_bound=None, lambda_eta=None, gamma=0.05,
                    metric="l1", chunk_size=4096, backend=None):
    """Assemble the bound components for one completed round.

    Returns a flat dict (JSON-ready). rhs is computed literally as
    delta_feature * lambda_l + hoeffding, so it can be reproduced bitwise
    from the logged fields. lambda_l is the per-layer product divided by
    the output dimension, matching the mean-form losses used for the LHS.
    The hypervolume factor of the full bound has no computable definition
    here and is recorded as omitted.
    """
    labeled_idx = np.asarray(labeled_idx, dtype=np.int64)
    if labeled_idx.size == 0:
        raise ValueError("no labeled points")
    pool_x = np.asarray(pool_x, dtype=np.float64)
    pool_y = np.asarray(pool_y, dtype=np.float64)
    n = pool_x.shape[0]

    pool_pred = nn.forward(net, pool_x)
    test_pred = nn.forward(net, test_x)
    pool_losses = nn.per_sample_l1(pool_pred, pool_y)
    test_losses = nn.per_sample_l1(test_pred, test_y)
    train_losses = pool_losses[labeled_idx]

    d_out = pool_pred.shape[1]
    alphas = nn.per_layer_weight_sums(net)
    product = lipschitz_bound(net)
    lambda_l = product / d_out

    delta_feature = coreset.cover_radius(pool_pred, labeled_idx,
                                         metric=metric,
                                         chunk_size=chunk_size,
                                         backend=backend)
    delta_input = coreset.cover_radius(pool_x, labeled_idx, metric=metric,
                                       chunk_size=chunk_size, backend=backend)

    pred_cap = float(max(np.abs(pool_pred).max(), np.abs(test_pred).max()))
    max_loss = float(max(pool_losses.max(), test_losses.max()))
    if oracle_bound is not None:
        # worst per-sample mean-L1 given truth in [0, oracle_bound] and
        # predictions no larger than observed
        L = max(float(oracle_bound) + pred_cap, max_loss)
    else:
        L = max(2.0 * pred_cap, max_loss)

    hoeffding = hoeffding_term(L, gamma, n)
    rhs = delta_feature * lambda_l + hoeffding
    return {
        "n": int(n),
        "n_labeled": int(labeled_idx.size),
        "delta_feature": float(delta_feature),
        "delta_input": float(delta_input),
        "alpha_per_layer": [float(a) for a in alphas],
        "lipschitz_product": float(product),
        "lipschitz_uniform": float(lipschitz_bound_uniform(net)),
        "lambda_l": float(lambda_l),
        "lambda_eta": None if lambda_eta is None else float(lambda_eta),
        "L": float(L),
        "pred_cap": pred_cap,
        "max_observed_loss": max_loss,
        "gamma": float(gamma),
        "hoeffding": float(hoeffding),
        "rhs": float(rhs),
        "v_term": "omitted",
        "lhs_coreset_loss": coreset_loss(train_losses, pool_losses),
        "training_error": float(train_losses.mean()),
        "generalization_estimate": abs(float(test_losses.mean())
                                       - float(pool_losses.mean())),
    }


def budget_to_match(labeled_counts, tail_values, target):
    """Smallest labeled count whose tail value first reaches the target.

    Returns None when no round gets there. Used for the budget-to-match
    comparison between selection strategies.
    """
    if len(labeled_counts) != len(tail_values):
        raise ValueError("length mismatch")
    for count, v in zip(labeled_counts, tail_values):
        if v <= target:
            return int(count)
    return None
