"""Synthetic simulators used as labeling oracles.

Two families, both deterministic maps from the unit hypercube to a bounded
curve sampled on a fixed grid:

* spectrummix (10 inputs): three gaussian emission lines over a flat
  continuum, y(t) = sum_m a_m exp(-(t - c_m)^2 / (2 w_m^2)) + d, on
  t in [0, 1].
* powercurve (5 inputs): a rippled power law with an offset,
  y(t) = s * t^-p * (1 + e sin(omega t)) + c, on t in [1, 10].

Each internal parameter is an affine image of the input: lo + (hi - lo) *
<u, x> with u a positive weight vector summing to 1, drawn once from the
oracle's coefficient seed. The convex weights keep parameters inside their
documented ranges for any hypercube input, which is what makes the output
bound and the Lipschitz bound below computable in closed form.
"""

import math
from dataclasses import dataclass

import numpy as np

from .seeding import rng_for, TAG_POOL, TAG_COEFF, TAG_NOISE

KINDS = ("spectrummix", "powercurve")

# max over z >= 0 of z * exp(-z^2/2) (at z=1) and z^2 * exp(-z^2/2) (at
# z=sqrt(2)); used by the gaussian-line derivative bounds.
_Z1MAX = math.exp(-0.5)
_Z2MAX = 2.0 * math.exp(-1.0)

_SPECTRUM_PARAMS = (
    ("amp1", 0.3, 1.2), ("amp2", 0.3, 1.2), ("amp3", 0.3, 1.2),
    ("center1", 0.10, 0.35), ("center2", 0.40, 0.65), ("center3", 0.70, 0.95),
    ("width1", 0.02, 0.08), ("width2", 0.02, 0.08), ("width3", 0.02, 0.08),
    ("baseline", 0.1, 0.4),
)
_POWER_PARAMS = (
    ("scale", 0.5, 1.5), ("slope", 0.3, 1.2), ("ripple", 0.05, 0.35),
    ("frequency", 1.0, 6.0), ("offset", 0.0, 0.3),
)


@dataclass(frozen=True)
class OracleSpec:
    kind: str
    input_dim: int
    output_dim: int
    coeff_seed: int
    noise_std: float = 0.0


@dataclass(eq=False)
class Oracle:
    """OracleSpec plus the concrete coefficient draw.

    mix[j] holds the convex input weights of internal parameter j; lo/hi its
    range; grid the output sample points; out_cap the documented bound
    L_out with every output in [0, out_cap].
    """

    spec: OracleSpec
    param_names: tuple
    lo: np.ndarray
    hi: np.ndarray
    mix: np.ndarray
    grid: np.ndarray
    out_cap: float


def make_oracle(kind, coeff_seed=0, output_dim=128, noise_std=0.0):
    kind = str(kind).lower()
    if kind not in KINDS:
        raise ValueError(f"unknown oracle kind {kind!r}; expected one of {KINDS}")
    if output_dim < 2:
        raise ValueError("output_dim must be >= 2")
    if noise_std < 0:
        raise ValueError("noise_std must be >= 0")
    if kind == "spectrummix":
        params = _SPECTRUM_PARAMS
        grid = np.linspace(0.0, 1.0, output_dim)
        out_cap = 4.0   # 3 amps at 1.2 plus baseline 0.4
    else:
        params = _POWER_PARAMS
        grid = np.linspace(1.0, 10.0, output_dim)
        out_cap = 2.5   # 1.5 * 1 * 1.35 + 0.3 = 2.325, rounded up
    names = tuple(p[0] for p in params)
    lo = np.array([p[1] for p in params], dtype=np.float64)
    hi = np.array([p[2] for p in params], dtype=np.float64)
    dim = len(params)
    rng = rng_for(coeff_seed, TAG_COEFF)
    mix = rng.uniform(0.2, 1.0, size=(dim, dim))
    mix /= mix.sum(axis=1, keepdims=True)
    spec = OracleSpec(kind, dim, int(output_dim), int(coeff_seed),
                      float(noise_std))
    return Oracle(spec, names, lo, hi, mix, grid, out_cap)


def _internal_params(oracle, x2d):
    return oracle.lo + (oracle.hi - oracle.lo) * (x2d @ oracle.mix.T)


def query_batch(oracle, x):
    """Label a (batch, input_dim) array of hypercube points."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != oracle.spec.input_dim:
        raise ValueError(f"expected shape (*, {oracle.spec.input_dim}), "
                         f"got {x.shape}")
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise ValueError("input outside the unit hypercube")
    p = _internal_params(oracle, x)
    t = oracle.grid[None, :]
    if oracle.spec.kind == "spectrummix":
        a, c, w = p[:, 0:3], p[:, 3:6], p[:, 6:9]
        y = np.broadcast_to(p[:, 9:10], (x.shape[0], t.shape[1])).copy()
        for m in range(3):
            z = (t - c[:, m:m + 1]) / w[:, m:m + 1]
            y += a[:, m:m + 1] * np.exp(-0.5 * z * z)
    else:
        s, slope, e, om, off = (p[:, i:i + 1] for i in range(5))
        y = s * np.exp(-slope * np.log(t)) * (1.0 + e * np.sin(om * t)) + off
    if oracle.spec.noise_std > 0.0:
        y += oracle.spec.noise_std * _noise_for(oracle, x)
    return np.clip(y, 0.0, oracle.out_cap)


def query(oracle, x):
    """Label a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a vector, got shape {x.shape}")
    return query_batch(oracle, x[None, :])[0]


def _noise_for(oracle, x2d):
    # noise must be a pure function of the input so the oracle stays
    # deterministic; key each row's stream off its exact byte pattern
    import hashlib

    out = np.empty((x2d.shape[0], oracle.spec.output_dim))
    for i in range(x2d.shape[0]):
        digest = hashlib.blake2b(np.ascontiguousarray(x2d[i]).tobytes(),
                                 digest_size=8).digest()
        key = int.from_bytes(digest, "little")
        rng = rng_for(oracle.spec.coeff_seed, TAG_NOISE, key)
        out[i] = rng.standard_normal(oracle.spec.output_dim)
    return out


def sample_pool(oracle, n, seed):
    """n i.i.d. uniform hypercube points, seeded."""
    if n < 1:
        raise ValueError(f"pool size must be >= 1, got {n}")
    return rng_for(seed, TAG_POOL).random((int(n), oracle.spec.input_dim))


def lipschitz_l1_bound(oracle):
    """Upper bound on ||y(x) - y(x~)||_1 / ||x - x~||_1 over the hypercube.

    Chain rule through the affine parameter maps: the grid-summed partial
    of the curve w.r.t. internal parameter j is bounded by a closed-form
    constant G_j, the parameter moves by at most (hi-lo)*max(mix row) per
    unit L1 input change, and the final clamp is non-expansive. Loose by
    design; the finite-difference tests assert estimates never exceed it.
    """
    d_out = oracle.spec.output_dim
    lo = dict(zip(oracle.param_names, oracle.lo))
    hi = dict(zip(oracle.param_names, oracle.hi))
    g = {}
    if oracle.spec.kind == "spectrummix":
        for m in ("1", "2", "3"):
            g["amp" + m] = 1.0
            g["center" + m] = hi["amp" + m] * _Z1MAX / lo["width" + m]
            g["width" + m] = hi["amp" + m] * _Z2MAX / lo["width" + m]
        g["baseline"] = 1.0
    else:
        t = oracle.grid
        ripple_hi = 1.0 + hi["ripple"]
        g["scale"] = ripple_hi  # t^-p <= 1 on t >= 1
        g["slope"] = hi["scale"] * ripple_hi * float(
            np.max(np.log(t) * t ** (-lo["slope"])))
        g["ripple"] = hi["scale"]
        g["frequency"] = hi["scale"] * hi["ripple"] * float(
            np.max(t ** (1.0 - lo["slope"])))
        g["offset"] = 1.0
    total = 0.0
    for j, name in enumerate(oracle.param_names):
        umax = float(oracle.mix[j].max())
        total += d_out * g[name] * (hi[name] - lo[name]) * umax
    return total


def dump_coefficients(oracle):
    """Structured-text dump of everything needed to reconstruct the oracle."""
    lines = [
        "# oracle coefficients",
        f"kind = {oracle.spec.kind}",
        f"input_dim = {oracle.spec.input_dim}",
        f"output_dim = {oracle.spec.output_dim}",
        f"coeff_seed = {oracle.spec.coeff_seed}",
        f"noise_std = {oracle.spec.noise_std!r}",
        f"out_cap = {oracle.out_cap!r}",
        f"lipschitz_l1_bound = {lipschitz_l1_bound(oracle)!r}",
        f"grid = {oracle.grid[0]!r} .. {oracle.grid[-1]!r} "
        f"({oracle.spec.output_dim} points, uniform)",
    ]
    for j, name in enumerate(oracle.param_names):
        mix = " ".join(repr(v) for v in oracle.mix[j])
        lines.append(f"param {name}: lo={oracle.lo[j]!r} hi={oracle.hi[j]!r} "
                     f"mix= {mix}")
    return "\n".join(lines) + "\n"
