"""File formats: binary matrices, run configs, reports.

The matrix format is fixed little-endian regardless of host so files move
between machines: magic "ALEM", version u16, dtype tag u8 (0 = f32,
1 = f64), rows u64, cols u64, then the row-major payload. Header is
exactly 23 bytes.

Configs are INI text. Reports are JSON with sorted keys and no timing
fields, so identical runs produce byte-identical files; wall-clock numbers
live only in the per-round CSVs.
"""

import configparser
import dataclasses
import io as _stdio
import json
import struct
from dataclasses import dataclass

import numpy as np

from . import nn, oracles
from .seeding import GENERATOR

MAGIC = b"ALEM"
MATRIX_VERSION = 1
_HEADER = struct.Struct("<4sHBQQ")
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_TAGS = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}


class MatrixFileError(Exception):
    pass


class MagicError(MatrixFileError):
    pass


class VersionError(MatrixFileError):
    pass


class TruncatedError(MatrixFileError):
    pass


def write_matrix(path, matrix):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got shape {matrix.shape}")
    tag = _DTYPE_TAGS.get(matrix.dtype.newbyteorder("="))
    if tag is None:
        raise ValueError(f"unsupported dtype {matrix.dtype}; use f32 or f64")
    header = _HEADER.pack(MAGIC, MATRIX_VERSION, tag,
                          matrix.shape[0], matrix.shape[1])
    payload = np.ascontiguousarray(matrix, dtype=_DTYPES[tag]).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def read_matrix(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise TruncatedError(f"{path}: {len(raw)} bytes is shorter than the "
                             f"{_HEADER.size}-byte header")
    magic, version, tag, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise MagicError(f"{path}: bad magic {magic!r}")
    if version != MATRIX_VERSION:
        raise VersionError(f"{path}: unknown format version {version}")
    if tag not in _DTYPES:
        raise MatrixFileError(f"{path}: unknown dtype tag {tag}")
    dtype = _DTYPES[tag]
    need = rows * cols * dtype.itemsize
    body = raw[_HEADER.size:]
    if len(body) < need:
        raise TruncatedError(f"{path}: payload holds {len(body)} bytes, "
                             f"header promises {need}")
    data = np.frombuffer(body[:need], dtype=dtype).reshape(rows, cols)
    return np.ascontiguousarray(data, dtype=dtype.newbyteorder("="))


def save_params(prefix, net):
    """Net weights flattened to <prefix>.params.alem, layers to .spec.txt."""
    flat = np.concatenate([a.ravel() for pair in zip(net.weights, net.biases)
                           for a in pair])
    write_matrix(f"{prefix}.params.alem",
                 flat[None, :].astype(np.float64))
    with open(f"{prefix}.spec.txt", "w") as fh:
        fh.write(nn.spec_to_string(net.spec) + "\n")


def load_params(prefix):
    with open(f"{prefix}.spec.txt") as fh:
        spec = nn.string_to_spec(fh.read())
    flat = read_matrix(f"{prefix}.params.alem").ravel()
    net = nn.init_net(spec, seed=0)
    taken = 0
    for i in range(len(net.weights)):
        for arr in (net.weights[i], net.biases[i]):
            arr[...] = flat[taken:taken + arr.size].reshape(arr.shape)
            taken += arr.size
    if taken != flat.size:
        raise ValueError(f"parameter file holds {flat.size} values, "
                         f"spec needs {taken}")
    return net


# --- run configuration --------------------------------------------------------

class ConfigError(Exception):
    """Invalid run config; the message names the offending section.key."""


_STRATEGIES = ("random", "coreset", "coreset-sp")


@dataclass(frozen=True)
class RunConfig:
    oracle_kind: str = "powercurve"
    coeff_seed: int = 0
    output_dim: int = 128
    oracle_noise_std: float = 0.0
    pool_size: int = 2000
    budgets: tuple = (100, 100, 100, 100, 100)
    strategies: tuple = _STRATEGIES
    metric: str = "l1"
    standardize: bool = False
    chunk_size: int = 4096
    net_spec: str = "auto"
    net_dtype: str = "float64"
    minibatch_size: int = 32
    learning_rate: float = 0.001
    max_epochs: int = 600
    patience: int = 20
    val_size: int = 200
    test_size: int = 1000
    gamma: float = 0.05
    sp_shrink: float = 0.5
    sp_noise_std: float = 0.1
    seeds: tuple = (0, 1, 2, 3, 4)
    generator: str = GENERATOR
    out_dir: str = "runs"


# section, key, config field, type tag
_SCHEMA = (
    ("oracle", "kind", "oracle_kind", "str"),
    ("oracle", "coeff_seed", "coeff_seed", "int"),
    ("oracle", "output_dim", "output_dim", "int"),
    ("oracle", "noise_std", "oracle_noise_std", "float"),
    ("pool", "size", "pool_size", "int"),
    ("schedule", "budgets", "budgets", "int_list"),
    ("strategy", "strategies", "strategies", "str_list"),
    ("strategy", "metric", "metric", "str"),
    ("strategy", "standardize", "standardize", "bool"),
    ("strategy", "chunk_size", "chunk_size", "int"),
    ("net", "spec", "net_spec", "str"),
    ("net", "dtype", "net_dtype", "str"),
    ("train", "minibatch_size", "minibatch_size", "int"),
    ("train", "learning_rate", "learning_rate", "float"),
    ("train", "max_epochs", "max_epochs", "int"),
    ("train", "patience", "patience", "int"),
    ("eval", "val_size", "val_size", "int"),
    ("eval", "test_size", "test_size", "int"),
    ("eval", "gamma", "gamma", "float"),
    ("sp", "shrink", "sp_shrink", "float"),
    ("sp", "noise_std", "sp_noise_std", "float"),
    ("random", "generator", "generator", "str"),
    ("random", "seeds", "seeds", "int_list"),
    ("io", "out_dir", "out_dir", "str"),
)

_BOOL = {"true": True, "1": True, "yes": True, "on": True,
         "false": False, "0": False, "no": False, "off": False}


def _convert(where, value, kind):
    try:
        if kind == "str":
            return value.strip()
        if kind == "int":
            return int(value)
        if kind == "float":
            return float(value)
        if kind == "bool":
            return _BOOL[value.strip().lower()]
        if kind == "int_list":
            return tuple(int(v) for v in value.split(",") if v.strip())
        if kind == "str_list":
            return tuple(v.strip() for v in value.split(",") if v.strip())
    except (ValueError, KeyError):
        pass
    raise ConfigError(f"{where}: cannot parse {value!r} as {kind}")


def parse_config_text(text):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    known = {(s, k): (field, kind) for s, k, field, kind in _SCHEMA}
    values = {}
    for section in cp.sections():
        for key, value in cp.items(section):
            hit = known.get((section, key))
            if hit is None:
                raise ConfigError(f"{section}.{key}: unknown setting")
            field, kind = hit
            values[field] = _convert(f"{section}.{key}", value, kind)
    cfg = RunConfig(**values)
    validate_config(cfg)
    return cfg


def parse_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"config file: {exc}") from None
    return parse_config_text(text)


def serialize_config(cfg):
    """Canonical text form; parse_config_text inverts it exactly."""
    out = _stdio.StringIO()
    last = None
    for section, key, field, kind in _SCHEMA:
        if section != last:
            if last is not None:
                out.write("\n")
            out.write(f"[{section}]\n")
            last = section
        v = getattr(cfg, field)
        if kind in ("int_list", "str_list"):
            v = ",".join(str(x) for x in v)
        elif kind == "float":
            v = repr(v)
        elif kind == "bool":
            v = "true" if v else "false"
        out.write(f"{key} = {v}\n")
    return out.getvalue()


def validate_config(cfg):
    def fail(where, msg):
        raise ConfigError(f"{where}: {msg}")

    if cfg.oracle_kind not in oracles.KINDS:
        fail("oracle.kind", f"unknown kind {cfg.oracle_kind!r}")
    if cfg.output_dim < 2:
        fail("oracle.output_dim", "must be >= 2")
    if cfg.oracle_noise_std < 0:
        fail("oracle.noise_std", "must be >= 0")
    if cfg.pool_size < 1:
        fail("pool.size", "must be >= 1")
    if not cfg.budgets:
        fail("schedule.budgets", "empty schedule")
    if any(b < 1 for b in cfg.budgets):
        fail("schedule.budgets", "budgets must be positive")
    if sum(cfg.budgets) > cfg.pool_size:
        fail("schedule.budgets",
             f"total budget {sum(cfg.budgets)} exceeds pool {cfg.pool_size}")
    if not cfg.strategies:
        fail("strategy.strategies", "need at least one strategy")
    for s in cfg.strategies:
        if s not in _STRATEGIES:
            fail("strategy.strategies",
                 f"unknown strategy {s!r}; expected {_STRATEGIES}")
    if cfg.metric not in ("l1", "l2"):
        fail("strategy.metric", f"unknown metric {cfg.metric!r}")
    if cfg.chunk_size < 1:
        fail("strategy.chunk_size", "must be >= 1")
    if cfg.net_dtype not in ("float64", "float32"):
        fail("net.dtype", f"unknown dtype {cfg.net_dtype!r}")
    if cfg.minibatch_size < 1:
        fail("train.minibatch_size", "must be >= 1")
    if cfg.minibatch_size > cfg.budgets[0]:
        fail("train.minibatch_size",
             f"{cfg.minibatch_size} exceeds the first-round labeled set "
             f"({cfg.budgets[0]})")
    if cfg.learning_rate <= 0:
        fail("train.learning_rate", "must be > 0")
    if cfg.max_epochs < 0:
        fail("train.max_epochs", "must be >= 0")
    if cfg.patience < 1:
        fail("train.patience", "must be >= 1")
    if cfg.val_size < 1:
        fail("eval.val_size", "must be >= 1")
    if cfg.test_size < 1:
        fail("eval.test_size", "must be >= 1")
    if not 0.0 < cfg.gamma < 1.0:
        fail("eval.gamma", "must be in (0, 1)")
    if not 0.0 <= cfg.sp_shrink <= 1.0:
        fail("sp.shrink", "must be in [0, 1]")
    if cfg.sp_noise_std < 0:
        fail("sp.noise_std", "must be >= 0")
    if not cfg.seeds:
        fail("random.seeds", "need at least one seed")
    if cfg.generator != GENERATOR:
        fail("random.generator",
             f"only {GENERATOR!r} is supported, got {cfg.generator!r}")
    if cfg.net_spec != "auto":
        oracle = oracles.make_oracle(cfg.oracle_kind, cfg.coeff_seed,
                                     cfg.output_dim)
        try:
            spec = nn.string_to_spec(cfg.net_spec)
            out = nn.validate_spec(spec, input_dim=oracle.spec.input_dim)
        except (ValueError, nn.ShapeError) as exc:
            fail("net.spec", str(exc))
        if out != cfg.output_dim:
            fail("net.spec", f"network emits {out} values, oracle expects "
                             f"{cfg.output_dim}")
    return cfg


def apply_override(cfg, dotted, value):
    """Apply one 'section.key=value' style override onto a RunConfig."""
    if "." not in dotted:
        raise ConfigError(f"override {dotted!r}: expected section.key")
    section, key = dotted.split(".", 1)
    for s, k, field, kind in _SCHEMA:
        if (s, k) == (section, key):
            return dataclasses.replace(
                cfg, **{field: _convert(dotted, value, kind)})
    raise ConfigError(f"{dotted}: unknown setting")


# --- reports ------------------------------------------------------------------

ROUND_CSV_FIELDS = ("round", "labeled_count", "tail1", "tail5", "tail10",
                    "mean_loss", "delta", "wall_time_s")


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def report_to_json(report):
    # sorted keys + no NaN: identical runs serialize to identical bytes
    return json.dumps(_plain(report), sort_keys=True, indent=2,
                      allow_nan=False) + "\n"


def write_report(path, report):
    with open(path, "w") as fh:
        fh.write(report_to_json(report))


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_round_csv(path, row):
    missing = [f for f in ROUND_CSV_FIELDS if f not in row]
    if missing:
        raise ValueError(f"round row lacks fields {missing}")
    with open(path, "w") as fh:
        fh.write(",".join(ROUND_CSV_FIELDS) + "\n")
        fh.write(",".join(_cell(row[f]) for f in ROUND_CSV_FIELDS) + "\n")


def write_curve_csv(path, grid, truth, prediction):
    grid = np.asarray(grid, dtype=float)
    truth = np.asarray(truth, dtype=float)
    prediction = np.asarray(prediction, dtype=float)
    if not grid.shape == truth.shape == prediction.shape:
        raise ValueError("grid, truth and prediction must share a shape")
    with open(path, "w") as fh:
        fh.write("grid,truth,prediction\n")
        for g, t, p in zip(grid, truth, prediction):
            fh.write(f"{g!r},{t!r},{p!r}\n")
