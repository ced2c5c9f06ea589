"""Shrink-and-perturb restarts: theta <- shrink * theta + gaussian noise.

Applied between rounds so training continues from a softened copy of the
previous model instead of a fresh initialization. Optimizer state is NOT
carried over; callers start a new Adam accumulator after perturbing.
"""

from dataclasses import dataclass

import numpy as np

from .seeding import rng_for, TAG_SP


@dataclass(frozen=True)
class SPConfig:
    shrink: float = 0.5
    noise_std: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.shrink <= 1.0:
            raise ValueError(f"shrink must be in [0, 1], got {self.shrink}")
        if self.noise_std < 0.0:
            raise ValueError(f"noise_std must be >= 0, got {self.noise_std}")


def shrink_and_perturb(net, cfg, round_index=0):
    """Return a perturbed copy of net; the input is untouched.

    Every parameter array (biases included) is scaled by cfg.shrink and then
    shifted by N(0, cfg.noise_std^2) noise. Noise comes from one stream
    seeded by (cfg.seed, round_index), consumed in layer order, weights
    before biases, so the result is reproducible. shrink=1 with noise_std=0
    is an exact identity.
    """
    out = net.copy()
    rng = rng_for(cfg.seed, TAG_SP, round_index)
    for arrs in (zip(out.weights, out.biases)):
        for a in arrs:
            if cfg.shrink != 1.0:
                a *= cfg.shrink
            if cfg.noise_std > 0.0:
                a += rng.normal(0.0, cfg.noise_std, size=a.shape)
    return out
