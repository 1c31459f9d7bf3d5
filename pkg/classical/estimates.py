"""Monte Carlo estimates with reproducibility metadata, and the streaming accumulators behind them."""

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from common.conf import lab_setting
from common.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)


@dataclass
class MCEstimate:
    value: complex
    stderr: float
    n_samples: int
    seed: int
    rng_algorithm: str
    ess: float = None
    warning: str = ""

    def __post_init__(self):
        if self.n_samples < 1:
            raise InvalidArgumentError("an estimate needs at least one sample")

    @property
    def real(self):
        return float(np.real(self.value))

    def agrees_with(self, target, sigmas=3.0, floor=0.0):
        """|value - target| <= sigmas·stderr (+ floor for deterministic round-off)."""
        return abs(self.value - target) <= sigmas * self.stderr + floor

    def z_score(self, target):
        if self.stderr == 0:
            return 0.0 if self.value == target else math.inf
        return float(abs(self.value - target) / self.stderr)

    def to_json(self):
        payload = asdict(self)
        value = complex(self.value)
        payload["value"] = value.real if value.imag == 0 else [value.real, value.imag]
        return payload


class RunningMoments:
    """Streaming mean / variance of (possibly complex, possibly array-valued) samples.

    Batches are merged with Chan's parallel update, so the result does not depend on batch size
    beyond round-off, and merging in a fixed order keeps runs bit-identical.
    """

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, batch):
        batch = np.asarray(batch)
        n = batch.shape[0]
        if n == 0:
            return self
        mean = batch.mean(axis=0)
        m2 = (np.abs(batch - mean) ** 2).sum(axis=0)
        return self.merge(n, mean, m2)

    def merge(self, n, mean, m2):
        total = self.count + n
        delta = mean - self.mean
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + m2 + np.abs(delta) ** 2 * (self.count * n / total)
        self.count = total
        return self

    def absorb(self, other):
        return self.merge(other.count, other.mean, other.m2)

    @property
    def variance(self):
        if self.count < 2:
            return np.zeros_like(np.real(self.mean)) if np.ndim(self.mean) else 0.0
        return self.m2 / (self.count - 1)

    @property
    def stderr(self):
        return np.sqrt(self.variance / max(self.count, 1))

    def estimate(self, seed, rng_algorithm):
        return MCEstimate(complex(self.mean), float(self.stderr), self.count, seed, rng_algorithm)


class WeightedMoments:
    """Self-normalised importance sampling R = Σ w f / Σ w with the delta-method standard error.

    stderr² = Σ w² |f - R|² / (Σ w)²; ESS = (Σ w)² / Σ w².
    """

    def __init__(self):
        self.count = 0
        self.sw = 0.0
        self.sw2 = 0.0
        self.swf = 0.0
        self.sw2f = 0.0
        self.sw2f2 = 0.0

    def update(self, weights, values):
        w = np.asarray(weights, dtype=float)
        f = np.asarray(values)
        if w.size == 0:
            return self
        wb = w.reshape((-1,) + (1,) * (f.ndim - 1))
        self.count += w.size
        self.sw += float(w.sum())
        self.sw2 += float(w @ w)
        self.swf = self.swf + (wb * f).sum(axis=0)
        self.sw2f = self.sw2f + (wb**2 * f).sum(axis=0)
        self.sw2f2 = self.sw2f2 + (wb**2 * np.abs(f) ** 2).sum(axis=0)
        return self

    def absorb(self, other):
        self.count += other.count
        self.sw += other.sw
        self.sw2 += other.sw2
        self.swf = self.swf + other.swf
        self.sw2f = self.sw2f + other.sw2f
        self.sw2f2 = self.sw2f2 + other.sw2f2
        return self

    @property
    def mean(self):
        return self.swf / self.sw

    @property
    def stderr(self):
        R = self.mean
        spread = self.sw2f2 - 2 * np.real(np.conj(R) * self.sw2f) + np.abs(R) ** 2 * self.sw2
        return np.sqrt(np.maximum(spread, 0.0)) / self.sw

    @property
    def ess(self):
        return self.sw**2 / self.sw2 if self.sw2 > 0 else 0.0

    def ess_warning(self, floor=None):
        floor = lab_setting("ESS_FLOOR", floor)
        if self.ess < floor * self.count:
            logger.warning("low effective sample size ess=%.1f n=%d floor=%.2f", self.ess, self.count, floor)
            return f"effective sample size {self.ess:.1f} below {floor:g}·n"
        return ""

    def estimate(self, seed, rng_algorithm, floor=None):
        return MCEstimate(
            complex(self.mean),
            float(self.stderr),
            self.count,
            seed,
            rng_algorithm,
            ess=float(self.ess),
            warning=self.ess_warning(floor),
        )


def combine_ratio(numerator, denominator):
    """log of a ratio of two independent positive estimates, with first-order error propagation."""
    value = math.log(numerator.real) - math.log(denominator.real)
    stderr = math.hypot(numerator.stderr / numerator.real, denominator.stderr / denominator.real)
    return value, stderr
