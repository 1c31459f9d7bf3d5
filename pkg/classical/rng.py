"""Counter-based random streams: one Philox-4x64 stream per (seed, stream id).

The Philox key is ``seed + (stream_id << 64)`` and the counter starts at zero, so every
implementation of Philox-4x64-10 reproduces the same stream from the pair.
"""

import numpy as np

from common.conf import lab_setting
from common.exceptions import InvalidArgumentError

RNG_ALGORITHM = "philox4x64-10"

# stream ids above this offset are reserved for auxiliary draws (competitor measures, proposals)
AUX_STREAM_OFFSET = 1 << 20


def _check_seed(seed):
    seed = lab_setting("DEFAULT_SEED", seed)
    if int(seed) != seed or not 0 <= seed < 2**64:
        raise InvalidArgumentError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    return int(seed)


def stream(seed, stream_id=0):
    seed = _check_seed(seed)
    if stream_id < 0 or stream_id >= 2**64:
        raise InvalidArgumentError(f"stream id out of range: {stream_id}")
    return np.random.Generator(np.random.Philox(key=seed + (int(stream_id) << 64)))


def mode_streams(seed, J, offset=0):
    """One generator per mode j, stream id ``offset + j``."""
    return [stream(seed, offset + j) for j in range(J)]


def complex_normal(generators, size, variances):
    """(S, J) array with column j ~ CN(0, variances[j]) drawn from ``generators[j]``."""
    variances = np.asarray(variances, dtype=float)
    out = np.empty((size, len(generators)), dtype=complex)
    for j, g in enumerate(generators):
        xy = g.standard_normal((size, 2))
        out[:, j] = np.sqrt(variances[j] / 2) * (xy[:, 0] + 1j * xy[:, 1])
    return out
