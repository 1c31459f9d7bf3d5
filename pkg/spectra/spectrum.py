"""One-particle operator h, stored purely through its eigenvalues."""

import logging
from dataclasses import dataclass

import numpy as np

from common.exceptions import InvalidArgumentError

from .constants import ANHARMONIC, CUSTOM, DIRICHLET_INTERVAL, FAMILY_TAGS

logger = logging.getLogger(__name__)

_TAGS = {tag for tag, _ in FAMILY_TAGS}


@dataclass(frozen=True)
class OneBodySpectrum:
    eigenvalues: tuple
    family_tag: str = CUSTOM

    def __post_init__(self):
        values = tuple(float(v) for v in self.eigenvalues)
        if not values:
            raise InvalidArgumentError("spectrum needs at least one mode")
        if any(not np.isfinite(v) or v <= 0 for v in values):
            raise InvalidArgumentError("eigenvalues of h must be finite and strictly positive")
        if any(b < a for a, b in zip(values, values[1:])):
            raise InvalidArgumentError("eigenvalues must be sorted nondecreasing")
        if self.family_tag not in _TAGS:
            raise InvalidArgumentError(f"unknown family tag {self.family_tag!r}")
        object.__setattr__(self, "eigenvalues", values)

    @property
    def mode_count(self):
        return len(self.eigenvalues)

    def as_array(self):
        return np.asarray(self.eigenvalues, dtype=float)

    def shifted(self, constant):
        """h + C, used when a boundary condition leaves h without a positive gap."""
        return OneBodySpectrum(tuple(v + constant for v in self.eigenvalues), CUSTOM)

    def restricted(self, modes):
        modes = sorted(modes)
        return OneBodySpectrum(tuple(self.eigenvalues[j] for j in modes), self.family_tag)

    def concatenated(self, other):
        return OneBodySpectrum(tuple(sorted(self.eigenvalues + other.eigenvalues)), CUSTOM)


def _check_mode_count(J):
    if int(J) != J or J < 1:
        raise InvalidArgumentError(f"mode count must be a positive integer, got {J!r}")
    return int(J)


def dirichlet_spectrum(J):
    """λ_n = n² for -d²/dx² on (0, π) with Dirichlet boundary conditions."""
    J = _check_mode_count(J)
    return OneBodySpectrum(tuple(float(n * n) for n in range(1, J + 1)), DIRICHLET_INTERVAL)


def linear_spectrum(J, slope):
    """λ_n = slope·n, so tr h^{-1} diverges logarithmically as J grows."""
    J = _check_mode_count(J)
    if not slope > 0:
        raise InvalidArgumentError(f"slope must be positive, got {slope!r}")
    return OneBodySpectrum(tuple(slope * n for n in range(1, J + 1)), ANHARMONIC)


def custom_spectrum(eigenvalues, shift=0.0):
    return OneBodySpectrum(tuple(sorted(float(v) + shift for v in eigenvalues)), CUSTOM)


def schatten_trace(s, p):
    """Truncated tr h^{-p} = Σ_j λ_j^{-p}."""
    if not p > 0:
        raise InvalidArgumentError(f"Schatten exponent must be positive, got {p!r}")
    return float(np.sum(s.as_array() ** (-float(p))))


def build_spectrum(block):
    """Spectrum from the RunConfig ``spectrum`` block."""
    family = block.get("family", DIRICHLET_INTERVAL)
    logger.debug("building spectrum family=%s modes=%s", family, block.get("modes"))
    if family == DIRICHLET_INTERVAL:
        s = dirichlet_spectrum(block["modes"])
        if block.get("shift"):
            s = s.shifted(block["shift"])
        return s
    if family == ANHARMONIC:
        return linear_spectrum(block["modes"], block.get("slope", 1.0))
    if family == CUSTOM:
        return custom_spectrum(block["eigenvalues"], block.get("shift", 0.0))
    raise InvalidArgumentError(f"unknown spectrum family {family!r}")
