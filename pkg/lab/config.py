"""RunConfig: the validated JSON document that drives a campaign."""

import copy
from dataclasses import asdict, dataclass, field, replace

from common.conf import lab_setting
from fock.kernels import build_kernel
from gibbs.free import adaptive_cutoff
from husimi.lower_symbols import SamplerConfig
from spectra.spectrum import build_spectrum

from .constants import ADAPTIVE, CONSTANT, INVERSE_TEMPERATURE


def default_coupling():
    return {"rule": INVERSE_TEMPERATURE, "value": 1.0}


def default_cutoff():
    return {"policy": ADAPTIVE, "n_max": None, "threshold": None}


def default_husimi():
    return {"modes": [0], "n_samples": 100_000, "scale": 1.0}


def default_tilted():
    return {"powers": None, "k": 1}


def default_output():
    return {"dir": None, "gnuplot": False}


@dataclass
class RunConfig:
    spectrum: dict
    kernel: dict
    temperatures: list
    name: str = ""
    coupling: dict = field(default_factory=default_coupling)
    cutoff: dict = field(default_factory=default_cutoff)
    k: int = 1
    schatten_p: float = 1.0
    n_samples: int = 1_000_000
    seed: int = None
    threads: int = None
    convention: str = None
    husimi: dict = field(default_factory=default_husimi)
    tilted: dict = field(default_factory=default_tilted)
    output: dict = field(default_factory=default_output)

    def __post_init__(self):
        self.seed = lab_setting("DEFAULT_SEED", self.seed)
        self.threads = lab_setting("THREADS", self.threads)
        self.convention = lab_setting("INTERACTION_CONVENTION", self.convention)
        self.temperatures = [float(T) for T in self.temperatures]

    def build_spectrum(self):
        return build_spectrum(self.spectrum)

    def build_kernel(self, J):
        return build_kernel(self.kernel, J)

    def coupling_at(self, T):
        value = float(self.coupling.get("value", 1.0))
        if self.coupling.get("rule", INVERSE_TEMPERATURE) == CONSTANT:
            return value
        return value / T

    def cutoff_at(self, spectrum, T):
        if self.cutoff.get("policy", ADAPTIVE) == ADAPTIVE:
            return adaptive_cutoff(spectrum, T, self.cutoff.get("threshold"))
        return int(self.cutoff["n_max"])

    def sampler(self, offset=0):
        """Husimi sampler for one row; rows draw from seeds seed + offset."""
        return SamplerConfig(
            n_samples=int(self.husimi.get("n_samples", 100_000)),
            seed=self.seed + offset,
            scale=float(self.husimi.get("scale", 1.0)),
            threads=1,
        )

    @property
    def husimi_modes(self):
        return list(self.husimi.get("modes") or [0])

    def tilted_powers(self, J):
        powers = self.tilted.get("powers")
        return tuple(powers) if powers else (1,) + (0,) * (J - 1)

    def with_overrides(self, seed=None, threads=None, out=None):
        """Copy with the command-line flags applied; a flag left as None keeps the config value."""
        output = copy.deepcopy(self.output)
        if out is not None:
            output["dir"] = str(out)
        return replace(
            self,
            seed=self.seed if seed is None else seed,
            threads=self.threads if threads is None else threads,
            output=output,
        )

    def to_json(self):
        return asdict(self)
