"""Campaign runners: the T → ∞ limits and the a-priori bounds behind them, row by row along a temperature grid."""

import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from classical.measure import gamma_k_mc, gibbs_expectation_mc, relative_partition_mc, tilted_moment_mc
from classical.rng import RNG_ALGORITHM
from common.conf import lab_setting
from common.exceptions import CutoffError, InvalidArgumentError, TailCertificateError
from common.parallel import ordered_map
from fock.basis import build_basis
from fock.kernels import trace_against_inverse
from fock.operators import dGamma_op, hamiltonian
from gibbs.density_matrices import interaction_energy, reduced_density_matrix, schatten_norm
from gibbs.entropy import relative_entropy
from gibbs.free import (
    classical_free_dm,
    free_dm_distance,
    free_partition_closed_form,
    tilted_moment,
    tilted_moment_limit,
    tilted_moment_trace,
)
from gibbs.states import gibbs_state
from husimi.coherent import coherent_lower_bound
from husimi.lower_symbols import HusimiMeasure, default_test_functions, sample_pass
from spectra.spectrum import schatten_trace

from .constants import (
    BOUND_TOL,
    CLOSED_FORM_TOL,
    DENSITY_MATRIX,
    EXACT_TOL,
    HUSIMI,
    MAX_MOMENT_ORDER,
    PARTITION,
    PROOF_STEPS,
    SIGMAS,
)
from .reports import ConvergenceReport, trend

logger = logging.getLogger(__name__)

# 수용 기준: 마지막 T의 거리 / 첫 T의 거리
PARTITION_FINAL_RATIO = 1 / 3
DM_FINAL_RATIO = 1 / 2


@dataclass
class GibbsPair:
    """Free and interacting Gibbs states at one (T, λ) on a shared basis."""

    T: float
    coupling: float
    basis: object
    free: object
    interacting: object

    @property
    def log_ratio(self):
        return self.interacting.log_partition - self.free.log_partition

    @property
    def ratio(self):
        return math.exp(self.log_ratio)


def gibbs_pair(spectrum, kernel, T, coupling, N_max, threads=1):
    basis = build_basis(spectrum.mode_count, N_max)
    free = gibbs_state(dGamma_op(basis, spectrum), T, threads=threads)
    if coupling == 0 or kernel.is_zero():
        return GibbsPair(T, coupling, basis, free, free)
    interacting = gibbs_state(hamiltonian(basis, spectrum, kernel, coupling, threads=threads), T, threads=threads)
    return GibbsPair(T, coupling, basis, free, interacting)


def certify_tails(pair):
    """Top-sector mass of both states; raises TailCertificateError above the configured thresholds."""
    for state, key in ((pair.free, "FREE_TAIL_THRESHOLD"), (pair.interacting, "INTERACTING_TAIL_THRESHOLD")):
        threshold = lab_setting(key)
        if state.tail > threshold:
            raise TailCertificateError(
                f"tail {state.tail:.3e} of {state.label} above {threshold:.1e} at N_max={pair.basis.N_max}",
                tail=state.tail,
                threshold=threshold,
            )
    return max(pair.free.tail, pair.interacting.tail)


def _upper(value, bound, tol=BOUND_TOL):
    margin = float(bound - value)
    return {"value": float(value), "bound": float(bound), "margin": margin, "passed": margin >= -tol}


def _lower(value, bound, tol=BOUND_TOL):
    margin = float(value - bound)
    return {"value": float(value), "bound": float(bound), "margin": margin, "passed": margin >= -tol}


def _close(value, target, tol):
    gap = abs(value - target)
    return {"value": float(value), "target": float(target), "margin": float(tol - gap), "passed": gap <= tol}


def _row_passed(kind, T, checks):
    passed = True
    for name, check in checks.items():
        if isinstance(check, dict) and check.get("passed") is False:
            passed = False
            logger.warning("bound check failed kind=%s T=%g check=%s margin=%.3e", kind, T, name, check["margin"])
    return passed


def a_priori_checks(pair, spectrum, kernel, max_order=MAX_MOMENT_ORDER):
    """Partition sandwich, interaction energy, one-body and particle-number moment bounds at one row."""
    T, lam = pair.T, pair.coupling
    tau = trace_against_inverse(kernel, spectrum)
    growth = lam * T * tau
    ratio = pair.ratio
    lower = math.exp(-growth)
    checks = {
        "partition_sandwich": {
            "value": ratio,
            "lower": lower,
            "upper": 1.0,
            "margin": min(ratio - lower, 1.0 - ratio),
            "passed": min(ratio - lower, 1.0 - ratio) >= -EXACT_TOL,
        }
    }
    N_max = pair.basis.N_max
    if N_max >= 2:
        gamma2 = reduced_density_matrix(pair.interacting, 2)
        checks["interaction_energy"] = _upper(interaction_energy(gamma2, kernel), T * T * tau)
    if N_max >= 1:
        gamma1 = reduced_density_matrix(pair.interacting, 1)
        scale = 2 * T * (1 + growth)
        dominating = scale * np.diag(1.0 / spectrum.as_array())
        checks["one_body_positive"] = _lower(gamma1.eigenvalues().min(), 0.0)
        checks["one_body_dominated"] = {
            **_lower(np.linalg.eigvalsh(dominating - gamma1.matrix).min(), 0.0),
            "scale": scale,
        }
    for k in range(1, max_order + 1):
        bound = pair.free.number_moment(k, scale=T) / ratio
        checks[f"number_moment_{k}"] = _upper(pair.interacting.number_moment(k, scale=T), bound, BOUND_TOL * bound)
    return checks


def _base_row(pair, tail):
    return {
        "temperature": pair.T,
        "coupling": pair.coupling,
        "n_max": pair.basis.N_max,
        "log_z_lambda": pair.interacting.log_partition,
        "log_z_free": pair.free.log_partition,
        "ratio": pair.ratio,
        "tail_certificate": tail,
    }


def _run_rows(cfg, kind, row_fn):
    """Rows run in parallel over T; a failed tail certificate turns into a failed row, other errors propagate."""

    def guarded(item):
        index, T = item
        coupling = cfg.coupling_at(T)
        try:
            row = row_fn(index, T, coupling)
        except TailCertificateError as exc:
            logger.warning(
                "tail certificate failed kind=%s T=%g tail=%.3e threshold=%.1e", kind, T, exc.tail, exc.threshold
            )
            return {
                "temperature": T,
                "coupling": coupling,
                "tail_certificate": exc.tail,
                "checks": {"error": str(exc)},
                "passed": False,
            }
        row["passed"] = _row_passed(kind, T, row["checks"])
        logger.info(
            "campaign row kind=%s T=%g lambda=%.4g n_max=%s distance=%s passed=%s",
            kind, T, coupling, row.get("n_max"), row.get("distance"), row["passed"],
        )  # fmt: skip
        return row

    return ordered_map(guarded, list(enumerate(cfg.temperatures)), cfg.threads)


def _summary(cfg, spectrum, kernel, started, **extra):
    summary = {
        "mode_count": spectrum.mode_count,
        "eigenvalues": spectrum.as_array().tolist(),
        "kernel": kernel.label,
        "trace_against_inverse": trace_against_inverse(kernel, spectrum),
        "convention": cfg.convention,
        "seed": cfg.seed,
        "n_samples": cfg.n_samples,
        "rng_algorithm": RNG_ALGORITHM,
    }
    summary.update(extra)
    summary["elapsed_seconds"] = round(time.monotonic() - started, 3)
    return summary


def _finish(kind, cfg, rows, summary):
    report = ConvergenceReport(kind, cfg.to_json(), rows, summary)
    logger.info(
        "campaign done kind=%s rows=%d passed=%s elapsed=%.1fs",
        kind, len(rows), report.passed, summary["elapsed_seconds"],
    )  # fmt: skip
    return report


def _relative_partition(cfg, spectrum, kernel):
    return relative_partition_mc(
        spectrum, kernel, cfg.n_samples, cfg.seed, threads=cfg.threads, convention=cfg.convention
    )


def _distance_trend(rows, max_final_ratio=None):
    return trend(
        [row.get("distance") for row in rows],
        [row.get("distance_stderr") for row in rows],
        max_final_ratio=max_final_ratio,
    )


def run_partition_convergence(cfg):
    """Z_λ/Z_0 against z_r along the grid, with the partition sandwich and moment bounds at every row."""
    started = time.monotonic()
    spectrum = cfg.build_spectrum()
    kernel = cfg.build_kernel(spectrum.mode_count)
    z_r = _relative_partition(cfg, spectrum, kernel)
    log_z_r = math.log(z_r.real)

    def row(index, T, coupling):
        pair = gibbs_pair(spectrum, kernel, T, coupling, cfg.cutoff_at(spectrum, T))
        tail = certify_tails(pair)
        checks = a_priori_checks(pair, spectrum, kernel)
        checks["upper_bound_pair"] = {"quantum": -pair.log_ratio, "classical": -log_z_r}
        return {
            **_base_row(pair, tail),
            "z_r": z_r.real,
            "z_r_stderr": z_r.stderr,
            "distance": abs(pair.ratio - z_r.real),
            "distance_stderr": z_r.stderr,
            "checks": checks,
        }

    rows = _run_rows(cfg, PARTITION, row)
    summary = _summary(
        cfg,
        spectrum,
        kernel,
        started,
        z_r=z_r.to_json(),
        trend=_distance_trend(rows, PARTITION_FINAL_RATIO),
    )
    return _finish(PARTITION, cfg, rows, summary)


def run_dm_convergence(cfg, k=None, p=None):
    """‖k! T^{-k} Γ^(k) - γ^(k)‖_p along the grid; the kernel = 0 case is checked against its closed form."""
    started = time.monotonic()
    k = cfg.k if k is None else int(k)
    p = cfg.schatten_p if p is None else float(p)
    if k < 1:
        raise InvalidArgumentError(f"k must be positive, got {k}")
    spectrum = cfg.build_spectrum()
    kernel = cfg.build_kernel(spectrum.mode_count)
    free_case = kernel.is_zero()
    if free_case:
        gamma = classical_free_dm(spectrum, k)
        noise = 0.0
    else:
        gamma = gamma_k_mc(
            spectrum, kernel, k, cfg.n_samples, cfg.seed, threads=cfg.threads, convention=cfg.convention
        )
        noise = schatten_norm(gamma.stderr, p)
    number_limit = schatten_trace(spectrum, 1)

    def row(index, T, coupling):
        N_max = cfg.cutoff_at(spectrum, T)
        if k > N_max:
            raise CutoffError(f"k={k} exceeds N_max={N_max} at T={T:g}")
        pair = gibbs_pair(spectrum, kernel, T, coupling, N_max)
        tail = certify_tails(pair)
        quantum = reduced_density_matrix(pair.interacting, k).scaled(math.factorial(k) / T**k)
        distance = quantum.schatten_distance(gamma, p)
        number_law = _upper(reduced_density_matrix(pair.free, 1).trace / T, number_limit)
        checks = {
            "hermitian": _upper(quantum.hermitian_defect(), 0.0, lab_setting("HERMITIAN_TOL")),
            "positive": _lower(quantum.eigenvalues().min(), 0.0),
            "number_law": {**number_law, "gap": number_law["margin"]},
        }
        if free_case:
            exact = free_dm_distance(spectrum, T, k, p)
            checks["free_closed_form"] = _close(distance, exact, CLOSED_FORM_TOL * max(1.0, exact))
        return {**_base_row(pair, tail), "distance": distance, "distance_stderr": noise, "checks": checks}

    rows = _run_rows(cfg, DENSITY_MATRIX, row)
    # tr h^{-1} - tr Γ_0^(1)/T → 0 as T grows
    number_trend = trend([r["checks"]["number_law"]["gap"] if "number_law" in r["checks"] else None for r in rows])
    overall = _distance_trend(rows, DM_FINAL_RATIO)
    overall["passed"] = overall["passed"] and number_trend["passed"]
    summary = _summary(
        cfg,
        spectrum,
        kernel,
        started,
        k=k,
        schatten_p=p,
        gamma=gamma.matrix,
        gamma_meta=gamma.meta,
        number_limit=number_limit,
        number_trend=number_trend,
        trend=overall,
    )
    return _finish(DENSITY_MATRIX, cfg, rows, summary)


def run_husimi_convergence(cfg, functions=None):
    """tr[B_{1/T} Γ_λ] = ∫ b dμ^{1/T} against ∫ b dμ for a dictionary of bounded test functions on V."""
    started = time.monotonic()
    spectrum = cfg.build_spectrum()
    kernel = cfg.build_kernel(spectrum.mode_count)
    modes = cfg.husimi_modes
    functions = functions or default_test_functions()
    classical = {
        b.name: gibbs_expectation_mc(
            spectrum,
            kernel,
            lambda U, b=b: b(U[:, modes]),
            cfg.n_samples,
            cfg.seed,
            threads=cfg.threads,
            convention=cfg.convention,
        )
        for b in functions
    }

    def row(index, T, coupling):
        pair = gibbs_pair(spectrum, kernel, T, coupling, cfg.cutoff_at(spectrum, T))
        tail = certify_tails(pair)
        sampler = cfg.sampler(offset=index + 1)
        measure = HusimiMeasure(pair.interacting, modes, 1.0 / T, threads=1)
        totals = sample_pass(measure, sampler, weighted={b.name: b for b in functions})
        norm = totals["norm"].estimate(sampler.seed, RNG_ALGORITHM)
        checks = {"normalization": _close(norm.real, 1.0, SIGMAS * norm.stderr + BOUND_TOL)}
        gaps = {}
        for b in functions:
            quantum = totals[b.name].estimate(sampler.seed, RNG_ALGORITHM)
            target = classical[b.name]
            gaps[b.name] = {
                "quantum": quantum.real,
                "classical": target.real,
                "gap": abs(quantum.real - target.real),
                "stderr": math.hypot(quantum.stderr, target.stderr),
                "ess": quantum.ess,
            }
            checks[f"sup_norm:{b.name}"] = _upper(abs(quantum.real), b.sup_norm, 1e-12 * b.sup_norm)
        checks["gaps"] = gaps
        varying = [g for name, g in gaps.items() if not name.startswith("constant")] or list(gaps.values())
        worst = max(varying, key=lambda g: g["gap"])
        return {**_base_row(pair, tail), "distance": worst["gap"], "distance_stderr": worst["stderr"], "checks": checks}

    rows = _run_rows(cfg, HUSIMI, row)
    per_function = {}
    for b in functions:
        gaps = [r["checks"]["gaps"][b.name] if "gaps" in r.get("checks", {}) else None for r in rows]
        per_function[b.name] = trend([g and g["gap"] for g in gaps], [g and g["stderr"] for g in gaps])
    overall = _distance_trend(rows)
    overall["passed"] = overall["passed"] and all(t["passed"] for t in per_function.values())
    summary = _summary(
        cfg,
        spectrum,
        kernel,
        started,
        modes=modes,
        classical={name: est.to_json() for name, est in classical.items()},
        trends=per_function,
        trend=overall,
    )
    return _finish(HUSIMI, cfg, rows, summary)


def run_proof_step_suite(cfg):
    """Coherent lower bound, free semiclassics, entropy reformulation and tilted moments at every T."""
    started = time.monotonic()
    spectrum = cfg.build_spectrum()
    kernel = cfg.build_kernel(spectrum.mode_count)
    J = spectrum.mode_count
    log_eigen = float(np.sum(np.log(spectrum.as_array())))
    semiclassical_ceiling = float(np.sum(spectrum.as_array()))
    powers = cfg.tilted_powers(J)
    moment_k = int(cfg.tilted.get("k", 1))
    moment_limit = tilted_moment_limit(spectrum, powers, moment_k)
    moment_mc = tilted_moment_mc(spectrum, powers, moment_k, cfg.n_samples, cfg.seed, threads=cfg.threads)
    z_r = _relative_partition(cfg, spectrum, kernel)

    def row(index, T, coupling):
        pair = gibbs_pair(spectrum, kernel, T, coupling, cfg.cutoff_at(spectrum, T))
        tail = certify_tails(pair)
        checks = a_priori_checks(pair, spectrum, kernel)

        log_bound, log_stderr = coherent_lower_bound(
            spectrum, kernel, T, coupling, cfg.n_samples, cfg.seed, threads=1
        )
        checks["coherent_lower_bound"] = _lower(
            pair.interacting.log_partition, log_bound, SIGMAS * log_stderr + BOUND_TOL + tail
        )

        log_z0 = free_partition_closed_form(spectrum, T)
        # T^{-J} Z_0 Π λ_i = Π x/(1 - e^{-x}) with x = λ_i/T, squeezed between 1 and e^{Σλ/2T}
        semiclassics = math.exp(log_z0 - J * math.log(T) + log_eigen)
        ceiling = math.exp(semiclassical_ceiling / (2 * T))
        margin = min(semiclassics - 1.0, ceiling - semiclassics)
        checks["free_semiclassics"] = {
            "value": semiclassics,
            "lower": 1.0,
            "upper": ceiling,
            "margin": margin,
            "passed": margin >= -EXACT_TOL,
        }
        checks["free_log_partition"] = _close(pair.free.log_partition, log_z0, BOUND_TOL * max(1.0, abs(log_z0)))

        entropy = relative_entropy(pair.interacting, pair.free)
        energy = 0.0
        if pair.basis.N_max >= 2:
            energy = interaction_energy(reduced_density_matrix(pair.interacting, 2), kernel)
        lhs = -pair.log_ratio
        rhs = entropy + coupling / T * energy
        checks["entropy_reformulation"] = {
            **_close(lhs, rhs, BOUND_TOL * max(1.0, abs(lhs))),
            "relative_entropy": entropy,
            "interaction": energy,
        }

        closed = tilted_moment(spectrum, T, powers, moment_k)
        traced = tilted_moment_trace(pair.free, T, powers, moment_k)
        checks["tilted_moment_trace"] = _close(traced, closed, CLOSED_FORM_TOL * max(1.0, abs(closed)))
        checks["tilted_moment_limit"] = {
            "finite_t": closed,
            "limit": moment_limit,
            "gap": abs(closed - moment_limit),
        }
        checks["upper_bound_pair"] = {
            "quantum": lhs,
            "classical": -math.log(z_r.real),
            "coherent": log_z0 - log_bound,
        }
        return {
            **_base_row(pair, tail),
            "z_r": z_r.real,
            "z_r_stderr": z_r.stderr,
            "distance": abs(closed - moment_limit),
            "distance_stderr": 0.0,
            "checks": checks,
        }

    rows = _run_rows(cfg, PROOF_STEPS, row)
    limit_ok = moment_mc.agrees_with(moment_limit, SIGMAS, BOUND_TOL * max(1.0, moment_limit))
    if not limit_ok:
        logger.warning(
            "tilted moment limit disagrees with Gaussian sampling exact=%.6g mc=%.6g stderr=%.2e",
            moment_limit, moment_mc.real, moment_mc.stderr,
        )  # fmt: skip
    moments_trend = trend([r.get("distance") for r in rows])
    summary = _summary(
        cfg,
        spectrum,
        kernel,
        started,
        z_r=z_r.to_json(),
        tilted={
            "powers": list(powers),
            "k": moment_k,
            "limit": moment_limit,
            "mc": moment_mc.to_json(),
            "passed": bool(limit_ok),
        },
        trend={**moments_trend, "passed": moments_trend["passed"] and bool(limit_ok)},
    )
    return _finish(PROOF_STEPS, cfg, rows, summary)


RUNNERS = {
    PARTITION: run_partition_convergence,
    DENSITY_MATRIX: run_dm_convergence,
    HUSIMI: run_husimi_convergence,
    PROOF_STEPS: run_proof_step_suite,
}


def run_campaign(kind, cfg):
    try:
        runner = RUNNERS[kind]
    except KeyError:
        raise InvalidArgumentError(f"unknown campaign kind {kind!r}; expected one of {sorted(RUNNERS)}")
    logger.info("campaign start kind=%s temperatures=%s seed=%d", kind, cfg.temperatures, cfg.seed)
    return runner(cfg)
