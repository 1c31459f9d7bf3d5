import csv
import json
import math
import tempfile
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from django.urls import reverse
from rest_framework import status
from rest_framework.exceptions import ValidationError
from rest_framework.test import APITestCase

from classical.measure import SECOND_HALF_OFFSET, relative_partition_mc
from common.exceptions import CutoffError, InvalidArgumentError
from fock.kernels import trace_against_inverse
from gibbs.density_matrices import reduced_density_matrix
from gibbs.free import free_dm_distance, free_sector_law
from spectra.spectrum import custom_spectrum

from .campaigns import (
    gibbs_pair,
    run_campaign,
    run_dm_convergence,
    run_husimi_convergence,
    run_partition_convergence,
    run_proof_step_suite,
)
from .checks import check_names, run_checks
from .config import RunConfig
from .constants import BATTERY_DRAWS, CSV_COLUMNS, DENSITY_MATRIX, PARTITION
from .models import Campaign, ReportRow
from .reports import ConvergenceReport, clean, trend, write_report
from .serializers import parse_run_config


def tiny_payload(**overrides):
    payload = {
        "spectrum": {"family": "custom", "eigenvalues": [1.0]},
        "kernel": {"type": "delta"},
        "temperatures": [1.0, 2.0],
        "n_samples": 20_000,
        "seed": 11,
        "threads": 1,
        "husimi": {"modes": [0], "n_samples": 20_000},
    }
    payload.update(overrides)
    return payload


def tiny_config(**overrides):
    return parse_run_config(tiny_payload(**overrides))


def fake_report():
    rows = [
        {
            "temperature": T,
            "coupling": 1.0 / T,
            "n_max": 10 * int(T),
            "log_z_lambda": -0.1,
            "log_z_free": 0.5,
            "ratio": 0.9,
            "z_r": 0.91,
            "z_r_stderr": 1e-3,
            "distance": 0.1 / T,
            "distance_stderr": 1e-3,
            "tail_certificate": 1e-11,
            "checks": {"partition_sandwich": {"margin": 0.1, "passed": True}},
            "passed": T < 8,
        }
        for T in (2.0, 4.0, 8.0)
    ]
    config = {"name": "fake", "seed": 5, "spectrum": {"family": "custom", "eigenvalues": [1.0, 4.0]}}
    return ConvergenceReport(PARTITION, config, rows, {"mode_count": 2, "trend": trend([r["distance"] for r in rows])})


class RunConfigSerializerTests(SimpleTestCase):
    def test_minimal_payload(self):
        cfg = parse_run_config({"spectrum": {"family": "dirichlet_interval", "modes": 2}, "temperatures": [2, 4]})
        self.assertIsInstance(cfg, RunConfig)
        self.assertEqual(cfg.kernel["type"], "zero")
        self.assertEqual(cfg.temperatures, [2.0, 4.0])
        self.assertIsNotNone(cfg.seed)
        self.assertEqual(cfg.husimi["modes"], [0])

    def test_json_string_and_custom_modes(self):
        cfg = parse_run_config(json.dumps(tiny_payload(spectrum={"family": "custom", "eigenvalues": [4.0, 1.0]})))
        self.assertEqual(cfg.spectrum["modes"], 2)
        self.assertEqual(cfg.build_spectrum().eigenvalues, (1.0, 4.0))

    def test_temperatures_must_ascend(self):
        with self.assertRaises(ValidationError) as ctx:
            parse_run_config(tiny_payload(temperatures=[4.0, 2.0]))
        self.assertIn("temperatures", ctx.exception.detail)

    def test_rejects_empty_and_negative_grids(self):
        for grid in ([], [-1.0, 2.0]):
            with self.assertRaises(ValidationError):
                parse_run_config(tiny_payload(temperatures=grid))

    def test_coupling_product_is_bounded(self):
        with self.assertRaises(ValidationError) as ctx:
            parse_run_config(tiny_payload(coupling={"rule": "constant", "value": 10.0}, temperatures=[2.0, 16.0]))
        self.assertIn("coupling", ctx.exception.detail)

    def test_fixed_cutoff_below_k(self):
        with self.assertRaises(ValidationError):
            parse_run_config(tiny_payload(k=3, cutoff={"policy": "fixed", "n_max": 2}))

    def test_fixed_cutoff_needs_n_max(self):
        with self.assertRaises(ValidationError):
            parse_run_config(tiny_payload(cutoff={"policy": "fixed"}))

    def test_modes_must_fit(self):
        with self.assertRaises(ValidationError):
            parse_run_config(tiny_payload(husimi={"modes": [1]}))
        with self.assertRaises(ValidationError):
            parse_run_config(tiny_payload(kernel={"type": "rank_one", "modes": [0, 1]}))
        with self.assertRaises(ValidationError):
            parse_run_config(tiny_payload(tilted={"powers": [1, 0], "k": 1}))

    def test_seed_range(self):
        with self.assertRaises(ValidationError):
            parse_run_config(tiny_payload(seed=-1))
        with self.assertRaises(ValidationError):
            parse_run_config(tiny_payload(seed=2**63))

    def test_bad_json_and_missing_file(self):
        with self.assertRaises(ValidationError):
            parse_run_config("{not json")
        with self.assertRaises(ValidationError):
            parse_run_config(Path("/nonexistent/run.json"))


class RunConfigTests(SimpleTestCase):
    def test_coupling_rules(self):
        self.assertAlmostEqual(tiny_config().coupling_at(4.0), 0.25)
        cfg = tiny_config(coupling={"rule": "constant", "value": 0.5})
        self.assertEqual(cfg.coupling_at(4.0), 0.5)

    def test_cutoff_policies(self):
        spectrum = custom_spectrum([1.0])
        self.assertEqual(tiny_config(cutoff={"policy": "fixed", "n_max": 7}).cutoff_at(spectrum, 2.0), 7)
        adaptive = tiny_config()
        self.assertLess(adaptive.cutoff_at(spectrum, 1.0), adaptive.cutoff_at(spectrum, 2.0))

    def test_default_tilted_powers(self):
        self.assertEqual(tiny_config().tilted_powers(3), (1, 0, 0))

    def test_overrides(self):
        cfg = tiny_config().with_overrides(seed=99, out="/tmp/x")
        self.assertEqual(cfg.seed, 99)
        self.assertEqual(cfg.threads, 1)
        self.assertEqual(cfg.output["dir"], "/tmp/x")
        self.assertEqual(cfg.sampler(offset=2).seed, 101)


class ReportTests(SimpleTestCase):
    def test_trend(self):
        self.assertTrue(trend([3.0, 2.0, 1.0])["passed"])
        self.assertFalse(trend([1.0, 2.0])["decreasing"])
        # a rise hidden inside the noise still counts as decreasing
        self.assertTrue(trend([1.0, 1.01], [0.01, 0.01])["decreasing"])
        self.assertFalse(trend([3.0, 2.0], max_final_ratio=0.5)["passed"])
        self.assertTrue(trend([None, 1.0])["passed"])

    def test_clean(self):
        payload = clean({"a": np.float64(1.5), "b": complex(1, 2), "c": math.inf, "d": np.arange(2), 3: np.bool_(True)})
        self.assertEqual(payload, {"a": 1.5, "b": [1.0, 2.0], "c": "inf", "d": [0, 1], "3": True})

    def test_passed_needs_rows_and_trend(self):
        report = fake_report()
        self.assertFalse(report.passed)
        for row in report.rows:
            row["passed"] = True
        self.assertTrue(report.passed)
        report.summary["trend"]["passed"] = False
        self.assertFalse(report.passed)

    def test_write_report(self):
        report = fake_report()
        with tempfile.TemporaryDirectory() as tmp:
            paths = write_report(report, tmp, gnuplot=True)
            self.assertEqual(set(paths), {"csv", "json", "dat"})
            with open(paths["csv"], encoding="utf-8") as handle:
                rows = list(csv.DictReader(handle))
            self.assertEqual(list(rows[0]), CSV_COLUMNS)
            self.assertEqual(len(rows), 3)
            payload = json.loads(Path(paths["json"]).read_text(encoding="utf-8"))
            self.assertEqual(payload["kind"], PARTITION)
            self.assertEqual(len(payload["rows"]), 3)
            self.assertEqual(len(Path(paths["dat"]).read_text().splitlines()), 4)
            self.assertEqual(paths["csv"].name, "partition-5.csv")


class PartitionCampaignTests(SimpleTestCase):
    def test_free_gas_is_trivial(self):
        report = run_partition_convergence(tiny_config(kernel={"type": "zero"}))
        self.assertTrue(report.passed)
        for row in report.rows:
            self.assertEqual(row["ratio"], 1.0)
            self.assertEqual(row["z_r"], 1.0)
            self.assertEqual(row["distance"], 0.0)

    def test_bounds_hold_with_interaction(self):
        report = run_partition_convergence(tiny_config())
        self.assertEqual(len(report.rows), 2)
        for row in report.rows:
            self.assertTrue(row["passed"], row["checks"])
            self.assertLess(row["ratio"], 1.0)
            self.assertGreater(row["ratio"], 0.0)
            self.assertTrue(0 < row["z_r"] <= 1)
            self.assertIn("number_moment_4", row["checks"])
            self.assertGreaterEqual(row["checks"]["partition_sandwich"]["margin"], -1e-10)
        self.assertEqual(report.summary["mode_count"], 1)
        self.assertIn("trend", report.summary)

    def test_bound_values_are_recomputed(self):
        cfg = tiny_config(temperatures=[2.0, 4.0])
        spectrum = cfg.build_spectrum()
        kernel = cfg.build_kernel(1)
        tau = trace_against_inverse(kernel, spectrum)
        self.assertGreater(tau, 0.0)
        report = run_partition_convergence(cfg)
        for row in report.rows:
            T, lam, checks = row["temperature"], row["coupling"], row["checks"]
            ratio = math.exp(row["log_z_lambda"] - row["log_z_free"])

            self.assertAlmostEqual(checks["interaction_energy"]["bound"], T * T * tau, places=12)
            self.assertAlmostEqual(checks["one_body_dominated"]["scale"], 2 * T * (1 + lam * T * tau), places=12)
            pair = gibbs_pair(spectrum, kernel, T, lam, row["n_max"])
            gamma1 = reduced_density_matrix(pair.interacting, 1).matrix
            gap = np.linalg.eigvalsh(2 * T * (1 + lam * T * tau) * np.diag(1.0 / spectrum.as_array()) - gamma1).min()
            self.assertAlmostEqual(checks["one_body_dominated"]["value"], gap, places=10)

            # free moments from the exact sector law, renormalised on n <= N_max
            law = free_sector_law(spectrum, T, row["n_max"])
            law = law / law.sum()
            n = np.arange(row["n_max"] + 1)
            for k in range(1, 5):
                free_moment = float(np.dot(law, (n / T) ** k))
                bound = checks[f"number_moment_{k}"]["bound"]
                self.assertTrue(math.isclose(bound, free_moment / ratio, rel_tol=1e-8), (k, bound, free_moment))
                # Z_0/Z_λ < e^{λTτ}: the checked bound is the sharper one
                self.assertLess(bound, math.exp(lam * T * tau) * free_moment)
                self.assertTrue(checks[f"number_moment_{k}"]["passed"])

    def test_rows_are_reproducible(self):
        cfg = tiny_config(temperatures=[1.0])
        first, second = run_partition_convergence(cfg), run_partition_convergence(cfg)
        self.assertEqual(first.rows[0]["z_r"], second.rows[0]["z_r"])
        self.assertEqual(first.rows[0]["log_z_lambda"], second.rows[0]["log_z_lambda"])

    def test_tail_certificate_fails_the_row(self):
        cfg = RunConfig(
            spectrum={"family": "custom", "eigenvalues": [1.0]},
            kernel={"type": "zero"},
            temperatures=[4.0],
            cutoff={"policy": "fixed", "n_max": 5},
            n_samples=1000,
            threads=1,
        )
        report = run_partition_convergence(cfg)
        row = report.rows[0]
        self.assertFalse(row["passed"])
        self.assertIn("error", row["checks"])
        self.assertGreater(row["tail_certificate"], 1e-10)
        self.assertFalse(report.passed)


class DensityMatrixCampaignTests(SimpleTestCase):
    def test_free_case_matches_closed_form(self):
        cfg = tiny_config(kernel={"type": "zero"}, temperatures=[1.0, 4.0])
        report = run_dm_convergence(cfg, k=1)
        self.assertTrue(report.passed)
        spectrum = cfg.build_spectrum()
        for row in report.rows:
            self.assertTrue(row["checks"]["free_closed_form"]["passed"])
            self.assertAlmostEqual(row["distance"], free_dm_distance(spectrum, row["temperature"], 1), places=6)
            self.assertEqual(row["distance_stderr"], 0.0)

    def test_interacting_rows(self):
        report = run_dm_convergence(tiny_config(), k=1)
        for row in report.rows:
            self.assertTrue(row["checks"]["number_law"]["passed"])
            self.assertTrue(row["checks"]["positive"]["passed"])
            self.assertGreater(row["distance_stderr"], 0.0)
        self.assertEqual(report.summary["k"], 1)

    def test_number_law_gap_shrinks(self):
        cfg = tiny_config(kernel={"type": "zero"}, temperatures=[1.0, 2.0, 4.0])
        report = run_dm_convergence(cfg, k=1)
        gaps = [row["checks"]["number_law"]["gap"] for row in report.rows]
        for T, gap in zip(cfg.temperatures, gaps):
            # single mode λ=1: 1 - 1/(T(e^{1/T} - 1))
            self.assertAlmostEqual(gap, 1.0 - 1.0 / (T * math.expm1(1.0 / T)), places=6)
        self.assertGreater(gaps[0], gaps[1])
        self.assertGreater(gaps[1], gaps[2])
        self.assertGreater(gaps[2], 0.0)
        self.assertTrue(report.summary["number_trend"]["passed"])
        self.assertTrue(report.summary["trend"]["passed"])

    def test_schatten_exponent(self):
        cfg = tiny_config(kernel={"type": "zero"}, schatten_p=2.0, temperatures=[2.0])
        report = run_dm_convergence(cfg)
        self.assertAlmostEqual(
            report.rows[0]["distance"], free_dm_distance(cfg.build_spectrum(), 2.0, 1, 2.0), places=6
        )

    def test_k_above_cutoff(self):
        cfg = RunConfig(
            spectrum={"family": "custom", "eigenvalues": [1.0]},
            kernel={"type": "zero"},
            temperatures=[1.0],
            cutoff={"policy": "fixed", "n_max": 1},
            threads=1,
        )
        with self.assertRaises(CutoffError):
            run_dm_convergence(cfg, k=2)


class HusimiCampaignTests(SimpleTestCase):
    def test_constant_function_has_no_gap(self):
        report = run_husimi_convergence(tiny_config(kernel={"type": "zero"}))
        for row in report.rows:
            gap = row["checks"]["gaps"]["constant-1"]
            self.assertAlmostEqual(gap["quantum"], 1.0, places=12)
            self.assertAlmostEqual(gap["gap"], 0.0, places=12)
            for name, check in row["checks"].items():
                if name.startswith("sup_norm"):
                    self.assertTrue(check["passed"])
        self.assertEqual(set(report.summary["trends"]), {"constant-1", "gaussian-1", "gaussian-4", "clipped-|u0|^2-4"})


class ProofStepTests(SimpleTestCase):
    def test_exact_steps(self):
        report = run_proof_step_suite(tiny_config())
        for row in report.rows:
            checks = row["checks"]
            for name in ("entropy_reformulation", "free_semiclassics", "free_log_partition", "tilted_moment_trace"):
                self.assertTrue(checks[name]["passed"], (name, checks[name]))
            self.assertTrue(checks["coherent_lower_bound"]["passed"])
            self.assertGreater(checks["upper_bound_pair"]["quantum"], 0.0)
        distances = [row["distance"] for row in report.rows]
        self.assertLess(distances[1], distances[0])

    def test_dispatch(self):
        with self.assertRaises(InvalidArgumentError):
            run_campaign("nope", tiny_config())


class InvariantBatteryTests(SimpleTestCase):
    def test_fast_checks_pass(self):
        names = ["ccr", "wick_identity", "sector_dimensions", "rdm_two_routes", "coherent_eigenrelation"]
        results = run_checks(seed=3, names=names)
        self.assertEqual([r.name for r in results], names)
        for result in results:
            self.assertTrue(result.passed, result)

    def test_entropy_and_variational_checks(self):
        self.assertGreaterEqual(BATTERY_DRAWS, 100)
        names = ["relative_entropy_positive", "localization_monotone", "gibbs_variational_principle"]
        for result in run_checks(seed=3, names=names):
            self.assertTrue(result.passed, result)

    def test_registry(self):
        self.assertIn("gibbs_variational_principle", check_names())
        self.assertEqual(len(check_names()), len(set(check_names())))


class CampaignStorageTests(TestCase):
    def test_create_from_report(self):
        campaign = Campaign.objects.create_from_report(fake_report())
        self.assertEqual(campaign.kind, PARTITION)
        self.assertEqual(campaign.seed, 5)
        self.assertEqual(campaign.mode_count, 2)
        self.assertFalse(campaign.passed)
        self.assertEqual(campaign.rows.count(), 3)
        row = campaign.rows.get(temperature=2.0)
        self.assertEqual(row.n_max, 20)
        self.assertTrue(row.checks["partition_sandwich"]["passed"])

    def test_nonfinite_values_are_stored_as_null(self):
        report = fake_report()
        report.rows[0]["distance"] = math.nan
        campaign = Campaign.objects.create_from_report(report)
        self.assertIsNone(campaign.rows.get(temperature=2.0).distance)


class CampaignApiTests(APITestCase):
    def setUp(self):
        self.campaign = Campaign.objects.create_from_report(fake_report())

    def test_list_campaigns(self):
        response = self.client.get(reverse("campaign-list"))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual(response.data["count"], 1)
        self.assertEqual(response.data["results"][0]["row_count"], 3)

    def test_detail_has_rows(self):
        response = self.client.get(reverse("campaign-detail", args=[self.campaign.id]))
        self.assertEqual(response.status_code, status.HTTP_200_OK)
        self.assertEqual([row["temperature"] for row in response.data["rows"]], [2.0, 4.0, 8.0])

    def test_row_filters(self):
        response = self.client.get(reverse("row-list"), {"min_temperature": 3, "kind": PARTITION})
        self.assertEqual([row["temperature"] for row in response.data["results"]], [4.0, 8.0])
        response = self.client.get(reverse("row-list"), {"passed": "false"})
        self.assertEqual(response.data["count"], 1)
        response = self.client.get(reverse("row-list"), {"kind": DENSITY_MATRIX})
        self.assertEqual(response.data["count"], 0)

    def test_read_only(self):
        response = self.client.post(reverse("campaign-list"), {"kind": PARTITION}, format="json")
        self.assertEqual(response.status_code, status.HTTP_405_METHOD_NOT_ALLOWED)
        self.assertEqual(ReportRow.objects.count(), 3)


class CommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.config = Path(self.tmp.name) / "run.json"
        self.config.write_text(json.dumps(tiny_payload(kernel={"type": "zero"})), encoding="utf-8")

    def run_command(self, *args):
        with open(Path(self.tmp.name) / "stdout.txt", "w+", encoding="utf-8") as out:
            call_command(*args, stdout=out)
            out.seek(0)
            return out.read()

    def test_converge_stores_and_writes(self):
        output = self.run_command("converge", "partition", "--config", str(self.config), "--out", self.tmp.name)
        self.assertIn("stored campaign", output)
        self.assertEqual(Campaign.objects.count(), 1)
        self.assertTrue((Path(self.tmp.name) / "partition-11.csv").exists())

    def test_converge_no_store_and_seed_override(self):
        self.run_command(
            "converge", "dm", "--config", str(self.config), "--out", self.tmp.name, "--seed", "12", "--no-store"
        )
        self.assertEqual(Campaign.objects.count(), 0)
        self.assertTrue((Path(self.tmp.name) / "dm-12.json").exists())

    def test_invalid_config(self):
        self.config.write_text(json.dumps(tiny_payload(temperatures=[2.0, 1.0])), encoding="utf-8")
        with self.assertRaises(CommandError):
            self.run_command("converge", "partition", "--config", str(self.config))

    def test_inspection_commands(self):
        spectrum = json.loads(self.run_command("spectrum", "--config", str(self.config)))
        self.assertEqual(spectrum["eigenvalues"], [1.0])
        kernel = json.loads(self.run_command("kernel", "--config", str(self.config)))
        self.assertEqual(kernel["trace_against_inverse"], 0.0)
        gibbs = json.loads(self.run_command("gibbs", "--config", str(self.config), "-T", "2"))
        self.assertEqual(gibbs["ratio"], 1.0)

    def test_classical_follows_config_convention(self):
        self.config.write_text(json.dumps(tiny_payload(convention="full")), encoding="utf-8")
        with self.settings(MEANFIELD_LAB={"INTERACTION_CONVENTION": "half"}):
            payload = json.loads(self.run_command("classical", "--config", str(self.config)))
        cfg = tiny_config(convention="full")
        spectrum = cfg.build_spectrum()
        kernel = cfg.build_kernel(1)
        z_r = relative_partition_mc(spectrum, kernel, 20_000, 11, convention="full")
        second_half = relative_partition_mc(
            spectrum, kernel, 10_000, 11, offset=SECOND_HALF_OFFSET, convention="full"
        )
        self.assertAlmostEqual(payload["z_r"]["value"], z_r.real, places=12)
        self.assertAlmostEqual(payload["variational_identity"]["log_z_r"], math.log(second_half.real), places=12)
        for row in payload["minimality"]:
            self.assertAlmostEqual(row["bound"], -math.log(z_r.real), places=12)

    def test_check_lab(self):
        output = self.run_command("check_lab", "--only", "ccr", "sector_dimensions")
        self.assertIn("ccr", output)
