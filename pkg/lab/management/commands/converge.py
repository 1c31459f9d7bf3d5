import logging

from django.core.management.base import BaseCommand

from lab.campaigns import run_campaign
from lab.constants import CAMPAIGN_KINDS, DENSITY_MATRIX
from lab.models import Campaign
from lab.reports import write_report

from ._options import add_config_arguments, lab_errors, load_config

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = "Run a convergence campaign over the config's temperature grid and write CSV/JSON (and gnuplot) reports."

    def add_arguments(self, parser):
        parser.add_argument("kind", choices=[kind for kind, _ in CAMPAIGN_KINDS])
        add_config_arguments(parser)
        parser.add_argument("--k", type=int, help="density-matrix order for `converge dm`")
        parser.add_argument("--gnuplot", action="store_true", help="also write a gnuplot .dat file")
        parser.add_argument("--no-store", action="store_true", help="do not save the campaign in the database")

    def handle(self, *args, **options):
        kind = options["kind"]
        with lab_errors():
            cfg = load_config(options)
            if options["k"] is not None:
                if kind != DENSITY_MATRIX:
                    logger.warning("--k ignored kind=%s", kind)
                cfg.k = options["k"]
            report = run_campaign(kind, cfg)
        paths = write_report(report, cfg.output.get("dir"), options["gnuplot"] or cfg.output.get("gnuplot", False))
        if not options["no_store"]:
            campaign = Campaign.objects.create_from_report(report)
            self.stdout.write(f"stored campaign id={campaign.id}")
        for label, path in paths.items():
            self.stdout.write(f"{label}: {path}")
        trend = report.summary.get("trend", {})
        message = f"{kind}: {len(report.rows)} rows, decreasing={trend.get('decreasing')}, passed={report.passed}"
        self.stdout.write(self.style.SUCCESS(message) if report.passed else self.style.WARNING(message))
