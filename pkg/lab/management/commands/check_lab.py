import json

from django.core.management.base import BaseCommand, CommandError

from lab.checks import check_names, run_checks


class Command(BaseCommand):
    help = "Run the fast invariant battery (CCR, Wick, closed forms, entropy inequalities, a-priori bounds)."

    def add_arguments(self, parser):
        parser.add_argument("--seed", type=int)
        parser.add_argument("--only", nargs="+", choices=check_names(), help="run only these checks")
        parser.add_argument("--json", action="store_true", help="print the results as JSON")

    def handle(self, *args, **options):
        results = run_checks(seed=options["seed"], names=options["only"])
        if options["json"]:
            self.stdout.write(json.dumps([r.to_json() for r in results], indent=2, default=str))
        else:
            for r in results:
                status = self.style.SUCCESS("ok") if r.passed else self.style.ERROR("FAIL")
                self.stdout.write(f"{status:>6}  {r.name:<30} {r.value:.3e}  (tol {r.tolerance:.1e}) {r.detail}")
        failed = [r.name for r in results if not r.passed]
        if failed:
            raise CommandError(f"{len(failed)} invariant check(s) failed: {', '.join(failed)}")
