from django.core.management.base import BaseCommand

from fock.kernels import certify, trace_against_inverse

from ._options import add_config_arguments, dump, lab_errors, load_config


class Command(BaseCommand):
    help = "Build and certify the two-body kernel of a run config (symmetry, positivity, tr[w h^-1⊗h^-1])."

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument("--entries", action="store_true", help="also print the nonzero W_(ab),(cd) entries")

    def handle(self, *args, **options):
        with lab_errors():
            cfg = load_config(options)
            spectrum = cfg.build_spectrum()
            kernel = certify(cfg.build_kernel(spectrum.mode_count))
            payload = {
                "label": kernel.label,
                "modes": kernel.J,
                "symmetry_defect": kernel.symmetry_defect(),
                "min_eigenvalue": kernel.min_eigenvalue(),
                "psd_certificate": kernel.psd_certificate,
                "trace_against_inverse": trace_against_inverse(kernel, spectrum),
            }
            if options["entries"]:
                payload["entries"] = kernel.to_json()["entries"]
        dump(self, payload)
