from django.core.management.base import BaseCommand

from spectra.spectrum import schatten_trace

from ._options import add_config_arguments, dump, lab_errors, load_config


class Command(BaseCommand):
    help = "Print the one-body spectrum of a run config with its truncated traces tr h^{-p}."

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument("--p", type=float, nargs="+", default=[1.0, 2.0], help="Schatten exponents")

    def handle(self, *args, **options):
        with lab_errors():
            cfg = load_config(options)
            spectrum = cfg.build_spectrum()
            traces = {f"{p:g}": schatten_trace(spectrum, p) for p in options["p"]}
        dump(
            self,
            {
                "family": spectrum.family_tag,
                "modes": spectrum.mode_count,
                "eigenvalues": spectrum.as_array(),
                "trace_inverse_powers": traces,
            },
        )
