from django.core.management.base import BaseCommand

from classical.measure import classical_variational_identity, gamma_k_mc, minimality_check, relative_partition_mc

from ._options import add_config_arguments, dump, lab_errors, load_config


class Command(BaseCommand):
    help = "Classical side of a run config: z_r, γ^(k), the variational identity and minimality against competitors."

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument("--k", type=int, help="order of γ^(k) (default: the config's k)")
        parser.add_argument("--samples", type=int, help="overrides the config's n_samples")

    def handle(self, *args, **options):
        with lab_errors():
            cfg = load_config(options)
            spectrum = cfg.build_spectrum()
            kernel = cfg.build_kernel(spectrum.mode_count)
            n = options["samples"] or cfg.n_samples
            k = options["k"] or cfg.k
            z_r = relative_partition_mc(
                spectrum, kernel, n, cfg.seed, threads=cfg.threads, convention=cfg.convention
            )
            gamma = gamma_k_mc(spectrum, kernel, k, n, cfg.seed, threads=cfg.threads, convention=cfg.convention)
            identity = classical_variational_identity(
                spectrum, kernel, n, cfg.seed, threads=cfg.threads, convention=cfg.convention
            )
            competitors = minimality_check(
                spectrum, kernel, n, cfg.seed, threads=cfg.threads, convention=cfg.convention
            )
        dump(
            self,
            {
                "z_r": z_r.to_json(),
                "gamma": {"k": k, "matrix": gamma.matrix, "stderr": gamma.stderr, **gamma.meta},
                "variational_identity": {**identity.to_json(), "holds": identity.holds()},
                "minimality": competitors,
            },
        )
