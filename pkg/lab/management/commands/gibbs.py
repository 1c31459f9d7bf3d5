from django.core.management.base import BaseCommand, CommandError

from gibbs.density_matrices import reduced_density_matrix
from gibbs.free import free_partition_closed_form
from lab.campaigns import certify_tails, gibbs_pair

from ._options import add_config_arguments, dump, lab_errors, load_config


class Command(BaseCommand):
    help = "Free and interacting Gibbs states at one temperature: log Z, ratio, Γ^(1), N moments, tails."

    def add_arguments(self, parser):
        add_config_arguments(parser)
        parser.add_argument("--temperature", "-T", type=float, help="default: the first temperature of the grid")
        parser.add_argument("--coupling", type=float, help="default: λ(T) from the config's coupling rule")
        parser.add_argument("--n-max", type=int, help="default: the config's cutoff policy")

    def handle(self, *args, **options):
        with lab_errors():
            cfg = load_config(options)
            T = options["temperature"] or cfg.temperatures[0]
            if T <= 0:
                raise CommandError(f"temperature must be positive, got {T}")
            coupling = cfg.coupling_at(T) if options["coupling"] is None else options["coupling"]
            spectrum = cfg.build_spectrum()
            kernel = cfg.build_kernel(spectrum.mode_count)
            N_max = options["n_max"] or cfg.cutoff_at(spectrum, T)
            pair = gibbs_pair(spectrum, kernel, T, coupling, N_max, threads=cfg.threads)
            tail = certify_tails(pair)
            payload = {
                "temperature": T,
                "coupling": coupling,
                "n_max": N_max,
                "basis_size": pair.basis.size,
                "log_z_lambda": pair.interacting.log_partition,
                "log_z_free": pair.free.log_partition,
                "log_z_free_closed_form": free_partition_closed_form(spectrum, T),
                "ratio": pair.ratio,
                "tail_certificate": tail,
                "one_body": reduced_density_matrix(pair.interacting, 1).matrix if N_max >= 1 else None,
                "number_moments": [pair.interacting.number_moment(k, scale=T) for k in range(1, 5)],
                "entropy": pair.interacting.entropy(),
            }
        dump(self, payload)
