from django.conf import settings

# settings가 없을 때(스크립트에서 직접 import) 쓰는 기본값
DEFAULTS = {
    "MAX_BASIS_SIZE": 5_000_000,
    "DENSE_BLOCK_LIMIT": 10_000,
    "THREADS": 4,
    "DEFAULT_SEED": 20240611,
    "OUTPUT_DIR": "out",
    "INTERACTION_CONVENTION": "half",
    "ESS_FLOOR": 0.1,
    "COHERENT_GUARD": 0.25,
    "FREE_TAIL_THRESHOLD": 1e-10,
    "INTERACTING_TAIL_THRESHOLD": 1e-8,
    "HERMITIAN_TOL": 1e-12,
    "PSD_TOL": 1e-10,
    "MC_BATCH_SIZE": 65536,
}


def lab_setting(name, override=None):
    """Return ``override`` when given, else the MEANFIELD_LAB value (or the built-in default)."""
    if override is not None:
        return override
    if name not in DEFAULTS:
        raise KeyError(f"unknown lab setting {name!r}")
    configured = getattr(settings, "MEANFIELD_LAB", {}) if settings.configured else {}
    return configured.get(name, DEFAULTS[name])
