"""Flags and error translation shared by the lab management commands."""

import json
from contextlib import contextmanager
from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError
from rest_framework.exceptions import ValidationError

from common.exceptions import LabError
from lab.reports import clean
from lab.serializers import parse_run_config


def default_config_path():
    return Path(settings.BASE_DIR) / "runs" / "default.json"


def add_config_arguments(parser):
    parser.add_argument("--config", help="RunConfig JSON file (default: runs/default.json)")
    parser.add_argument("--seed", type=int, help="overrides the config seed")
    parser.add_argument("--threads", type=int, help="overrides the config thread count")
    parser.add_argument("--out", help="output directory (overrides output.dir)")


def load_config(options):
    """RunConfig from --config with --seed/--threads/--out applied."""
    path = options.get("config") or default_config_path()
    cfg = parse_run_config(Path(path))
    return cfg.with_overrides(seed=options.get("seed"), threads=options.get("threads"), out=options.get("out"))


@contextmanager
def lab_errors():
    """LabError and DRF ValidationError surface as CommandError (exit status 1, no traceback)."""
    try:
        yield
    except ValidationError as exc:
        raise CommandError(f"invalid run config: {json.dumps(exc.detail, ensure_ascii=False, default=str)}")
    except LabError as exc:
        raise CommandError(f"{type(exc).__name__}: {exc}")


def dump(command, payload):
    command.stdout.write(json.dumps(clean(payload), indent=2, ensure_ascii=False))
