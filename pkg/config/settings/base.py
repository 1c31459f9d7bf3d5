"""
Django settings for the mean-field Gibbs laboratory.

Shared by dev.py and prod.py. Lab-wide numerical knobs live in MEANFIELD_LAB and can be
overridden through LAB_* environment variables (see envs/.env.example).
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent.parent

load_dotenv(BASE_DIR / "envs" / ".env")

# SECURITY WARNING: keep the secret key used in production secret!
SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "django-insecure-meanfield-lab-local-key")

# SECURITY WARNING: don't run with debug turned on in production!
DEBUG = True

ALLOWED_HOSTS = []

# Application definition

INSTALLED_APPS = [
    "django.contrib.admin",
    "django.contrib.auth",
    "django.contrib.contenttypes",
    "django.contrib.sessions",
    "django.contrib.messages",
    "django.contrib.staticfiles",
    "rest_framework",
    "django_filters",
    "common",
    "spectra",
    "fock",
    "gibbs",
    "husimi",
    "classical",
    "lab",
]

MIDDLEWARE = [
    "django.middleware.security.SecurityMiddleware",
    "django.contrib.sessions.middleware.SessionMiddleware",
    "django.middleware.common.CommonMiddleware",
    "django.middleware.csrf.CsrfViewMiddleware",
    "django.contrib.auth.middleware.AuthenticationMiddleware",
    "django.contrib.messages.middleware.MessageMiddleware",
    "django.middleware.clickjacking.XFrameOptionsMiddleware",
]

ROOT_URLCONF = "config.urls"

TEMPLATES = [
    {
        "BACKEND": "django.template.backends.django.DjangoTemplates",
        "DIRS": [],
        "APP_DIRS": True,
        "OPTIONS": {
            "context_processors": [
                "django.template.context_processors.request",
                "django.contrib.auth.context_processors.auth",
                "django.contrib.messages.context_processors.messages",
            ],
        },
    },
]

WSGI_APPLICATION = "config.wsgi.application"


# Database
# https://docs.djangoproject.com/en/5.2/ref/settings/#databases

DATABASES = {
    "default": {
        "ENGINE": "django.db.backends.sqlite3",
        "NAME": BASE_DIR / "db.sqlite3",
    }
}


# Internationalization

LANGUAGE_CODE = "en-us"

TIME_ZONE = "UTC"

USE_I18N = True

USE_TZ = True


# Static files (CSS, JavaScript, Images)

STATIC_URL = "static/"
STATIC_ROOT = BASE_DIR / "staticfiles"

DEFAULT_AUTO_FIELD = "django.db.models.BigAutoField"

APPEND_SLASH = False

REST_FRAMEWORK = {
    "DEFAULT_FILTER_BACKENDS": ["django_filters.rest_framework.DjangoFilterBackend"],
    "DEFAULT_PERMISSION_CLASSES": ["rest_framework.permissions.AllowAny"],
    "DEFAULT_PAGINATION_CLASS": "rest_framework.pagination.PageNumberPagination",
    "PAGE_SIZE": 100,
}

MEANFIELD_LAB = {
    "MAX_BASIS_SIZE": int(os.getenv("LAB_MAX_BASIS_SIZE", "5000000")),  # 상태 수 상한
    "DENSE_BLOCK_LIMIT": int(os.getenv("LAB_DENSE_BLOCK_LIMIT", "10000")),
    "THREADS": int(os.getenv("LAB_THREADS", "4")),
    "DEFAULT_SEED": int(os.getenv("LAB_DEFAULT_SEED", "20240611")),
    "OUTPUT_DIR": os.getenv("LAB_OUTPUT_DIR", str(BASE_DIR / "out")),
    "INTERACTION_CONVENTION": os.getenv("LAB_INTERACTION_CONVENTION", "half"),
    "ESS_FLOOR": float(os.getenv("LAB_ESS_FLOOR", "0.1")),
    "COHERENT_GUARD": float(os.getenv("LAB_COHERENT_GUARD", "0.25")),  # |u|^2 <= guard * N_max
    "FREE_TAIL_THRESHOLD": float(os.getenv("LAB_FREE_TAIL_THRESHOLD", "1e-10")),
    "INTERACTING_TAIL_THRESHOLD": float(os.getenv("LAB_INTERACTING_TAIL_THRESHOLD", "1e-8")),
    "HERMITIAN_TOL": 1e-12,
    "PSD_TOL": 1e-10,
    "MC_BATCH_SIZE": int(os.getenv("LAB_MC_BATCH_SIZE", "65536")),
}

LAB_LOG_LEVEL = os.getenv("LAB_LOG_LEVEL", "INFO")

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "verbose": {
            "format": "{asctime} {levelname} {name} {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "verbose",
        },
    },
    "root": {"handlers": ["console"], "level": "WARNING"},
    "loggers": {
        app: {"handlers": ["console"], "level": LAB_LOG_LEVEL, "propagate": False}
        for app in ("common", "spectra", "fock", "gibbs", "husimi", "classical", "lab")
    },
}
