"""
WSGI entry point serving the read-only campaign API (gunicorn config.wsgi:application).

Campaigns themselves run through ``manage.py converge``, never inside a request.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings.prod")

application = get_wsgi_application()
