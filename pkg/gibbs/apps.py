from django.apps import AppConfig


class GibbsConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "gibbs"
