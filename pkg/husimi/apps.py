from django.apps import AppConfig


class HusimiConfig(AppConfig):
    default_auto_field = "django.db.models.BigAutoField"
    name = "husimi"
