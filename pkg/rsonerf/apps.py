from django.apps import AppConfig


class RsoNerfConfig(AppConfig):
    name = "rsonerf"
    verbose_name = "RSO radiance fields"
