from django.apps import AppConfig


class RcmConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'rcm'
    verbose_name = 'Recursive context machines'
