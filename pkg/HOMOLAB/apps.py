from django.apps import AppConfig


class HomolabConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'HOMOLAB'
    verbose_name = 'Laboratorio de homogeneización'
