from django.apps import AppConfig

class SparsedomConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'sparsedom'
    verbose_name = 'Sparse domination lab'
