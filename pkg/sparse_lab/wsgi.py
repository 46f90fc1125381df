"""
WSGI config for the sparse_lab project.

Only the admin is served; experiments run through ``manage.py sparsedom``.
"""

import os

from django.core.wsgi import get_wsgi_application

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'sparse_lab.settings')

application = get_wsgi_application()
