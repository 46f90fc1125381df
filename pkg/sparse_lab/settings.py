import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).resolve().parent.parent

DEBUG = os.getenv('DEBUG', 'True') == 'True'

SECRET_KEY = os.getenv('SECRET_KEY')
if not SECRET_KEY:
    if not DEBUG:
        raise ValueError("SECRET_KEY environment variable is not set")
    SECRET_KEY = 'sparse-lab-development-key'

ALLOWED_HOSTS = os.getenv('ALLOWED_HOSTS', 'localhost,127.0.0.1').split(',')

INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'sparsedom',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.contrib.sessions.middleware.SessionMiddleware',
    'django.middleware.common.CommonMiddleware',
    'django.middleware.csrf.CsrfViewMiddleware',
    'django.contrib.auth.middleware.AuthenticationMiddleware',
    'django.contrib.messages.middleware.MessageMiddleware',
    'django.middleware.clickjacking.XFrameOptionsMiddleware',
]

ROOT_URLCONF = 'sparse_lab.urls'

TEMPLATES = [
    {
        'BACKEND': 'django.template.backends.django.DjangoTemplates',
        'DIRS': [],
        'APP_DIRS': True,
        'OPTIONS': {
            'context_processors': [
                'django.template.context_processors.debug',
                'django.template.context_processors.request',
                'django.contrib.auth.context_processors.auth',
                'django.contrib.messages.context_processors.messages',
            ],
        },
    },
]

WSGI_APPLICATION = 'sparse_lab.wsgi.application'

# Run store: sqlite for desk runs, PostgreSQL for shared CI history
if os.getenv('DB_ENGINE', 'sqlite') == 'postgresql':
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': os.getenv('DB_NAME', 'sparse_lab'),
            'USER': os.getenv('DB_USER', 'postgres'),
            'PASSWORD': os.getenv('DB_PASSWORD'),
            'HOST': os.getenv('DB_HOST', 'localhost'),
            'PORT': os.getenv('DB_PORT', '5432'),
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': os.getenv('DB_NAME', str(BASE_DIR / 'sparse_lab.sqlite3')),
        }
    }

# Measured operator norms are cached; Redis when available, process memory otherwise
REDIS_URL = os.getenv('REDIS_URL', '')
if REDIS_URL:
    CACHES = {
        'default': {
            'BACKEND': 'django.core.cache.backends.redis.RedisCache',
            'LOCATION': REDIS_URL,
            'TIMEOUT': 300,
            'KEY_PREFIX': 'sparsedom',
        }
    }
else:
    CACHES = {
        'default': {
            'BACKEND': 'django.core.cache.backends.locmem.LocMemCache',
            'LOCATION': 'sparsedom-norms',
            'TIMEOUT': 300,
            'KEY_PREFIX': 'sparsedom',
        }
    }

STATIC_URL = '/static/'
STATIC_ROOT = os.path.join(BASE_DIR, 'staticfiles')

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

USE_TZ = True
TIME_ZONE = 'UTC'

# Lab knobs
SPARSEDOM_WORKERS = int(os.getenv('SPARSEDOM_WORKERS', '4'))
SPARSEDOM_POWER_ITERATIONS = int(os.getenv('SPARSEDOM_POWER_ITERATIONS', '50'))
SPARSEDOM_NORM_SAFETY = float(os.getenv('SPARSEDOM_NORM_SAFETY', '1.01'))
SPARSEDOM_NORM_CACHE_TTL = int(os.getenv('SPARSEDOM_NORM_CACHE_TTL', '86400'))
SPARSEDOM_REPORT_DIR = os.getenv('SPARSEDOM_REPORT_DIR', str(BASE_DIR / 'reports'))
SPARSEDOM_MAX_DEPTH = int(os.getenv('SPARSEDOM_MAX_DEPTH', '20'))
SPARSEDOM_PRODUCT_DEPTH_CAP = int(os.getenv('SPARSEDOM_PRODUCT_DEPTH_CAP', '16'))
SPARSEDOM_EXACT_ARITHMETIC = os.getenv('SPARSEDOM_EXACT_ARITHMETIC', 'False') == 'True'

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'sparsedom': {
            'handlers': ['console'],
            'level': os.getenv('SPARSEDOM_LOG_LEVEL', 'INFO'),
            'propagate': False,
        },
    },
}
