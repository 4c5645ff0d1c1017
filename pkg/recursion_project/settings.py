"""
Django settings for recursion_project project.

Every tunable is read through python-decouple. ``RCM_CONFIG`` may point at a
.env-style file; otherwise a .env next to manage.py is picked up when present.
"""

import os
from pathlib import Path

from decouple import AutoConfig, Config, Csv, RepositoryEnv

BASE_DIR = Path(__file__).resolve().parent.parent

if os.environ.get('RCM_CONFIG'):
    config = Config(RepositoryEnv(os.environ['RCM_CONFIG']))
else:
    config = AutoConfig(search_path=BASE_DIR)

SECRET_KEY = config('SECRET_KEY', default='django-insecure-change-me-in-production')

DEBUG = config('DEBUG', default=False, cast=bool)

ALLOWED_HOSTS = config('ALLOWED_HOSTS', default='*', cast=Csv())

# Application definition
INSTALLED_APPS = [
    'django.contrib.admin',
    'django.contrib.auth',
    'django.contrib.contenttypes',
    'django.contrib.sessions',
    'django.contrib.messages',
    'django.contrib.staticfiles',
    'rest_framework',
    'channels',
    'rcm',
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

ROOT_URLCONF = 'recursion_project.urls'

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

ASGI_APPLICATION = 'recursion_project.asgi.application'

# Channels configuration
RCM_REDIS_URL = config('RCM_REDIS_URL', default='')

if RCM_REDIS_URL:
    CHANNEL_LAYERS = {
        'default': {
            'BACKEND': 'channels_redis.core.RedisChannelLayer',
            'CONFIG': {'hosts': [RCM_REDIS_URL]},
        }
    }
else:
    CHANNEL_LAYERS = {
        'default': {
            'BACKEND': 'channels.layers.InMemoryChannelLayer',
        }
    }

# Database
RCM_DB_ENGINE = config('RCM_DB_ENGINE', default='sqlite3')

if RCM_DB_ENGINE == 'postgresql':
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.postgresql',
            'NAME': config('DB_NAME', default='rcm'),
            'USER': config('DB_USER', default='rcm'),
            'PASSWORD': config('DB_PASSWORD', default=''),
            'HOST': config('DB_HOST', default='localhost'),
            'PORT': config('DB_PORT', default=5432, cast=int),
        }
    }
else:
    DATABASES = {
        'default': {
            'ENGINE': 'django.db.backends.sqlite3',
            'NAME': BASE_DIR / 'db.sqlite3',
        }
    }

# Internationalization
LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

STATIC_URL = 'static/'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# REST Framework settings
REST_FRAMEWORK = {
    'DEFAULT_RENDERER_CLASSES': [
        'rest_framework.renderers.JSONRenderer',
    ],
    'DEFAULT_PARSER_CLASSES': [
        'rest_framework.parsers.JSONParser',
    ],
    'DEFAULT_PAGINATION_CLASS': 'rest_framework.pagination.PageNumberPagination',
    'PAGE_SIZE': 100
}

# Logging: diagnostics go to stderr, command results to stdout
LOG_LEVEL = config('LOG_LEVEL', default='INFO')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'rcm': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'django': {
            'handlers': ['console'],
            'level': 'WARNING',
        },
    },
}

# Context-stack runtime limits
RCM_MAX_STEPS = config('RCM_MAX_STEPS', default=10 ** 6, cast=int)
RCM_MAX_DEPTH = config('RCM_MAX_DEPTH', default=10 ** 4, cast=int)
RCM_MAX_LOCAL_SPACE = config('RCM_MAX_LOCAL_SPACE', default=65536, cast=int)
RCM_LOOP_DETECTION = config('RCM_LOOP_DETECTION', default=True, cast=bool)
RCM_BENCH_WORKERS = config('RCM_BENCH_WORKERS', default=4, cast=int)

# Scaffold evaluation budgets
RCM_SCAFFOLD_SPACE = config('RCM_SCAFFOLD_SPACE', default=65536, cast=int)
RCM_SCAFFOLD_CALLS = config('RCM_SCAFFOLD_CALLS', default=100000, cast=int)
RCM_SCAFFOLD_DEPTH = config('RCM_SCAFFOLD_DEPTH', default=1000, cast=int)

# Completion endpoint
RCM_BACKEND_BASE_URL = config('RCM_BACKEND_BASE_URL', default='http://localhost:8000/api/mock/v1')
RCM_BACKEND_MODEL = config('RCM_BACKEND_MODEL', default='echo-return')
RCM_BACKEND_API_KEY_ENV = config('RCM_BACKEND_API_KEY_ENV', default='OPENAI_API_KEY')
RCM_BACKEND_TIMEOUT = config('RCM_BACKEND_TIMEOUT', default=30.0, cast=float)
RCM_BACKEND_MAX_TOKENS = config('RCM_BACKEND_MAX_TOKENS', default=1024, cast=int)
RCM_BACKEND_RETRIES = config('RCM_BACKEND_RETRIES', default=3, cast=int)
RCM_BACKEND_BACKOFF = config('RCM_BACKEND_BACKOFF', default=0.5, cast=float)
RCM_BACKEND_RPS = config('RCM_BACKEND_RPS', default=5.0, cast=float)

# Bearer token the bundled mock endpoint accepts
RCM_MOCK_API_KEY = config('RCM_MOCK_API_KEY', default='test-key')
