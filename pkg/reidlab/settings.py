"""
Django settings for the reidlab project.

The project has no web surface: Django provides the settings layer, the
management-command CLI, logging configuration and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/5.2/ref/settings/
"""
import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load the .env file if it exists (for local development)
env_file = os.path.join(BASE_DIR, ".env")
if os.path.exists(env_file):
    load_dotenv(env_file)

SECRET_KEY = os.getenv("SECRET_KEY", "reidlab-insecure-fallback-key")

DEBUG = os.getenv("DEBUG", "False").lower() in ['true', '1', 'yes', 'on']

ALLOWED_HOSTS = []

# Application definition
INSTALLED_APPS = [
    'rest_framework',
    'base',
    'reid',
]

# Nothing is persisted in a database; runs write CSV and binary snapshots.
DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = True
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

REST_FRAMEWORK = {
    'UNAUTHENTICATED_USER': None,
    'DEFAULT_AUTHENTICATION_CLASSES': [],
    'DEFAULT_PERMISSION_CLASSES': [],
}

# Output directory for CSV reports and snapshots
OUTPUT_DIR = Path(os.getenv("REID_OUTPUT_DIR", BASE_DIR / 'runs'))

# Built-in run defaults. Config files override these, command-line flags override both.
REID = {
    'DATASET': {
        'n_identities': 50,
        'images_per_identity': 8,
        'n_cameras': 4,
        'raw_dim': 64,
        'embed_dim': 32,
        'camera_shift': 0.3,
        'noise': 0.1,
        'mixing': True,
    },
    'TRAIN': {
        'epochs': 40,
        'batch_size': 128,
        'lr': 0.01,
        'lr_decay_every': 10,
        'lr_decay_factor': 0.1,
        'momentum': 0.9,
        'warmup_epochs': 5,
        'reinit_every': 5,
        'tau': 0.6,
        # 1% of the negatives, the best setting of the gamma ablation
        'gamma': 0.01,
        'predictor': 'gsmlp',
        'loss': 'smlc',
        'knn_c': 4,
        'ce_temperature': 0.1,
        'label_refresh_every': 1,
        'exclude_self': False,
    },
    'EVALUATION': {
        'ranks': [1, 5, 10],
    },
    'SEED': int(os.getenv("REID_SEED", 0)),
}

LOG_LEVEL = os.getenv("REID_LOG_LEVEL", 'DEBUG' if DEBUG else 'INFO')

# Logging configuration
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console'],
        'level': 'WARNING',
    },
    'loggers': {
        'django': {
            'handlers': ['console'],
            'level': 'INFO',
            'propagate': False,
        },
        'base': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
        'reid': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}
