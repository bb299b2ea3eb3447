"""
Django settings for the bigjump lab project.

The project has no database and no web surface: Django supplies settings,
logging, the app registry, management commands and the test runner.

For the full list of settings and their values, see
https://docs.djangoproject.com/en/6.0/ref/settings/
"""

from pathlib import Path
import os
from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Load environment variables from .env
load_dotenv(BASE_DIR / '.env')


def _env_bool(name, default):
    return os.environ.get(name, default).lower() in ('true', '1', 'yes')


SECRET_KEY = os.environ.get('SECRET_KEY', 'bigjump-lab-local-key')

DEBUG = _env_bool('DEBUG', 'False')

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'dist',
    'lattice',
    'karamata',
    'seqs',
    'mc',
    'lab',
]

# No persistent storage; every result is recomputed from its config.
DATABASES = {}

USE_TZ = True
TIME_ZONE = 'UTC'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# ─── Lab Configuration ───────────────────────────────────────────────
# Every key can be overridden with a LAB_<KEY> environment variable.

LAB = {
    'SEED': int(os.environ.get('LAB_SEED', '20240101')),
    'THREADS': int(os.environ.get('LAB_THREADS', str(min(8, os.cpu_count() or 1)))),
    'OUT_DIR': Path(os.environ.get('LAB_OUT_DIR', str(BASE_DIR / 'out'))),
    'CACHE_DIR': Path(os.environ.get('LAB_CACHE_DIR', str(BASE_DIR / '.cache' / 'nfold'))),
    'CACHE_ENABLED': _env_bool('LAB_CACHE_ENABLED', 'False'),
    # lattice grid cap (cells) for discretize / nfold
    'MAX_CELLS': int(os.environ.get('LAB_MAX_CELLS', str(2 ** 24))),
    'SPILL_MODE': os.environ.get('LAB_SPILL_MODE', 'strict'),
    'SPILL_TOL': float(os.environ.get('LAB_SPILL_TOL', '1e-12')),
    'QUAD_EPSREL': float(os.environ.get('LAB_QUAD_EPSREL', '1e-9')),
    'QUAD_LIMIT': int(os.environ.get('LAB_QUAD_LIMIT', '400')),
    # samples per counter block of a random stream
    'MC_CHUNK': int(os.environ.get('LAB_MC_CHUNK', str(2 ** 14))),
    # index estimates below this are reported as -inf
    'DECAY_FLOOR': float(os.environ.get('LAB_DECAY_FLOOR', '-50')),
}


# ─── Logging Configuration ───────────────────────────────────────────
LOG_DIR = BASE_DIR / 'logs'
LOG_DIR.mkdir(exist_ok=True)

LAB_LOG_LEVEL = os.environ.get('LAB_LOG_LEVEL', 'INFO')

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
            'level': 'WARNING',
        },
        'file': {
            'class': 'logging.FileHandler',
            'filename': LOG_DIR / 'lab.log',
            'formatter': 'verbose',
        },
    },
    'root': {
        'handlers': ['console', 'file'],
        'level': 'WARNING',
    },
    'loggers': {
        app: {
            'handlers': ['console', 'file'],
            'level': LAB_LOG_LEVEL,
            'propagate': False,
        }
        for app in ('main', 'dist', 'lattice', 'karamata', 'seqs', 'mc', 'lab')
    },
}
