"""pytest wiring: configure Django before the apps' tests.py modules are imported."""
import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'main.settings')
django.setup()
