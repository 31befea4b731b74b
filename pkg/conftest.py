import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'reidlab.settings')
django.setup()
