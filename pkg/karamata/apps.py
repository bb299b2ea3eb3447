from django.apps import AppConfig


class KaramataConfig(AppConfig):
    name = 'karamata'
