from django.apps import AppConfig


class SeqsConfig(AppConfig):
    name = 'seqs'
