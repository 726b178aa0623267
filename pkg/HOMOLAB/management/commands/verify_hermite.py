"""
Verifica el régimen de Hermite (autosimilaridad, Hölder, Young).

Uso:
    python manage.py verify_hermite [--config configs/hermite_regime.yaml] [--seed N] [--paths N] [--eps 0.1,0.01] [--out DIR]
"""
from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Verifica el régimen de Hermite (autosimilaridad, Hölder, Young)'
    kind = 'hermite_regime'
    default_config = 'hermite_regime'
