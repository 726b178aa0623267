"""
Ajusta los exponentes de momentos de X^ε y de su lift.

Uso:
    python manage.py verify_moments [--config configs/moment_fit.yaml] [--seed N] [--paths N] [--eps 0.1,0.01] [--out DIR]
"""
from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Ajusta los exponentes de momentos de X^ε y de su lift'
    kind = 'moment_fit'
    default_config = 'moment_fit'
