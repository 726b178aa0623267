"""
Verifica el TCL funcional de X^ε (normalidad, varianza e incrementos).

Uso:
    python manage.py verify_clt [--config configs/clt.yaml] [--seed N] [--paths N] [--eps 0.1,0.01] [--out DIR]
"""
from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Verifica el TCL funcional de X^ε (normalidad, varianza e incrementos)'
    kind = 'clt'
    default_config = 'clt'
