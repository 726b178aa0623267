"""
Verifica la descomposición martingala-coborde y el lema de área.

Uso:
    python manage.py decomp [--config configs/decomp_residual.yaml] [--seed N] [--paths N] [--eps 0.1,0.01] [--out DIR]
"""
from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Verifica la descomposición martingala-coborde y el lema de área'
    kind = 'decomp_residual'
    default_config = 'decomp_residual'
