"""
Compara E[X^j_t X^l_s] con su valor exacto y con el límite 2(t∧s)A.

Uso:
    python manage.py verify_cov [--config configs/covariance.yaml] [--seed N] [--paths N] [--eps 0.1,0.01] [--out DIR]
"""
from ._base import ExperimentCommand


class Command(ExperimentCommand):
    help = 'Compara E[X^j_t X^l_s] con su valor exacto y con el límite 2(t∧s)A'
    kind = 'covariance'
    default_config = 'covariance'
