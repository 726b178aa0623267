"""
Observables G aplicados al proceso rápido.

Formatos aceptados en la configuración:
    "H2", "H2+H3", "0.5*H1-2*H3"   combinaciones de Hermite (perfil exacto)
    "sign", "cube", "abs_centred", "cos_centred"   funciones con perfil por cuadratura
    "state"                        valor del estado de una cadena de Markov
    {"coefficients": [c0, c1, ...]}
"""
import math
import re
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigInvalid
from .hermite import HermiteProfile, expand

_TERM = re.compile(r'([+-]?)(\d+(?:\.\d*)?\*)?H(\d+)')

NAMED_FUNCTIONS = {
    'sign': np.sign,
    'cube': lambda x: x**3,
    'abs_centred': lambda x: np.abs(x) - math.sqrt(2.0 / math.pi),
    'cos_centred': lambda x: np.cos(x) - math.exp(-0.5),
}


@dataclass(frozen=True)
class Observable:
    name: str
    fn: object
    profile: HermiteProfile = None

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    @property
    def rank(self):
        return None if self.profile is None else self.profile.rank

    def is_centred(self, tol=1e-8):
        if self.profile is None:
            return True
        scale = math.sqrt(max(self.profile.norm_sq or 0.0, 1.0))
        return abs(self.profile.coeffs[0]) <= tol * scale


def hermite_observable(coeffs, name=None):
    profile = HermiteProfile.from_coefficients(coeffs, name=name or '')
    return Observable(name=name or _describe(coeffs), fn=profile, profile=profile)


def _describe(coeffs):
    parts = [f"{c:g}*H{l}" for l, c in enumerate(coeffs) if c]
    return '+'.join(parts).replace('+-', '-') or '0'


def _parse_hermite_sum(text):
    compact = text.replace(' ', '')
    position, coeffs = 0, {}
    for match in _TERM.finditer(compact):
        if match.start() != position:
            return None
        sign = -1.0 if match.group(1) == '-' else 1.0
        factor = float(match.group(2)[:-1]) if match.group(2) else 1.0
        degree = int(match.group(3))
        coeffs[degree] = coeffs.get(degree, 0.0) + sign * factor
        position = match.end()
    if position != len(compact) or not coeffs:
        return None
    dense = [0.0] * (max(coeffs) + 1)
    for degree, value in coeffs.items():
        dense[degree] = value
    return dense


def parse_observable(spec, l_max=16):
    """Construye un Observable desde su descripción de configuración."""
    if isinstance(spec, dict):
        if 'coefficients' not in spec:
            raise ConfigInvalid('observables', "se esperaba la clave 'coefficients'")
        return hermite_observable([float(c) for c in spec['coefficients']], spec.get('name'))

    text = str(spec).strip()
    if text == 'state':
        return Observable(name='state', fn=lambda x: x, profile=None)
    if text in NAMED_FUNCTIONS:
        fn = NAMED_FUNCTIONS[text]
        return Observable(name=text, fn=fn, profile=expand(fn, l_max=l_max, name=text))
    coeffs = _parse_hermite_sum(text)
    if coeffs is None:
        raise ConfigInvalid('observables', f"observable no reconocido: {text!r}")
    return hermite_observable(coeffs, name=text)


def parse_observables(specs, l_max=16):
    return [parse_observable(spec, l_max=l_max) for spec in specs]
