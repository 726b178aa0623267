"""
Validadores de configuración de experimentos
"""
import math


def validar_epsilons(epsilons):
    """
    Valida un schedule de epsilon.

    Args:
        epsilons (list): valores de ε en el orden en que se simulan

    Returns:
        tuple: (bool, str) - (es_valido, mensaje_error)
    """
    if not epsilons:
        return False, "El schedule de epsilon no puede estar vacío"

    for eps in epsilons:
        if not isinstance(eps, (int, float)) or not math.isfinite(eps):
            return False, f"Valor de epsilon no numérico: {eps!r}"
        if not 0 < eps < 1:
            return False, f"Cada epsilon debe estar en (0, 1), se recibió {eps}"

    # Estrictamente decreciente
    for anterior, siguiente in zip(epsilons[:-1], epsilons[1:]):
        if siguiente >= anterior:
            return False, "El schedule de epsilon debe ser estrictamente decreciente"

    return True, None


def validar_hurst(h):
    """Valida un parámetro de Hurst en (0, 1)."""
    if h is None:
        return False, "Se requiere el parámetro de Hurst h"
    if not 0 < h < 1:
        return False, f"H debe estar en (0, 1), se recibió {h}"
    return True, None


def validar_tolerancias(tolerancias):
    """Todas las tolerancias deben ser números positivos y finitos."""
    for nombre, valor in (tolerancias or {}).items():
        if not isinstance(valor, (int, float)) or not math.isfinite(valor) or valor <= 0:
            return False, f"La tolerancia '{nombre}' debe ser positiva"
    return True, None


def validar_generador(rate_matrix, state_values):
    """
    Valida la forma de un generador de cadena de Markov.
    La irreducibilidad se verifica al muestrear.
    """
    if not rate_matrix:
        return False, "Se requiere rate_matrix para ruido de cadena de Markov"
    n = len(rate_matrix)
    if any(len(fila) != n for fila in rate_matrix):
        return False, "rate_matrix debe ser cuadrada"
    for i, fila in enumerate(rate_matrix):
        if abs(sum(fila)) > 1e-9:
            return False, f"La fila {i} de rate_matrix debe sumar 0"
    if state_values is None or len(state_values) != n:
        return False, "state_values debe tener un valor por estado"
    return True, None


def validar_campos(campos, dimension):
    """Cada campo es una matriz dim x dim, un vector de largo dim o un nombre conocido."""
    for k, campo in enumerate(campos):
        if isinstance(campo, str):
            continue
        if isinstance(campo, dict) and 'matrix' in campo:
            matriz = campo['matrix']
            if len(matriz) != dimension or any(len(fila) != dimension for fila in matriz):
                return False, f"El campo {k} debe ser una matriz {dimension}x{dimension}"
        elif isinstance(campo, dict) and 'vector' in campo:
            if len(campo['vector']) != dimension:
                return False, f"El campo {k} debe tener largo {dimension}"
        else:
            return False, f"Campo {k} no reconocido"
    return True, None
