"""Independent oracles shared by the module tests and the acceptance suite."""
import numpy as np


def richardson_limit(fn, x0, ratio=10.0, order=1):
    """Limit of ``fn(x)`` as ``x -> 0`` from samples at ``x0`` and ``x0/ratio``,
    assuming the leading error is ``O(x**order)``."""
    f1, f2 = fn(x0), fn(x0 / ratio)
    k = ratio**order
    return (k * f2 - f1) / (k - 1.0)


def observed_order(e_coarse, e_fine, ratio=2.0):
    return float(np.log(e_coarse / e_fine) / np.log(ratio))


def expansion_coefficients(params, x0=-1e-2):
    """Richardson-extrapolated leading coefficients of ``A, B, A', B'`` at 0.

    Returns a dict name -> (measured, expected).
    """
    from sads_dirac.potentials import potential_A, potential_B, potential_derivatives

    l = params.l

    def dA(x):
        return potential_derivatives(x, params)[0]

    def dB(x):
        return potential_derivatives(x, params)[1]

    return {
        "A(0)": (richardson_limit(lambda x: potential_A(x, params), x0), 1.0 / l),
        "A quadratic": (richardson_limit(lambda x: (potential_A(x, params) - 1.0 / l) / x**2, x0), 1.0 / (2 * l**3)),
        "B pole": (richardson_limit(lambda x: x * potential_B(x, params), x0), -l),
        "B linear": (richardson_limit(lambda x: (potential_B(x, params) + l / x) / x, x0), -1.0 / (6 * l)),
        "A' slope": (richardson_limit(lambda x: dA(x) / x, x0), 1.0 / l**3),
        "B' pole": (richardson_limit(lambda x: x**2 * dB(x), x0), l),
    }
