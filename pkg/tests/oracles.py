"""Closed-form spectra built without the assembly code.

Each oracle writes its answer down from the mode decomposition of the
model, so agreement with the assembled matrices is an independent check.
"""
import math

import numpy as np


def hyperbolic_exponent(A):
    """log of the eigenvalue > 1 of A, from the characteristic polynomial."""
    tr, det = A[0][0] + A[1][1], A[0][0] * A[1][1] - A[0][1] * A[1][0]
    roots = np.roots([1.0, -tr, det])
    return math.log(max(abs(roots)))


def carriere_mode_block(n, lam, length=1.0):
    """4x4 complex block of D_b on e^{2 pi i n t} (f, g dt, h sigma, u dt^sigma).

    d f = f' dt, d(h sigma) = (h' + lam h) dt^sigma, the codifferential is the
    L2 adjoint of d, kappa = lam dt.
    """
    iw = 2j * math.pi * n / length
    B = np.zeros((4, 4), dtype=complex)
    B[0, 1] = -iw - lam / 2       # f  <- g dt
    B[1, 0] = iw - lam / 2        # dt <- f
    B[2, 3] = -iw + lam / 2       # sigma <- u dt^sigma
    B[3, 2] = iw + lam / 2        # dt^sigma <- h sigma
    return B


def carriere_dirac_spectrum(N, lam):
    vals = [np.linalg.eigvals(carriere_mode_block(n, lam)).real for n in range(-N, N + 1)]
    return np.sort(np.concatenate(vals))


def carriere_laplacian_functions(N, length=1.0):
    return np.sort([(2 * math.pi * n / length) ** 2 for n in range(-N, N + 1)])


def circle_dirac_spectrum(N, length=1.0):
    """D = d + delta on (f, g dt): 0 twice, then +-2 pi n / length twice each."""
    vals = [0.0, 0.0]
    for n in range(1, N + 1):
        w = 2 * math.pi * n / length
        vals += [w, w, -w, -w]
    return np.sort(vals)


def spinor_dirac_spectrum(cap, radius):
    """Per (j, m) the 2x2 block [[0, c], [c, 0]] with c = sqrt((j + 1/2)^2) / r."""
    vals = []
    j = 0.5
    while j <= cap + 1e-9:
        c = math.sqrt((j + 0.5) * (j + 0.5)) / radius
        for _ in range(int(round(2 * j + 1))):
            vals += list(np.linalg.eigvalsh(np.array([[0.0, c], [c, 0.0]])))
        j += 1.0
    return np.sort(vals)


def sphere_function_laplacian(L, radius):
    return np.sort([l * (l + 1) / radius**2 for l in range(L + 1) for _ in range(2 * l + 1)])


def hodge_star_2d():
    """Star on {1; e1, e2; e1^e2} for an oriented orthonormal coframe, as (source, target, sign)."""
    return [("1", "e1^e2", 1), ("e1", "e2", 1), ("e2", "e1", -1), ("e1^e2", "1", 1)]
