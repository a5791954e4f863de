"""Truncated orthonormal bases and quadrature grids for the transverse base.

Every form space exposes the same surface: per degree a list of basis keys,
a synthesis array sampling each basis form on the quadrature grid in a
pointwise orthonormal frame, and quadrature weights for the normalized
measure (total mass 1).  Products with coefficient functions, weighted Gram
matrices and the Hodge star are all formed from these arrays, so the same
assembly code serves circles, tori and spheres.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.special import sph_harm_y


class AliasingError(ValueError):
    """A coefficient function is not resolved by the quadrature grid."""

    def __init__(self, message, tail_norm):
        super().__init__(f"{message} (dropped tail norm {tail_norm:.3e})")
        self.tail_norm = tail_norm


# ---------------------------------------------------------------------------
# one-dimensional trigonometric basis
# ---------------------------------------------------------------------------

def trig_keys(N):
    keys = [("c", 0)]
    for n in range(1, N + 1):
        keys += [("c", n), ("s", n)]
    return keys


def trig_values(t, length, N):
    """Orthonormal real Fourier basis ``{1, sqrt2 cos, sqrt2 sin}`` at points t."""
    t = np.asarray(t, dtype=float)
    out = np.empty((t.size, 2 * N + 1))
    out[:, 0] = 1.0
    for n in range(1, N + 1):
        arg = 2 * np.pi * n * t / length
        out[:, 2 * n - 1] = np.sqrt(2) * np.cos(arg)
        out[:, 2 * n] = np.sqrt(2) * np.sin(arg)
    return out


def trig_derivative(length, N):
    """Exact matrix of d/dt in the trigonometric basis (antisymmetric)."""
    D = np.zeros((2 * N + 1, 2 * N + 1))
    for n in range(1, N + 1):
        w = 2 * np.pi * n / length
        c, s = 2 * n - 1, 2 * n
        D[s, c] = -w  # (cos)' = -w sin
        D[c, s] = w   # (sin)' = w cos
    return D


# ---------------------------------------------------------------------------
# exterior algebra on an orthonormal coframe
# ---------------------------------------------------------------------------

def monomials(q, k):
    return list(combinations(range(q), k))


def wedge_sign(i, I):
    """Return (sign, J) with e_i ^ e_I = sign * e_J, or (0, None)."""
    if i in I:
        return 0, None
    J = tuple(sorted(I + (i,)))
    return (-1) ** J.index(i), J


def star_sign(I, q):
    """Sign s with e_I ^ e_{I^c} = s * vol."""
    Ic = tuple(j for j in range(q) if j not in I)
    perm = I + Ic
    inversions = sum(1 for a in range(q) for b in range(a + 1, q) if perm[a] > perm[b])
    return (-1) ** inversions, Ic


def coframe_wedge_table(q, k):
    """Pointwise wedge tensor T[i, J, I] for e_i ^ : Lambda^k -> Lambda^{k+1}."""
    src, tgt = monomials(q, k), monomials(q, k + 1)
    index = {J: a for a, J in enumerate(tgt)}
    T = np.zeros((q, len(tgt), len(src)))
    for b, I in enumerate(src):
        for i in range(q):
            s, J = wedge_sign(i, I)
            if s:
                T[i, index[J], b] = s
    return T


def coframe_star(q, k):
    src, tgt = monomials(q, k), monomials(q, q - k)
    index = {J: a for a, J in enumerate(tgt)}
    S = np.zeros((len(tgt), len(src)))
    for b, I in enumerate(src):
        s, Ic = star_sign(I, q)
        S[index[Ic], b] = s
    return S


# ---------------------------------------------------------------------------
# form spaces
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sector:
    """One degree of a truncated form space."""

    degree: int
    keys: list
    levels: np.ndarray
    synth: np.ndarray  # (n_grid, fiber, dim)
    fiber_labels: list

    @property
    def dim(self):
        return len(self.keys)

    @property
    def fiber(self):
        return self.synth.shape[1]


@dataclass(frozen=True)
class FormSpace:
    """Truncated basic forms on a transverse base with a fixed quadrature."""

    kind: str
    q: int
    truncation: int
    coords: dict
    quad_weights: np.ndarray
    sectors: list
    d_blocks: list           # d_k : sector k -> k+1, exact
    function_synth: np.ndarray  # (n_grid, n_fn) scalar basis for coefficient functions
    function_keys: list
    description: dict = field(default_factory=dict)

    @property
    def n_grid(self):
        return self.quad_weights.size

    def dims(self):
        return [s.dim for s in self.sectors]

    def project_function(self, values):
        """L2 projection of grid samples onto the scalar function basis."""
        return self.function_synth.T @ (self.quad_weights * values)

    def function_tail(self, values):
        coef = self.project_function(values)
        resid = values - self.function_synth @ coef
        return float(np.sqrt(np.sum(self.quad_weights * resid**2)))

    def project_form(self, k, values):
        """Project pointwise frame components (n_grid, fiber) onto sector k."""
        S = self.sectors[k].synth
        return np.einsum("xfa,xf->a", S * self.quad_weights[:, None, None], values)

    def evaluate_form(self, k, coef):
        return np.einsum("xfa,a->xf", self.sectors[k].synth, coef)

    def galerkin(self, k_in, k_out, pointwise):
        """Galerkin matrix of a pointwise fiber map (n_grid, f_out, f_in)."""
        S_in = self.sectors[k_in].synth
        S_out = self.sectors[k_out].synth * self.quad_weights[:, None, None]
        T = np.matmul(pointwise, S_in)
        return _contract(S_out, T)

    def weighted_gram(self, k, w_values):
        S = self.sectors[k].synth
        Sw = S * (self.quad_weights * w_values)[:, None, None]
        return _contract(Sw, S)

    def multiplication(self, k, f_values):
        return self.weighted_gram(k, f_values)

    def wedge_pointwise(self, k, alpha_values):
        raise NotImplementedError

    def star_pointwise(self, k):
        raise NotImplementedError

    def restriction(self, other, k):
        """Index map embedding this space's sector k into ``other``'s sector k."""
        index = {key: i for i, key in enumerate(other.sectors[k].keys)}
        return np.array([index[key] for key in self.sectors[k].keys])


class CoframeSpace(FormSpace):
    """Forms ``sum f_I e_I`` on a flat base with a global orthonormal coframe."""

    def wedge_pointwise(self, k, alpha_values):
        T = coframe_wedge_table(self.q, k)
        return np.einsum("xi,iJI->xJI", alpha_values, T)

    def star_pointwise(self, k):
        S = coframe_star(self.q, k)
        return np.broadcast_to(S, (self.n_grid,) + S.shape)


def _coframe_sectors(q, fn_values, fn_keys, fn_levels, labels):
    sectors = []
    n_fn = fn_values.shape[1]
    for k in range(q + 1):
        gens = monomials(q, k)
        keys, levels = [], []
        synth = np.zeros((fn_values.shape[0], len(gens), len(gens) * n_fn))
        for g, I in enumerate(gens):
            name = "^".join(labels[i] for i in I) or "1"
            keys += [(name,) + tuple(key) for key in fn_keys]
            levels += list(fn_levels)
            synth[:, g, g * n_fn:(g + 1) * n_fn] = fn_values
        fiber = ["^".join(labels[i] for i in I) or "1" for I in gens]
        sectors.append(Sector(k, keys, np.array(levels), synth, fiber))
    return sectors


def coframe_d_blocks(q, derivs, structure, fn_mult):
    """Exterior derivative on sum f_I e_I.

    derivs[i] is the derivative matrix of the dual frame field of e_i on the
    function basis (None when basic functions are constant along it).
    structure[i] maps pairs (j, k), j < k, to coefficient functions c with
    d e_i = sum c e_j ^ e_k; fn_mult turns a coefficient function into its
    Galerkin multiplication matrix.
    """
    n = next(D.shape[0] for D in derivs if D is not None)
    blocks = []
    for k in range(q):
        src, tgt = monomials(q, k), monomials(q, k + 1)
        index = {J: a for a, J in enumerate(tgt)}
        M = np.zeros((len(tgt) * n, len(src) * n))
        for b, I in enumerate(src):
            cols = slice(b * n, (b + 1) * n)
            for i, D in enumerate(derivs):
                if D is None:
                    continue
                s, J = wedge_sign(i, I)
                if s:
                    a = index[J]
                    M[a * n:(a + 1) * n, cols] += s * D
            # Leibniz over the generators of I
            for pos, i in enumerate(I):
                for (j, l), c in structure.get(i, {}).items():
                    # (-1)^pos e_{I[:pos]} ^ (c e_j ^ e_l) ^ e_{I[pos+1:]}
                    word = I[:pos] + (j, l) + I[pos + 1:]
                    if len(set(word)) < len(word):
                        continue
                    J = tuple(sorted(word))
                    sign = (-1) ** pos * _perm_sign([word.index(x) for x in J])
                    a = index[J]
                    M[a * n:(a + 1) * n, cols] += sign * fn_mult(c)
        blocks.append(M)
    return blocks


def _perm_sign(perm):
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def circle_space(length, N, labels=("dt",), derivs_on=(True,), structure=None, oversample=3):
    """Fourier form space on a circle of circumference ``length``.

    ``labels`` names the coframe; ``derivs_on[i]`` says whether e_i is the
    coordinate differential dt (otherwise basic functions are constant along
    its dual field and its differential comes from ``structure``).
    """
    n = 2 * N + 1
    M = oversample * n
    t = length * np.arange(M) / M
    B = trig_values(t, length, N)
    wq = np.full(M, 1.0 / M)
    keys = trig_keys(N)
    levels = np.array([key[1] for key in keys])
    q = len(labels)
    D = trig_derivative(length, N)
    derivs = [D if on else None for on in derivs_on]

    tails = [0.0]

    def fn_mult(c):
        if callable(c):
            vals = c(t)
        elif np.ndim(c) == 0:
            vals = np.full(M, float(c))
        else:
            vals = B[:, :len(c)] @ np.asarray(c, dtype=float)
        prod = vals[:, None] * B
        G = B.T @ (wq[:, None] * prod)
        resid = prod - B @ G
        tails.append(float(np.sqrt(np.max(wq @ resid**2))))
        return G

    d_blocks = coframe_d_blocks(q, derivs, structure or {}, fn_mult) if q else []
    sectors = _coframe_sectors(q, B, keys, levels, labels)
    return CoframeSpace(
        kind="circle", q=q, truncation=N, coords={"t": t}, quad_weights=wq,
        sectors=sectors, d_blocks=d_blocks, function_synth=B, function_keys=keys,
        description={"basis": "fourier", "length": length, "modes": N,
                     "coframe": list(labels), "grid": M, "structure_tail": max(tails)},
    )


def torus_space(l1, l2, N, labels=("dx", "dy"), oversample=3):
    n1 = 2 * N + 1
    M = oversample * n1
    x1 = l1 * np.arange(M) / M
    x2 = l2 * np.arange(M) / M
    X, Y = np.meshgrid(x1, x2, indexing="ij")
    Bx = trig_values(x1, l1, N)
    By = trig_values(x2, l2, N)
    B = np.einsum("ai,bj->abij", Bx, By).reshape(M * M, n1 * n1)
    wq = np.full(M * M, 1.0 / (M * M))
    k1 = trig_keys(N)
    keys = [a + b for a in k1 for b in k1]
    levels = np.array([max(a[1], b[1]) for a in k1 for b in k1])
    I = np.eye(n1)
    Dx = np.kron(trig_derivative(l1, N), I)
    Dy = np.kron(I, trig_derivative(l2, N))
    d_blocks = coframe_d_blocks(2, [Dx, Dy], {}, None)
    sectors = _coframe_sectors(2, B, keys, levels, labels)
    return CoframeSpace(
        kind="torus", q=2, truncation=N, coords={"x": X.ravel(), "y": Y.ravel()},
        quad_weights=wq, sectors=sectors, d_blocks=d_blocks, function_synth=B,
        function_keys=keys,
        description={"basis": "fourier-tensor", "lengths": [l1, l2], "modes": N,
                     "coframe": list(labels), "grid": [M, M]},
    )


# ---------------------------------------------------------------------------
# round sphere
# ---------------------------------------------------------------------------

def _contract(A, B):
    """sum_{x,f} A[x,f,a] B[x,f,b] as one matrix product."""
    return A.reshape(-1, A.shape[-1]).T @ B.reshape(-1, B.shape[-1])


def harmonic_keys(L, lmin=0):
    return [(l, m) for l in range(lmin, L + 1) for m in range(-l, l + 1)]


def real_harmonics(theta, phi, L, derivatives=False):
    """Real spherical harmonics orthonormal for the normalized area measure.

    With ``derivatives`` also returns d/dtheta and d/dphi, obtained from the
    complex ladder relation for d/dtheta and i*m for d/dphi.
    """
    keys = harmonic_keys(L)
    npts = theta.size
    Y = np.empty((npts, len(keys)))
    Yt = np.empty_like(Y)
    Yp = np.empty_like(Y)
    norm = np.sqrt(4 * np.pi)

    # evaluate the theta dependence once per distinct colatitude
    theta_u, inv = np.unique(theta, return_inverse=True)
    inv = inv.ravel()

    def cplx(l, m):
        if abs(m) > l:
            return np.zeros(npts, dtype=complex)
        return sph_harm_y(l, m, theta_u, 0.0)[inv] * np.exp(1j * m * phi)

    for a, (l, m) in enumerate(keys):
        am = abs(m)
        Z = cplx(l, am)
        Zt = 0.5 * (np.sqrt((l - am) * (l + am + 1)) * np.exp(-1j * phi) * cplx(l, am + 1)
                    - np.sqrt((l + am) * (l - am + 1)) * np.exp(1j * phi) * cplx(l, am - 1))
        Zp = 1j * am * Z
        if m == 0:
            f, ft, fp = Z.real, Zt.real, Zp.real
        elif m > 0:
            s = np.sqrt(2) * (-1) ** m
            f, ft, fp = s * Z.real, s * Zt.real, s * Zp.real
        else:
            s = np.sqrt(2) * (-1) ** m
            f, ft, fp = s * Z.imag, s * Zt.imag, s * Zp.imag
        Y[:, a], Yt[:, a], Yp[:, a] = norm * f, norm * ft, norm * fp
    if derivatives:
        return keys, Y, Yt, Yp
    return keys, Y


class SphereSpace(CoframeSpace):
    """Forms on a round 2-sphere, sampled in the (theta-hat, phi-hat) frame.

    The frame is only local, but the pointwise wedge and star tables are the
    same as for a global orthonormal coframe.
    """


def sphere_space(radius, L, oversample=3):
    """Spherical harmonics up to degree L; 1-forms in the exact Hodge basis.

    Degree 1 uses normalized gradients dY/|dY| and their rotations *dY/|dY|
    for l >= 1, so d and the codifferential are diagonal in l.
    """
    n_theta = oversample * (L + 1)
    n_phi = 2 * n_theta
    x, wgl = np.polynomial.legendre.leggauss(n_theta)
    theta = np.arccos(x)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    TH, PH = np.meshgrid(theta, phi, indexing="ij")
    TH, PH = TH.ravel(), PH.ravel()
    wq = np.repeat(wgl, n_phi) / (2.0 * n_phi)
    keys, Y, Yt, Yp = real_harmonics(TH, PH, L, derivatives=True)
    levels0 = np.array([l for l, _ in keys])
    sin_t = np.sin(TH)

    grad_keys = [key for key in keys if key[0] >= 1]
    gi = [i for i, key in enumerate(keys) if key[0] >= 1]
    mu = np.sqrt(np.array([l * (l + 1) for l, _ in grad_keys], dtype=float)) / radius
    g_theta = Yt[:, gi] / radius / mu
    g_phi = Yp[:, gi] / (radius * sin_t[:, None]) / mu
    n1 = len(grad_keys)
    synth1 = np.zeros((TH.size, 2, 2 * n1))
    synth1[:, 0, :n1] = g_theta
    synth1[:, 1, :n1] = g_phi
    synth1[:, 0, n1:] = -g_phi
    synth1[:, 1, n1:] = g_theta
    keys1 = [("G",) + key for key in grad_keys] + [("C",) + key for key in grad_keys]
    levels1 = np.array([key[1] for key in keys1])

    sectors = [
        Sector(0, [("Y",) + key for key in keys], levels0, Y[:, None, :], ["1"]),
        Sector(1, keys1, levels1, synth1, ["dtheta", "dphi"]),
        Sector(2, [("V",) + key for key in keys], levels0, Y[:, None, :], ["vol"]),
    ]
    n0 = len(keys)
    d0 = np.zeros((2 * n1, n0))
    d1 = np.zeros((n0, 2 * n1))
    for a, i in enumerate(gi):
        d0[a, i] = mu[a]
        d1[i, n1 + a] = -mu[a]
    return SphereSpace(
        kind="sphere", q=2, truncation=L, coords={"theta": TH, "phi": PH},
        quad_weights=wq, sectors=sectors, d_blocks=[d0, d1], function_synth=Y,
        function_keys=keys,
        description={"basis": "real-spherical-harmonics", "radius": radius, "degree": L,
                     "grid": [n_theta, n_phi]},
    )
