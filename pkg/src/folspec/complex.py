"""Reduced basic complexes and the operators assembled on them.

A complex is a truncated graded space of basic forms together with a
positive weight (the fiber volume entering the L2 pairing) and the basic
mean curvature form.  Every operator acts on the full graded space
``Omega^0 + ... + Omega^q`` and is stored as one dense matrix with block
offsets per degree.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve, cholesky, solve_triangular

from .bases import AliasingError, FormSpace

DEFAULT_TOL = 1e-10
NILPOTENT_TOL = 1e-12


class ModelDefinitionError(ValueError):
    """The data of a complex are inconsistent (d^2 != 0, kappa not closed, ...)."""


class NilpotencyError(ModelDefinitionError):
    pass


class NotClosedError(ModelDefinitionError):
    pass


class NonPositiveWeightError(ModelDefinitionError):
    pass


class UnsupportedModelError(ValueError):
    pass


class ConsistencyError(RuntimeError):
    """An identity that must hold by construction failed numerically."""


class ConditioningError(RuntimeError):
    pass


def opnorm(M):
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


# ---------------------------------------------------------------------------
# graded operators
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GradedOperator:
    """A linear map on the graded coefficient space, kept as one matrix.

    ``blocks`` exposes the nonzero (degree_in, degree_out) pieces.
    """

    matrix: np.ndarray
    dims: tuple
    name: str = ""
    symmetric_wrt_weight: bool = False
    meta: dict = field(default_factory=dict)

    @cached_property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.dims)]).astype(int)

    def _slice(self, k):
        return slice(self.offsets[k], self.offsets[k + 1])

    def block(self, k_in, k_out):
        return self.matrix[self._slice(k_out), self._slice(k_in)]

    @property
    def blocks(self):
        out = {}
        for a in range(len(self.dims)):
            for b in range(len(self.dims)):
                B = self.block(a, b)
                if B.size and np.any(B != 0):
                    out[(a, b)] = B
        return out

    @classmethod
    def from_blocks(cls, dims, blocks, name="", **kw):
        dims = tuple(int(n) for n in dims)
        off = np.concatenate([[0], np.cumsum(dims)]).astype(int)
        dtype = np.result_type(float, *[np.asarray(B).dtype for B in blocks.values()])
        M = np.zeros((off[-1], off[-1]), dtype=dtype)
        for (k_in, k_out), B in blocks.items():
            B = np.asarray(B)
            if B.shape != (dims[k_out], dims[k_in]):
                raise ValueError(
                    f"block ({k_in},{k_out}) has shape {B.shape}, "
                    f"expected {(dims[k_out], dims[k_in])}")
            M[off[k_out]:off[k_out + 1], off[k_in]:off[k_in + 1]] += B
        return cls(M, dims, name, **kw)

    def _wrap(self, M, name):
        return GradedOperator(M, self.dims, name)

    def __add__(self, other):
        return self._wrap(self.matrix + other.matrix, f"({self.name} + {other.name})")

    def __sub__(self, other):
        return self._wrap(self.matrix - other.matrix, f"({self.name} - {other.name})")

    def __neg__(self):
        return self._wrap(-self.matrix, f"-{self.name}")

    def __mul__(self, c):
        return self._wrap(c * self.matrix, f"{c}*{self.name}")

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, GradedOperator):
            return self._wrap(self.matrix @ other.matrix, f"{self.name}{other.name}")
        return self.matrix @ other

    def norm(self):
        return opnorm(self.matrix)

    def renamed(self, name, **kw):
        return replace(self, name=name, **kw)


# ---------------------------------------------------------------------------
# complex data
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BasicOneForm:
    """A basic one-form as a coefficient vector on the degree-1 sector."""

    coefficients: np.ndarray
    closed: bool = True

    def scaled(self, c):
        return BasicOneForm(c * self.coefficients, self.closed)

    def __add__(self, other):
        return BasicOneForm(self.coefficients + other.coefficients, self.closed and other.closed)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def norm(self):
        return float(np.linalg.norm(self.coefficients))


@dataclass(frozen=True, eq=False)
class ReducedBasicComplex:
    """Finite truncation of the basic de Rham complex of a model foliation.

    ``weight`` is a callable on the base coordinates; ``kappa_b`` is the
    basic mean curvature.  The constructor enforces d^2 = 0, positivity of
    the weight at every quadrature node and closedness of kappa_b.
    """

    space: FormSpace
    leaf_dimension: int
    weight: object
    kappa_b: BasicOneForm
    curvature: object = None
    descriptor: object = None
    deformations: tuple = ()
    name: str = ""

    def __post_init__(self):
        w = self.weight_values
        if not np.all(np.isfinite(w)) or np.min(w) <= 0:
            raise NonPositiveWeightError(
                f"weight is not strictly positive at the quadrature nodes (min {np.min(w):.3e})")
        if self.kappa_b.coefficients.shape != (self.space.sectors[1].dim,):
            raise ModelDefinitionError("kappa_b does not live on the degree-1 sector")
        for k in range(self.q - 1):
            dd = self.space.d_blocks[k + 1] @ self.space.d_blocks[k]
            scale = max(1.0, opnorm(self.space.d_blocks[k]) * opnorm(self.space.d_blocks[k + 1]))
            if np.max(np.abs(dd), initial=0.0) > NILPOTENT_TOL * scale:
                raise NilpotencyError(
                    f"d o d != 0 from degree {k} to {k + 2} "
                    f"(defect {np.max(np.abs(dd)):.3e})")
        if self.q >= 2:
            dk = self.space.d_blocks[1] @ self.kappa_b.coefficients
            scale = max(1.0, opnorm(self.space.d_blocks[1]) * self.kappa_b.norm())
            if np.linalg.norm(dk) > NILPOTENT_TOL * scale:
                raise NotClosedError(
                    f"kappa_b is not closed (|d kappa_b| = {np.linalg.norm(dk):.3e})")

    @property
    def q(self):
        return self.space.q

    @property
    def p(self):
        return self.leaf_dimension

    @property
    def truncation(self):
        return self.space.truncation

    @property
    def dims(self):
        return tuple(self.space.dims())

    @cached_property
    def weight_values(self):
        return np.asarray(self.weight(self.space.coords), dtype=float) * np.ones(self.space.n_grid)

    @cached_property
    def weight_is_constant(self):
        w = self.weight_values
        return bool(np.ptp(w) <= 1e-14 * np.max(np.abs(w)))

    @cached_property
    def resolved_level(self):
        """Basis levels on which truncation tails of weight products are negligible.

        With a constant weight every identity is exact on the whole
        truncation.  Otherwise the inverse Gram matrix mixes the top levels
        with the discarded tail; the lower half of the levels is kept clear
        of that edge.
        """
        if self.weight_is_constant:
            return self.truncation
        return self.truncation // 2

    def resolved_columns(self, k=None):
        if k is None:
            return np.concatenate([self.resolved_columns(j) + off for j, off in
                                   enumerate(np.concatenate([[0], np.cumsum(self.dims)])[:-1])])
        return np.flatnonzero(self.space.sectors[k].levels <= self.resolved_level)

    def with_changes(self, **kw):
        return replace(self, **kw)

    # cached assembly; the module-level functions are the public surface
    @cached_property
    def _grams(self):
        return [self.space.weighted_gram(k, self.weight_values) for k in range(self.q + 1)]

    @cached_property
    def _gram_factors(self):
        out = []
        for k, G in enumerate(self._grams):
            try:
                out.append(cho_factor(G, lower=True))
            except np.linalg.LinAlgError as exc:
                raise ModelDefinitionError(
                    f"Gram matrix of degree {k} is not positive definite") from exc
        return out

    @cached_property
    def _codifferential(self):
        return _codiff(self)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def gram_matrix(cx, degree):
    """Weighted L2 Gram matrix of one degree, <a, b>_w = int w <a, b>_{g_Q}."""
    if not 0 <= degree <= cx.q:
        raise ValueError(f"degree {degree} outside 0..{cx.q}")
    return cx._grams[degree]


def graded_gram(cx):
    return GradedOperator.from_blocks(
        cx.dims, {(k, k): gram_matrix(cx, k) for k in range(cx.q + 1)}, name="G")


def gram_adjoint(cx, op):
    """Adjoint of a graded operator with respect to the weighted pairing."""
    blocks = {}
    for (k_in, k_out), B in op.blocks.items():
        rhs = B.T @ gram_matrix(cx, k_out)
        blocks[(k_out, k_in)] = cho_solve(cx._gram_factors[k_in], rhs)
    return GradedOperator.from_blocks(cx.dims, blocks, name=f"{op.name}*")


def symmetry_defect(cx, op):
    """||G A - A^T G|| / ||G A||."""
    G = graded_gram(cx).matrix
    GA = G @ op.matrix
    den = opnorm(GA)
    return 0.0 if den == 0 else opnorm(GA - op.matrix.T @ G) / den


def assemble_d(cx, max_tail=None):
    """Exterior derivative; ``meta['tail_norm']`` is the largest basis product
    with a structure coefficient that was cut off by the truncation."""
    tail = cx.space.description.get("structure_tail", 0.0)
    if max_tail is not None and tail > max_tail:
        raise AliasingError("structure coefficients overflow the truncation", tail)
    blocks = {(k, k + 1): cx.space.d_blocks[k] for k in range(cx.q)}
    return GradedOperator.from_blocks(cx.dims, blocks, name="d", meta={"tail_norm": tail})


def assemble_hodge_star(cx):
    sp = cx.space
    blocks = {(k, cx.q - k): sp.galerkin(k, cx.q - k, sp.star_pointwise(k))
              for k in range(cx.q + 1)}
    return GradedOperator.from_blocks(cx.dims, blocks, name="*")


def star_square_sign(q, k):
    return (-1) ** (k * (q - k))


def one_form_values(cx, alpha):
    if isinstance(alpha, BasicOneForm):
        return cx.space.evaluate_form(1, alpha.coefficients)
    return np.asarray(alpha)


def assemble_form_action(cx, alpha, mode, max_tail=None):
    """Wedge with, or contraction by, a basic one-form.

    Products are evaluated pointwise on the quadrature grid and projected
    back; the L2 norm of the part that leaves the truncation is recorded in
    ``meta['tail_norm']``.  The contraction is the pointwise (fiber) adjoint
    of the wedge, i.e. the transpose in the unweighted orthonormal basis.
    """
    if mode not in ("wedge", "contract"):
        raise ValueError(f"unknown mode {mode!r}")
    vals = one_form_values(cx, alpha)
    sp = cx.space
    blocks, tail = {}, 0.0
    for k in range(cx.q):
        E = sp.wedge_pointwise(k, vals)
        W = sp.galerkin(k, k + 1, E)
        tail = max(tail, _product_tail(sp, k, E, W))
        if mode == "wedge":
            blocks[(k, k + 1)] = W
        else:
            blocks[(k + 1, k)] = W.T
    if max_tail is not None and tail > max_tail:
        raise AliasingError(f"{mode} product overflows the truncation", tail)
    name = "a^" if mode == "wedge" else "a_|"
    return GradedOperator.from_blocks(cx.dims, blocks, name=name, meta={"tail_norm": tail})


def _product_tail(sp, k, E, W):
    """Largest L2 norm of a basis product discarded by the projection."""
    S_in = sp.sectors[k].synth
    exact = np.matmul(E, S_in)
    kept = sp.sectors[k + 1].synth @ W
    resid = exact - kept
    col = np.einsum("x,xfc->c", sp.quad_weights, resid**2)
    return float(np.sqrt(np.max(col, initial=0.0)))


def kappa_wedge(cx):
    return assemble_form_action(cx, cx.kappa_b, "wedge").renamed("k^")


def kappa_contract(cx):
    return assemble_form_action(cx, cx.kappa_b, "contract").renamed("k_|")


def codifferential_signs(cx):
    """Per-degree sign s_k with s_k * (*)d(*) + kappa_b_| equal to the weighted adjoint of d."""
    return cx._codifferential[1]


def _codiff(cx):
    d = assemble_d(cx)
    star = assemble_hodge_star(cx)
    kc = kappa_contract(cx)
    adj = gram_adjoint(cx, d)
    q = cx.q
    signs, defects, blocks_T = {}, {}, {}
    for k in range(1, q + 1):
        core = star.block(q - k + 1, k - 1) @ d.block(q - k, q - k + 1) @ star.block(k, q - k)
        target = adj.block(k, k - 1)
        kap = kc.block(k, k - 1)
        cols = cx.resolved_columns(k)
        scale = max(1.0, opnorm(target[:, cols]))
        best = None
        for s in (1, -1):
            err = opnorm((s * core + kap - target)[:, cols]) / scale
            if best is None or err < best[1]:
                best = (s, err)
        s, err = best
        if err > DEFAULT_TOL:
            raise ModelDefinitionError(
                f"no sign makes +-*d* + kappa_b_| the weighted adjoint of d in degree {k} "
                f"(best defect {err:.3e}); kappa_b is inconsistent with the weight")
        signs[k], defects[k] = s, err
        blocks_T[(k, k - 1)] = s * core
    delta_T = GradedOperator.from_blocks(cx.dims, blocks_T, name="delta_T")
    return delta_T, signs, defects, adj


def assemble_codifferential(cx, variant="basic"):
    """Transversal codifferential +-*d* or basic codifferential delta_b.

    delta_b is returned as the exact weighted adjoint of d; its agreement
    with delta_T + kappa_b_| on resolved columns is enforced while fixing
    the signs and is reported in ``meta``.
    """
    delta_T, signs, defects, adj = cx._codifferential
    if variant == "transversal":
        return delta_T.renamed("delta_T", meta={"signs": signs})
    if variant == "basic":
        return adj.renamed("delta_b", symmetric_wrt_weight=False,
                           meta={"signs": signs, "adjoint_defects": defects})
    raise ValueError(f"unknown variant {variant!r}")


def assemble_twisted_pair(cx):
    """(d - k^/2, its weighted adjoint)."""
    dt = (assemble_d(cx) - 0.5 * kappa_wedge(cx)).renamed("d~")
    return dt, gram_adjoint(cx, dt).renamed("delta~")


def assemble_dirac(cx, variant="basic"):
    if variant == "transversal":
        return (assemble_d(cx) + assemble_codifferential(cx, "transversal")).renamed("D_tr")
    if variant == "basic":
        dt, deltat = assemble_twisted_pair(cx)
        return (dt + deltat).renamed("D_b", symmetric_wrt_weight=True)
    raise ValueError(f"unknown variant {variant!r}")


def parity_view(op, cx, source="even"):
    """Sub-block of a graded operator from even to odd degrees (or back)."""
    even = [k for k in range(cx.q + 1) if k % 2 == 0]
    odd = [k for k in range(cx.q + 1) if k % 2 == 1]
    src, tgt = (even, odd) if source == "even" else (odd, even)
    rows = np.concatenate([np.arange(op.offsets[k], op.offsets[k + 1]) for k in tgt])
    cols = np.concatenate([np.arange(op.offsets[k], op.offsets[k + 1]) for k in src])
    return op.matrix[np.ix_(rows, cols)]


def assemble_laplacian(cx, variant="basic"):
    if variant == "basic":
        d = assemble_d(cx)
        delta = assemble_codifferential(cx, "basic")
        return (d @ delta + delta @ d).renamed("Delta_b", symmetric_wrt_weight=True)
    if variant == "twisted":
        dt, deltat = assemble_twisted_pair(cx)
        return (dt @ deltat + deltat @ dt).renamed("Delta~", symmetric_wrt_weight=True)
    raise ValueError(f"unknown variant {variant!r}")


def assemble_twisted_duality_differential(cx):
    return (assemble_d(cx) - kappa_wedge(cx)).renamed("d-k^")


def differential_laplacian(cx, dif):
    """dif dif* + dif* dif for any differential on the complex."""
    adj = gram_adjoint(cx, dif)
    return (dif @ adj + adj @ dif).renamed(f"Lap[{dif.name}]", symmetric_wrt_weight=True)


def orthonormal_change_of_basis(cx, max_condition=1e12):
    """Block map C with C^T G C = I, from the Cholesky factor of each Gram."""
    blocks = {}
    for k in range(cx.q + 1):
        G = gram_matrix(cx, k)
        cond = np.linalg.cond(G)
        if cond > max_condition:
            raise ConditioningError(
                f"Gram matrix of degree {k} has condition number {cond:.2e} > {max_condition:.0e}")
        Lc = cholesky(G, lower=True)
        blocks[(k, k)] = solve_triangular(Lc, np.eye(len(G)), lower=True).T
    return GradedOperator.from_blocks(cx.dims, blocks, name="C")


def to_orthonormal(cx, op):
    """Express a weight-symmetric operator as a plainly symmetric matrix, C^{-1} A C."""
    C = orthonormal_change_of_basis(cx).matrix
    G = graded_gram(cx).matrix
    # C^{-1} = C^T G
    return C.T @ G @ op.matrix @ C


# ---------------------------------------------------------------------------
# signature operator
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SignatureOperator:
    """D_b restricted to the +1 eigenspace of the involution, landing in the -1 one."""

    involution: np.ndarray
    plus_basis: np.ndarray
    minus_basis: np.ndarray
    matrix: np.ndarray
    involution_defect: float
    anticommutator_defect: float

    @property
    def dim_plus(self):
        return self.plus_basis.shape[1]

    @property
    def dim_minus(self):
        return self.minus_basis.shape[1]


def signature_involution(cx):
    """i^{k(k-1) + q/2} times the transversal star on each degree (complex)."""
    if cx.q % 2:
        raise UnsupportedModelError(f"signature operator needs even codimension, got q={cx.q}")
    star = assemble_hodge_star(cx)
    blocks = {}
    for k in range(cx.q + 1):
        blocks[(k, cx.q - k)] = (1j ** (k * (k - 1) + cx.q // 2)) * star.block(k, cx.q - k)
    return GradedOperator.from_blocks(cx.dims, blocks, name="star-inv")


def assemble_signature_operator(cx, tol=DEFAULT_TOL):
    tau = signature_involution(cx).matrix
    n = tau.shape[0]
    inv_defect = float(np.max(np.abs(tau @ tau - np.eye(n))))
    if inv_defect > NILPOTENT_TOL:
        raise ConsistencyError(f"involution does not square to the identity ({inv_defect:.2e})")
    D = assemble_dirac(cx, "basic").matrix
    anti = tau @ D + D @ tau
    scale = max(1.0, opnorm(D))
    anti_defect = opnorm(anti) / scale
    if anti_defect > tol:
        raise ConsistencyError(f"D_b does not anticommute with the involution ({anti_defect:.2e})")
    # tau is unitary in the unweighted basis and commutes with the weighted Gram
    vals, vecs = np.linalg.eigh(0.5 * (tau + tau.conj().T))
    plus = vecs[:, vals > 0]
    minus = vecs[:, vals < 0]
    G = graded_gram(cx).matrix
    block = minus.conj().T @ G @ D @ plus
    return SignatureOperator(tau, plus, minus, block, inv_defect, anti_defect)


# ---------------------------------------------------------------------------
# structural identities
# ---------------------------------------------------------------------------

def _square_defect(op):
    n = opnorm(op.matrix)
    return 0.0 if n == 0 else opnorm((op @ op).matrix) / n**2


def intertwining_defects(cx):
    """Per-degree defects of delta_b * = (-1)^{k+1} *(d - k^) and delta~ * = (-1)^{k+1} * d~.

    Measured on resolved columns, relative to max(1, ||rhs||).
    """
    q = cx.q
    star = assemble_hodge_star(cx)
    delta_b = assemble_codifferential(cx, "basic")
    dk = assemble_twisted_duality_differential(cx)
    dt, deltat = assemble_twisted_pair(cx)
    out = {"duality": {}, "twisted": {}}
    for k in range(q):
        cols = cx.resolved_columns(k)
        S_in = star.block(k, q - k)
        S_out = star.block(k + 1, q - k - 1)
        sign = (-1) ** (k + 1)
        for key, lhs_op, rhs_op in (("duality", delta_b, dk), ("twisted", deltat, dt)):
            lhs = lhs_op.block(q - k, q - k - 1) @ S_in
            rhs = sign * S_out @ rhs_op.block(k, k + 1)
            scale = max(1.0, opnorm(rhs[:, cols]))
            out[key][k] = opnorm((lhs - rhs)[:, cols]) / scale
    return out


def identity_defects(cx):
    """Every structural identity of the complex as a named relative defect."""
    d = assemble_d(cx)
    dt, deltat = assemble_twisted_pair(cx)
    D = assemble_dirac(cx, "basic")
    star = assemble_hodge_star(cx)
    out = {
        "d^2": _square_defect(d),
        "d~^2": _square_defect(dt),
        "delta~^2": _square_defect(deltat),
        "(d-k^)^2": _square_defect(assemble_twisted_duality_differential(cx)),
    }
    for k in range(cx.q + 1):
        sq = star.block(cx.q - k, k) @ star.block(k, cx.q - k)
        out[f"star^2[{k}]"] = float(np.max(np.abs(sq - star_square_sign(cx.q, k) * np.eye(len(sq))),
                                           initial=0.0))
    for key, per in intertwining_defects(cx).items():
        for k, v in per.items():
            out[f"{key}[{k}]"] = v
    for k, v in assemble_codifferential(cx, "basic").meta["adjoint_defects"].items():
        out[f"adjoint[{k}]"] = v
    out["D_b symmetry"] = symmetry_defect(cx, D)
    lap = assemble_laplacian(cx, "twisted")
    out["Delta~ - D_b^2"] = opnorm((lap - D @ D).matrix) / max(1.0, opnorm(lap.matrix))
    return out
