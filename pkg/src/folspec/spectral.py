"""Eigenvalues, spectrum comparison, harmonic-space dimensions, convergence."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, eigh, solve_triangular
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .complex import (
    ConsistencyError,
    GradedOperator,
    assemble_d,
    assemble_twisted_duality_differential,
    assemble_twisted_pair,
    differential_laplacian,
    graded_gram,
)
from .models import rebuild

CLUSTER_RTOL = 1e-6
KERNEL_FACTOR = 1e-8
DENSE_LIMIT = 4000


def cluster_tolerance(lam):
    return CLUSTER_RTOL * max(1.0, abs(lam))


def clusters(values):
    """Index ranges [start, stop) of runs of sorted values within the cluster tolerance."""
    out, start = [], 0
    for i in range(1, len(values) + 1):
        if i == len(values) or values[i] - values[i - 1] > cluster_tolerance(values[i - 1]):
            out.append((start, i))
            start = i
    return out


@dataclass
class Spectrum:
    """Lowest-|lambda| eigenvalues, sorted ascending, closed under clusters.

    ``requested`` is the count asked for; ``eigenvalues`` may be longer
    because a multiplicity cluster straddling the cut is kept whole.
    """

    eigenvalues: np.ndarray
    residuals: np.ndarray
    requested: int
    cluster_tol: float = CLUSTER_RTOL
    method: str = "dense"
    converged: bool = True
    truncation: dict = field(default_factory=dict)

    def __post_init__(self):
        order = np.argsort(self.eigenvalues, kind="stable")
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)[order]
        self.residuals = np.asarray(self.residuals, dtype=float)[order]

    @property
    def clusters(self):
        return clusters(self.eigenvalues)

    @property
    def multiplicities(self):
        return [(float(np.mean(self.eigenvalues[a:b])), b - a) for a, b in self.clusters]

    def __len__(self):
        return len(self.eigenvalues)

    def lowest(self, m):
        """Cluster-complete set of the m smallest |lambda|, ascending."""
        if m >= len(self.eigenvalues):
            return self.eigenvalues.copy()
        mags = np.sort(np.abs(self.eigenvalues))
        cut = mags[m - 1] + cluster_tolerance(mags[m - 1])
        return self.eigenvalues[np.abs(self.eigenvalues) <= cut]

    def min_square(self):
        return float(np.min(self.eigenvalues**2))

    def as_dict(self):
        return {"eigenvalues": self.eigenvalues.tolist(), "residuals": self.residuals.tolist(),
                "requested": self.requested, "method": self.method,
                "converged": self.converged, "truncation": self.truncation}


def _as_matrix(x):
    return x.matrix if isinstance(x, GradedOperator) else np.asarray(x)


def _select(vals, m):
    """Indices of the m smallest |lambda|, extended to whole clusters."""
    if m is None or m >= len(vals):
        return np.arange(len(vals))
    mags = np.abs(vals)
    order = np.argsort(mags, kind="stable")
    cut = mags[order[m - 1]]
    return np.flatnonzero(mags <= cut + cluster_tolerance(cut))


def compute_spectrum(op, gram=None, m=None, tol=1e-10, method="auto", truncation=None):
    """Generalized symmetric eigenproblem A v = lambda v with G A symmetric.

    Dense path: Cholesky whitening of G and a symmetric eigendecomposition.
    Above ``DENSE_LIMIT`` (or with method="lanczos") shift-invert Lanczos
    around 0 is used; non-convergence yields a flagged partial result.
    """
    A = _as_matrix(op)
    n = A.shape[0]
    G = np.eye(n) if gram is None else _as_matrix(gram)
    GA = G @ A
    scale = np.linalg.norm(GA, 2) if n else 0.0
    if scale and np.linalg.norm(GA - GA.T, 2) > tol * scale:
        raise ConsistencyError(
            f"operator is not symmetric w.r.t. the Gram matrix "
            f"(defect {np.linalg.norm(GA - GA.T, 2) / scale:.2e})")
    if n == 0:
        return Spectrum(np.zeros(0), np.zeros(0), 0)
    GA = 0.5 * (GA + GA.T)
    if method == "auto":
        method = "dense" if n <= DENSE_LIMIT or m is None else "lanczos"
    converged = True
    if method == "dense":
        Lc = cholesky(G, lower=True)
        H = solve_triangular(Lc, solve_triangular(Lc, GA, lower=True).T, lower=True)
        vals, Y = eigh(0.5 * (H + H.T))
        V = solve_triangular(Lc.T, Y, lower=False)
    elif method == "lanczos":
        k = min(n - 2, (m or 20) + 12)
        try:
            vals, V = eigsh(GA, k=k, M=G, sigma=-1e-7, which="LM")
        except ArpackNoConvergence as exc:
            vals, V, converged = exc.eigenvalues, exc.eigenvectors, False
    else:
        raise ValueError(f"unknown method {method!r}")
    idx = _select(vals, m)
    vals, V = vals[idx], V[:, idx]
    R = A @ V - V * vals
    norms = np.sqrt(np.einsum("ij,ij->j", V, G @ V))
    res = np.sqrt(np.abs(np.einsum("ij,ij->j", R, G @ R))) / np.where(norms > 0, norms, 1.0)
    return Spectrum(vals, res, m if m is not None else n, method=method, converged=converged,
                    truncation=truncation or {"dimension": n})


def spectrum_of(cx, op, m=None, **kw):
    """compute_spectrum with the complex's weighted Gram and truncation metadata."""
    meta = {"truncation": cx.truncation, "dims": list(cx.dims)}
    gram = cx.gram() if hasattr(cx, "gram") else graded_gram(cx)
    return compute_spectrum(op, gram, m, truncation=meta, **kw)


@dataclass
class SpectrumComparison:
    status: str                 # "pass" | "fail" | "inconclusive"
    max_rel_deviation: float
    compared: int
    rel_tol: float
    detail: str = ""

    def as_dict(self):
        return {"status": self.status, "max_rel_deviation": self.max_rel_deviation,
                "compared": self.compared, "rel_tol": self.rel_tol, "detail": self.detail}


def relative_deviation(a, b):
    return np.abs(a - b) / np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))


def compare_spectra(a, b, m, rel_tol=1e-8):
    """Pair the cluster-complete lowest-m sets of two spectra in sorted order.

    Deviations are relative to max(1, |lambda|).  Missing or unconverged
    eigenvalues make the comparison inconclusive rather than failed.
    """
    for name, s in (("first", a), ("second", b)):
        if len(s) < m or not s.converged:
            return SpectrumComparison("inconclusive", float("nan"), 0, rel_tol,
                                      f"{name} spectrum has fewer than {m} converged eigenvalues")
        sel = np.abs(s.eigenvalues) <= np.sort(np.abs(s.eigenvalues))[m - 1] * (1 + 1e-6) + 1e-6
        scale = np.maximum(1.0, np.abs(s.eigenvalues[sel]))
        if np.any(s.residuals[sel] / scale > rel_tol / 10):
            return SpectrumComparison("inconclusive", float("nan"), 0, rel_tol,
                                      f"{name} spectrum residuals exceed rel_tol/10")
    la, lb = a.lowest(m), b.lowest(m)
    if len(la) != len(lb):
        n = min(len(la), len(lb))
        dev = float(np.max(relative_deviation(la[:n], lb[:n]), initial=0.0))
        return SpectrumComparison("fail", max(dev, 1.0), n, rel_tol,
                                  f"multiplicity clusters differ ({len(la)} vs {len(lb)} values)")
    dev = float(np.max(relative_deviation(la, lb), initial=0.0))
    ca = [y - x for x, y in clusters(la)]
    cb = [y - x for x, y in clusters(lb)]
    if dev <= rel_tol and ca != cb:
        return SpectrumComparison("fail", dev, len(la), rel_tol, "multiplicity clusters differ")
    return SpectrumComparison("pass" if dev <= rel_tol else "fail", dev, len(la), rel_tol)


# ---------------------------------------------------------------------------
# kernels and Betti numbers
# ---------------------------------------------------------------------------

def _block_eigenvalues(lap, gram, k):
    A = lap.block(k, k)
    G = gram.block(k, k)
    if A.size == 0:
        return np.zeros(0)
    GA = G @ A
    return eigh(0.5 * (GA + GA.T), G, eigvals_only=True)


def kernel_dimension(op, gram=None, factor=KERNEL_FACTOR, scale=None):
    """Number of eigenvalues below factor * max(largest |eigenvalue|, 1)."""
    A = _as_matrix(op)
    G = np.eye(A.shape[0]) if gram is None else _as_matrix(gram)
    GA = G @ A
    vals = eigh(0.5 * (GA + GA.T), G, eigvals_only=True)
    ref = max(1.0, float(np.max(np.abs(vals), initial=0.0))) if scale is None else scale
    return int(np.sum(np.abs(vals) < factor * ref))


@dataclass
class BettiTable:
    differential: str
    dims: list
    euler: int
    threshold: float
    stable_threshold: bool
    stable_truncation: bool | None
    indeterminate: bool
    model: str = ""
    truncation: object = None

    @property
    def stable(self):
        return self.stable_threshold and self.stable_truncation is not False

    def as_dict(self):
        return {"differential": self.differential, "dims": list(self.dims), "euler": self.euler,
                "threshold": self.threshold, "stable_threshold": self.stable_threshold,
                "stable_truncation": self.stable_truncation,
                "indeterminate": self.indeterminate, "model": self.model,
                "truncation": self.truncation}


DIFFERENTIALS = ("d", "d-kappa", "d~")


def differential_of(cx, which):
    if which == "d":
        return assemble_d(cx)
    if which == "d-kappa":
        return assemble_twisted_duality_differential(cx)
    if which == "d~":
        return assemble_twisted_pair(cx)[0]
    raise ValueError(f"unknown differential {which!r}; expected one of {DIFFERENTIALS}")


def _betti_counts(cx, which, factor):
    lap = differential_laplacian(cx, differential_of(cx, which))
    gram = graded_gram(cx)
    vals = [_block_eigenvalues(lap, gram, k) for k in range(cx.q + 1)]
    ref = max(1.0, max(float(np.max(np.abs(v), initial=0.0)) for v in vals))
    thr = factor * ref
    return [int(np.sum(np.abs(v) < thr)) for v in vals], [int(np.sum(np.abs(v) < 10 * thr)) for v in vals], thr


def betti_table(cx, differential="d", factor=KERNEL_FACTOR, check_truncation=True):
    """Harmonic-space dimensions of the Laplacian of a differential, per degree.

    Stability is checked at 10x the threshold and, when requested, at the
    next truncation level; any disagreement marks the table indeterminate.
    """
    dims, dims10, thr = _betti_counts(cx, differential, factor)
    stable_thr = dims == dims10
    stable_tr = None
    if check_truncation and cx.descriptor is not None:
        up = rebuild(cx, _next_level(cx.truncation))
        stable_tr = _betti_counts(up, differential, factor)[0] == dims
    euler = int(sum((-1) ** k * n for k, n in enumerate(dims)))
    return BettiTable(differential, dims, euler, thr, stable_thr, stable_tr,
                      not (stable_thr and stable_tr is not False), cx.name, cx.truncation)


def _next_level(truncation):
    return truncation + 1


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------

@dataclass
class ConvergenceRow:
    truncation: object
    value: object
    delta: float | None

    def as_dict(self):
        v = self.value.tolist() if isinstance(self.value, np.ndarray) else self.value
        return {"truncation": self.truncation, "value": v, "delta": self.delta}


def convergence_study(family, ladder, observable):
    """Tabulate observable(family(N)) over a truncation ladder with successive deltas."""
    ladder = list(ladder)
    if len(ladder) < 3:
        raise ValueError("a convergence study needs at least 3 truncation levels")
    rows, prev = [], None
    for N in ladder:
        val = observable(family(N))
        if prev is None:
            delta = None
        else:
            delta = float(np.max(np.abs(np.asarray(val, dtype=float) - np.asarray(prev, dtype=float))))
        rows.append(ConvergenceRow(N, val, delta))
        prev = val
    return rows
