"""Experiments over model complexes and the reports they produce.

Every experiment returns a :class:`Report` whose verdict is derived from a
list of numbered checks.  Negative controls are ordinary runs inside the
same report, so a passing invariance report also shows what breaks when
the exact shift of kappa_b is left out.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .complex import (
    BasicOneForm,
    GradedOperator,
    ModelDefinitionError,
    UnsupportedModelError,
    assemble_codifferential,
    assemble_d,
    assemble_dirac,
    assemble_form_action,
    assemble_laplacian,
    assemble_signature_operator,
    gram_matrix,
    identity_defects,
    opnorm,
)
from .models import (
    BUILTIN_MODELS,
    DEFAULT_PARAMETERS,
    KAPPA_SHIFT_SIGN,
    BasicFunction,
    ModelDescriptor,
    SpinorComplex,
    build_model,
    deform_complex,
    fourier_mode,
    fourier_sum,
    harmonic_sum,
    model_curvature_data,
    rebuild,
)
from .spectral import (
    betti_table,
    compare_spectra,
    compute_spectrum,
    convergence_study,
    spectrum_of,
)

SCHEMA_VERSION = 1
EXPERIMENT_KINDS = ("invariance", "conjugation", "duality", "estimate", "cohomology",
                    "convergence", "validate", "spectrum")
DEFAULT_TOLERANCES = {
    "rel_tol": 1e-8,          # spectrum comparison
    "control_gap": 1e-3,      # a negative control must miss by at least this much
    "conjugation": 1e-9,
    "identity": 1e-10,
    "nilpotent": 1e-12,
    "slack": 1e-9,            # estimate slack and equality detection
    "harmonic": 1e-10,
    "convergence": 1e-12,
}
EIGEN_DIGITS = 12


def worker_count():
    """Thread cap from FOLSPEC_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("FOLSPEC_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# configuration and reports
# ---------------------------------------------------------------------------

def default_weights(kind):
    """Three deformation exponents phi per base type (the weight is e^phi)."""
    if kind in ("sphere-base", "hopf-de-rham"):
        return [harmonic_sum((0.5, 1, 0)),
                harmonic_sum((0.3, 1, 1), (0.2, 2, -1)),
                harmonic_sum((0.4, 2, 0), (-0.2, 1, -1))]
    if kind == "torus-base":
        return [fourier_mode(1, "s", 0.5), fourier_mode(1, "c", 0.3),
                fourier_sum((0.2, 1, "s"), (0.1, 2, "c"))]
    return [fourier_mode(1, "s"), fourier_mode(2, "c"),
            fourier_sum((0.3, 1, "s"), (0.2, 3, "c"))]


def _weight(w):
    if isinstance(w, BasicFunction):
        return w
    if isinstance(w, dict):
        return BasicFunction.from_dict(w)
    return BasicFunction.parse(w)


@dataclass
class ExperimentConfig:
    model: str = "carriere"
    kind: str = "invariance"
    truncation: float | None = None
    parameters: dict = field(default_factory=dict)
    weights: list = field(default_factory=list)
    count: int = 20
    tolerances: dict = field(default_factory=dict)
    ladder: list = field(default_factory=list)
    observable: str = "laplacian"
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        if self.count < 1:
            raise ValueError("eigenvalue count must be positive")
        self.weights = [_weight(w) for w in self.weights]
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValueError(f"unknown tolerance names {sorted(unknown)}")
        self.tolerances = {k: float(self.tolerances.get(k, v))
                           for k, v in sorted(DEFAULT_TOLERANCES.items())}

    def tol(self, name):
        return self.tolerances[name]

    def descriptor(self):
        desc = ModelDescriptor(self.model, {**_defaults(self.model), **self.parameters})
        return desc if self.truncation is None else desc.with_truncation(self.truncation)

    def build(self):
        return build_model(self.descriptor())

    def as_dict(self):
        return {"model": self.model, "kind": self.kind, "truncation": self.truncation,
                "parameters": dict(self.parameters),
                "weights": [w.as_dict() for w in self.weights], "count": self.count,
                "tolerances": dict(self.tolerances),
                "ladder": list(self.ladder), "observable": self.observable,
                "outputs": dict(self.outputs)}

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config fields {sorted(unknown)}")
        return cls(**data)


def _defaults(kind):
    return dict(DEFAULT_PARAMETERS.get(kind, {}))


REPORT_KEYS = ("config", "runs", "checks", "verdict", "meta")
CHECK_KEYS = ("id", "name", "status", "measured", "tolerance", "detail")
STATUSES = ("pass", "fail", "inconclusive", "skipped")


class ReportFormatError(ValueError):
    pass


@dataclass
class Report:
    config: dict
    runs: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    verdict: str = "pass"
    meta: dict = field(default_factory=dict)

    def add_check(self, name, status, measured=None, tolerance=None, detail=""):
        if status not in STATUSES:
            raise ValueError(f"bad check status {status!r}")
        cid = len(self.checks) + 1
        self.checks.append({"id": cid, "name": name, "status": status,
                            "measured": _num(measured), "tolerance": _num(tolerance),
                            "detail": detail})
        self.verdict = overall_verdict(self.checks)
        return cid

    def check_bound(self, name, measured, tolerance, detail=""):
        ok = measured is not None and math.isfinite(measured) and measured <= tolerance
        return self.add_check(name, "pass" if ok else "fail", measured, tolerance, detail)

    def add_run(self, name, **payload):
        self.runs.append({"name": name, **_clean(payload)})

    def statuses(self):
        return {c["name"]: c["status"] for c in self.checks}

    def as_dict(self):
        return {"config": self.config, "runs": self.runs, "checks": self.checks,
                "verdict": self.verdict, "meta": self.meta}

    def to_json(self, include_meta=True):
        doc = self.as_dict()
        if not include_meta:
            doc = {k: v for k, v in doc.items() if k != "meta"}
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ReportFormatError("report must be a JSON object")
        unknown = set(doc) - set(REPORT_KEYS)
        missing = set(REPORT_KEYS) - set(doc)
        if unknown or missing:
            raise ReportFormatError(f"report keys: unknown {sorted(unknown)}, missing {sorted(missing)}")
        version = doc["meta"].get("schema_version")
        if version != SCHEMA_VERSION:
            raise ReportFormatError(f"unsupported report schema version {version!r}")
        for c in doc["checks"]:
            if set(c) != set(CHECK_KEYS):
                raise ReportFormatError(f"check entry with fields {sorted(c)}")
            if c["status"] not in STATUSES:
                raise ReportFormatError(f"bad check status {c['status']!r}")
        if doc["verdict"] not in STATUSES[:3]:
            raise ReportFormatError(f"bad verdict {doc['verdict']!r}")
        return cls(**doc)


def overall_verdict(checks):
    st = {c["status"] for c in checks}
    if "fail" in st:
        return "fail"
    if "inconclusive" in st:
        return "inconclusive"
    return "pass"


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, BasicFunction):
        return obj.as_dict()
    return obj


def _eig_list(values):
    return [float(f"{v:.{EIGEN_DIGITS}g}") + 0.0 for v in np.asarray(values)]


def _start(cfg_dict):
    return Report(cfg_dict, meta={"started": time.perf_counter()})


def _finish(report):
    started = report.meta.pop("started", time.perf_counter())
    report.meta.update({
        "schema_version": SCHEMA_VERSION,
        "package": "folspec", "version": __version__,
        "numpy": np.__version__, "scipy": scipy.__version__,
        "python": platform.python_version(),
        "kappa_shift_sign": KAPPA_SHIFT_SIGN,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_clock_s": round(time.perf_counter() - started, 3),
    })
    report.verdict = overall_verdict(report.checks)
    return report


def _config_echo(cx, kind, **extra):
    desc = cx.descriptor.as_dict() if cx.descriptor is not None else {"kind": cx.name}
    return _clean({"kind": kind, "model": desc, **extra})


def _spectrum_run(report, name, spec):
    report.add_run(name, eigenvalues=_eig_list(spec.eigenvalues),
                   residuals=[float(f"{r:.3g}") for r in spec.residuals],
                   clusters=[b - a for a, b in spec.clusters],
                   method=spec.method, converged=spec.converged)


# ---------------------------------------------------------------------------
# metric deformations
# ---------------------------------------------------------------------------

def deform_bundle_like_metric(cx, phi):
    """Weight w e^phi and kappa_b + s d(phi) with the global sign s.

    The sign is the one for which the weighted adjoint of d equals
    delta_T + kappa_b_| on the deformed complex, see ``resolve_shift_sign``.
    """
    if isinstance(phi, (str, dict)):
        phi = _weight(phi)
    out = deform_complex(cx, phi, KAPPA_SHIFT_SIGN, shift=True)
    assemble_codifferential(out, "basic")  # raises if the sign were inconsistent
    return out


def resolve_shift_sign(truncation=16):
    """Find the kappa shift sign from the adjointness rule on a circle model."""
    base = build_model("circle-fibration", truncation=truncation)
    phi = fourier_mode(1, "s")
    good = []
    for s in (1, -1):
        try:
            assemble_codifferential(deform_complex(base, phi, s), "basic")
            good.append(s)
        except ModelDefinitionError:
            pass
    if len(good) != 1:
        raise ModelDefinitionError(f"kappa shift sign is not determined (consistent: {good})")
    return good[0]


# ---------------------------------------------------------------------------
# invariance and conjugation
# ---------------------------------------------------------------------------

def _dirac_spectrum(cx, m):
    if isinstance(cx, SpinorComplex):
        return spectrum_of(cx, cx.dirac(), m)
    return spectrum_of(cx, assemble_dirac(cx, "basic"), m)


def run_invariance_experiment(cx, weights=None, m=20, rel_tol=1e-8, control=True,
                              control_gap=1e-3):
    """Basic Dirac spectra of the complex and of each metric deformation.

    All pairs are compared.  With ``control`` each deformation is repeated
    without the exact shift of kappa_b; that variant is expected to change
    the spectrum by at least ``control_gap`` relative on some eigenvalue.
    """
    weights = [_weight(w) for w in (weights or default_weights(cx.descriptor.kind))]
    report = _start(_config_echo(cx, "invariance", weights=[w.as_dict() for w in weights],
                                 count=m, rel_tol=rel_tol, control=control))
    variants = [("base", cx)] + [(f"phi[{i + 1}]", deform_bundle_like_metric(cx, w))
                                 for i, w in enumerate(weights)]
    if control:
        variants += [(f"control[{i + 1}]", deform_complex(cx, w, shift=False))
                     for i, w in enumerate(weights)]
    spectra = dict(zip([n for n, _ in variants], _pmap(lambda v: _dirac_spectrum(v[1], m), variants)))
    for name, spec in spectra.items():
        _spectrum_run(report, name, spec)
    metric = [n for n in spectra if not n.startswith("control")]
    for i, a in enumerate(metric):
        for b in metric[i + 1:]:
            cmp = compare_spectra(spectra[a], spectra[b], m, rel_tol)
            report.add_check(f"spectrum {a} == {b}", cmp.status, cmp.max_rel_deviation, rel_tol,
                             cmp.detail)
    if control:
        devs = []
        for name in spectra:
            if name.startswith("control"):
                cmp = compare_spectra(spectra["base"], spectra[name], m, rel_tol)
                devs.append(cmp.max_rel_deviation)
                report.add_run(f"{name} vs base", status=cmp.status,
                               max_rel_deviation=cmp.max_rel_deviation, detail=cmp.detail)
        worst = max(devs)
        report.add_check("negative control departs without the exact shift",
                         "pass" if worst >= control_gap else "fail", worst, control_gap,
                         "largest relative deviation over the control variants")
    return _finish(report)


def _padding(cx, phi):
    """Extra truncation levels that keep e^{+-phi/2} products off the edge."""
    if cx.space.kind == "sphere":
        return max(6, 5 * phi.bandwidth)
    return max(16, 8 * phi.bandwidth)


def check_conjugation(cx, phi, tol=1e-9, pad=None):
    """Check D_b = U^-1 D_b' U with U = e^{s phi/2}, and that D_b' - D_b is zeroth order.

    Both sides are assembled at a padded truncation and compared on the
    original truncation's coefficients; the padding keeps the products with
    e^{+-phi/2} clear of the truncation edge.  With a nonconstant weight
    the comparison uses the complex's resolved columns, like the other
    identity checks.
    """
    phi = _weight(phi)
    s = KAPPA_SHIFT_SIGN
    pad = _padding(cx, phi) if pad is None else pad
    report = _start(_config_echo(cx, "conjugation", phi=phi.as_dict(), pad=pad, tol=tol))
    big = rebuild(cx, cx.truncation + pad)
    big_def = deform_bundle_like_metric(big, phi)
    sp = big.space
    vals = np.asarray(phi(sp.coords), dtype=float) * np.ones(sp.n_grid)

    def mult(f):
        return GradedOperator.from_blocks(
            big.dims, {(k, k): sp.multiplication(k, f) for k in range(big.q + 1)}).matrix

    U, U_inv = mult(np.exp(s * vals / 2)), mult(np.exp(-s * vals / 2))
    offs = np.concatenate([[0], np.cumsum(big.dims)])
    idx = np.concatenate([cx.space.restriction(sp, k) + offs[k] for k in range(cx.q + 1)])
    cols = cx.resolved_columns()
    sub = np.ix_(idx, idx[cols])

    D = assemble_dirac(cx).matrix
    D_def = assemble_dirac(big_def).matrix
    scale = opnorm(D)
    conj_defect = opnorm((U_inv @ D_def @ U)[sub] - D[:, cols]) / scale
    report.check_bound("U^-1 D_b' U == D_b", conj_defect, tol,
                       f"U = exp({s:+d} phi/2), padded by {pad} levels, "
                       f"columns up to level {cx.resolved_level}")

    dphi = BasicOneForm(sp.d_blocks[0] @ sp.project_function(vals))
    clifford = (assemble_form_action(big, dphi, "wedge")
                - assemble_form_action(big, dphi, "contract")).matrix
    diff = D_def - assemble_dirac(big).matrix
    cliff_defect = opnorm((diff + 0.5 * s * clifford)[sub]) / scale
    report.check_bound("D_b' - D_b == Clifford multiplication by -s/2 d(phi)", cliff_defect, tol)

    probe = sp.function_synth[:, 1]  # first non-constant basis function
    M = mult(probe)
    comm = opnorm((diff @ M - M @ diff)[sub]) / max(1.0, opnorm(diff[sub]))
    report.check_bound("D_b' - D_b commutes with multiplication", comm, tol,
                       "no derivative content in the difference")
    report.add_run("defects", conjugation=conj_defect, clifford=cliff_defect, commutator=comm,
                   sign=s, norm_D_b=scale)
    return _finish(report)


# ---------------------------------------------------------------------------
# dualities and cohomology
# ---------------------------------------------------------------------------

def _betti_check(report, label, tables, lhs, rhs, reverse):
    a, b = tables[lhs], tables[rhs]
    if a.indeterminate or b.indeterminate:
        report.add_check(label, "inconclusive", detail="indeterminate kernel dimension")
        return
    want = list(reversed(b.dims)) if reverse else b.dims
    ok = a.dims == want
    report.add_check(label, "pass" if ok else "fail", detail=f"{a.dims} vs {want}")


def run_duality_experiment(cx, phi=None):
    """Twisted duality for d and d - kappa^, self-duality and metric independence for d~."""
    if isinstance(cx, SpinorComplex):
        raise UnsupportedModelError("the spinor model has no form grading to dualize")
    phi = _weight(phi) if phi is not None else default_weights(cx.descriptor.kind)[0]
    report = _start(_config_echo(cx, "duality", phi=phi.as_dict()))
    tables = {w: betti_table(cx, w) for w in ("d", "d-kappa", "d~")}
    tables["d~ deformed"] = betti_table(deform_bundle_like_metric(cx, phi), "d~")
    for name, t in tables.items():
        report.add_run(f"betti[{name}]", **t.as_dict())
    _betti_check(report, "H^k(d) == H^{q-k}(d - kappa^)", tables, "d", "d-kappa", True)
    _betti_check(report, "H~^k == H~^{q-k}", tables, "d~", "d~", True)
    _betti_check(report, "H~ independent of the metric", tables, "d~", "d~ deformed", False)
    return _finish(report)


def run_cohomology_experiment(cx):
    """Betti tables of d, d - kappa^ and d~ with their stability flags."""
    report = _start(_config_echo(cx, "cohomology"))
    for w in ("d", "d-kappa", "d~"):
        t = betti_table(cx, w)
        report.add_run(f"betti[{w}]", **t.as_dict())
        report.add_check(f"betti[{w}] stable", "inconclusive" if t.indeterminate else "pass",
                         detail=f"{t.dims}, euler {t.euler}")
    return _finish(report)


# ---------------------------------------------------------------------------
# estimates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HarmonicVerdict:
    harmonic: bool
    d_norm: float
    delta_norm: float
    tol: float

    def as_dict(self):
        return {"harmonic": self.harmonic, "d_norm": self.d_norm, "delta_norm": self.delta_norm,
                "tol": self.tol}


def check_basic_harmonic(cx, tol=1e-10):
    """Is kappa_b closed and co-closed (delta_b kappa_b = 0)?"""
    if isinstance(cx, SpinorComplex):
        return HarmonicVerdict(True, 0.0, 0.0, tol)
    k = cx.kappa_b.coefficients
    scale = max(1.0, cx.kappa_b.norm())
    d_norm = float(np.linalg.norm(assemble_d(cx).block(1, 2) @ k)) / scale if cx.q >= 2 else 0.0
    delta = assemble_codifferential(cx, "basic").block(1, 0) @ k
    delta_norm = float(np.linalg.norm(delta)) / scale
    return HarmonicVerdict(d_norm <= tol and delta_norm <= tol, d_norm, delta_norm, tol)


def _bound_terms(cx, curv, harmonic):
    """(name, needed fields, value-or-None, note) for each eigenvalue bound."""
    q = cx.q
    c = None if q < 2 else q / (4.0 * (q - 1))
    get = curv.as_dict()

    def have(*names):
        return all(get[n] is not None for n in names)

    out = []
    if have("transversal_scalar"):
        out.append(("transversal", get["transversal_scalar"], ""))
    else:
        out.append(("transversal", None, "Scal^nabla not supplied"))
    if not have("transversal_scalar", "kappa_sq"):
        out.append(("scal-kappa", None, "Scal^nabla or |kappa|^2 not supplied"))
    elif not harmonic:
        out.append(("scal-kappa", None, "kappa_b is not basic-harmonic in this metric"))
    else:
        out.append(("scal-kappa", get["transversal_scalar"] + get["kappa_sq"], ""))
    if have("ambient_scalar", "leaf_scalar", "oneill_A_sq", "oneill_T_sq"):
        out.append(("spin-foliation", get["ambient_scalar"] - get["leaf_scalar"]
                    + get["oneill_A_sq"] + get["oneill_T_sq"], ""))
    else:
        out.append(("spin-foliation", None, "Scal_M, Scal_L, |A|^2 or |T|^2 not supplied"))
    if getattr(cx, "p", 1) != 1:
        out.append(("flow", None, "not a flow"))
    elif have("ambient_scalar", "oneill_A_sq", "kappa_sq"):
        out.append(("flow", get["ambient_scalar"] + get["oneill_A_sq"] + get["kappa_sq"], ""))
    else:
        out.append(("flow", None, "Scal_M, |A|^2 or |kappa|^2 not supplied"))
    if c is None:
        # codimension 1 carries no transverse curvature; the bound is 0
        return [(name, 0.0, "codimension 1: no curvature term") if name == "transversal"
                else (name, None, note or "needs codimension >= 2") for name, v, note in out]
    return [(name, None if v is None else c * v, note) for name, v, note in out]


def run_estimate_experiment(cx, m=20, slack_tol=1e-9):
    """Compare min lambda^2 of D_b with each curvature bound that applies.

    The bounds are spin-Dirac estimates.  On a form complex a bound is only
    checked when it is <= 0 (flat or negatively curved bases), where it holds
    for any operator; positive bounds need the spinor model.
    """
    curv = model_curvature_data(cx)
    hv = check_basic_harmonic(cx)
    spinor = isinstance(cx, SpinorComplex)
    report = _start(_config_echo(cx, "estimate", count=m, slack_tol=slack_tol))
    spec = _dirac_spectrum(cx, m)
    lam2 = spec.min_square()
    _spectrum_run(report, "D_b", spec)
    report.add_run("curvature", **curv.as_dict())
    report.add_run("kappa_b basic-harmonic", **hv.as_dict())
    for name, bound, note in _bound_terms(cx, curv, hv.harmonic):
        if bound is None:
            report.add_check(f"bound[{name}]", "skipped", detail=note)
            continue
        if not spinor and bound > slack_tol:
            report.add_check(f"bound[{name}]", "skipped", bound,
                             detail="positive spin bound needs the spinor model")
            continue
        slack = lam2 - bound
        equal = abs(slack) <= slack_tol
        detail = f"min lambda^2 = {lam2:.12g}, bound = {bound:.12g}"
        if equal:
            detail += "; limiting case (equality)"
        if bound <= 0:
            detail += "; trivial, of interest only for positive transversal scalar curvature"
        report.add_check(f"bound[{name}]", "pass" if slack >= -slack_tol else "fail", slack,
                         -slack_tol, detail)
        report.add_run(f"estimate[{name}]", min_lambda_sq=lam2, bound=bound, slack=slack,
                       limiting_case=equal)
    return _finish(report)


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------

DEFAULT_LADDERS = {
    "carriere": [16, 32, 64], "circle-fibration": [16, 32, 64], "torus-base": [4, 6, 8],
    "sphere-base": [4, 6, 8], "hopf-de-rham": [4, 6, 8], "hopf-spinor": [3.5, 5.5, 7.5],
}


def laplacian_degree0_eigenvalues(cx, count=6):
    """Lowest eigenvalues of the basic Laplacian on functions."""
    lap = assemble_laplacian(cx, "basic")
    spec = compute_spectrum(lap.block(0, 0), gram_matrix(cx, 0), count)
    return np.sort(spec.eigenvalues)[:count]


def lowest_nonzero_laplacian(cx):
    vals = laplacian_degree0_eigenvalues(cx, 4)
    return float(vals[vals > 1e-8][0])


def run_convergence_experiment(model, ladder=None, observable="laplacian", tol=1e-12,
                               parameters=None):
    """Observable against a truncation ladder; deltas must reach rounding level."""
    ladder = list(ladder or DEFAULT_LADDERS[model])
    params = dict(parameters or {})
    report = _start(_clean({"kind": "convergence", "model": model, "ladder": ladder,
                            "observable": observable, "tol": tol, "parameters": params}))

    def family(N):
        return build_model(model, **params, truncation=N)

    if observable == "laplacian":
        obs = lowest_nonzero_laplacian
    elif observable == "dirac":
        obs = lambda cx: float(np.min(np.abs(_dirac_spectrum(cx, 4).eigenvalues)))  # noqa: E731
    elif observable == "betti":
        obs = lambda cx: betti_table(cx, "d", check_truncation=False).dims  # noqa: E731
    else:
        raise ValueError(f"unknown observable {observable!r}")
    rows = convergence_study(family, ladder, obs)
    for r in rows:
        report.add_run(f"N={r.truncation}", **r.as_dict())
    deltas = [r.delta for r in rows[1:]]
    worst = max(deltas)
    ref = max(1.0, float(np.max(np.abs(np.asarray(rows[-1].value, dtype=float)))))
    report.check_bound("successive deltas at rounding level", worst / ref, tol,
                       "relative to max(1, |observable|)")
    return _finish(report)


# ---------------------------------------------------------------------------
# validation suite
# ---------------------------------------------------------------------------

def _validate_complex(report, name, cx, tol_nil, tol_id):
    defects = identity_defects(cx)
    for key, v in defects.items():
        if key.startswith(("d^2", "d~^2", "delta~^2", "(d-k^)^2", "star^2")):
            report.check_bound(f"{name}: {key}", v, tol_nil)
        else:
            report.check_bound(f"{name}: {key}", v, tol_id)
    if cx.q % 2 == 0:
        try:
            sig = assemble_signature_operator(cx, tol_id)
            report.check_bound(f"{name}: involution^2 == Id", sig.involution_defect, tol_nil)
            report.check_bound(f"{name}: involution anticommutes with D_b",
                               sig.anticommutator_defect, tol_id)
            report.add_check(f"{name}: dim Omega+ == dim Omega-",
                             "pass" if sig.dim_plus == sig.dim_minus else "fail",
                             detail=f"{sig.dim_plus} vs {sig.dim_minus}")
        except Exception as exc:  # consistency errors become failed checks
            report.add_check(f"{name}: signature operator", "fail", detail=str(exc))


def _validate_spinor(report, name, sp, tol_id):
    D = sp.dirac()
    G = sp.gram().matrix
    GA = G @ D.matrix
    report.check_bound(f"{name}: D_b symmetry", opnorm(GA - GA.T) / opnorm(GA), tol_id)
    spec = _dirac_spectrum(sp, 20)
    ev = spec.eigenvalues
    sym = float(np.max(np.abs(np.sort(ev) - np.sort(-ev))))
    report.check_bound(f"{name}: spectrum symmetric about 0", sym, tol_id)


def run_validation_suite(models=None, tolerances=None):
    """Every structural identity on every built-in model at default truncation."""
    tol = {**DEFAULT_TOLERANCES, **(tolerances or {})}
    models = list(models or BUILTIN_MODELS)
    report = _start({"kind": "validate", "models": models,
                     "tolerances": {k: tol[k] for k in sorted(tol)}})
    built = _pmap(build_model, models)
    for name, cx in zip(models, built):
        if isinstance(cx, SpinorComplex):
            _validate_spinor(report, name, cx, tol["identity"])
        else:
            _validate_complex(report, name, cx, tol["nilpotent"], tol["identity"])
        report.add_run(name, dims=list(cx.dims), truncation=cx.truncation)
    sign = resolve_shift_sign()
    report.add_check("kappa shift sign fixed by adjointness", "pass" if sign == KAPPA_SHIFT_SIGN
                     else "fail", sign, detail=f"resolved {sign:+d}, convention {KAPPA_SHIFT_SIGN:+d}")
    return _finish(report)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("model", "run", "index", "eigenvalue", "residual")


def report_csv(report):
    """Flatten every run carrying eigenvalues into rows."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    model = report.config.get("model")
    model = model.get("kind") if isinstance(model, dict) else model
    for run in report.runs:
        ev = run.get("eigenvalues")
        if ev is None:
            continue
        res = run.get("residuals") or [None] * len(ev)
        for i, (lam, r) in enumerate(zip(ev, res)):
            writer.writerow([model, run["name"], i, repr(lam), "" if r is None else repr(r)])
    return buf.getvalue()


def emit_report(report, path, fmt="json"):
    """Write a report as JSON or CSV; returns the path written."""
    path = Path(path)
    if fmt == "json":
        text = report.to_json()
    elif fmt == "csv":
        text = report_csv(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror}") from exc
    return path


def read_report(path):
    return Report.from_json(Path(path).read_text())


def run_experiment(config):
    """Dispatch an ExperimentConfig to its experiment."""
    kind = config.kind
    if kind == "validate":
        return run_validation_suite(tolerances=config.tolerances)
    if kind == "convergence":
        params = {k: v for k, v in config.parameters.items() if k != "truncation"}
        return run_convergence_experiment(config.model, config.ladder or None, config.observable,
                                          config.tol("convergence"), params)
    cx = config.build()
    if kind == "invariance":
        return run_invariance_experiment(cx, config.weights or None, config.count,
                                         config.tol("rel_tol"),
                                         control_gap=config.tol("control_gap"))
    if kind == "conjugation":
        phi = config.weights[0] if config.weights else default_weights(config.model)[0]
        return check_conjugation(cx, phi, config.tol("conjugation"))
    if kind == "duality":
        return run_duality_experiment(cx, config.weights[0] if config.weights else None)
    if kind == "cohomology":
        return run_cohomology_experiment(cx)
    if kind == "estimate":
        return run_estimate_experiment(cx, config.count, config.tol("slack"))
    if kind == "spectrum":
        return run_spectrum(cx, config.count, config.weights)
    raise ValueError(f"unknown experiment kind {kind!r}")


def run_spectrum(cx, m=20, weights=()):
    """Lowest-|lambda| basic Dirac eigenvalues, optionally after one deformation."""
    report = _start(_config_echo(cx, "spectrum", count=m,
                                 weights=[_weight(w).as_dict() for w in weights]))
    if weights:
        cx = deform_bundle_like_metric(cx, weights[0])
    spec = _dirac_spectrum(cx, m)
    _spectrum_run(report, "D_b", spec)
    ok = spec.converged and float(np.max(spec.residuals, initial=0.0)) <= 1e-8 * max(
        1.0, float(np.max(np.abs(spec.eigenvalues), initial=0.0)))
    report.add_check("eigenpairs converged", "pass" if ok else "inconclusive",
                     float(np.max(spec.residuals, initial=0.0)))
    return _finish(report)
