"""Built-in model foliations, reduced to their basic complexes.

circle-fibration   q=1 circle base, fiber volume v, kappa_b = -d log v
torus-base         q=2 flat torus base, fiber volume v, kappa_b = -d log v
sphere-base        q=2 round sphere of radius r, taut
hopf-de-rham       sphere base at r = 1/2 carrying the Hopf flow constants
hopf-spinor        spin-weight +-1/2 harmonics on S^2(r), spinor Dirac operator
carriere           mapping torus of a hyperbolic A in SL(2, Z), non-taut
synthetic          user JSON descriptor (see ``MODEL_SCHEMA``)
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path

import jsonschema
import numpy as np

from .bases import AliasingError, circle_space, real_harmonics, sphere_space, torus_space
from .complex import (
    BasicOneForm,
    GradedOperator,
    ModelDefinitionError,
    NilpotencyError,
    NonPositiveWeightError,
    NotClosedError,
    ReducedBasicComplex,
    opnorm,
)


class SchemaError(ModelDefinitionError):
    pass


# ---------------------------------------------------------------------------
# curvature constants and descriptors
# ---------------------------------------------------------------------------

CURVATURE_FIELDS = ("transversal_scalar", "ambient_scalar", "leaf_scalar",
                    "oneill_A_sq", "oneill_T_sq", "kappa_sq")


@dataclass(frozen=True)
class CurvatureData:
    """Curvature constants feeding the eigenvalue estimates.

    ``None`` means "not supplied"; estimates needing an absent constant are
    skipped instead of defaulting it to zero.  ``transversal_scalar`` is the
    infimum of Scal^nabla over the base.
    """

    transversal_scalar: float | None = None
    ambient_scalar: float | None = None
    leaf_scalar: float | None = None
    oneill_A_sq: float | None = None
    oneill_T_sq: float | None = None
    kappa_sq: float | None = None

    def __post_init__(self):
        for name in CURVATURE_FIELDS:
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise ModelDefinitionError(f"curvature constant {name} is not finite")
        for name in ("oneill_A_sq", "oneill_T_sq", "kappa_sq"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ModelDefinitionError(f"curvature constant {name} must be >= 0")

    @property
    def present(self):
        return {name: getattr(self, name) is not None for name in CURVATURE_FIELDS}

    def as_dict(self):
        return {name: getattr(self, name) for name in CURVATURE_FIELDS}


MODEL_KINDS = ("circle-fibration", "torus-base", "sphere-base", "hopf-de-rham",
               "hopf-spinor", "carriere", "synthetic")


@dataclass(frozen=True)
class ModelDescriptor:
    kind: str
    parameters: dict = field(default_factory=dict)
    notes: str = ""

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ModelDefinitionError(f"unknown model kind {self.kind!r}")

    def with_truncation(self, truncation):
        return replace(self, parameters={**self.parameters, "truncation": truncation})

    def as_dict(self):
        return {"kind": self.kind, "parameters": _jsonable(self.parameters), "notes": self.notes}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, BasicFunction):
        return obj.as_dict()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if callable(obj):
        return repr(obj)
    return obj


# ---------------------------------------------------------------------------
# basic functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BasicFunction:
    """A function on the transverse base given by basis coefficients.

    ``basis`` is "fourier" (coefficients a0, a1c, a1s, a2c, ... of the
    orthonormal trigonometric basis in the first base coordinate) or
    "harmonic" (real spherical harmonics ordered (l, m), m = -l..l).  With
    ``exponential`` the function is exp of the expansion.
    """

    basis: str
    coefficients: tuple
    exponential: bool = False
    length: float = 1.0

    def __post_init__(self):
        if self.basis not in ("fourier", "harmonic"):
            raise ValueError(f"unknown function basis {self.basis!r}")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    def __call__(self, coords):
        c = np.asarray(self.coefficients)
        if self.basis == "fourier":
            x = coords.get("t", coords.get("x"))
            if x is None:
                if c.size > 1:
                    raise ValueError("fourier functions need a circle or torus base")
                x = next(iter(coords.values()))
            vals = np.zeros_like(x, dtype=float)
            vals += c[0] if c.size else 0.0
            for i in range(1, c.size):
                n = (i + 1) // 2
                trig = np.cos if i % 2 else np.sin
                vals += c[i] * np.sqrt(2) * trig(2 * np.pi * n * x / self.length)
        else:
            L = 0
            while (L + 1) ** 2 < c.size:
                L += 1
            c = np.pad(c, (0, (L + 1) ** 2 - c.size))
            _, Y = real_harmonics(coords["theta"], coords["phi"], L)
            vals = Y @ c
        return np.exp(vals) if self.exponential else vals

    def as_dict(self):
        return {"basis": self.basis, "coefficients": list(self.coefficients),
                "exponential": self.exponential, "length": self.length}

    @classmethod
    def from_dict(cls, data):
        return cls(data["basis"], tuple(data["coefficients"]), bool(data.get("exponential", False)),
                   float(data.get("length", 1.0)))

    @classmethod
    def parse(cls, text, length=1.0):
        """Parse the compact literal ``fourier: a0, a1c, a1s, ...``."""
        head, sep, body = text.partition(":")
        if not sep:
            raise ValueError(f"function literal {text!r} lacks a 'basis:' prefix")
        basis = head.strip().lower()
        try:
            coeffs = [float(tok) for tok in body.replace(",", " ").split()]
        except ValueError as exc:
            raise ValueError(f"bad coefficient in {text!r}") from exc
        if not coeffs:
            raise ValueError(f"function literal {text!r} has no coefficients")
        return cls(basis, tuple(coeffs), False, length)

    @property
    def bandwidth(self):
        """Highest Fourier mode or harmonic degree with a nonzero coefficient."""
        nz = np.flatnonzero(self.coefficients)
        if nz.size == 0:
            return 0
        top = int(nz[-1])
        return (top + 1) // 2 if self.basis == "fourier" else math.isqrt(top)

    def label(self):
        body = ", ".join(repr(c) for c in self.coefficients)
        return f"{'exp ' if self.exponential else ''}{self.basis}: {body}"


def constant(c=1.0):
    return BasicFunction("fourier", (c,))


def fourier_mode(n, kind, amplitude=1.0, length=1.0):
    """amplitude * cos(2 pi n t / length) (kind 'c') or sin (kind 's')."""
    coeffs = [0.0] * (2 * n + 1)
    coeffs[2 * n - 1 if kind == "c" else 2 * n] = amplitude / np.sqrt(2)
    return BasicFunction("fourier", tuple(coeffs), length=length)


def fourier_sum(*terms, length=1.0):
    """Sum of (amplitude, n, 'c'|'s') trigonometric terms."""
    size = 2 * max(n for _, n, _ in terms) + 1
    coeffs = np.zeros(size)
    for amp, n, kind in terms:
        coeffs[2 * n - 1 if kind == "c" else 2 * n] += amp / np.sqrt(2)
    return BasicFunction("fourier", tuple(coeffs), length=length)


def harmonic_sum(*terms):
    """Sum of (coefficient, l, m) real spherical harmonic terms."""
    L = max(l for _, l, _ in terms)
    coeffs = np.zeros((L + 1) ** 2)
    for c, l, m in terms:
        coeffs[l * l + l + m] += c
    return BasicFunction("harmonic", tuple(coeffs))


def exp_of(f):
    return replace(f, exponential=True)


def _as_function(f):
    if f is None:
        return constant(1.0)
    if isinstance(f, str):
        return BasicFunction.parse(f)
    return f


def _log_derivative_form(space, v):
    """kappa = -d P(log v) on the degree-1 sector (exact, hence closed)."""
    log_v = np.log(np.asarray(v(space.coords), dtype=float) * np.ones(space.n_grid))
    coef = space.project_function(log_v)
    return BasicOneForm(-space.d_blocks[0] @ coef)


def _check_truncation(n, minimum=4):
    if int(n) != n or n < minimum:
        raise ModelDefinitionError(f"truncation must be an integer >= {minimum}, got {n}")
    return int(n)


def _check_positive(v, coords, what):
    vals = np.asarray(v(coords), dtype=float)
    if not np.all(np.isfinite(vals)) or np.min(vals) <= 0:
        raise NonPositiveWeightError(f"{what} is not strictly positive at the quadrature nodes")


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_circle_fibration_model(length=1.0, fiber_volume=None, truncation=32):
    """Circle bundle over a circle of circumference ``length`` (q = 1)."""
    N = _check_truncation(truncation)
    if length <= 0:
        raise ModelDefinitionError("length must be positive")
    v = _as_function(fiber_volume)
    sp = circle_space(length, N)
    _check_positive(v, sp.coords, "fiber volume")
    kappa = _log_derivative_form(sp, v)
    desc = ModelDescriptor("circle-fibration", {"length": length, "fiber_volume": v,
                                                "truncation": N})
    return ReducedBasicComplex(sp, 1, v, kappa, CurvatureData(transversal_scalar=0.0),
                               desc, name="circle-fibration")


def build_torus_base_model(l1=1.0, l2=1.0, fiber_volume=None, truncation=6):
    N = _check_truncation(truncation, 2)
    if l1 <= 0 or l2 <= 0:
        raise ModelDefinitionError("torus lengths must be positive")
    v = _as_function(fiber_volume)
    sp = torus_space(l1, l2, N)
    _check_positive(v, sp.coords, "fiber volume")
    kappa = _log_derivative_form(sp, v)
    desc = ModelDescriptor("torus-base", {"lengths": [l1, l2], "fiber_volume": v,
                                          "truncation": N})
    return ReducedBasicComplex(sp, 1, v, kappa, CurvatureData(transversal_scalar=0.0),
                               desc, name="torus-base")


def build_sphere_base_model(radius=1.0, truncation=10):
    L = _check_truncation(truncation, 2)
    if radius <= 0:
        raise ModelDefinitionError("radius must be positive")
    sp = sphere_space(radius, L)
    kappa = BasicOneForm(np.zeros(sp.sectors[1].dim))
    curv = CurvatureData(transversal_scalar=2.0 / radius**2)
    desc = ModelDescriptor("sphere-base", {"radius": radius, "truncation": L})
    return ReducedBasicComplex(sp, 1, constant(1.0), kappa, curv, desc, name="sphere-base")


HOPF_FLOW_CURVATURE = CurvatureData(
    transversal_scalar=8.0, ambient_scalar=6.0, leaf_scalar=0.0,
    oneill_A_sq=2.0, oneill_T_sq=0.0, kappa_sq=0.0)


def build_hopf_de_rham_model(truncation=10):
    """Hopf fibration of the unit 3-sphere: transverse S^2(1/2), taut, geodesic fibers."""
    base = build_sphere_base_model(0.5, truncation)
    desc = ModelDescriptor("hopf-de-rham", {"truncation": base.truncation},
                           "S^3(1) -> S^2(1/2); Scal_M = 6, |A|^2 = 2, fibers geodesic")
    return base.with_changes(curvature=HOPF_FLOW_CURVATURE, descriptor=desc, name="hopf-de-rham")


def monodromy_exponent(A):
    """log of the larger eigenvalue modulus of a hyperbolic A in SL(2, Z)."""
    A = np.asarray(A)
    if A.shape != (2, 2) or not np.all(A == np.round(A)):
        raise ModelDefinitionError("monodromy must be an integral 2x2 matrix")
    if round(np.linalg.det(A)) != 1:
        raise ModelDefinitionError("monodromy must have determinant 1")
    tr = int(round(np.trace(A)))
    if abs(tr) <= 2:
        raise ModelDefinitionError(f"monodromy with trace {tr} is not hyperbolic")
    mu = (abs(tr) + math.sqrt(tr * tr - 4)) / 2
    return math.log(mu)


def build_carriere_model(monodromy=((2, 1), (1, 1)), truncation=32):
    """Carriere flow on the mapping torus of a hyperbolic toral automorphism.

    Basic forms are functions of t times {1; dt, sigma; dt^sigma} with
    sigma = e^{lambda t} db unit length along the contracting direction, so
    d sigma = lambda dt^sigma, the weight is 1 and kappa_b = lambda dt.
    """
    N = _check_truncation(truncation)
    lam = monodromy_exponent(monodromy)
    sp = circle_space(1.0, N, labels=("dt", "sigma"), derivs_on=(True, False),
                      structure={1: {(0, 1): lam}})
    kappa = np.zeros(sp.sectors[1].dim)
    kappa[0] = lam  # constant function in the dt slot
    curv = CurvatureData(transversal_scalar=-2.0 * lam**2, kappa_sq=lam**2)
    desc = ModelDescriptor("carriere", {"monodromy": np.asarray(monodromy).tolist(),
                                        "truncation": N}, f"lambda_A = {lam!r}")
    return ReducedBasicComplex(sp, 1, constant(1.0), BasicOneForm(kappa), curv, desc,
                               name="carriere")


# ---------------------------------------------------------------------------
# spinor model
# ---------------------------------------------------------------------------

def eth_coefficient(s, j):
    """Raising coefficient of the spin-weight s harmonic sY_jm: sqrt((j - s)(j + s + 1))."""
    return math.sqrt(max((j - s) * (j + s + 1), 0.0))


@dataclass(frozen=True, eq=False)
class SpinorComplex:
    """Spin-weight -1/2 and +1/2 harmonics on a round S^2(r), j <= cap.

    The basic Dirac operator couples (-1/2, j, m) with (+1/2, j, m) through
    the raising and lowering coefficients; the fibers are geodesic and
    kappa_b = 0 for the Hopf flow.
    """

    radius: float
    cap: float
    curvature: CurvatureData
    descriptor: ModelDescriptor
    name: str = "hopf-spinor"
    q: int = 2

    @property
    def keys(self):
        js = np.arange(0.5, self.cap + 0.25, 1.0)
        return [(j, m) for j in js for m in np.arange(-j, j + 0.5, 1.0)]

    @property
    def dims(self):
        n = len(self.keys)
        return (n, n)

    @property
    def truncation(self):
        return self.cap

    def gram(self):
        n = sum(self.dims)
        return GradedOperator.from_blocks(self.dims, {(0, 0): np.eye(n // 2), (1, 1): np.eye(n // 2)},
                                          name="G")

    def dirac(self):
        n = self.dims[0]
        up = np.zeros((n, n))
        down = np.zeros((n, n))
        for a, (j, _) in enumerate(self.keys):
            up[a, a] = eth_coefficient(-0.5, j) / self.radius     # eth: s=-1/2 -> +1/2
            down[a, a] = eth_coefficient(-0.5, j) / self.radius   # -ethbar on s=+1/2, same size
        return GradedOperator.from_blocks(self.dims, {(0, 1): up, (1, 0): down}, name="D_b",
                                          symmetric_wrt_weight=True)


def build_hopf_spinor_model(radius=0.5, truncation=9.5):
    if radius <= 0:
        raise ModelDefinitionError("radius must be positive")
    cap = float(truncation)
    if cap < 0.5 or (cap - 0.5) != int(cap - 0.5):
        raise ModelDefinitionError(f"spinor cap must be a positive half-integer, got {truncation}")
    if radius == 0.5:
        curv = HOPF_FLOW_CURVATURE
    else:
        curv = CurvatureData(transversal_scalar=2.0 / radius**2, kappa_sq=0.0)
    desc = ModelDescriptor("hopf-spinor", {"radius": radius, "truncation": cap})
    return SpinorComplex(radius, cap, curv, desc)


# ---------------------------------------------------------------------------
# synthetic models
# ---------------------------------------------------------------------------

_COEFFS = {"type": "array", "items": {"type": "number"}, "minItems": 1}

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "folspec synthetic model descriptor",
    "type": "object",
    "required": ["codimension", "base", "generators", "truncation", "kappa_b"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "name": {"type": "string"},
        "codimension": {"type": "integer", "minimum": 1, "maximum": 3},
        "leaf_dimension": {"type": "integer", "minimum": 1},
        "base": {
            "type": "object",
            "required": ["type"],
            "additionalProperties": False,
            "properties": {
                "type": {"enum": ["circle", "torus", "sphere"]},
                "length": {"type": "number", "exclusiveMinimum": 0},
                "lengths": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                            "minItems": 2, "maxItems": 2},
                "radius": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "truncation": {"type": "integer", "minimum": 2},
        "generators": {
            "type": "object",
            "patternProperties": {"^[0-9]+$": {"type": "array", "items": {"type": "string"}}},
            "additionalProperties": False,
        },
        "structure": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["generator", "d"],
                "additionalProperties": False,
                "properties": {
                    "generator": {"type": "string"},
                    "d": {"type": "array", "items": {
                        "type": "object", "required": ["term", "coefficients"],
                        "additionalProperties": False,
                        "properties": {"term": {"type": "string"}, "coefficients": _COEFFS}}},
                },
            },
        },
        "weight": {
            "type": "object",
            "required": ["coefficients"],
            "additionalProperties": False,
            "properties": {"coefficients": _COEFFS, "exponential": {"type": "boolean"}},
        },
        "kappa_b": {"type": "object", "additionalProperties": _COEFFS},
        "curvature": {
            "type": "object",
            "additionalProperties": False,
            "properties": {name: {"type": "number"} for name in CURVATURE_FIELDS},
        },
    },
}


def _coordinate_names(base_type):
    return {"circle": ["t"], "torus": ["x", "y"], "sphere": []}[base_type]


def _fn_coeffs(coeffs, n, what):
    c = np.asarray(coeffs, dtype=float)
    if c.size > n:
        raise SchemaError(f"{what}: {c.size} coefficients exceed the {n}-dimensional function basis")
    return np.pad(c, (0, n - c.size))


def _read_descriptor(source):
    if isinstance(source, dict):
        return source
    text = Path(source).read_text() if not str(source).lstrip().startswith("{") else source
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"descriptor is not valid JSON: {exc}") from exc


def load_synthetic_model(source):
    """Build a complex from a JSON descriptor (path, JSON text or dict).

    Raises SchemaError, NilpotencyError (naming the generator pair where
    d o d fails), NotClosedError or NonPositiveWeightError.
    """
    doc = _read_descriptor(source)
    try:
        jsonschema.validate(doc, MODEL_SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise SchemaError(f"schema violation at {path}: {exc.message}") from exc

    q = doc["codimension"]
    base = doc["base"]
    btype = base["type"]
    N = doc["truncation"]
    gens = {int(k): v for k, v in doc["generators"].items()}
    if sorted(gens) != list(range(q + 1)):
        raise SchemaError(f"generators must be listed for every degree 0..{q}")
    coframe = gens[1]
    if len(coframe) != q or len(set(coframe)) != q:
        raise SchemaError(f"degree 1 needs {q} distinct generators, got {coframe}")

    if btype == "sphere":
        if q != 2 or doc.get("structure"):
            raise SchemaError("sphere bases use the fixed grad/curl Hodge basis "
                              "(codimension 2, no structure entries)")
        sp = sphere_space(base.get("radius", 1.0), N)
    else:
        coords = _coordinate_names(btype)
        coord_gens = [g for g in coframe if g.startswith("d") and g[1:] in coords]
        if sorted(g[1:] for g in coord_gens) != sorted(coords):
            raise SchemaError(f"a {btype} base needs the coordinate differentials "
                              f"{['d' + c for c in coords]} among the degree-1 generators")
        for k in range(q + 1):
            want = ["^".join(coframe[i] for i in I) or "1" for I in combinations(range(q), k)]
            if list(gens[k]) != want:
                raise SchemaError(f"degree {k} generators must be {want}, got {gens[k]}")
        index = {g: i for i, g in enumerate(coframe)}
        n_fn = (2 * N + 1) ** len(coords)
        structure = {}
        for entry in doc.get("structure", []):
            g = entry["generator"]
            if g not in index:
                raise SchemaError(f"structure entry for unknown generator {g!r}")
            if g in coord_gens:
                raise SchemaError(f"d{g} of a coordinate differential is fixed to 0")
            for term in entry["d"]:
                parts = term["term"].split("^")
                if len(parts) != 2 or any(p not in index for p in parts) or parts[0] == parts[1]:
                    raise SchemaError(f"structure term {term['term']!r} is not a product "
                                      "of two distinct degree-1 generators")
                j, l = index[parts[0]], index[parts[1]]
                c = _fn_coeffs(term["coefficients"], n_fn, f"d{g}")
                if j > l:
                    j, l, c = l, j, -c
                structure.setdefault(index[g], {})
                prev = structure[index[g]].get((j, l))
                structure[index[g]][(j, l)] = c if prev is None else prev + c
        if btype == "circle":
            derivs_on = tuple(g in coord_gens for g in coframe)
            sp = circle_space(base.get("length", 1.0), N, labels=tuple(coframe),
                              derivs_on=derivs_on, structure=structure)
        else:
            if q != 2 or structure:
                raise SchemaError("torus bases support only the flat coframe dx, dy")
            l1, l2 = base.get("lengths", [1.0, 1.0])
            sp = torus_space(l1, l2, N, labels=tuple(coframe))

    _check_nilpotent(sp, gens)

    n_fn = sp.function_synth.shape[1]
    wdoc = doc.get("weight", {"coefficients": [1.0]})
    wc = _fn_coeffs(wdoc["coefficients"], n_fn, "weight")
    expo = bool(wdoc.get("exponential", False))
    weight = _CoefficientFunction(sp.function_synth, wc, expo, sp.n_grid)

    kdoc = doc["kappa_b"]
    unknown = set(kdoc) - set(coframe)
    if unknown:
        raise SchemaError(f"kappa_b names unknown generators {sorted(unknown)}")
    if btype == "sphere":
        if set(kdoc) - {"grad", "curl"}:
            raise SchemaError("sphere kappa_b takes 'grad' and 'curl' coefficient arrays")
        n1 = sp.sectors[1].dim // 2
        kappa = np.concatenate([_fn_coeffs(kdoc.get("grad", [0.0]), n1, "kappa_b.grad"),
                                _fn_coeffs(kdoc.get("curl", [0.0]), n1, "kappa_b.curl")])
    else:
        kappa = np.concatenate([_fn_coeffs(kdoc.get(g, [0.0]), n_fn, f"kappa_b.{g}")
                                for g in coframe])

    curv = CurvatureData(**doc.get("curvature", {}))
    desc = ModelDescriptor("synthetic", {"document": doc, "truncation": N})
    return ReducedBasicComplex(sp, doc.get("leaf_dimension", 1), weight, BasicOneForm(kappa),
                               curv, desc, name=doc.get("name", "synthetic"))


class _CoefficientFunction:
    """A weight given by basis coefficients, evaluated on its own grid."""

    def __init__(self, synth, coeffs, exponential, n_grid):
        self.synth, self.coeffs, self.exponential, self.n_grid = synth, coeffs, exponential, n_grid

    def __call__(self, coords):
        vals = self.synth @ self.coeffs
        return np.exp(vals) if self.exponential else vals

    def __repr__(self):
        return f"coefficients({list(self.coeffs[:4])}..., exp={self.exponential})"


def _check_nilpotent(sp, gens):
    for k in range(sp.q - 1):
        dd = sp.d_blocks[k + 1] @ sp.d_blocks[k]
        scale = max(1.0, opnorm(sp.d_blocks[k]) * opnorm(sp.d_blocks[k + 1]))
        if np.max(np.abs(dd), initial=0.0) <= 1e-12 * scale:
            continue
        src_keys, tgt_keys = sp.sectors[k].keys, sp.sectors[k + 2].keys
        worst, pair = 0.0, None
        for a, ga in enumerate(gens[k]):
            cols = [i for i, key in enumerate(src_keys) if key[0] == ga]
            for b, gb in enumerate(gens[k + 2]):
                rows = [i for i, key in enumerate(tgt_keys) if key[0] == gb]
                err = np.max(np.abs(dd[np.ix_(rows, cols)]), initial=0.0)
                if err > worst:
                    worst, pair = err, (ga, gb)
        raise NilpotencyError(
            f"d o d != 0: generator {pair[0]!r} (degree {k}) reaches {pair[1]!r} "
            f"(degree {k + 2}) with defect {worst:.3e}")


def model_schema_json():
    return json.dumps(MODEL_SCHEMA, indent=2, sort_keys=True)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

DEFAULT_PARAMETERS = {
    "circle-fibration": {"length": 1.0, "fiber_volume": None, "truncation": 32},
    "torus-base": {"lengths": [1.0, 1.0], "fiber_volume": None, "truncation": 6},
    "sphere-base": {"radius": 1.0, "truncation": 10},
    "hopf-de-rham": {"truncation": 10},
    "hopf-spinor": {"radius": 0.5, "truncation": 9.5},
    "carriere": {"monodromy": [[2, 1], [1, 1]], "truncation": 32},
}

BUILTIN_MODELS = tuple(DEFAULT_PARAMETERS)


def build_model(descriptor, **overrides):
    """Build any model from a descriptor or a kind name plus parameter overrides."""
    if isinstance(descriptor, str):
        descriptor = ModelDescriptor(descriptor, dict(DEFAULT_PARAMETERS.get(descriptor, {})))
    params = {**descriptor.parameters, **{k: v for k, v in overrides.items() if v is not None}}
    kind = descriptor.kind
    if kind == "circle-fibration":
        return build_circle_fibration_model(params.get("length", 1.0), params.get("fiber_volume"),
                                            params.get("truncation", 32))
    if kind == "torus-base":
        l1, l2 = params.get("lengths", [1.0, 1.0])
        return build_torus_base_model(l1, l2, params.get("fiber_volume"),
                                      params.get("truncation", 6))
    if kind == "sphere-base":
        return build_sphere_base_model(params.get("radius", 1.0), params.get("truncation", 10))
    if kind == "hopf-de-rham":
        return build_hopf_de_rham_model(params.get("truncation", 10))
    if kind == "hopf-spinor":
        return build_hopf_spinor_model(params.get("radius", 0.5), params.get("truncation", 9.5))
    if kind == "carriere":
        return build_carriere_model(params.get("monodromy", [[2, 1], [1, 1]]),
                                    params.get("truncation", 32))
    if kind == "synthetic":
        try:
            doc = dict(_read_descriptor(params["document"]))
        except OSError as exc:
            raise ModelDefinitionError(f"cannot read synthetic descriptor: {exc}") from exc
        doc["truncation"] = int(params.get("truncation", doc["truncation"]))
        return load_synthetic_model(doc)
    raise ModelDefinitionError(f"unknown model kind {kind!r}")


def model_curvature_data(cx):
    return cx.curvature if cx.curvature is not None else CurvatureData()


# ---------------------------------------------------------------------------
# metric deformation and rebuilding
# ---------------------------------------------------------------------------

KAPPA_SHIFT_SIGN = -1


class _ScaledWeight:
    def __init__(self, base, phi):
        self.base, self.phi = base, phi

    def __call__(self, coords):
        return np.asarray(self.base(coords), dtype=float) * np.exp(self.phi(coords))

    def __repr__(self):
        return f"{self.base!r} * exp({self.phi!r})"


def deform_complex(cx, phi, sign=KAPPA_SHIFT_SIGN, shift=True):
    """New complex with weight w e^phi and kappa_b + sign d(phi).

    ``shift=False`` keeps kappa_b unchanged, which is not a bundle-like
    metric change; it is the negative control for the invariance checks.
    """
    if isinstance(phi, str):
        phi = BasicFunction.parse(phi)
    sp = cx.space
    vals = np.asarray(phi(sp.coords), dtype=float) * np.ones(sp.n_grid)
    tail = sp.function_tail(vals)
    if tail > 1e-12 * max(1.0, float(np.max(np.abs(vals)))):
        raise AliasingError("phi is not resolved by the truncation, so d(phi) would not be exact",
                            tail)
    dphi = BasicOneForm(sp.d_blocks[0] @ sp.project_function(vals))
    kappa = cx.kappa_b + dphi.scaled(sign) if shift else cx.kappa_b
    return cx.with_changes(
        weight=_ScaledWeight(cx.weight, phi), kappa_b=kappa,
        deformations=cx.deformations + ((phi, sign, shift),))


def rebuild(cx, truncation):
    """The same model (deformations included) at another truncation."""
    out = build_model(cx.descriptor.with_truncation(truncation))
    for phi, sign, shift in cx.deformations:
        out = deform_complex(out, phi, sign, shift)
    return out
