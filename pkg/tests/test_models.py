import json
import math
from pathlib import Path

import numpy as np
import pytest

import oracles
from folspec.complex import (
    ModelDefinitionError,
    NilpotencyError,
    NonPositiveWeightError,
    NotClosedError,
    assemble_codifferential,
    assemble_d,
    assemble_dirac,
    assemble_hodge_star,
    assemble_laplacian,
)
from folspec.models import (
    BUILTIN_MODELS,
    KAPPA_SHIFT_SIGN,
    BasicFunction,
    CurvatureData,
    ModelDescriptor,
    SchemaError,
    build_carriere_model,
    build_circle_fibration_model,
    build_hopf_spinor_model,
    build_model,
    build_sphere_base_model,
    deform_complex,
    exp_of,
    fourier_mode,
    harmonic_sum,
    load_synthetic_model,
    model_curvature_data,
    model_schema_json,
    rebuild,
)
from folspec.spectral import betti_table, spectrum_of

DOCS = Path(__file__).resolve().parent.parent / "docs"


def carriere_doc(**changes):
    doc = json.loads((DOCS / "carriere-synthetic.json").read_text())
    doc.update(changes)
    return doc


# --- basic functions -----------------------------------------------------------

def test_function_literal_parse_and_eval():
    f = BasicFunction.parse("fourier: 0.5, 0, 0.7071067811865476")
    t = np.array([0.0, 0.25])
    np.testing.assert_allclose(f({"t": t}), [0.5, 1.5], atol=1e-12)
    assert BasicFunction.from_dict(f.as_dict()) == f


def test_function_literal_rejects_garbage():
    with pytest.raises(ValueError):
        BasicFunction.parse("0.5, 1")
    with pytest.raises(ValueError):
        BasicFunction.parse("fourier: a, b")
    with pytest.raises(ValueError):
        BasicFunction.parse("bessel: 1")


def test_fourier_mode_is_plain_sine():
    t = np.linspace(0, 1, 7)
    np.testing.assert_allclose(fourier_mode(1, "s")({"t": t}), np.sin(2 * np.pi * t), atol=1e-14)


# --- circle fibration ---------------------------------------------------------------

def test_circle_unit_volume_is_taut(circle):
    assert np.all(circle.kappa_b.coefficients == 0)


def test_circle_kappa_is_minus_dlog_v(circle_weighted):
    cx = circle_weighted
    t = cx.space.coords["t"]
    vals = cx.space.evaluate_form(1, cx.kappa_b.coefficients)[:, 0]
    np.testing.assert_allclose(vals, -2 * np.pi * np.cos(2 * np.pi * t), atol=1e-12)


def test_circle_kappa_is_exact(circle_weighted):
    # the constant Fourier mode of a one-form on the circle is its cohomology class
    assert abs(circle_weighted.kappa_b.coefficients[0]) < 1e-14


def test_circle_rejects_nonpositive_volume():
    with pytest.raises(NonPositiveWeightError):
        build_circle_fibration_model(fiber_volume=fourier_mode(1, "s"), truncation=8)


def test_circle_spectrum_independent_of_volume(circle_weighted):
    ref = oracles.circle_dirac_spectrum(16)
    spec = spectrum_of(circle_weighted, assemble_dirac(circle_weighted), 20)
    low = spec.lowest(20)
    want = np.sort(ref[np.abs(ref) <= np.max(np.abs(low)) + 1e-9])
    np.testing.assert_allclose(np.sort(low), want, atol=1e-10)


# --- torus ------------------------------------------------------------------------------

def test_torus_betti(torus):
    assert betti_table(torus, "d").dims == [1, 2, 1]


def test_torus_star_square_on_one_forms(torus):
    s = assemble_hodge_star(torus).block(1, 1)
    np.testing.assert_allclose(s @ s, -np.eye(len(s)), atol=1e-12)


# --- sphere and Hopf --------------------------------------------------------------------

def test_sphere_function_laplacian(hopf):
    lap = assemble_laplacian(hopf, "basic").block(0, 0)
    vals = np.sort(np.linalg.eigvalsh(0.5 * (lap + lap.T)))
    np.testing.assert_allclose(vals, oracles.sphere_function_laplacian(6, 0.5), atol=1e-10)
    # 4 k (k + 1), multiplicity 2k + 1
    assert vals[1] == pytest.approx(8.0) and vals[4] == pytest.approx(24.0)


def test_sphere_betti(hopf):
    assert betti_table(hopf, "d").dims == [1, 0, 1]


def test_sphere_scalar_curvature():
    for r in (0.5, 1.0, 2.0):
        assert build_sphere_base_model(r, 3).curvature.transversal_scalar == pytest.approx(2 / r**2)


def test_hopf_constants(hopf):
    c = model_curvature_data(hopf)
    assert (c.ambient_scalar, c.oneill_A_sq, c.kappa_sq) == (6.0, 2.0, 0.0)
    assert c.transversal_scalar == 8.0


# --- spinor ------------------------------------------------------------------------------

def test_spinor_spectrum_against_ladder_oracle(spinor):
    spec = spectrum_of(spinor, spinor.dirac())
    np.testing.assert_allclose(np.sort(spec.eigenvalues),
                               oracles.spinor_dirac_spectrum(spinor.cap, 0.5), atol=1e-10)


def test_spinor_lowest_and_kernel(spinor):
    vals = spectrum_of(spinor, spinor.dirac()).eigenvalues
    assert np.min(np.abs(vals)) == pytest.approx(2.0, abs=1e-12)
    assert np.min(vals**2) == pytest.approx(4.0, abs=1e-12)


def test_spinor_rejects_integer_cap():
    with pytest.raises(ModelDefinitionError):
        build_hopf_spinor_model(0.5, 4)


# --- Carriere -----------------------------------------------------------------------------

def test_carriere_exponent_from_characteristic_polynomial(carriere):
    lam = oracles.hyperbolic_exponent([[2, 1], [1, 1]])
    assert carriere.kappa_b.coefficients[0] == pytest.approx(lam, abs=1e-14)
    assert carriere.curvature.kappa_sq == pytest.approx(lam**2)


@pytest.mark.parametrize("A", [[[1, 1], [0, 1]], [[0, -1], [1, 0]], [[2, 1], [1, 2]]])
def test_carriere_rejects_non_hyperbolic(A):
    with pytest.raises(ModelDefinitionError):
        build_carriere_model(A, 8)


def test_carriere_block_oracle(carriere_small):
    lam = oracles.hyperbolic_exponent([[2, 1], [1, 1]])
    spec = spectrum_of(carriere_small, assemble_dirac(carriere_small))
    np.testing.assert_allclose(np.sort(spec.eigenvalues),
                               oracles.carriere_dirac_spectrum(8, lam), atol=1e-10)


def test_carriere_betti(carriere_small):
    assert betti_table(carriere_small, "d").dims == [1, 1, 0]
    assert betti_table(carriere_small, "d-kappa").dims == [0, 1, 1]


# --- synthetic models ----------------------------------------------------------------------

def test_synthetic_carriere_reproduces_builtin(carriere):
    syn = load_synthetic_model(DOCS / "carriere-synthetic.json")
    for build in (assemble_d, assemble_hodge_star, assemble_dirac,
                  lambda c: assemble_codifferential(c, "basic")):
        assert np.max(np.abs(build(syn).matrix - build(carriere).matrix)) <= 1e-12


def test_synthetic_nilpotency_failure_names_generators():
    # d sigma = dt^tau, d tau = sigma^tau gives d d sigma = -dt^sigma^tau
    doc = carriere_doc()
    doc["generators"] = {"0": ["1"], "1": ["dt", "sigma", "tau"],
                         "2": ["dt^sigma", "dt^tau", "sigma^tau"],
                         "3": ["dt^sigma^tau"]}
    doc["codimension"] = 3
    doc["structure"] = [{"generator": "sigma", "d": [{"term": "dt^tau",
                                                      "coefficients": [1.0]}]},
                        {"generator": "tau", "d": [{"term": "sigma^tau",
                                                    "coefficients": [1.0]}]}]
    doc["truncation"] = 4
    with pytest.raises(NilpotencyError, match="'sigma'|'tau'"):
        load_synthetic_model(doc)


def test_synthetic_unclosed_kappa_rejected():
    doc = carriere_doc(truncation=6)
    doc["kappa_b"] = {"dt": [0.0], "sigma": [1.0]}
    with pytest.raises(NotClosedError):
        load_synthetic_model(doc)


def test_synthetic_nonpositive_weight_rejected():
    doc = carriere_doc(truncation=6, weight={"coefficients": [0.1, 1.0]})
    with pytest.raises(NonPositiveWeightError):
        load_synthetic_model(doc)


def test_synthetic_schema_violation():
    doc = carriere_doc()
    doc["colour"] = "blue"
    with pytest.raises(SchemaError, match="colour"):
        load_synthetic_model(doc)


def test_synthetic_circle_with_sine_kappa_is_accepted():
    doc = {"codimension": 1, "base": {"type": "circle"}, "truncation": 8,
           "generators": {"0": ["1"], "1": ["dt"]},
           "kappa_b": {"dt": [0.0, 0.0, 1 / math.sqrt(2)]}}
    cx = load_synthetic_model(doc)
    t = cx.space.coords["t"]
    np.testing.assert_allclose(cx.space.evaluate_form(1, cx.kappa_b.coefficients)[:, 0],
                               np.sin(2 * np.pi * t), atol=1e-12)


def test_published_schema_matches_code():
    assert json.loads((DOCS / "model-schema.json").read_text()) == json.loads(model_schema_json())


# --- descriptors, curvature, deformations ----------------------------------------------------

def test_curvature_absent_is_none():
    c = CurvatureData(transversal_scalar=1.0)
    assert c.present["ambient_scalar"] is False and c.ambient_scalar is None


def test_curvature_rejects_negative_squares():
    with pytest.raises(ModelDefinitionError):
        CurvatureData(kappa_sq=-1.0)


def test_descriptor_rejects_unknown_kind():
    with pytest.raises(ModelDefinitionError):
        ModelDescriptor("klein-bottle")


@pytest.mark.parametrize("name", BUILTIN_MODELS)
def test_every_builtin_builds(name):
    cx = build_model(name, truncation=4.5 if name == "hopf-spinor" else 4)
    assert cx.descriptor.kind == name


def test_deformation_with_zero_phi_is_identity(carriere_small):
    d = deform_complex(carriere_small, BasicFunction("fourier", (0.0,)))
    np.testing.assert_array_equal(assemble_dirac(d).matrix, assemble_dirac(carriere_small).matrix)


def test_deformation_matches_circle_builder(circle):
    phi = fourier_mode(1, "s")
    d = deform_complex(circle, phi)
    direct = build_circle_fibration_model(fiber_volume=exp_of(phi), truncation=16)
    assert KAPPA_SHIFT_SIGN == -1
    np.testing.assert_allclose(d.kappa_b.coefficients, direct.kappa_b.coefficients, atol=1e-12)
    np.testing.assert_allclose(assemble_dirac(d).matrix, assemble_dirac(direct).matrix, atol=1e-12)


def test_deformation_keeps_kappa_class(carriere_small):
    d = deform_complex(carriere_small, fourier_mode(2, "c"))
    shift = d.kappa_b.coefficients - carriere_small.kappa_b.coefficients
    n = 2 * carriere_small.truncation + 1
    assert abs(shift[0]) < 1e-14 and np.all(shift[n:] == 0)  # no constant dt part, no sigma part


def test_rebuild_replays_deformations():
    cx = deform_complex(build_carriere_model(truncation=6), BasicFunction("fourier", (0.0, 0.0, 0.5)))
    big = rebuild(cx, 10)
    assert big.truncation == 10 and len(big.deformations) == 1


def test_bandwidth():
    assert fourier_mode(3, "c").bandwidth == 3
    assert harmonic_sum((0.2, 2, -1)).bandwidth == 2
    assert BasicFunction("fourier", (1.0,)).bandwidth == 0
