import numpy as np

from folspec import assemble_dirac, assemble_laplacian, build_carriere_model, spectrum_of

# ### The Carriere flow
#
# The monodromy A = [[2, 1], [1, 1]] is hyperbolic. Its mapping torus carries
# a flow along the expanding eigendirection whose mean curvature form is
# log(lambda_max) dt. That form is closed but not exact, so no bundle-like
# metric makes the leaves minimal.

cx = build_carriere_model(truncation=16)
lam = cx.kappa_b.coefficients[0]
print("kappa_b = %.12f dt,  log of the golden ratio squared = %.12f"
      % (lam, np.log((3 + np.sqrt(5)) / 2)))
print("graded dimensions:", cx.dims)

# ### Functions
#
# On degree 0 the basic Laplacian only sees t, so its spectrum is (2 pi n)^2.

lap = assemble_laplacian(cx, "basic").block(0, 0)
vals = np.sort(np.linalg.eigvalsh(0.5 * (lap + lap.T)))
print("lowest function eigenvalues / (2 pi)^2:", np.round(vals[:7] / (2 * np.pi) ** 2, 12) + 0.0)

# ### The basic Dirac operator
#
# Each Fourier mode n splits into two 2x2 blocks. Both have eigenvalues
# +-sqrt((2 pi n)^2 + lam^2 / 4), so the kernel is empty and the smallest
# |lambda| is lam / 2.

spec = spectrum_of(cx, assemble_dirac(cx), 12)
print("lowest |lambda|:", np.round(np.sort(np.abs(spec.eigenvalues))[:4], 12))
print("lam / 2        :", round(lam / 2, 12))
print("multiplicities :", spec.multiplicities[:6])
