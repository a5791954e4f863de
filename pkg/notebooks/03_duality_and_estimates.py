from folspec import (
    betti_table,
    build_carriere_model,
    build_hopf_spinor_model,
    build_model,
    run_estimate_experiment,
)

# ### Betti tables
#
# Basic cohomology of d on the Carriere flow is (1, 1, 0): the top class is
# missing because the flow is not taut. Twisting by kappa_b restores a
# duality with the reversed table, and the half-twisted complex is acyclic.

cx = build_carriere_model(truncation=16)
for w in ("d", "d-kappa", "d~"):
    t = betti_table(cx, w)
    print(f"{w:>8}: {t.dims}  stable={t.stable}")

for name in ("hopf-de-rham", "torus-base"):
    print(f"{name:>13}: {betti_table(build_model(name), 'd').dims}")

# ### A sharp eigenvalue bound
#
# On the round sphere of radius 1/2 the transverse scalar curvature is 8.
# With q = 2 the bound is 8 / 2 = 4, and the spinor spectrum starts at +-2,
# so the bound is attained.

rep = run_estimate_experiment(build_hopf_spinor_model(0.5))
for c in rep.checks:
    print(f"{c['status']:8} {c['name']:<22} {c['detail']}")
