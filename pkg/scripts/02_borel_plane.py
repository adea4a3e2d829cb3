# %% [markdown]
# # Fixed point in the Borel plane
#
# Along an admissible direction the Borel transform solves a convolution
# equation.  We build the good covering, solve along d_0 and compare with the
# convergent Borel series near the origin.

# %%
import numpy as np

from borelsum import build_good_covering, canonical_spec, fixed_point_solve, solve_recursion
from borelsum.borel_calculus import mk_borel
from borelsum.convolution_solver import disc_consistency

spec = canonical_spec()
plan = build_good_covering(spec, 5, 1.0)
for p, (s, d) in enumerate(zip(plan.sectors, plan.directions)):
    print(f"E_{p}: bisector {np.degrees(s.direction):7.2f} deg, aperture {np.degrees(s.aperture):6.2f} deg, "
          f"d_{p} = {np.degrees(d):7.2f} deg")

# %% [markdown]
# ## Contraction
#
# Successive distances shrink by a factor well below 1/2 at these eps.

# %%
for a in (0.03, 0.05, 0.1):
    sol = fixed_point_solve(spec, a, plan.reports[0], tol=1e-10)
    oracle = mk_borel(solve_recursion(spec, a, 60), spec.k, spec.rho)
    print(f"eps={a}: {sol.iterations} iterations, factor {sol.contraction_factor:.3f}, "
          f"residual {sol.residual:.1e}, disc deviation {disc_consistency(sol, oracle):.1e}")
