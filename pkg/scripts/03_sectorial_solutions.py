# %% [markdown]
# # Sectorial solutions and their differences
#
# u_p(t, z, eps) is the Laplace and Fourier transform of the Borel-plane
# solution.  It satisfies the equation on every sector, and two neighbours
# differ by an amount that vanishes like exp(-M/|eps|^k).  Runs in a few
# minutes on one core.

# %%
import numpy as np

from borelsum import build_good_covering, build_solution, canonical_spec
from borelsum.verifier import pde_residual, sample_grid

spec = canonical_spec()
plan = build_good_covering(spec, 5, 1.0)

# %% [markdown]
# ## Residual on each sector

# %%
for p in range(plan.count):
    eps = 0.05 * np.exp(1j * plan.sectors[p].direction)
    sol = build_solution(plan, p, spec, eps)
    ts, zs = sample_grid(sol)
    print(f"sector {p}: residual {pde_residual(sol, ts, zs)['relative']:.1e} of the forcing scale")

# %% [markdown]
# ## One overlap
#
# E_1 and E_2 meet around 108 degrees, between the Laplace directions at
# +-72 and 144 degrees, with the roots of P_m at 90 degrees in between.  The
# difference of u_1 and u_2 drops quickly as |eps| decreases.

# %%
lo, hi = plan.overlap_arc(1)
arg = 0.5 * (lo + hi)
opts = dict(ray="graded", method="implicit", product="fft", tol=1e-12, lazy=True)
for a in 1.6 * 0.89 ** np.arange(6):
    eps = a * np.exp(1j * arg)
    u1 = build_solution(plan, 1, spec, eps, **opts)
    u2 = build_solution(plan, 2, spec, eps, **opts)
    t = 0.5 * u1.h_prime
    z = np.linspace(-2, 2, 5)
    print(f"|eps|={a:.3f}: max |u_2 - u_1| = {np.max(np.abs(u2(t, z) - u1(t, z))):.3e}")
