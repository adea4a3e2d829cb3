"""Laplace transform of order k along a ray, Fourier inversion, and the
sectorial solutions u_p(t, z, eps) built from them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .borel_calculus import gauss_legendre01
from .convolution_solver import BorelSolution, default_ray, fixed_point_solve, graded_ray
from .grid_core import GridError, GridFunction, TauRay, fourier_matrix
from .problem_model import EquationSpec, SectorSpec, wrap_angle
from .root_geometry import CoveringPlan


class LaplaceError(RuntimeError):
    pass


class DomainError(ValueError):
    pass


# ------------------------------------------------------------ direction

def _equivalent(arg: float, center: float, k: int) -> float:
    # cos(k(gamma - arg)) has period 2 pi / k in arg; move arg next to center
    per = 2 * np.pi / k
    return center + ((arg - center + per / 2) % per) - per / 2


def choose_direction(T: complex, sector: SectorSpec, delta1: float, k: int = 2,
                     prefer: float | None = None) -> float:
    """Direction gamma in the sector with cos(k(gamma - arg T)) >= delta1.

    Returns ``prefer`` when it qualifies, otherwise the maximiser of the cosine.
    """
    if not 0 < delta1 < 1:
        raise ValueError("delta1 must lie in (0, 1)")
    a = float(np.angle(T))
    lo = sector.direction - sector.aperture / 2
    hi = sector.direction + sector.aperture / 2
    if prefer is not None and lo - 1e-12 <= prefer <= hi + 1e-12:
        if np.cos(k * (prefer - a)) >= delta1:
            return float(prefer)
    ae = _equivalent(a, sector.direction, k)
    g = float(np.clip(ae, lo, hi))
    if np.cos(k * (g - a)) < delta1:
        raise DomainError("T outside summable sector")
    return g


# ------------------------------------------------------------ Laplace

@lru_cache(maxsize=None)
def _panel_rule(k: int, n_panels: int, n: int = 12):
    """Nodes/weights in rho for k int_0^{rho_max} h(rho) d rho / rho, panels uniform in rho^k."""
    v, w = gauss_legendre01(n)
    s_edges = np.arange(n_panels + 1, dtype=float)
    rho_edges = s_edges ** (1.0 / k)
    nodes, wts = [], []
    for a, b in zip(rho_edges[:-1], rho_edges[1:]):
        x = a + (b - a) * v
        nodes.append(x)
        wts.append(k * (b - a) * w / x)
    return np.concatenate(nodes), np.concatenate(wts)


def laplace_moments(solution: BorelSolution, T: complex, imax: int = 0, tail_tol: float = 1e-10,
                    s_cut: float = 46.0, k: int | None = None) -> np.ndarray:
    """M_i = k int_0^inf omega(u) exp(-y) y^i du/u, y = (u/T)^k, along the solution's ray.

    Returns an array of shape (imax + 1, Nm).  The integral is taken in
    rho = |u|/|T| on panels of unit width in rho^k; it is cut where the
    kernel drops below exp(-s_cut) or at the end of the ray, in which case a
    tail estimate is checked against ``tail_tol``.
    """
    if k is None:
        k = solution.spec.k
    T = complex(T)
    if T == 0:
        return np.zeros((imax + 1, solution.field.grid.points), dtype=complex)
    gam = solution.direction
    phi = k * (gam - np.angle(T))
    c = np.cos(phi)
    if c <= 0:
        raise DomainError("T outside summable sector")
    R = solution.ray.r_max
    s_need = (s_cut + 3 * imax) / c
    s_ray = (R / abs(T)) ** k
    n_pan = int(np.ceil(min(s_need, s_ray)))
    rho, W = _panel_rule(k, max(n_pan, 1))
    r = abs(T) * rho
    keep = r <= R
    rho, W, r = rho[keep], W[keep], r[keep]
    vals = solution.field.at_radii(r)                      # (nq, Nm)
    y = rho**k * np.exp(1j * phi)
    ker = np.exp(-y)
    out = np.empty((imax + 1, vals.shape[1]), dtype=complex)
    for i in range(imax + 1):
        out[i] = (W * ker * y**i) @ vals
    if s_ray < s_need:
        tail = np.max(np.abs(solution.field.values[-1])) * np.exp(-c * s_ray) * max(s_ray, 1.0) ** imax / (c * s_ray)
        scale = max(np.max(np.abs(out[0])), 1e-300)
        if tail > tail_tol * scale:
            raise LaplaceError(f"Laplace tail bound {tail:.3g} above tolerance; use a larger R_max")
    return out


def laplace_mk(solution: BorelSolution, T: complex, gamma_dir: float | None = None, tail_tol: float = 1e-10,
               k: int | None = None):
    """U(T, m) = k int_{L_gamma} omega(u, m) exp(-(u/T)^k) du/u.

    The integral runs along the solution's ray; a different direction is
    handled by solving again on that ray.
    """
    sol = solution
    if gamma_dir is not None and abs(wrap_angle(gamma_dir - solution.direction)) > 1e-12:
        sol = resolve_on(solution, gamma_dir)
    return GridFunction(sol.field.grid, laplace_moments(sol, T, 0, tail_tol, k=k)[0])


def resolve_on(solution: BorelSolution, direction: float) -> BorelSolution:
    ray = solution.ray
    new = TauRay(float(direction), ray.breaks, ray.order)
    return fixed_point_solve(solution.spec, solution.eps, None, ray=new, direction=float(direction),
                             method=solution.method, product=solution.product)


def dt_kernel_coefficients(j: int, k: int) -> np.ndarray:
    """c with d^j/dt^j exp(-y) = exp(-y) t^(-j) sum_i c_i y^i, y = (u/(eps t))^k."""
    c = np.zeros(j + 1)
    c[0] = 1.0
    for jj in range(j):
        new = np.zeros(j + 1)
        for i in range(jj + 1):
            new[i] += c[i] * (-jj - i * k)
            new[i + 1] += k * c[i]
        c = new
    return c


# ------------------------------------------------------------ sector solutions

@dataclass
class SectorSolution:
    p: int
    covering: CoveringPlan
    spec: EquationSpec
    eps: complex
    solution_field: BorelSolution | None
    h_prime: float
    beta_prime: float
    tail_tol: float = 1e-10
    solve_opts: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def direction(self) -> float:
        return self.covering.directions[self.p]

    def _borel_for(self, T: complex) -> BorelSolution:
        sec = self.covering.borel_sectors[self.p]
        gam = choose_direction(T, sec, self.covering.delta1, self.spec.k, prefer=self.direction)
        key = round(gam, 12)
        base = self.solution_field
        if base is not None and abs(wrap_angle(gam - base.direction)) < 1e-12:
            return base
        if key not in self._cache:
            self._cache[key] = self._solve(gam)
        return self._cache[key]

    def _solve(self, gam: float) -> BorelSolution:
        opts = dict(self.solve_opts)
        if self.solution_field is not None:
            return resolve_on(self.solution_field, gam)
        ray = _make_ray(self.spec, gam, self.eps, opts.pop("ray", "default"))
        return fixed_point_solve(self.spec, self.eps, None, ray=ray, direction=gam, **opts)

    def check_domain(self, t: complex, z=None):
        t = complex(t)
        if t != 0:
            T_sec = self.covering.T_sector
            if not T_sec.contains_arg(np.angle(t), tol=1e-12) or abs(t) > self.h_prime * (1 + 1e-12):
                raise DomainError(f"t={t} outside the time sector intersected with D(0, h')")
        if z is not None and np.any(np.abs(np.imag(z)) > self.beta_prime * (1 + 1e-12)):
            raise DomainError("z outside the strip |Im z| <= beta'")

    def U_hat(self, t: complex, jt: int = 0) -> np.ndarray:
        """d^jt/dt^jt U(eps t, m) on the m-grid."""
        t = complex(t)
        if t == 0:
            return np.zeros(self.spec.grid.points, dtype=complex)
        T = self.eps * t
        sol = self._borel_for(T)
        M = laplace_moments(sol, T, jt, self.tail_tol)
        c = dt_kernel_coefficients(jt, self.spec.k)
        return t ** (-jt) * (c @ M)

    def __call__(self, t: complex, z, jt: int = 0, jz: int = 0, check: bool = True) -> np.ndarray:
        """u_p or its (t, z)-derivative at one t and an array of z."""
        if check:
            self.check_domain(t, z)
        u = self.U_hat(t, jt)
        if jz:
            u = u * (1j * self.spec.grid.nodes) ** jz
        return fourier_matrix(self.spec.grid, np.atleast_1d(z)) @ u

    def apply_poly(self, t: complex, z, poly, jt: int = 0) -> np.ndarray:
        """poly(d/dz) d^jt/dt^jt u_p at (t, z)."""
        self.check_domain(t, z)
        u = self.U_hat(t, jt) * poly(1j * self.spec.grid.nodes)
        return fourier_matrix(self.spec.grid, np.atleast_1d(z)) @ u


def h_prime_for(plan: CoveringPlan, nu: float, k: int, margin: float = 0.9) -> float:
    """(delta1 / (delta2 + nu))^(1/k) / r_T with delta2 = nu, times a safety margin."""
    return margin * (plan.delta1 / (2 * nu)) ** (1.0 / k) / plan.T_sector.outer_radius


def _make_ray(spec: EquationSpec, direction: float, eps: complex, kind: str):
    if kind == "default":
        return default_ray(direction, eps, spec.nu, spec.k)
    if kind == "graded":
        return graded_ray(direction, eps, spec.nu, spec.k, order=16)
    raise ValueError(f"unknown ray kind {kind!r}")


def build_solution(plan: CoveringPlan, p: int, spec: EquationSpec, eps: complex,
                   solution: BorelSolution | None = None, beta_prime: float | None = None,
                   tol: float = 1e-12, method: str = "picard", ray: str = "default",
                   product: str = "direct", lazy: bool = False) -> SectorSolution:
    """Sectorial solution u_p for one eps in E_p.

    With ``lazy=True`` nothing is solved up front; each Laplace direction
    gamma actually needed is solved on first use with the given options.
    """
    if not plan.sectors[p].contains(complex(eps), tol=1e-12):
        raise DomainError(f"eps={eps} not in sector E_{p}")
    d = plan.directions[p]
    opts = {"ray": ray, "tol": tol, "method": method, "product": product}
    if solution is None and not lazy:
        solution = fixed_point_solve(spec, eps, plan.reports[p] if plan.reports else None, tol=tol,
                                     ray=_make_ray(spec, d, eps, ray), direction=d, method=method,
                                     product=product)
    elif solution is not None and abs(wrap_angle(solution.direction - d)) > 1e-12:
        raise DomainError("solution was computed along a different direction")
    hp = h_prime_for(plan, spec.nu, spec.k)
    # eps t must stay in the sector S_{d_p, theta, eps0 r_T}
    target = SectorSpec(d, plan.theta, 0.0, plan.eps0 * plan.T_sector.outer_radius)
    T_sec = plan.T_sector
    tt = hp * np.exp(1j * (T_sec.direction + T_sec.aperture / 2 * np.array([-1.0, 0.0, 1.0])))
    if not np.all(target.contains(complex(eps) * tt, tol=1e-9)):
        raise DomainError("eps t leaves S_{d_p, theta, eps0 r_T}")
    bp = spec.beta / 2 if beta_prime is None else beta_prime
    if not 0 < bp < spec.beta:
        raise GridError("beta' must lie in (0, beta)")
    return SectorSolution(p, plan, spec, complex(eps), solution, hp, bp, solve_opts=opts)
