"""Checks on the assembled sectorial solutions: PDE residual, flatness of
differences on sector overlaps, the two Ramis-Sibuya hypotheses, and the
low-order eps-expansion shared by all sectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .grid_core import fourier_matrix
from .problem_model import EquationSpec
from .root_geometry import CoveringPlan
from .transforms import SectorSolution, build_solution

SQRT2PI = np.sqrt(2 * np.pi)


# ------------------------------------------------------------ data in (t, z)

def c0_values(spec: EquationSpec, t: complex, z, eps: complex) -> np.ndarray:
    """c_0(t, z, eps) = sum_{n>=0} F^{-1}(C_{0,n})(z) (eps t)^n."""
    Fz = fourier_matrix(spec.grid, np.atleast_1d(z))
    acc = np.zeros(Fz.shape[0], dtype=complex)
    for n, c in enumerate(spec.coeff_series):
        acc += (eps * t) ** n * (Fz @ c.values)
    return acc


def f_values(spec: EquationSpec, t: complex, z, eps: complex) -> np.ndarray:
    """f(t, z, eps) = sum_{n>=1} F^{-1}(F_n)(z) (eps t)^n."""
    Fz = fourier_matrix(spec.grid, np.atleast_1d(z))
    acc = np.zeros(Fz.shape[0], dtype=complex)
    for n, f in enumerate(spec.forcing_series, start=1):
        acc += (eps * t) ** n * (Fz @ f.values)
    return acc


def pde_sides(sol: SectorSolution, t: complex, z) -> tuple:
    """(lhs, rhs) of the main equation at one t and an array of z."""
    spec = sol.spec
    eps = sol.eps
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    lhs = sol.apply_poly(t, z, spec.Q, 1)
    rhs = sol.apply_poly(t, z, spec.Q1, 0) * sol.apply_poly(t, z, spec.Q2, 0)
    for term in spec.terms:
        rhs = rhs + eps**term.Delta * t**term.d * sol.apply_poly(t, z, term.R, term.delta)
    rhs = rhs + c0_values(spec, t, z, eps) * sol.apply_poly(t, z, spec.R0, 0)
    rhs = rhs + f_values(spec, t, z, eps)
    return lhs, rhs


def pde_residual(sol: SectorSolution, samples_t, samples_z, relative: bool = True) -> dict:
    """Max |LHS - RHS| over the product grid, optionally relative to max |f|."""
    res, fscale, lscale = 0.0, 0.0, 0.0
    for t in samples_t:
        lhs, rhs = pde_sides(sol, t, samples_z)
        res = max(res, float(np.max(np.abs(lhs - rhs))))
        fscale = max(fscale, float(np.max(np.abs(f_values(sol.spec, t, samples_z, sol.eps)))))
        lscale = max(lscale, float(np.max(np.abs(lhs))))
    out = {"residual": res, "forcing_scale": fscale, "lhs_scale": lscale}
    out["relative"] = res / fscale if fscale > 0 else res
    return out


def sample_grid(sol: SectorSolution, n_t: int = 5, n_z: int = 5, h: float | None = None, z_max: float = 2.0):
    """n_t points along the time sector's bisector up to h (default h') and n_z real z."""
    h = sol.h_prime if h is None else h
    d = sol.covering.T_sector.direction
    ts = np.linspace(h / n_t, h, n_t) * np.exp(1j * d)
    zs = np.linspace(-z_max, z_max, n_z).astype(complex)
    return ts, zs


# ------------------------------------------------------------ flatness

@dataclass
class FlatnessReport:
    """Differences u_q - u_p (q = p + 1 mod the sector count) on E_p and E_q overlap."""

    p: int
    q: int
    k: int
    eps_samples: list
    diffs: np.ndarray
    scales: np.ndarray
    h_sample: float
    floor_rel: float
    log_K: float = float("nan")
    M: float = float("nan")
    r2: float = float("nan")
    r2_lower: float = float("nan")    # same regression against |eps|^-(k-1)
    n_fit: int = 0
    status: str = ""
    passed: bool = False

    @property
    def prefers_k(self) -> bool:
        return bool(self.n_fit >= 3 and self.r2 > self.r2_lower)

    def rows(self):
        """(eps, |eps|, diff, fit residual) per sample; the residual is nan off the fit."""
        out = []
        for e, d in zip(self.eps_samples, self.diffs):
            a = abs(e)
            res = float("nan")
            if np.isfinite(self.M) and d > 0:
                res = float(np.log(d) - (self.log_K - self.M * a ** (-self.k)))
            out.append((complex(e), a, float(d), res))
        return out

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "k": self.k, "h_sample": self.h_sample,
                "eps": [[e.real, e.imag] for e in map(complex, self.eps_samples)],
                "diffs": [float(d) for d in self.diffs], "scales": [float(s) for s in self.scales],
                "log_K": self.log_K, "M": self.M, "r2": self.r2, "r2_lower": self.r2_lower,
                "n_fit": self.n_fit, "floor_rel": self.floor_rel, "status": self.status,
                "prefers_k": self.prefers_k, "passed": self.passed}


def _linfit(x, y):
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ coef
    ss = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum((y - yhat) ** 2)) / ss if ss > 0 else 1.0
    return coef, r2


def fit_flatness(eps_abs, diffs, k: int):
    """Regress log diff = log K - M |eps|^-k; also returns r2 for the power k - 1."""
    a = np.asarray(eps_abs, float)
    y = np.log(np.asarray(diffs, float))
    (logK, slope), r2 = _linfit(a ** (-k), y)
    lower = a ** (-(k - 1)) if k > 1 else np.log(1.0 / a)
    _, r2_lower = _linfit(lower, y)
    return float(logK), float(-slope), float(r2), float(r2_lower)


def _sup_diff(sp: SectorSolution, sq: SectorSolution, ts, zs):
    d, s = 0.0, 0.0
    for t in ts:
        a = sp(t, zs)
        b = sq(t, zs)
        d = max(d, float(np.max(np.abs(a - b))))
        s = max(s, float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return d, s


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def flatness_probe(plan: CoveringPlan, p: int, spec: EquationSpec, n_eps: int = 6, ratio: float = 0.89,
                   h_scale: float = 0.5, n_t: int = 5, n_z: int = 5, floor_rel: float = 1e-9,
                   r2_min: float = 0.98, arg: float | None = None, threads: int = 1,
                   solve_opts: dict | None = None) -> FlatnessReport:
    """Sup over a (t, z) grid of |u_{p+1} - u_p| for |eps| = eps0/2 * ratio^j along a ray in the overlap.

    The t samples lie on the bisector of the time sector up to
    h'' = h_scale * h'.  Samples whose difference is below ``floor_rel``
    times the size of the solutions are treated as round-off.  When every
    sample is at round-off the pair is reported flat beyond measurement.
    """
    if n_eps < 6:
        raise ValueError("n_eps must be >= 6")
    q = (p + 1) % plan.count
    lo, hi = plan.overlap_arc(p)
    if hi <= lo:
        raise ValueError(f"sectors {p} and {q} do not overlap")
    if arg is None:
        arg = 0.5 * (lo + hi)
    opts = {"ray": "graded", "method": "implicit", "product": "fft", "tol": 1e-12}
    opts.update(solve_opts or {})
    mods = spec.eps0 / 2 * ratio ** np.arange(n_eps)
    eps_list = [complex(a * np.exp(1j * arg)) for a in mods]

    def one(eps):
        sp = build_solution(plan, p, spec, eps, lazy=True, **opts)
        sq = build_solution(plan, q, spec, eps, lazy=True, **opts)
        ts, zs = sample_grid(sp, n_t, n_z, h=h_scale * sp.h_prime)
        return _sup_diff(sp, sq, ts, zs), h_scale * sp.h_prime

    out = _map(one, eps_list, threads)
    diffs = np.array([o[0][0] for o in out])
    scales = np.array([o[0][1] for o in out])
    rep = FlatnessReport(p, q, spec.k, eps_list, diffs, scales, out[0][1], floor_rel)
    meas = diffs > floor_rel * scales
    rep.n_fit = int(np.sum(meas))
    if rep.n_fit == 0:
        rep.status = "flat beyond measurement"
        rep.passed = True
        return rep
    if rep.n_fit < 3:
        rep.status = "too few samples above round-off"
        return rep
    rep.log_K, rep.M, rep.r2, rep.r2_lower = fit_flatness(mods[meas], diffs[meas], spec.k)
    ok = rep.M > 0 and rep.r2 >= r2_min and rep.n_fit >= 6
    rep.status = "fit" if ok else "fit rejected"
    rep.passed = bool(ok)
    return rep


# ------------------------------------------------------------ Ramis-Sibuya

@dataclass
class RSReport:
    sup_norms: dict                 # p -> list of sup |u_p| over the grid, one per eps
    eps_moduli: list
    growth_slopes: dict             # p -> slope of log sup against log |eps|
    bounded: dict                   # p -> bool
    flatness: list                  # FlatnessReport per cyclic pair
    failing: list = field(default_factory=list)

    @property
    def hypothesis1(self) -> bool:
        return all(self.bounded.values())

    @property
    def hypothesis2(self) -> bool:
        return all(f.passed for f in self.flatness)

    @property
    def passed(self) -> bool:
        return self.hypothesis1 and self.hypothesis2


def rs_check(plan: CoveringPlan, spec: EquationSpec, n_eps: int = 5, ratio: float = 0.5,
             flatness: list | None = None, slope_min: float = -0.1, threads: int = 1,
             solve_opts: dict | None = None, **flat_kw) -> RSReport:
    """Both Ramis-Sibuya hypotheses on the covering.

    Boundedness: sup |u_p| over the (t, z) grid at |eps| = eps0/2 * ratio^j
    along the bisector of E_p must show no growth as |eps| -> 0, i.e. the
    log-log slope is at least ``slope_min``.  Flatness: every cyclic pair,
    including (count - 1, 0), passes :func:`flatness_probe`.
    """
    opts = {"ray": "graded", "method": "implicit", "product": "fft", "tol": 1e-12}
    opts.update(solve_opts or {})
    mods = spec.eps0 / 2 * ratio ** np.arange(n_eps)
    sups, slopes, bounded = {}, {}, {}
    for p in range(plan.count):
        d = plan.sectors[p].direction

        def one(a, p=p, d=d):
            sol = build_solution(plan, p, spec, complex(a * np.exp(1j * d)), lazy=True, **opts)
            ts, zs = sample_grid(sol)
            return max(float(np.max(np.abs(sol(t, zs)))) for t in ts)

        vals = _map(one, mods, threads)
        sups[p] = vals
        (_, slope), _ = _linfit(np.log(mods), np.log(np.maximum(vals, 1e-300)))
        slopes[p] = float(slope)
        bounded[p] = bool(np.all(np.isfinite(vals)) and slope >= slope_min)
    if flatness is None:
        flatness = [flatness_probe(plan, p, spec, threads=threads, solve_opts=solve_opts, **flat_kw)
                    for p in range(plan.count)]
    rep = RSReport(sups, list(mods), slopes, bounded, flatness)
    rep.failing = [f"sector {p}: sup norm grows as |eps| -> 0" for p, b in bounded.items() if not b]
    rep.failing += [f"pair ({f.p}, {f.q}): {f.status}" for f in flatness if not f.passed]
    return rep


# ------------------------------------------------------------ eps-expansion

@dataclass
class GevreyReport:
    orders: list
    eps_ladder: list                 # moduli used for the Taylor estimates
    h: dict                          # p -> array (n_max + 1, n_t, n_z) of h_m(t, z)
    richardson_gap: dict             # p -> per-order relative gap between the two ladders
    indeterminate: dict              # p -> per-order flag
    agreement: list                  # per order, max pairwise |h_m^p - h_m^q| / scale
    scale: float
    remainder_slopes: dict           # p -> {n: slope}
    recursion_residual: list         # per order m <= n_max - 1, relative to the LHS scale
    ts: np.ndarray
    zs: np.ndarray
    tol_agree: float = 1e-4
    slope_tol: float = 0.1

    @property
    def agree(self) -> bool:
        return all(a < self.tol_agree for a in self.agreement)

    @property
    def slopes_ok(self) -> bool:
        return all(abs(s - n) <= self.slope_tol for sl in self.remainder_slopes.values() for n, s in sl.items())

    @property
    def recursion_ok(self) -> bool:
        return all(r < self.tol_agree for r in self.recursion_residual)

    @property
    def passed(self) -> bool:
        return self.agree and self.slopes_ok and self.recursion_ok


def _taylor(values: list, s: np.ndarray, degree: int) -> np.ndarray:
    """Coefficients c_m of the interpolating polynomial in s (values stacked on axis 0)."""
    V = np.vander(s, degree + 1, increasing=True)
    flat = np.stack([np.ravel(v) for v in values])
    c = np.linalg.solve(V, flat)
    return c.reshape((degree + 1,) + np.shape(values[0]))


def gevrey_expansion(plan: CoveringPlan, spec: EquationSpec, n_max: int = 2, h: float = 0.04,
                     n_t: int = 5, n_z: int = 5, n_slope: int = 5, tol: float = 1e-14,
                     solve_opts: dict | None = None) -> GevreyReport:
    """Estimate h_m = d^m u_p / d eps^m at eps = 0 in every sector and test them.

    Along the bisector eps = s e^{i d} of E_p the Fourier-side values
    U(t, m; s) are interpolated by a polynomial of degree n_max + 1 through
    the ladder s = h 2^-j; a second ladder starting at h/2 gives one
    Richardson level.  Checks: agreement of h_m across sectors, the slope of
    log |u_p - sum_{m<n} h_m eps^m / m!| against log |eps| for n = 1..n_max
    on an independent set of eps, and the order-m coefficient identity
    obtained by expanding the equation in powers of eps.
    """
    if n_max > 4:
        raise ValueError("n_max is capped at 4")
    L = n_max + 1
    jt_max = max([1] + [t.delta for t in spec.terms])
    opts = {"ray": "default", "method": "picard", "product": "fft", "tol": tol}
    opts.update(solve_opts or {})
    ladder = h * 2.0 ** -np.arange(L + 2)               # both ladders share L of these
    slope_s = h * 0.75 * 2.0 ** (-np.arange(n_slope) / 2)
    Hs, gaps, indet, slopes = {}, {}, {}, {}
    coef_all = {}
    ts = zs = None
    for p in range(plan.count):
        d = plan.sectors[p].direction

        def sol_at(s):
            return build_solution(plan, p, spec, complex(s * np.exp(1j * d)), lazy=True, **opts)

        if ts is None:
            ts, zs = sample_grid(sol_at(ladder[0]), n_t, n_z)
        # Fourier-side values: (jt_max + 1, n_t, Nm) per eps
        vals = []
        for s in ladder:
            sol = sol_at(s)
            vals.append(np.array([[sol.U_hat(t, j) for t in ts] for j in range(jt_max + 1)]))
        c1 = _taylor(vals[:L + 1], ladder[:L + 1], L)
        c2 = _taylor(vals[1:L + 2], ladder[1:L + 2], L)
        # rotate from powers of s to powers of eps
        rot = np.exp(-1j * d * np.arange(L + 1))[:, None, None, None]
        c1, c2 = c1 * rot, c2 * rot
        gap, ind, best = [], [], []
        for m in range(n_max + 1):
            f = 2.0 ** (L + 1 - m)
            est = (f * c2[m] - c1[m]) / (f - 1)
            g = float(np.max(np.abs(c1[m] - c2[m])) / max(np.max(np.abs(est)), 1e-300))
            gap.append(g)
            ind.append(g > 0.1)
            best.append(est)
        coef_all[p] = np.array(best)                       # a_m = h_m / m!, (n_max+1, jt, n_t, Nm)
        gaps[p], indet[p] = gap, ind
        Fz = fourier_matrix(spec.grid, zs)
        Hs[p] = np.array([[Fz @ (gamma(m + 1) * coef_all[p][m, 0, i]) for i in range(n_t)]
                          for m in range(n_max + 1)])
        # remainder slopes on independent eps
        rem = {n: [] for n in range(1, n_max + 1)}
        for s in slope_s:
            sol = sol_at(s)
            e = s * np.exp(1j * d)
            u = np.array([sol.U_hat(t, 0) for t in ts])
            for n in rem:
                part = sum(coef_all[p][m, 0] * e**m for m in range(n))
                rem[n].append(float(np.max(np.abs((u - part) @ Fz.T))))
        slopes[p] = {n: float(_linfit(np.log(slope_s), np.log(np.maximum(r, 1e-300)))[0][1])
                     for n, r in rem.items()}
    scale = max(float(np.max(np.abs(Hs[p]))) for p in Hs)
    agreement = []
    for m in range(n_max + 1):
        worst = 0.0
        for p in range(plan.count):
            q = (p + 1) % plan.count
            worst = max(worst, float(np.max(np.abs(Hs[p][m] - Hs[q][m]))))
        agreement.append(worst / scale if scale > 0 else worst)
    # relative to the largest term over all checked orders: h_0 may vanish identically
    rec_abs = [_recursion_residual(spec, coef_all[0], ts, zs, m) for m in range(n_max)]
    rscale = max(r[1] for r in rec_abs)
    rec = [r[0] / rscale if rscale > 0 else r[0] for r in rec_abs]
    return GevreyReport(list(range(n_max + 1)), list(ladder), Hs, gaps, indet, agreement, scale,
                        slopes, rec, ts, zs)


def _recursion_residual(spec: EquationSpec, a: np.ndarray, ts, zs, m: int) -> tuple:
    """(residual, size of the largest side) of the eps^m coefficient of the equation, a[j, jt, i] = d_t^jt (h_j / j!) at ts[i]."""
    Fz = fourier_matrix(spec.grid, zs)
    im = spec.im

    def phys(j, jt, i, poly):
        return Fz @ (a[j, jt, i] * poly(im))

    worst, scale = 0.0, 0.0
    for i, t in enumerate(ts):
        lhs = phys(m, 1, i, spec.Q)
        rhs = np.zeros_like(lhs)
        for j in range(m + 1):
            rhs = rhs + phys(j, 0, i, spec.Q1) * phys(m - j, 0, i, spec.Q2)
        for term in spec.terms:
            if term.Delta <= m:
                rhs = rhs + t**term.d * phys(m - term.Delta, term.delta, i, term.R)
        for n, c in enumerate(spec.coeff_series):
            if n <= m:
                rhs = rhs + t**n * (Fz @ c.values) * phys(m - n, 0, i, spec.R0)
        if 1 <= m <= len(spec.forcing_series):
            rhs = rhs + t**m * (Fz @ spec.forcing_series[m - 1].values)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        scale = max(scale, float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    return worst, scale
