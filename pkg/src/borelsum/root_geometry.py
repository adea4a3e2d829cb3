"""Roots of P_m(tau) = Q(im) k - R_D(im) k^delta_D tau^((delta_D-1)k), direction
certificates, and good coverings of a punctured disc in the eps-plane."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .grid_core import MGrid
from .problem_model import EquationSpec, SectorSpec, SpecError, quotient_sector, wrap_angle

ADMISSIBLE_TOL = 1e-3


class GeometryError(ValueError):
    pass


def P_m(spec: EquationSpec, tau, m):
    """P_m(tau) on the broadcast of tau and m."""
    k = spec.k
    dD = spec.terms[-1].delta
    im = 1j * np.asarray(m, dtype=float)
    return spec.Q(im) * k - spec.RD(im) * k**dD * np.asarray(tau) ** ((dD - 1) * k)


def roots_qlm(spec: EquationSpec, m: float) -> np.ndarray:
    k = spec.k
    dD = spec.terms[-1].delta
    if dD < 2:
        raise SpecError("delta_D must be >= 2 for the root set to be nonempty")
    q = complex(spec.Q(1j * m))
    rd = complex(spec.RD(1j * m))
    if q == 0 or rd == 0:
        raise GeometryError(f"Q(im) or R_D(im) vanishes at m={m}")
    n = (dD - 1) * k
    z = q / (rd * k ** (dD - 1))
    mod = (abs(q) / (abs(rd) * k ** (dD - 1))) ** (1.0 / n)
    l = np.arange(n)
    return mod * np.exp(1j * (np.angle(z) / n + 2 * np.pi * l / n))


def root_table(spec: EquationSpec, m_grid: MGrid | None = None) -> np.ndarray:
    """Roots for every grid node, shape (Nm, (delta_D-1)k)."""
    g = m_grid or spec.grid
    return np.array([roots_qlm(spec, m) for m in g.nodes])


def root_residuals(spec: EquationSpec, m_grid: MGrid | None = None) -> np.ndarray:
    """|P_m(q)| / |leading coefficient of P_m| for all roots on the grid."""
    g = m_grid or spec.grid
    R = root_table(spec, g)
    dD = spec.terms[-1].delta
    lead = np.abs(spec.RD(1j * g.nodes)) * spec.k**dD
    P = P_m(spec, R, g.nodes[:, None])
    return np.abs(P) / lead[:, None] / np.maximum(1.0, np.abs(R) ** ((dD - 1) * spec.k))


@dataclass
class DirectionReport:
    direction: float
    aperture: float
    M1: float
    M2: float
    l0: int
    C_P: float
    admissible: bool
    reason: str = ""


def _tau_samples(d, aperture, rho, r_far, n_rad, n_ang):
    rad = np.concatenate([np.linspace(0, rho, n_rad // 2), np.geomspace(max(rho, 1e-3), r_far, n_rad)])
    ang = d + aperture / 2 * np.linspace(-1, 1, n_ang)
    sec = np.outer(rad, np.exp(1j * ang)).ravel()
    disc = np.outer(np.linspace(0, rho, 12), np.exp(1j * np.linspace(0, 2 * np.pi, 48, endpoint=False))).ravel()
    return np.concatenate([sec, disc])


def direction_admissibility(spec: EquationSpec, d: float, aperture: float, rho: float,
                            m_grid: MGrid | None = None, tau_samples: int = 80) -> DirectionReport:
    g = m_grid or spec.grid
    k = spec.k
    dD = spec.terms[-1].delta
    R = root_table(spec, g)                       # (Nm, nroot)
    qmin = float(np.min(np.abs(R)))
    qmax = float(np.max(np.abs(R)))
    if qmin <= 2 * rho:
        return DirectionReport(d, aperture, 0.0, 0.0, 0, 0.0, False, "roots enter 2rho disc")
    tau = _tau_samples(d, aperture, rho, 50 * qmax, tau_samples, 33)
    dist = np.abs(tau[None, :, None] - R[:, None, :])          # (Nm, ntau, nroot)
    M1 = float(np.min(dist / (1 + np.abs(tau))[None, :, None]))
    # |tau - q| / (1 + |tau|) -> 1 as |tau| -> inf, so the sampled minimum is the bound
    M1 = min(M1, 1.0)
    # a root whose argument falls inside the sector is hit by the ray through it
    inside = SectorSpec(float(wrap_angle(d)), float(aperture)).contains_arg(np.angle(R), tol=1e-12)
    if np.any(inside):
        M1 = 0.0
    per_l = np.min(dist / np.abs(R)[:, None, :], axis=(0, 1))
    l0 = int(np.argmax(per_l))
    M2 = float(per_l[l0])
    try:
        rQ = quotient_sector(spec, g).inner_radius
    except SpecError:
        rQ = float(np.min(np.abs(spec.Q(1j * g.nodes) / spec.RD(1j * g.nodes))))
    P = np.abs(P_m(spec, tau[None, :], g.nodes[:, None]))
    den = (np.abs(spec.RD(1j * g.nodes))[:, None]
           * (1 + np.abs(tau[None, :]) ** k) ** (dD - 1 - 1.0 / k)
           * rQ ** (1.0 / ((dD - 1) * k)))
    C_P = float(np.min(P / den))
    ok = M1 > ADMISSIBLE_TOL and M2 > ADMISSIBLE_TOL
    return DirectionReport(float(d), float(aperture), M1, M2, l0, C_P, bool(ok),
                           "" if ok else "sector too close to a root")


@dataclass
class CoveringPlan:
    k: int
    sectors: list           # E_p (SectorSpec, bounded by eps0)
    directions: list        # d_p
    borel_sectors: list     # S_{d_p} (unbounded, aperture 2 delta)
    T_sector: SectorSpec    # time sector with radius r_T
    theta: float
    delta1: float
    eps0: float
    kappa: float
    reports: list = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.sectors)

    def overlap_arc(self, p: int) -> tuple:
        """Angular interval (lo, hi) of E_p intersect E_{p+1} (cyclic)."""
        a = self.sectors[p]
        b = self.sectors[(p + 1) % self.count]
        hi = a.direction + a.aperture / 2
        lo = a.direction + wrap_angle(b.direction - a.direction) - b.aperture / 2
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "theta": self.theta,
            "delta1": self.delta1,
            "eps0": self.eps0,
            "kappa": self.kappa,
            "sectors": [asdict(s) for s in self.sectors],
            "directions": list(self.directions),
            "borel_sectors": [asdict(s) for s in self.borel_sectors],
            "T_sector": asdict(self.T_sector),
            "reports": [asdict(r) for r in self.reports],
        }

    def to_json(self, path, header: dict | None = None):
        d = self.to_dict()
        if header:
            d["header"] = header
        with open(path, "w") as fh:
            json.dump(d, fh, indent=2, default=float)

    @classmethod
    def from_json(cls, path) -> "CoveringPlan":
        with open(path) as fh:
            d = json.load(fh)
        sec = lambda x: SectorSpec(**x)
        return cls(d["k"], [sec(s) for s in d["sectors"]], d["directions"],
                   [sec(s) for s in d["borel_sectors"]], sec(d["T_sector"]), d["theta"],
                   d["delta1"], d["eps0"], d["kappa"],
                   [DirectionReport(**r) for r in d["reports"]])


def _best_cos(k, gamma_lo, gamma_hi, arg):
    """max over gamma in [lo, hi] of cos(k (gamma - arg))."""
    g = np.clip(arg, gamma_lo, gamma_hi)
    # arg may be outside the interval by a full turn; try equivalent copies
    best = np.cos(k * (g - arg))
    for shift in (-2 * np.pi, 2 * np.pi):
        a2 = arg + shift
        best = np.maximum(best, np.cos(k * (np.clip(a2, gamma_lo, gamma_hi) - a2)))
    return best


def build_good_covering(spec: EquationSpec, count: int, r_T: float, *, kappa_fraction: float = 0.1,
                        T_aperture: float = 0.02, T_direction: float = 0.0, offset: float = 0.0,
                        half_aperture: float | None = None, m_grid: MGrid | None = None) -> CoveringPlan:
    k = spec.k
    if count < 2 * k:
        raise GeometryError(f"aperture constraint unsatisfiable: {count} sectors of opening > pi/{k} cannot cover the circle")
    kmin = max(0.0, 2 * np.pi / count - np.pi / k)
    kmax = 4 * np.pi / count - np.pi / k if count >= 3 else 2 * np.pi
    if kmax <= kmin:
        raise GeometryError(f"aperture constraint unsatisfiable: {count} sectors force triple intersections")
    kappa = kmin + kappa_fraction * (kmax - kmin)
    ap = np.pi / k + kappa
    centers = [offset + 2 * np.pi * p / count for p in range(count)]
    sectors = [SectorSpec(float(wrap_angle(c)), ap, 0.0, spec.eps0) for c in centers]
    directions = [float(wrap_angle(c + T_direction)) for c in centers]

    # half-aperture of the Borel-plane sectors: as wide as the roots allow,
    # with a 20% angular safety margin, and capped below pi/(2(delta_D-1)k)
    dD = spec.terms[-1].delta
    cap = np.pi / (2 * (dD - 1) * k)
    need = kappa + T_aperture
    blocked = []
    if half_aperture is None:
        grid_h = np.linspace(need * 1.05, cap, 60)
        half = cap
        for p, d in enumerate(directions):
            ok = [h for h in grid_h if direction_admissibility(spec, d, 2 * h, spec.rho, m_grid, 40).admissible]
            best = 0.0
            for h in grid_h:          # largest h such that all smaller h are admissible
                if h in ok:
                    best = h
                else:
                    break
            if best == 0.0:
                blocked.append((p, d))
            half = min(half, 0.8 * best if best < cap else cap)
    else:
        half = half_aperture
    if blocked:
        arcs = ", ".join(f"sector {p}: direction {d:.4f}" for p, d in blocked)
        raise GeometryError(f"no admissible direction within the angular budget ({arcs})")
    if half <= need:
        raise GeometryError("Borel sectors too narrow for the eps*t containment condition")
    theta = np.pi / k + half
    reports = [direction_admissibility(spec, d, 2 * half, spec.rho, m_grid) for d in directions]
    bad = [r for r in reports if not r.admissible]
    if bad:
        raise GeometryError("direction certificate failed: " + ", ".join(f"{r.direction:.4f} ({r.reason})" for r in bad))
    borel = [SectorSpec(d, 2 * half) for d in directions]
    Tsec = SectorSpec(float(T_direction), T_aperture, 0.0, r_T)

    # worst-case kernel decay over eps in E_p, t in T
    worst = 1.0
    for s, d in zip(sectors, directions):
        args = s.direction + T_direction + (s.aperture + T_aperture) / 2 * np.array([-1.0, 1.0])
        c = _best_cos(k, d - half, d + half, args)
        worst = min(worst, float(np.min(c)))
    if worst <= 0:
        raise GeometryError("no Laplace direction reaches the edges of the sectors")
    return CoveringPlan(k, sectors, directions, borel, Tsec, float(theta), worst, spec.eps0,
                        float(kappa), reports)


def verify_covering(plan: CoveringPlan, n_ang: int = 10_000, n_rad: int = 7) -> dict:
    """Independent sampling pass over every CoveringPlan invariant."""
    phi = np.linspace(-np.pi, np.pi, n_ang, endpoint=False)
    member = np.array([s.contains_arg(phi) for s in plan.sectors])     # (P, n_ang)
    cnt = member.sum(axis=0)
    out = {
        "coverage": bool(cnt.min() >= 1),
        "no_triple": bool(cnt.max() <= 2),
    }
    P = plan.count
    out["pairwise_overlap"] = bool(all(np.any(member[p] & member[(p + 1) % P]) for p in range(P)))
    # non-neighbours must be disjoint
    nn = True
    for p in range(P):
        for q in range(P):
            if q not in (p, (p + 1) % P, (p - 1) % P) and np.any(member[p] & member[q]):
                nn = False
    out["non_neighbours_disjoint"] = nn
    # eps * t containment in S_{d_p, theta, eps0 r_T}
    T = plan.T_sector
    t_ang = T.direction + T.aperture / 2 * np.linspace(-1, 1, 9)
    t_rad = np.linspace(T.outer_radius / n_rad, T.outer_radius, n_rad)
    tt = np.outer(t_rad, np.exp(1j * t_ang)).ravel()
    ok = True
    for s, d in zip(plan.sectors, plan.directions):
        e_ang = s.direction + s.aperture / 2 * np.linspace(-1, 1, 41)
        e_rad = np.linspace(s.outer_radius / n_rad, s.outer_radius, n_rad)
        ee = np.outer(e_rad, np.exp(1j * e_ang)).ravel()
        prod = np.outer(ee, tt).ravel()
        target = SectorSpec(d, plan.theta, 0.0, plan.eps0 * T.outer_radius)
        ok &= bool(np.all(target.contains(prod, tol=1e-9)))
    out["eps_t_containment"] = ok
    out["certificates"] = bool(all(r.M1 >= ADMISSIBLE_TOL and r.M2 >= ADMISSIBLE_TOL for r in plan.reports))
    out["all"] = all(out.values())
    return out
