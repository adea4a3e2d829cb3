"""Equation data and the structural hypotheses it must satisfy.

The problem is

    Q(dz) dt u = (Q1(dz) u)(Q2(dz) u)
                 + sum_l eps^Delta_l t^d_l dt^delta_l R_l(dz) u
                 + c0(t, z, eps) R0(dz) u + f(t, z, eps),      u(0, z, eps) = 0,

with c0 and f given through the Fourier profiles C_{0,n}(m) and F_n(m).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .grid_core import GridFunction, MGrid, e_beta_mu_norm


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class PolynomialSpec:
    coefficients: tuple

    def __post_init__(self):
        c = tuple(complex(x) for x in self.coefficients)
        # trailing zeros would make the degree ambiguous
        while len(c) > 1 and c[-1] == 0:
            c = c[:-1]
        if not c:
            c = (0j,)
        object.__setattr__(self, "coefficients", c)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coefficients[0] == 0

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        out = np.zeros_like(x)
        for c in reversed(self.coefficients):
            out = out * x + c
        return out

    @classmethod
    def const(cls, c=1.0):
        return cls((c,))


@dataclass(frozen=True)
class OperatorTerm:
    d: int
    delta: int
    Delta: int
    R: PolynomialSpec

    def __post_init__(self):
        if self.d < 0 or self.delta < 1 or self.Delta < 0:
            raise SpecError(f"operator term out of range: d={self.d}, delta={self.delta}, Delta={self.Delta}")

    @property
    def eps_power(self) -> int:
        """Exponent of eps in front of T^d dT^delta in the Borel-time equation."""
        return self.Delta - self.d + self.delta - 1


@dataclass
class EquationSpec:
    k: int
    terms: list
    Q: PolynomialSpec
    Q1: PolynomialSpec
    Q2: PolynomialSpec
    R0: PolynomialSpec
    grid: MGrid
    coeff_series: list = field(default_factory=list)    # C_{0,0}, C_{0,1}, ...
    forcing_series: list = field(default_factory=list)  # F_1, F_2, ...
    beta: float = 1.0
    mu: float = 2.0
    nu: float = 1.0
    rho: float = 0.3
    eps0: float = 3.2
    T0: float = 1.0
    K0: float = 1.0
    name: str = "spec"

    @property
    def D(self) -> int:
        return len(self.terms)

    @property
    def RD(self) -> PolynomialSpec:
        return self.terms[-1].R

    @property
    def im(self) -> np.ndarray:
        return 1j * self.grid.nodes

    def C0(self, n: int) -> GridFunction:
        if 0 <= n < len(self.coeff_series):
            return self.coeff_series[n]
        return GridFunction.zeros(self.grid)

    def F(self, n: int) -> GridFunction:
        if 1 <= n <= len(self.forcing_series):
            return self.forcing_series[n - 1]
        return GridFunction.zeros(self.grid)

    def replace(self, **kw) -> "EquationSpec":
        d = dict(self.__dict__)
        d.update(kw)
        return EquationSpec(**d)


@dataclass(frozen=True)
class SectorSpec:
    direction: float
    aperture: float
    inner_radius: float = 0.0
    outer_radius: float = float("inf")

    def __post_init__(self):
        if not (0 <= self.aperture < 2 * np.pi):
            raise SpecError("aperture must lie in [0, 2 pi)")
        if self.inner_radius < 0 or self.inner_radius >= self.outer_radius:
            raise SpecError("need 0 <= inner_radius < outer_radius")

    @property
    def bounded(self) -> bool:
        return np.isfinite(self.outer_radius)

    def contains_arg(self, theta, tol=0.0) -> np.ndarray:
        return np.abs(wrap_angle(np.asarray(theta) - self.direction)) <= self.aperture / 2 + tol

    def contains(self, z, tol=1e-12) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        ok = (r >= self.inner_radius * (1 - tol)) & (r <= self.outer_radius * (1 + tol))
        return ok & self.contains_arg(np.angle(z), tol)


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    return -((-np.asarray(a) + np.pi) % (2 * np.pi) - np.pi)


@dataclass
class HypothesisReport:
    flags: dict = field(default_factory=dict)      # name -> bool
    witnesses: dict = field(default_factory=dict)  # name -> str

    def add(self, name: str, ok: bool, witness: str = ""):
        self.flags[name] = bool(ok)
        self.witnesses[name] = witness

    @property
    def overall(self) -> bool:
        return all(self.flags.values())

    @property
    def failures(self) -> list:
        return [n for n, ok in self.flags.items() if not ok]

    def lines(self) -> list:
        out = []
        for n, ok in self.flags.items():
            w = self.witnesses.get(n, "")
            out.append(f"{'pass' if ok else 'FAIL'}  {n}" + (f"  ({w})" if w else ""))
        return out


# Flag names (kept short and stable; the CLI prints them verbatim)
H_DELTA_ONE = "delta_1=1"
H_DELTA_INC = "delta_l<delta_{l+1}"
H_DD = "d_D=(delta_D-1)(k+1)"
H_DL = "d_l>(delta_l-1)(k+1) for l<D"
H_DELTAD = "Delta_D=d_D-delta_D+1"
H_DELTA_D2 = "delta_D>=2"
H_DEG_Q = "deg Q>=deg R_D"
H_DEG_RL = "deg R_D>=deg R_l"
H_DEG_Q12 = "deg R_D>=deg Q1, deg Q2"
H_Q_NONZERO = "Q(im)!=0"
H_RD_NONZERO = "R_D(im)!=0"
H_MU = "mu>max(deg Q1,deg Q2)+1"
H_GAP = "delta_D>=delta_l+2/k"
H_EPS_POW = "Delta_l-d_l+delta_l+k(delta_l-delta_D)+d_lk>=0"
H_QUOTIENT = "Q/R_D in unbounded sector"
H_SERIES = "series bounds K0*T0^-n"


def validate_structure(spec: EquationSpec, m_grid: MGrid | None = None) -> HypothesisReport:
    if not spec.terms:
        raise SpecError("D = 0: at least two operator terms are required")
    if m_grid is None:
        m_grid = spec.grid
    if m_grid.points < 1:
        raise SpecError("empty m-grid")
    rep = HypothesisReport()
    k, D, T = spec.k, spec.D, spec.terms
    if k < 1:
        raise SpecError("k must be >= 1")
    if D < 2:
        raise SpecError(f"D must be >= 2, got {D}")

    rep.add(H_DELTA_ONE, T[0].delta == 1, f"delta_1={T[0].delta}")
    bad = [l + 1 for l in range(D - 1) if not T[l].delta < T[l + 1].delta]
    rep.add(H_DELTA_INC, not bad, f"l={bad}" if bad else "")
    dD, deD = T[-1].d, T[-1].delta
    rep.add(H_DD, dD == (deD - 1) * (k + 1), f"d_D={dD}, (delta_D-1)(k+1)={(deD - 1) * (k + 1)}")
    bad = [l + 1 for l in range(D - 1) if not T[l].d > (T[l].delta - 1) * (k + 1)]
    rep.add(H_DL, not bad, f"l={bad}" if bad else "")
    rep.add(H_DELTAD, T[-1].Delta == dD - deD + 1, f"Delta_D={T[-1].Delta}, expected {dD - deD + 1}")
    rep.add(H_DELTA_D2, deD >= 2, f"delta_D={deD}")

    degRD = spec.RD.degree
    rep.add(H_DEG_Q, spec.Q.degree >= degRD, f"deg Q={spec.Q.degree}, deg R_D={degRD}")
    bad = [l + 1 for l in range(D - 1) if T[l].R.degree > degRD]
    rep.add(H_DEG_RL, not bad, f"l={bad}" if bad else "")
    rep.add(H_DEG_Q12, degRD >= spec.Q1.degree and degRD >= spec.Q2.degree,
            f"deg Q1={spec.Q1.degree}, deg Q2={spec.Q2.degree}, deg R_D={degRD}")

    im = 1j * m_grid.nodes
    q = spec.Q(im)
    rd = spec.RD(im)
    tol = 1e-13
    iq = np.flatnonzero(np.abs(q) <= tol * max(1.0, np.max(np.abs(q))))
    rep.add(H_Q_NONZERO, iq.size == 0, f"m={m_grid.nodes[iq[0]]:.6g}" if iq.size else "")
    ir = np.flatnonzero(np.abs(rd) <= tol * max(1.0, np.max(np.abs(rd))))
    rep.add(H_RD_NONZERO, ir.size == 0, f"m={m_grid.nodes[ir[0]]:.6g}" if ir.size else "")
    need = max(spec.Q1.degree, spec.Q2.degree) + 1
    rep.add(H_MU, spec.mu > need, f"mu={spec.mu}, bound={need}")

    # exact rational comparisons for the remaining l < D constraints
    dlk = [t.d + k + 1 - t.delta * (k + 1) for t in T]
    bad = [l + 1 for l in range(D - 1) if not k * deD >= k * T[l].delta + 2]
    rep.add(H_GAP, not bad, f"l={bad}" if bad else "")
    bad = [l + 1 for l in range(D - 1)
           if T[l].Delta - T[l].d + T[l].delta + k * (T[l].delta - deD) + dlk[l] < 0]
    rep.add(H_EPS_POW, not bad, f"l={bad}" if bad else "")

    if iq.size == 0 and ir.size == 0:
        try:
            sec = quotient_sector(spec, m_grid)
            rep.add(H_QUOTIENT, True, f"direction={sec.direction:.4g}, aperture={sec.aperture:.3g}, r={sec.inner_radius:.4g}")
        except SpecError as exc:
            rep.add(H_QUOTIENT, False, str(exc))
    else:
        rep.add(H_QUOTIENT, False, "quotient undefined on the grid")

    bad = []
    for n, c in enumerate(spec.coeff_series):
        if e_beta_mu_norm(c, spec.beta, spec.mu) > spec.K0 * spec.T0 ** (-n) * (1 + 1e-12):
            bad.append(f"C_0,{n}")
    for n, f in enumerate(spec.forcing_series, start=1):
        if e_beta_mu_norm(f, spec.beta, spec.mu) > spec.K0 * spec.T0 ** (-n) * (1 + 1e-12):
            bad.append(f"F_{n}")
    rep.add(H_SERIES, not bad, ", ".join(bad))
    return rep


def derived_indices(spec: EquationSpec) -> list:
    k = spec.k
    out = [t.d + k + 1 - t.delta * (k + 1) for t in spec.terms]
    neg = [l + 1 for l, v in enumerate(out) if v < 0]
    if neg:
        raise SpecError(f"negative d_(l,k) for l={neg}: hypothesis violated")
    return out


def quotient_sector(spec: EquationSpec, m_grid: MGrid | None = None) -> SectorSpec:
    if m_grid is None:
        m_grid = spec.grid
    im = 1j * m_grid.nodes
    rd = spec.RD(im)
    if np.any(rd == 0):
        raise SpecError("R_D(im) vanishes on the grid")
    z = spec.Q(im) / rd
    r = float(np.min(np.abs(z)))
    if r <= 1e-12:
        raise SpecError("quotient Q/R_D approaches 0 on the grid")
    # the quotient is a rational function of m, so its arg is continuous:
    # unwrap along the grid relative to the value at m=0
    ang = np.unwrap(np.angle(z))
    lo, hi = float(ang.min()), float(ang.max())
    # asymptotic regime: compare with the limiting argument as |m| -> inf
    if spec.Q.degree == spec.RD.degree or spec.Q.degree > spec.RD.degree:
        for sgn in (1.0, -1.0):
            big = sgn * 1e8j
            a = np.angle(spec.Q(big) / spec.RD(big))
            a = ang[-1 if sgn > 0 else 0] + wrap_angle(a - ang[-1 if sgn > 0 else 0])
            lo, hi = min(lo, a), max(hi, a)
    if hi - lo >= np.pi:
        raise SpecError(f"arg range of Q/R_D is {hi - lo:.4g} >= pi")
    direction = float(wrap_angle(0.5 * (lo + hi)))
    sec = SectorSpec(direction, float(hi - lo), r)
    if not np.all(sec.contains(z, tol=1e-9)):
        raise SpecError("quotient sector containment check failed")
    return sec


# -------------------------------------------------- operator expansion

def expansion_coefficients(delta: int, k: int) -> list:
    """Integers A_{delta,p}, p = 1..delta-1, with

        T^{delta(k+1)} dT^delta = (T^{k+1} dT)^delta + sum_p A_p T^{k(delta-p)} (T^{k+1} dT)^p.

    Found by applying both sides to T^n for n = 0..delta and solving the
    resulting linear system in exact rational arithmetic.
    """
    if delta < 1:
        raise SpecError("delta must be >= 1")
    if delta == 1:
        return []

    def falling(n, j):
        out = 1
        for i in range(j):
            out *= n - i
        return out

    def rising_k(n, j):
        # (T^{k+1} dT)^j T^n = n (n+k) ... (n+(j-1)k) T^{n+jk}
        out = 1
        for i in range(j):
            out *= n + i * k
        return out

    p_count = delta - 1
    rows, rhs = [], []
    for n in range(1, 2 * delta + 2):
        rows.append([Fraction(rising_k(n, p)) for p in range(1, delta)])
        rhs.append(Fraction(falling(n, delta) - rising_k(n, delta)))
    # least squares is unnecessary: the system is consistent; solve the
    # first p_count independent rows by exact Gaussian elimination
    A = [r[:] + [b] for r, b in zip(rows, rhs)]
    sol = _exact_solve(A, p_count)
    for r, b in zip(rows, rhs):
        if sum(x * y for x, y in zip(r, sol)) != b:
            raise SpecError("operator expansion is inconsistent")
    out = []
    for v in sol:
        if v.denominator != 1:
            raise SpecError("non-integer expansion coefficient")
        out.append(int(v))
    return out


def _exact_solve(A, ncol):
    A = [row[:] for row in A]
    piv_rows = []
    r = 0
    for c in range(ncol):
        p = next((i for i in range(r, len(A)) if A[i][c] != 0), None)
        if p is None:
            raise SpecError("singular system")
        A[r], A[p] = A[p], A[r]
        pv = A[r][c]
        A[r] = [x / pv for x in A[r]]
        for i in range(len(A)):
            if i != r and A[i][c] != 0:
                f = A[i][c]
                A[i] = [x - f * y for x, y in zip(A[i], A[r])]
        piv_rows.append(r)
        r += 1
    return [A[i][-1] for i in range(ncol)]


# ----------------------------------------------------------- built-ins

def gaussian(grid: MGrid, amplitude=1.0, width=1.0, center=0.0) -> GridFunction:
    m = grid.nodes
    return GridFunction(grid, amplitude * np.exp(-(((m - center) / width) ** 2)))


def canonical_spec(grid: MGrid | None = None, **overrides) -> EquationSpec:
    """k=2, D=2, d=(4,3), delta=(1,2), Delta=(1,2), Q=X^2-1, all other polynomials 1.

    Data: Gaussian profiles with C_{0,0} = 0.02 e^{-m^2}, C_{0,1} = 0.02 e^{-m^2},
    F_1 = 0.2 e^{-m^2}, F_2 = 0.1 e^{-m^2}.
    """
    if grid is None:
        grid = MGrid(10.0, 201)
    one = PolynomialSpec.const(1.0)
    terms = [OperatorTerm(4, 1, 1, one), OperatorTerm(3, 2, 2, one)]
    kw = dict(
        k=2,
        terms=terms,
        Q=PolynomialSpec((-1.0, 0.0, 1.0)),
        Q1=one,
        Q2=one,
        R0=one,
        grid=grid,
        coeff_series=[gaussian(grid, 0.02), gaussian(grid, 0.02)],
        forcing_series=[gaussian(grid, 0.2), gaussian(grid, 0.1)],
        beta=1.0,
        mu=2.0,
        nu=1.0,
        rho=0.3,
        eps0=3.2,
        T0=1.0,
        K0=1.0,
        name="canonical",
    )
    kw.update(overrides)
    return EquationSpec(**kw)
