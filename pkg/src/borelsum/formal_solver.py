"""Formal power series solution in the Borel time T = eps*t.

U(T, m) = sum_{n>=1} U_n(m) T^n is obtained order by order from the
coefficient recursion.  :func:`formal_residual` re-checks the result with
an independent truncated-series arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .grid_core import GridFunction, MGrid, e_beta_mu_norm, convolve_rows
from .problem_model import EquationSpec, SpecError

SQRT2PI = np.sqrt(2 * np.pi)


@dataclass
class FormalSeriesT:
    grid: MGrid
    coeffs: np.ndarray   # row n-1 holds U_n, n = 1..N
    eps: complex
    beta: float = 1.0
    mu: float = 2.0

    @property
    def N(self) -> int:
        return self.coeffs.shape[0]

    def U(self, n: int) -> GridFunction:
        if 1 <= n <= self.N:
            return GridFunction(self.grid, self.coeffs[n - 1])
        return GridFunction.zeros(self.grid)

    def norms(self) -> np.ndarray:
        return np.array([e_beta_mu_norm(self.U(n), self.beta, self.mu) for n in range(1, self.N + 1)])

    def evaluate(self, T) -> np.ndarray:
        """Partial sum at the points T (shape (len(T), Nm))."""
        T = np.atleast_1d(np.asarray(T, dtype=complex))
        pw = T[:, None] ** np.arange(1, self.N + 1)[None, :]
        return pw @ self.coeffs

    def to_csv(self, path, header: dict | None = None):
        with open(path, "w") as fh:
            for key, val in (header or {}).items():
                fh.write(f"# {key}: {val}\n")
            fh.write("n,m,Re,Im\n")
            for n in range(1, self.N + 1):
                for m, v in zip(self.grid.nodes, self.coeffs[n - 1]):
                    fh.write(f"{n},{m!r},{v.real!r},{v.imag!r}\n")


def falling_product(n: int, delta: int, d: int) -> int:
    """prod_{j=0}^{delta-1} (n + delta - d - j), in integer arithmetic."""
    out = 1
    for j in range(delta):
        out *= n + delta - d - j
    return out


def solve_recursion(spec: EquationSpec, eps: complex, N: int) -> FormalSeriesT:
    if N < 2:
        raise SpecError("N must be >= 2")
    if eps == 0:
        raise SpecError("eps must be nonzero")
    grid = spec.grid
    im = spec.im
    h = grid.spacing
    q = spec.Q(im)
    if np.any(q == 0):
        raise SpecError("Q(im) vanishes at a grid node")
    q1, q2, r0 = spec.Q1(im), spec.Q2(im), spec.R0(im)
    rl = [t.R(im) for t in spec.terms]
    ie = 1.0 / eps
    U = np.zeros((N + 1, grid.points), dtype=complex)   # row n = U_n, row 0 unused (zero)
    c00 = spec.C0(0).values
    for n in range(0, N):
        acc = ie * spec.F(n).values
        if n >= 2:
            a = q1[None, :] * U[1:n]
            b = q2[None, :] * U[n - 1:0:-1]
            acc = acc + ie / SQRT2PI * convolve_rows(a, b, h).sum(axis=0)
            c = np.array([spec.C0(n1).values for n1 in range(1, n)])
            acc = acc + ie / SQRT2PI * convolve_rows(c, r0[None, :] * U[n - 1:0:-1], h).sum(axis=0)
        if n >= 1 and np.any(c00):
            acc = acc + ie / SQRT2PI * convolve_rows(c00, r0 * U[n], h)[0]
        for t, r in zip(spec.terms, rl):
            j = n + t.delta - t.d
            if j >= 1:
                acc = acc + r * (eps ** t.eps_power) * float(falling_product(n, t.delta, t.d)) * U[j]
        U[n + 1] = acc / (q * (n + 1))
    return FormalSeriesT(grid, U[1:].copy(), complex(eps), spec.beta, spec.mu)


# ----------------------------------------------- independent check path

class _Trunc:
    """Truncated series sum_{n<=N} a_n T^n with m-profile coefficients."""

    def __init__(self, a: np.ndarray, h: float):
        self.a = np.asarray(a, dtype=complex)
        self.h = h

    @property
    def order(self):
        return self.a.shape[0] - 1

    def deriv(self, times=1):
        a = self.a
        for _ in range(times):
            n = np.arange(1, a.shape[0])
            a = np.vstack([n[:, None] * a[1:], np.zeros((1, a.shape[1]))])
        return _Trunc(a, self.h)

    def shift(self, d):
        a = np.zeros_like(self.a)
        if d < a.shape[0]:
            a[d:] = self.a[: a.shape[0] - d]
        return _Trunc(a, self.h)

    def scale(self, prof):
        return _Trunc(self.a * prof[None, :], self.h)

    def conv(self, other):
        # Cauchy product in T, convolution in m
        N = self.order
        out = np.zeros_like(self.a)
        for i in range(N + 1):
            if not np.any(self.a[i]):
                continue
            for j in range(N + 1 - i):
                if np.any(other.a[j]):
                    out[i + j] += np.convolve(self.a[i], other.a[j])[
                        (self.a.shape[1] - 1) // 2 : (self.a.shape[1] - 1) // 2 + self.a.shape[1]
                    ]
        return _Trunc(self.h * out, self.h)

    def __add__(self, other):
        return _Trunc(self.a + other.a, self.h)

    def __mul__(self, c):
        return _Trunc(self.a * c, self.h)


def _scp_sides(spec: EquationSpec, series: FormalSeriesT, eps: complex):
    grid = spec.grid
    im = spec.im
    N = series.N
    h = grid.spacing
    ua = np.zeros((N + 1, grid.points), dtype=complex)
    ua[1:] = series.coeffs
    U = _Trunc(ua, h)
    ca = np.zeros_like(ua)
    for n in range(1, N + 1):
        ca[n] = spec.C0(n).values
    C = _Trunc(ca, h)
    C00 = np.zeros_like(ua)
    C00[0] = spec.C0(0).values
    C00 = _Trunc(C00, h)
    fa = np.zeros_like(ua)
    for n in range(1, N + 1):
        fa[n] = spec.F(n).values
    F = _Trunc(fa, h)

    lhs = U.deriv().scale(spec.Q(im))
    pieces = [U.scale(spec.Q1(im)).conv(U.scale(spec.Q2(im))) * (1 / (eps * SQRT2PI))]
    for t in spec.terms:
        pieces.append(U.deriv(t.delta).shift(t.d).scale(t.R(im)) * eps ** t.eps_power)
    R0U = U.scale(spec.R0(im))
    pieces.append(C.conv(R0U) * (1 / (eps * SQRT2PI)))
    pieces.append(C00.conv(R0U) * (1 / (eps * SQRT2PI)))
    pieces.append(F * (1 / eps))
    return lhs, pieces


def formal_residual(spec: EquationSpec, series: FormalSeriesT, eps: complex, return_scale: bool = False):
    """Per-order E_(beta,mu) norms of LHS - RHS, orders 0..N-1."""
    lhs, pieces = _scp_sides(spec, series, eps)
    rhs = pieces[0]
    for p in pieces[1:]:
        rhs = rhs + p
    res, scale = [], []
    for n in range(series.N):
        d = GridFunction(spec.grid, lhs.a[n] - rhs.a[n])
        res.append(e_beta_mu_norm(d, spec.beta, spec.mu))
        terms = [lhs.a[n]] + [p.a[n] for p in pieces]
        scale.append(max(e_beta_mu_norm(GridFunction(spec.grid, t), spec.beta, spec.mu) for t in terms))
    if return_scale:
        return res, scale
    return res


def gevrey_rate(series: FormalSeriesT, k: int, norms=None) -> dict:
    """Fit log(||U_n|| / Gamma(n/k)) ~ a - n log(1/rho) over the upper half of the orders."""
    if series.N < 8:
        raise SpecError("need at least 8 orders for a rate fit")
    if norms is None:
        norms = series.norms()
    n = np.arange(1, series.N + 1)
    lo = series.N // 2
    sel = n > lo
    nn, vv = n[sel], norms[sel]
    keep = vv > 0
    if keep.sum() < 3:
        raise SpecError("series terminates; Gevrey rate undefined")
    nn, vv = nn[keep], vv[keep]
    y = np.log(vv) - gammaln(nn / k)
    slope, icpt = np.polyfit(nn, y, 1)
    pred = icpt + slope * nn
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum((y - pred) ** 2) / ss if ss > 0 else 1.0
    rho = float(np.exp(-slope))
    # drift test: a convergent series has Borel coefficients decaying faster
    # than geometrically, so the local rate keeps increasing along the tail
    q = max(3, len(nn) // 2)
    s2 = np.polyfit(nn[-q:], y[-q:], 1)[0]
    s1 = np.polyfit(nn[:q], y[:q], 1)[0]
    divergent = not (s2 < s1 - 0.15 * abs(s1) - 0.05)
    return {"rho_est": rho, "fit_r2": float(r2), "divergent": bool(divergent),
            "flag": "" if divergent else "no divergence detected"}
