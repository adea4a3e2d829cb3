"""m_k-Borel transform (T^n -> tau^n / Gamma(n/k)) and its integral kernels.

Integrals over the segment [0, tau^k] are parametrised by s = tau^k * sigma
and graded with sigma = v^k, which turns the s^(1/k - 1) endpoint behaviour
into an analytic integrand.  Fractional powers (1 - v^k)^a at the upper
end are absorbed into Gauss-Jacobi weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft as sp_fft
from scipy.special import gamma, roots_jacobi, roots_legendre

from .formal_solver import FormalSeriesT
from .grid_core import GridFunction, MGrid, TauMField, TauRay, toeplitz_stack


# ----------------------------------------------------------- quadrature

@lru_cache(maxsize=None)
def gauss_jacobi01(n: int, a: float):
    """Nodes/weights for integral_0^1 (1-v)^a h(v) dv."""
    if abs(a) < 1e-15:
        return gauss_legendre01(n)
    x, w = roots_jacobi(n, a, 0.0)
    return 0.5 * (x + 1), w * 2.0 ** (-a - 1)


@lru_cache(maxsize=None)
def gauss_legendre01(n: int):
    x, w = roots_legendre(n)
    return 0.5 * (x + 1), 0.5 * w


def _gk(v, k):
    # (1 - v^k) / (1 - v)
    return sum(v**j for j in range(k))


def segment_rule(k: int, a: float, b: float, n: int = 48):
    """Rule for k * integral_0^1 (1 - v^k)^a v^(k b - 1) h(v) dv  ~  sum W_j h(v_j).

    This is integral_0^{tau^k} (tau^k - s)^a s^b h(s^(1/k)/tau) ds/s divided by
    tau^(k(a+b)).  Requires a > -1 and k b > 0 or h(v) = O(v).
    """
    v, w = gauss_jacobi01(n, float(a))
    return v, k * w * _gk(v, k) ** a * v ** (k * b - 1)


def product_rule(k: int, n: int = 32):
    """Rule for integral_0^1 A((1-xi)^(1/k)) B(xi^(1/k)) dxi / ((1-xi) xi).

    Returns (ra, rb, W): radii fractions for the two factors and weights, so the
    integral is  sum_j W_j A(ra_j) B(rb_j).  The interval is split at 1/2 and each
    half is graded toward its endpoint by xi = v^k / 2.
    """
    v, w = gauss_legendre01(n)
    near = 2.0 ** (-1.0 / k) * v              # radius fraction of the small factor
    far = (1 - v**k / 2) ** (1.0 / k)          # radius fraction of the other factor
    W = k * w / (v * (1 - v**k / 2))
    ra = np.concatenate([far, near])
    rb = np.concatenate([near, far])
    return ra, rb, np.concatenate([W, W])


# ------------------------------------------------------- Borel series

@dataclass
class BorelSeries:
    grid: MGrid
    coeffs: np.ndarray    # row n-1 = U_n / Gamma(n/k)
    k: int
    rho: float | None = None

    @property
    def N(self) -> int:
        return self.coeffs.shape[0]

    def evaluate(self, tau) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(tau, dtype=complex))
        pw = tau[:, None] ** np.arange(1, self.N + 1)[None, :]
        return pw @ self.coeffs

    def on_ray(self, ray: TauRay) -> TauMField:
        return TauMField(ray, self.grid, self.evaluate(ray.points))


def borel_gamma(n, k):
    return gamma(np.asarray(n, dtype=float) / k)


def mk_borel(series: FormalSeriesT, k: int, rho: float | None = None) -> BorelSeries:
    if k < 1:
        raise ValueError("k must be >= 1")
    n = np.arange(1, series.N + 1)
    return BorelSeries(series.grid, series.coeffs / borel_gamma(n, k)[:, None], k, rho)


def check_borel_diff(series: FormalSeriesT, k: int) -> float:
    """Max discrepancy between Borel(T^{k+1} dT f) and k tau^k Borel(f), coefficientwise."""
    N = series.N
    n = np.arange(1, N + 1)
    # T^{k+1} dT sum U_n T^n = sum n U_n T^{n+k}: Borel coefficient of tau^{n+k}
    left = (n / borel_gamma(n + k, k))[:, None] * series.coeffs
    right = k * series.coeffs / borel_gamma(n, k)[:, None]
    if not series.coeffs.size:
        return 0.0
    return float(np.max(np.abs(left - right), initial=0.0))


def shift_series(series: FormalSeriesT, m_power: int) -> FormalSeriesT:
    """T^m * series, truncated to N + m orders."""
    c = np.zeros((series.N + m_power, series.coeffs.shape[1]), dtype=complex)
    c[m_power:] = series.coeffs
    return FormalSeriesT(series.grid, c, series.eps, series.beta, series.mu)


def _values_along(w, tau_pts):
    """Values of w at the complex points tau_pts (all on one ray through 0)."""
    if isinstance(w, BorelSeries):
        return w.evaluate(tau_pts)
    if isinstance(w, TauMField):
        ang = np.angle(tau_pts[np.abs(tau_pts) > 0])
        if ang.size and np.max(np.abs(np.angle(np.exp(1j * (ang - w.ray.direction))))) > 1e-9:
            raise ValueError("evaluation points are not on the field's ray")
        return w.at_radii(np.abs(tau_pts))
    raise TypeError("expected BorelSeries or TauMField")


def _vanishes_linearly(w) -> bool:
    """|w| / r at the two innermost radii of a ray field must not blow up."""
    if not isinstance(w, TauMField):
        return True          # Borel series start at tau^1
    r = w.ray.radii[:2]
    v = np.max(np.abs(w.values[:2]), axis=1)
    if v[0] <= 1e-12 * max(np.max(np.abs(w.values)), 1e-300):
        return True
    return bool(v[0] / r[0] <= 2.0 * v[1] / r[1])


def borel_monomial_mult(w, m_power: int, k: int, tau: complex, n: int = 64) -> np.ndarray:
    """tau^k / Gamma(m/k) integral_0^{tau^k} (tau^k - s)^(m/k - 1) w(s^(1/k)) ds/s."""
    if m_power < 1:
        raise ValueError("m_power must be >= 1")
    tau = complex(tau)
    if tau == 0:
        return np.zeros(_values_along(w, np.array([0j])).shape[-1], dtype=complex)
    v, W = segment_rule(k, m_power / k - 1, 0.0, n)
    vals = _values_along(w, tau * v)
    return tau**m_power / gamma(m_power / k) * (W @ vals)


def borel_convolution(f, g, tau: complex, k: int, Q1=None, Q2=None, R=None, n: int = 48) -> GridFunction:
    """tau^k integral_0^{tau^k} f((tau^k - s)^(1/k)) * g(s^(1/k)) ds / ((tau^k - s) s).

    The m-product is (1/R) * integral Q1 f(m - m1) Q2 g(m1) dm1.
    """
    grid = f.grid
    if g.grid != grid:
        raise ValueError("grid mismatch")
    tau = complex(tau)
    ra, rb, W = product_rule(k, n)
    fa = _values_along(f, tau * ra)
    gb = _values_along(g, tau * rb)
    for w in (f, g):
        if not _vanishes_linearly(w):
            raise ValueError("inputs violate O(tau) vanishing")
    im = 1j * grid.nodes
    if Q1 is not None:
        fa = fa * Q1(im)[None, :]
    if Q2 is not None:
        gb = gb * Q2(im)[None, :]
    h = grid.spacing
    half = (grid.points - 1) // 2
    acc = np.zeros(grid.points, dtype=complex)
    for wj, a, b in zip(W, fa, gb):
        acc += wj * np.convolve(a, b)[half : half + grid.points]
    acc *= h
    if R is not None:
        acc = acc / R(im)
    return GridFunction(grid, acc)


# --------------------------------------------- ray operator matrices

def ray_power(ray: TauRay, p: float) -> np.ndarray:
    """tau^p along the ray (branch continued from the positive axis)."""
    return ray.radii**p * np.exp(1j * p * ray.direction)


def volterra_matrix(ray: TauRay, k: int, a: float, b: float, n: int = 48) -> np.ndarray:
    """M with (M @ w)_i = integral_0^{tau_i^k} (tau_i^k - s)^a s^b w(s^(1/k)) ds/s."""
    v, W = segment_rule(k, a, b, n)
    r = ray.radii
    E = ray.interpolation_matrix(np.outer(r, v).ravel()).reshape(len(r), len(v), -1)
    M = np.einsum("j,ijc->ic", W, E)
    return ray_power(ray, k * (a + b))[:, None] * M


def product_tensor(ray: TauRay, k: int, n: int = 32) -> np.ndarray:
    """K with J_i = sum_ab K_iab (A_a * B_b), J(rho) the inner product integral.

    J(rho) = integral_0^1 A(rho (1-xi)^(1/k)) * B(rho xi^(1/k)) dxi / ((1-xi) xi).
    """
    ra, rb, W = product_rule(k, n)
    r = ray.radii
    Ea = ray.interpolation_matrix(np.outer(r, ra).ravel()).reshape(len(r), len(ra), -1)
    Eb = ray.interpolation_matrix(np.outer(r, rb).ravel()).reshape(len(r), len(rb), -1)
    return np.einsum("q,iqa,iqb->iab", W, Ea, Eb, optimize=True)


@dataclass
class SplitProduct:
    """Unassembled form of the product tensor: J_i = sum_q W_q (Ea_iq A) * (Eb_iq B).

    The m-convolutions are done by zero-padded FFT, so the cost is linear in
    the number of radii.  Round-off is relative to the largest entry of each
    row rather than entrywise, which is why the assembled tensor with direct
    sums stays the default.
    """

    Ea: np.ndarray     # (Nr, nq, Nr)
    Eb: np.ndarray
    W: np.ndarray

    def transform_a(self, A: np.ndarray) -> np.ndarray:
        """Padded FFT of the first factor at its quadrature radii (reusable)."""
        a = np.einsum("iqa,am->iqm", self.Ea, A, optimize=True)
        return sp_fft.fft(a, sp_fft.next_fast_len(2 * A.shape[-1] - 1), axis=-1)

    def __call__(self, A: np.ndarray, B: np.ndarray, h: float, A_hat: np.ndarray | None = None) -> np.ndarray:
        n = B.shape[-1]
        if A_hat is None:
            A_hat = self.transform_a(A)
        b = np.einsum("iqa,am->iqm", self.Eb, B, optimize=True)
        c = sp_fft.ifft(A_hat * sp_fft.fft(b, A_hat.shape[-1], axis=-1), axis=-1)
        half = (n - 1) // 2
        c = c[..., half:half + n]
        return h * np.einsum("q,iqm->im", self.W, c, optimize=True)


def split_product(ray: TauRay, k: int, n: int = 32) -> SplitProduct:
    ra, rb, W = product_rule(k, n)
    r = ray.radii
    Ea = ray.interpolation_matrix(np.outer(r, ra).ravel()).reshape(len(r), len(ra), -1)
    Eb = ray.interpolation_matrix(np.outer(r, rb).ravel()).reshape(len(r), len(rb), -1)
    return SplitProduct(Ea, Eb, W)


def pairwise_convolutions(A: np.ndarray, B: np.ndarray, h: float) -> np.ndarray:
    """C[a, b, :] = A_a * B_b (direct trapezoid sums via Toeplitz products)."""
    TA = toeplitz_stack(A, h)                       # (na, Nm, Nm)
    return np.einsum("aij,bj->abi", TA, B, optimize=True)
