"""Discrete stand-ins for the weighted function spaces used throughout.

Functions of the Fourier variable m live on a truncated uniform grid
(:class:`MGrid`, :class:`GridFunction`).  Functions of the Borel variable
tau are sampled along a ray from the origin (:class:`TauRay`) and carried
together with their m-profile in a :class:`TauMField`.

The ray representation is a composite Chebyshev-Lobatto basis in the
radius, so values at off-grid radii are obtained by barycentric
interpolation with spectral accuracy.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class MGrid:
    half_width: float
    points: int

    def __post_init__(self):
        if self.half_width <= 0:
            raise GridError("half_width must be positive")
        if self.points < 3 or self.points % 2 == 0:
            raise GridError("points must be an odd integer >= 3 so that m=0 is a node")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / (self.points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.half_width, self.half_width, self.points)

    @classmethod
    def default(cls, beta: float) -> "MGrid":
        return cls(16.0 / beta, 513)

    def refined(self) -> "MGrid":
        return MGrid(self.half_width, 2 * self.points - 1)


@dataclass
class GridFunction:
    grid: MGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.points,):
            raise GridError(
                f"expected {self.grid.points} values, got shape {self.values.shape}"
            )

    @classmethod
    def from_callable(cls, grid: MGrid, fn) -> "GridFunction":
        return cls(grid, fn(grid.nodes))

    @classmethod
    def zeros(cls, grid: MGrid) -> "GridFunction":
        return cls(grid, np.zeros(grid.points, dtype=complex))

    def _check(self, other: "GridFunction"):
        if other.grid != self.grid:
            raise GridError("grid mismatch")

    def __add__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return GridFunction(self.grid, self.values - other.values)

    def __mul__(self, c):
        if isinstance(c, GridFunction):
            self._check(c)
            return GridFunction(self.grid, self.values * c.values)
        return GridFunction(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return GridFunction(self.grid, -self.values)

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def to_csv(self, path, header: dict | None = None):
        write_gridfunction_csv(path, self, header)


def write_gridfunction_csv(path, f: GridFunction, header: dict | None = None):
    path = Path(path)
    with path.open("w", newline="") as fh:
        for key, val in (header or {}).items():
            fh.write(f"# {key}: {val}\n")
        w = csv.writer(fh)
        w.writerow(["m", "Re", "Im"])
        for m, v in zip(f.grid.nodes, f.values):
            w.writerow([repr(float(m)), repr(float(v.real)), repr(float(v.imag))])


def read_gridfunction_csv(path) -> GridFunction:
    rows = []
    with Path(path).open() as fh:
        reader = csv.reader(line for line in fh if not line.startswith("#"))
        head = next(reader)
        if [h.strip() for h in head] != ["m", "Re", "Im"]:
            raise GridError(f"{path}: expected columns m,Re,Im")
        for row in reader:
            rows.append([float(x) for x in row])
    arr = np.array(rows)
    m = arr[:, 0]
    n = len(m)
    grid = MGrid(float(m[-1]), n)
    if not np.allclose(m, grid.nodes, atol=1e-12 * max(1.0, grid.half_width)):
        raise GridError(f"{path}: m column is not a symmetric uniform grid")
    return GridFunction(grid, arr[:, 1] + 1j * arr[:, 2])


# ---------------------------------------------------------------- norms

def _finite(values: np.ndarray):
    if not np.all(np.isfinite(values)):
        raise GridError("non-finite values")


def e_beta_mu_norm(f: GridFunction, beta: float, mu: float) -> float:
    if beta <= 0:
        raise GridError("beta must be positive")
    _finite(f.values)
    m = np.abs(f.grid.nodes)
    return float(np.max((1 + m) ** mu * np.exp(beta * m) * np.abs(f.values)))


@dataclass(frozen=True)
class TauRay:
    """Radial sample of the ray ``r * exp(i*direction)``, ``0 < r <= R_max``.

    The radii are the nodes of a composite Chebyshev-Lobatto rule on the
    panel breakpoints ``breaks`` (the origin itself is a node of the first
    panel but is not stored: every field on a ray vanishes there).
    """

    direction: float
    breaks: tuple
    order: int

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        if b[0] != 0.0 or np.any(np.diff(b) <= 0):
            raise GridError("breaks must start at 0 and increase")
        if self.order < 2:
            raise GridError("order must be >= 2")

    @classmethod
    def uniform(cls, direction: float, r_max: float, order: int = 48, panels: int = 1):
        return cls(float(direction), tuple(np.linspace(0.0, r_max, panels + 1)), order)

    @property
    def r_max(self) -> float:
        return float(self.breaks[-1])

    @property
    def _lobatto(self) -> np.ndarray:
        j = np.arange(self.order + 1)
        return 0.5 * (1 - np.cos(np.pi * j / self.order))

    @property
    def all_radii(self) -> np.ndarray:
        """Radii including the origin (length panels*order + 1)."""
        x = self._lobatto
        out = [0.0]
        for a, b in zip(self.breaks[:-1], self.breaks[1:]):
            out.extend(a + (b - a) * x[1:])
        return np.array(out)

    @property
    def radii(self) -> np.ndarray:
        return self.all_radii[1:]

    @property
    def size(self) -> int:
        return len(self.radii)

    @property
    def points(self) -> np.ndarray:
        return self.radii * np.exp(1j * self.direction)

    def interpolation_matrix(self, r) -> np.ndarray:
        """Matrix E with ``E @ values`` = field at radii ``r`` (0 <= r <= R_max).

        ``values`` are the stored values at :attr:`radii`; the origin is an
        implicit node with value zero.
        """
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(r < -1e-14) or np.any(r > self.r_max * (1 + 1e-12)):
            raise GridError("interpolation radius outside the ray")
        n = self.order
        x = self._lobatto
        wts = (-1.0) ** np.arange(n + 1)
        wts[0] *= 0.5
        wts[-1] *= 0.5
        brk = np.asarray(self.breaks)
        npan = len(brk) - 1
        pan = np.clip(np.searchsorted(brk, r, side="right") - 1, 0, npan - 1)
        E = np.zeros((len(r), self.size + 1))
        a = brk[pan]
        h = brk[pan + 1] - a
        u = (r - a) / h
        diff = u[:, None] - x[None, :]
        exact = np.isclose(diff, 0.0, atol=1e-15)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = wts[None, :] / diff
            c = c / c.sum(axis=1, keepdims=True)
        hit = exact.any(axis=1)
        c[hit] = exact[hit].astype(float)
        cols = pan[:, None] * n + np.arange(n + 1)[None, :]
        np.put_along_axis(E, cols, c, axis=1)
        return E[:, 1:]


@dataclass
class TauMField:
    ray: TauRay
    grid: MGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.ray.size, self.grid.points):
            raise GridError(
                f"field shape {self.values.shape} does not match "
                f"({self.ray.size}, {self.grid.points})"
            )

    @classmethod
    def zeros(cls, ray: TauRay, grid: MGrid) -> "TauMField":
        return cls(ray, grid, np.zeros((ray.size, grid.points), dtype=complex))

    def at_radii(self, r) -> np.ndarray:
        return self.ray.interpolation_matrix(r) @ self.values

    def __sub__(self, other):
        return TauMField(self.ray, self.grid, self.values - other.values)

    def __add__(self, other):
        return TauMField(self.ray, self.grid, self.values + other.values)

    def __mul__(self, c):
        return TauMField(self.ray, self.grid, self.values * c)

    __rmul__ = __mul__


def f_d_weight(tau: np.ndarray, m: np.ndarray, nu, beta, mu, k, eps) -> np.ndarray:
    """Weight of the F^d norm on a (tau, m) product grid (tau along rows)."""
    if eps == 0:
        raise GridError("eps must be nonzero")
    x = np.abs(np.asarray(tau)) / abs(eps)
    am = np.abs(m)
    with np.errstate(divide="ignore"):
        wt = (1 + x ** (2 * k)) / x * np.exp(-nu * x**k)
    return wt[:, None] * ((1 + am) ** mu * np.exp(beta * am))[None, :]


def f_d_norm(w: TauMField, nu: float, beta: float, mu: float, k: int, eps: complex) -> float:
    if eps == 0:
        raise GridError("eps must be nonzero")
    if nu <= 0 or beta <= 0:
        raise GridError("nu and beta must be positive")
    _finite(w.values)
    wt = f_d_weight(w.ray.radii, w.grid.nodes, nu, beta, mu, k, eps)
    return float(np.max(wt * np.abs(w.values)))


# ---------------------------------------------------------- convolutions

def m_convolution(f: GridFunction, g: GridFunction) -> GridFunction:
    """Trapezoid approximation of the convolution on the zero-extended grid.

    Computed as a direct sum (numpy.convolve), O(N^2).
    """
    if f.grid != g.grid:
        raise GridError("grid mismatch")
    n = f.grid.points
    full = np.convolve(f.values, g.values)
    half = (n - 1) // 2
    return GridFunction(f.grid, f.grid.spacing * full[half : half + n])


def convolve_rows(a: np.ndarray, b: np.ndarray, h: float) -> np.ndarray:
    """Row-wise discrete convolution of stacked profiles, same rule as m_convolution."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    n = a.shape[-1]
    half = (n - 1) // 2
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=complex)
    a, b = np.broadcast_arrays(a, b)
    for i in range(a.shape[0]):
        out[i] = np.convolve(a[i], b[i])[half : half + n]
    return h * out


def toeplitz_stack(a: np.ndarray, h: float) -> np.ndarray:
    """For each row a_j return the N x N matrix T_j with T_j @ g = a_j * g."""
    a = np.atleast_2d(a)
    n = a.shape[-1]
    half = (n - 1) // 2
    idx = np.arange(n)[:, None] - np.arange(n)[None, :] + half
    ok = (idx >= 0) & (idx < n)
    T = np.where(ok[None], a[:, np.clip(idx, 0, n - 1)], 0.0)
    return h * T


def star_product(f: GridFunction, g: GridFunction, Q1, Q2, R) -> GridFunction:
    if f.grid != g.grid:
        raise GridError("grid mismatch")
    im = 1j * f.grid.nodes
    r = R(im)
    if np.any(r == 0):
        raise GridError("R(im) vanishes at a grid node")
    a = GridFunction(f.grid, Q1(im) * f.values)
    b = GridFunction(f.grid, Q2(im) * g.values)
    return GridFunction(f.grid, m_convolution(a, b).values / r)


def fourier_inverse(f: GridFunction, z, beta: float | None = None) -> np.ndarray:
    """(2 pi)^(-1/2) * integral of f(m) exp(i z m) dm, trapezoid on the grid."""
    z = np.asarray(z, dtype=complex)
    if beta is not None and np.any(np.abs(z.imag) >= beta):
        raise GridError("evaluation point outside the strip |Im z| < beta")
    m = f.grid.nodes
    ker = np.exp(1j * np.multiply.outer(z, m))
    return f.grid.spacing * (ker @ f.values) / np.sqrt(2 * np.pi)


def fourier_matrix(grid: MGrid, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return grid.spacing * np.exp(1j * np.multiply.outer(z, grid.nodes)) / np.sqrt(2 * np.pi)
