import numpy as np
import pytest

from borelsum.grid_core import (GridError, GridFunction, MGrid, TauMField, TauRay, e_beta_mu_norm, f_d_norm,
                                fourier_inverse, m_convolution, read_gridfunction_csv, star_product)
from borelsum.problem_model import PolynomialSpec

G = MGrid(10.0, 201)
ONE = PolynomialSpec.const(1.0)


def gauss(grid=G, c=0.0, w=1.0):
    return GridFunction(grid, np.exp(-(((grid.nodes - c) / w) ** 2)))


def test_grid_validation():
    with pytest.raises(GridError):
        MGrid(10.0, 200)
    with pytest.raises(GridError):
        MGrid(-1.0, 11)
    assert G.nodes[100] == 0.0 and G.spacing == pytest.approx(0.1)


def test_e_beta_mu_norm_examples():
    m = G.nodes
    assert e_beta_mu_norm(GridFunction.zeros(G), 1.0, 2.0) == 0.0
    f = GridFunction(G, np.exp(-2 * np.abs(m)))
    assert e_beta_mu_norm(f, 1.0, 1.0) == pytest.approx(1.0)
    g = GridFunction(G, np.exp(-np.abs(m)) * (1 + np.abs(m)) ** -2.0)
    assert e_beta_mu_norm(g, 1.0, 2.0) == pytest.approx(1.0)
    with pytest.raises(GridError):
        e_beta_mu_norm(GridFunction(G, np.full(G.points, np.nan)), 1.0, 2.0)


def test_f_d_norm_examples():
    k, nu, beta, mu, eps = 2, 1.0, 1.0, 2.0, 0.1
    ray = TauRay.uniform(0.0, 1.0, 16, 2)
    assert f_d_norm(TauMField.zeros(ray, G), nu, beta, mu, k, eps) == 0.0
    x = ray.radii / eps
    am = np.abs(G.nodes)
    vals = (x / (1 + x ** (2 * k)) * np.exp(nu * x**k))[:, None] * (np.exp(-beta * am) * (1 + am) ** -mu)[None, :]
    assert f_d_norm(TauMField(ray, G, vals), nu, beta, mu, k, eps) == pytest.approx(1.0)
    with pytest.raises(GridError):
        f_d_norm(TauMField(ray, G, vals), nu, beta, mu, k, 0.0)


def test_gaussian_self_convolution():
    out = m_convolution(gauss(), gauss())
    exact = np.sqrt(np.pi / 2) * np.exp(-G.nodes**2 / 2)
    assert np.max(np.abs(out.values - exact)) < 1e-12
    assert m_convolution(gauss(), GridFunction.zeros(G)).is_zero()
    with pytest.raises(GridError):
        m_convolution(gauss(), gauss(MGrid(10.0, 101)))


def test_star_product_reduces_and_weights():
    f, g = gauss(), gauss(c=1.0, w=2.0)
    assert np.allclose(star_product(f, g, ONE, ONE, ONE).values, m_convolution(f, g).values)
    with pytest.raises(GridError):
        star_product(f, g, ONE, ONE, PolynomialSpec((0.0, 1.0)))
    # narrow Gaussian acts like a point mass: result ~ Q1(0) f-mass * Q2 g / R at m
    Q1, Q2, R = PolynomialSpec((2.0, 1.0)), PolynomialSpec((1.0, 0.5)), PolynomialSpec((3.0,))
    fine = MGrid(10.0, 2001)
    w = 0.02
    narrow = GridFunction(fine, np.exp(-((fine.nodes / w) ** 2)) / (w * np.sqrt(np.pi)))
    gg = gauss(fine, 0.5, 1.5)
    out = star_product(narrow, gg, Q1, Q2, R)
    for m0 in (-1.0, 0.0, 2.0):
        j = int(np.argmin(np.abs(fine.nodes - m0)))
        approx = complex(Q1(0.0)) * Q2(1j * m0) * gg.values[j] / R(1j * m0)
        assert abs(out.values[j] - approx) < 2e-2 * abs(approx)


def test_star_product_bound_stable_under_refinement():
    rng = np.random.default_rng(5)
    beta, mu = 1.0, 2.0
    pairs = []
    for _ in range(20):
        par = [(rng.uniform(-3, 3), rng.uniform(0.3, 2.0), rng.standard_normal()) for _ in range(2)]
        pairs.append(par)

    def build(grid, par):
        c, w, a = par
        return GridFunction(grid, a * np.exp(-(((grid.nodes - c) / w) ** 2)))

    ratios = []
    for grid in (G, G.refined()):
        r = 0.0
        for pf, pg in pairs:
            f, g = build(grid, pf), build(grid, pg)
            num = e_beta_mu_norm(star_product(f, g, ONE, ONE, ONE), beta, mu)
            r = max(r, num / (e_beta_mu_norm(f, beta, mu) * e_beta_mu_norm(g, beta, mu)))
        ratios.append(r)
    assert np.all(np.isfinite(ratios))
    assert abs(ratios[1] / ratios[0] - 1) < 0.01


def test_fourier_inverse_gaussian():
    f = gauss()
    assert fourier_inverse(f, 0.0) == pytest.approx(1 / np.sqrt(2), abs=1e-13)
    x = np.linspace(-3, 3, 7)
    assert np.allclose(fourier_inverse(f, x), np.exp(-x**2 / 4) / np.sqrt(2), atol=1e-13)
    with pytest.raises(GridError):
        fourier_inverse(f, 1.0j, beta=1.0)


def test_fourier_derivative_identity():
    f = gauss(c=0.3, w=1.2)
    dm = GridFunction(G, 1j * G.nodes * f.values)
    z = np.array([-1.0, 0.2, 0.7j])
    errs = []
    for hz in (1e-2, 5e-3):
        fd = (fourier_inverse(f, z + hz) - fourier_inverse(f, z - hz)) / (2 * hz)
        errs.append(np.max(np.abs(fd - fourier_inverse(dm, z))))
    assert errs[0] < 1e-4
    assert errs[1] < errs[0] / 3          # second order in hz


def test_ray_interpolation_is_exact_for_polynomials():
    ray = TauRay((0.0), (0.0, 0.5, 2.0), 12)
    vals = (ray.radii**3 - 2 * ray.radii)[:, None] * np.ones(G.points)
    fld = TauMField(ray, G, vals)
    r = np.array([0.1, 0.5, 1.7])
    assert np.allclose(fld.at_radii(r)[:, 0], r**3 - 2 * r, atol=1e-12)
    with pytest.raises(GridError):
        fld.at_radii([3.0])


def test_gridfunction_csv_round_trip(tmp_path):
    f = gauss(c=0.2) * (1 + 0.5j)
    f.to_csv(tmp_path / "f.csv", {"note": "x"})
    g = read_gridfunction_csv(tmp_path / "f.csv")
    assert g.grid == G and np.array_equal(g.values, f.values)
