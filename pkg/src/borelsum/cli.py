"""Command line front end: ``borelsum <command> [options]``.

Commands write CSV tables and a ``<command>_summary.json`` into ``--out``.
Every file carries the config hash of the equation file plus the run parameters.
Exit codes: 0 success, 1 hypothesis or check failure, 2 numerical failure,
3 I/O or config error.
"""

from __future__ import annotations

import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .artifacts import write_csv, write_json
from .config import DEFAULTS, ConfigError, config_hash, load_spec
from .convolution_solver import CertificateError, ContractionError, fixed_point_solve
from .formal_solver import formal_residual, gevrey_rate, solve_recursion
from .problem_model import SpecError, canonical_spec, validate_structure
from .root_geometry import GeometryError, build_good_covering, root_residuals, root_table, verify_covering
from .transforms import DomainError, LaplaceError, build_solution
from .verifier import flatness_probe, gevrey_expansion, pde_residual, rs_check, sample_grid

EXIT_OK, EXIT_HYPOTHESIS, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3


class _Ctx:
    def __init__(self, spec_path, out, params):
        self.spec_path = spec_path
        self.spec = load_spec(spec_path) if spec_path else canonical_spec()
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.params = params
        self.hash = config_hash(spec_path, params) if spec_path else config_hash(None, {"spec": "canonical", **params})

    def header(self, command: str) -> dict:
        return {"tool": f"borelsum {__version__}", "command": command, "config_hash": self.hash,
                "spec": self.spec_path or "built-in canonical"}

    def csv(self, command, name, columns, rows):
        return write_csv(self.out / name, columns, rows, self.header(command))

    def summary(self, command, data):
        return write_json(self.out / f"{command}_summary.json", data, self.header(command))


def _run(fn):
    """Map exceptions to exit codes."""
    try:
        code = fn()
    except (ConfigError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        code = EXIT_IO
    except (SpecError, GeometryError, CertificateError) as exc:
        click.echo(f"hypothesis failure: {exc}", err=True)
        code = EXIT_HYPOTHESIS
    except (ContractionError, LaplaceError, DomainError, np.linalg.LinAlgError) as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        code = EXIT_NUMERICAL
    sys.exit(code or EXIT_OK)


def _eps_list(text):
    if text is None:
        return list(DEFAULTS["eps"])
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"--eps expects a comma separated list of numbers, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise ConfigError("--eps values must be positive")
    return vals


def _covering(ctx: _Ctx, sectors: int):
    return build_good_covering(ctx.spec, sectors, DEFAULTS["r_T"], kappa_fraction=DEFAULTS["kappa_fraction"])


spec_opt = click.option("--spec", "spec_path", type=str, default=None,
                        help="YAML equation spec (default: built-in canonical problem).")
out_opt = click.option("--out", type=str, default="out", show_default=True, help="Output directory.")
sectors_opt = click.option("--sectors", type=int, default=DEFAULTS["sectors"], show_default=True,
                           help="Number of sectors in the good covering.")
eps_opt = click.option("--eps", "eps_text", type=str, default=None,
                       help="Comma separated |eps| values (default 0.03,0.05,0.1).")
tol_opt = click.option("--tol", type=float, default=DEFAULTS["tol"], show_default=True,
                       help="Fixed point tolerance.")
threads_opt = click.option("--threads", type=int, default=DEFAULTS["threads"], show_default=True,
                           help="Worker cap for independent eps samples.")


@click.group()
@click.version_option(__version__)
def main():
    """Borel-Laplace summation of the sectorial solutions of a singularly perturbed Cauchy problem."""


@main.command()
@spec_opt
@out_opt
def validate(spec_path, out):
    """Check the structural hypotheses of the equation."""
    def go():
        ctx = _Ctx(spec_path, out, {"command": "validate"})
        rep = validate_structure(ctx.spec)
        for line in rep.lines():
            click.echo(line)
        ctx.csv("validate", "validate.csv", ["hypothesis", "ok", "witness"],
                [(n, ok, rep.witnesses.get(n, "")) for n, ok in rep.flags.items()])
        ctx.summary("validate", {"overall": rep.overall, "failures": rep.failures})
        click.echo("all hypotheses hold" if rep.overall else "failing: " + "; ".join(rep.failures))
        return EXIT_OK if rep.overall else EXIT_HYPOTHESIS
    _run(go)


@main.command()
@spec_opt
@out_opt
@click.option("--orders", type=int, default=DEFAULTS["orders"], show_default=True, help="Recursion depth N.")
@eps_opt
def formal(spec_path, out, orders, eps_text):
    """Formal series recursion, its residual and the Gevrey rate fit."""
    def go():
        if orders < 1:
            raise ConfigError("--orders must be >= 1")
        eps_vals = _eps_list(eps_text)
        ctx = _Ctx(spec_path, out, {"command": "formal", "orders": orders, "eps": eps_vals})
        res_rows, norm_rows, rate_rows = [], [], []
        for e in eps_vals:
            s = solve_recursion(ctx.spec, e, orders)
            res, scale = formal_residual(ctx.spec, s, e, return_scale=True)
            res_rows += [(e, n, r, sc) for n, (r, sc) in enumerate(zip(res, scale))]
            norm_rows += [(e, n + 1, v) for n, v in enumerate(s.norms())]
            if orders >= 8:
                try:
                    g = gevrey_rate(s, ctx.spec.k)
                    rate_rows.append((e, g["rho_est"], g["fit_r2"], g["divergent"], g["flag"]))
                except SpecError as exc:
                    rate_rows.append((e, float("nan"), float("nan"), False, str(exc)))
            worst = max(r / sc if sc > 0 else r for r, sc in zip(res, scale))
            click.echo(f"eps={e:g}: max relative residual {worst:.3e}")
        ctx.csv("formal", "formal_residual.csv", ["eps", "order", "residual", "scale"], res_rows)
        ctx.csv("formal", "formal_norms.csv", ["eps", "n", "norm"], norm_rows)
        ctx.csv("formal", "gevrey_rate.csv", ["eps", "rho_est", "fit_r2", "divergent", "flag"], rate_rows)
        ctx.summary("formal", {"orders": orders, "eps": eps_vals,
                               "rates": [dict(zip(["eps", "rho_est", "fit_r2", "divergent", "flag"], r))
                                         for r in rate_rows]})
        return EXIT_OK
    _run(go)


@main.command()
@spec_opt
@out_opt
@sectors_opt
def roots(spec_path, out, sectors):
    """Roots of P_m on the m-grid and admissibility of the covering directions."""
    def go():
        ctx = _Ctx(spec_path, out, {"command": "roots", "sectors": sectors})
        R = root_table(ctx.spec)
        res = root_residuals(ctx.spec)
        rows = []
        for m, rr, ee in zip(ctx.spec.grid.nodes, R, res):
            for l, (q, e) in enumerate(zip(rr, ee)):
                rows.append((float(m), l, q.real, q.imag, abs(q), float(np.angle(q)), float(e)))
        ctx.csv("roots", "roots.csv", ["m", "l", "re", "im", "modulus", "arg", "residual"], rows)
        click.echo(f"{len(rows)} roots, max residual {float(np.max(res)):.3e}")
        plan = _covering(ctx, sectors)
        adm = [(p, r.direction, r.aperture, r.M1, r.M2, r.l0, r.C_P, r.admissible, r.reason)
               for p, r in enumerate(plan.reports)]
        ctx.csv("roots", "admissibility.csv",
                ["p", "direction", "aperture", "M1", "M2", "l0", "C_P", "admissible", "reason"], adm)
        ok = all(r.admissible for r in plan.reports)
        ctx.summary("roots", {"max_residual": float(np.max(res)), "admissible": ok})
        return EXIT_OK if ok else EXIT_HYPOTHESIS
    _run(go)


@main.command()
@spec_opt
@out_opt
@sectors_opt
def cover(spec_path, out, sectors):
    """Build and re-verify the good covering and its associated sectors."""
    def go():
        ctx = _Ctx(spec_path, out, {"command": "cover", "sectors": sectors})
        plan = _covering(ctx, sectors)
        plan.to_json(ctx.out / "covering.json", ctx.header("cover"))
        checks = verify_covering(plan)
        for key, ok in checks.items():
            click.echo(f"{'pass' if ok else 'FAIL'}  {key}")
        ctx.summary("cover", {"checks": checks, "theta": plan.theta, "delta1": plan.delta1,
                              "kappa": plan.kappa, "directions": list(plan.directions)})
        return EXIT_OK if checks["all"] else EXIT_HYPOTHESIS
    _run(go)


@main.command()
@spec_opt
@out_opt
@sectors_opt
@eps_opt
@tol_opt
@click.option("--method", type=click.Choice(["picard", "implicit"]), default="picard", show_default=True)
def solve(spec_path, out, sectors, eps_text, tol, method):
    """Fixed point of the Borel-plane equation along each direction d_p."""
    def go():
        if tol <= 0:
            raise ConfigError("--tol must be positive")
        eps_vals = _eps_list(eps_text)
        ctx = _Ctx(spec_path, out, {"command": "solve", "sectors": sectors, "eps": eps_vals, "tol": tol,
                                    "method": method})
        plan = _covering(ctx, sectors)
        rows = []
        for p, d in enumerate(plan.directions):
            for j, a in enumerate(eps_vals):
                eps = complex(a * np.exp(1j * plan.sectors[p].direction))
                sol = fixed_point_solve(ctx.spec, eps, plan.reports[p], tol=tol, direction=d, method=method)
                sol.to_csv(ctx.out / f"borel_p{p}_e{j}.csv", ctx.header("solve"))
                rows.append((p, d, eps.real, eps.imag, sol.iterations, sol.contraction_factor, sol.residual,
                             sol.norm_f))
                click.echo(f"p={p} |eps|={a:g}: {sol.iterations} iterations, factor {sol.contraction_factor:.3f}")
        ctx.csv("solve", "solve.csv", ["p", "direction", "eps_re", "eps_im", "iterations", "contraction_factor",
                                       "residual", "norm_f"], rows)
        ctx.summary("solve", {"solutions": len(rows)})
        return EXIT_OK
    _run(go)


@main.command(name="sum")
@spec_opt
@out_opt
@sectors_opt
@eps_opt
@tol_opt
def sum_(spec_path, out, sectors, eps_text, tol):
    """Sectorial solutions u_p sampled over a (t, z) grid for each eps."""
    def go():
        eps_vals = _eps_list(eps_text)
        ctx = _Ctx(spec_path, out, {"command": "sum", "sectors": sectors, "eps": eps_vals, "tol": tol})
        plan = _covering(ctx, sectors)
        rows = []
        for p in range(plan.count):
            for a in eps_vals:
                eps = complex(a * np.exp(1j * plan.sectors[p].direction))
                sol = build_solution(plan, p, ctx.spec, eps, tol=tol)
                ts, zs = sample_grid(sol, DEFAULTS["n_t"], DEFAULTS["n_z"], z_max=DEFAULTS["z_max"])
                for t in ts:
                    for z, u in zip(zs, sol(t, zs)):
                        rows.append((p, eps.real, eps.imag, t.real, t.imag, z.real, u.real, u.imag))
        ctx.csv("sum", "samples.csv", ["p", "eps_re", "eps_im", "t_re", "t_im", "z", "u_re", "u_im"], rows)
        ctx.summary("sum", {"samples": len(rows)})
        click.echo(f"{len(rows)} samples written")
        return EXIT_OK
    _run(go)


@main.command()
@spec_opt
@out_opt
@sectors_opt
@tol_opt
@threads_opt
@click.option("--checks", default="residual,flatness,rs,gevrey", show_default=True,
              help="Comma separated subset of residual, flatness, rs, gevrey.")
@click.option("--seed", type=int, default=DEFAULTS["seed"], show_default=True,
              help="Recorded for provenance; the pipeline has no random sampling.")
def verify(spec_path, out, sectors, tol, threads, checks, seed):
    """PDE residual, flatness of differences, Ramis-Sibuya hypotheses, eps-expansion."""
    def go():
        wanted = [c.strip() for c in checks.split(",") if c.strip()]
        unknown = set(wanted) - {"residual", "flatness", "rs", "gevrey"}
        if unknown:
            raise ConfigError(f"unknown checks: {', '.join(sorted(unknown))}")
        ctx = _Ctx(spec_path, out, {"command": "verify", "sectors": sectors, "tol": tol, "checks": wanted,
                                    "seed": seed})
        spec = ctx.spec
        plan = _covering(ctx, sectors)
        summary, ok = {}, True
        t0 = time.time()
        if "residual" in wanted:
            rows = []
            for p in range(plan.count):
                eps = complex(0.05 * np.exp(1j * plan.sectors[p].direction))
                sol = build_solution(plan, p, spec, eps, tol=min(tol, 1e-12))
                ts, zs = sample_grid(sol, DEFAULTS["n_t"], DEFAULTS["n_z"], z_max=DEFAULTS["z_max"])
                r = pde_residual(sol, ts, zs)
                rows.append((p, eps.real, eps.imag, r["residual"], r["forcing_scale"], r["relative"]))
                click.echo(f"residual sector {p}: {r['relative']:.3e} of the forcing scale")
            ctx.csv("verify", "residual.csv", ["p", "eps_re", "eps_im", "residual", "forcing_scale", "relative"],
                    rows)
            good = all(r[-1] < 1e-6 for r in rows)
            summary["residual"] = {"passed": good, "max_relative": max(r[-1] for r in rows)}
            ok &= good
        flats = None
        if "flatness" in wanted or "rs" in wanted:
            flats = [flatness_probe(plan, p, spec, n_eps=DEFAULTS["flat_n_eps"], ratio=DEFAULTS["flat_ratio"],
                                    h_scale=DEFAULTS["flat_h_scale"], floor_rel=DEFAULTS["flat_floor_rel"],
                                    threads=threads) for p in range(plan.count)]
            rows, srows = [], []
            for f in flats:
                for e, a, d, res in f.rows():
                    rows.append((f.p, f.q, e.real, e.imag, a, d, res))
                srows.append((f.p, f.q, f.log_K, f.M, f.r2, f.r2_lower, f.prefers_k, f.n_fit, f.status, f.passed))
                click.echo(f"flatness ({f.p},{f.q}): {f.status}, M={f.M:.4g}, r2={f.r2:.4f}")
            ctx.csv("verify", "flatness.csv", ["p", "q", "eps_re", "eps_im", "eps_abs", "diff", "fit_residual"], rows)
            ctx.csv("verify", "flatness_fit.csv", ["p", "q", "log_K", "M", "r2", "r2_lower", "prefers_k", "n_fit",
                                                   "status", "passed"], srows)
            summary["flatness"] = [f.to_dict() for f in flats]
            ok &= all(f.passed for f in flats)
        if "rs" in wanted:
            rs = rs_check(plan, spec, flatness=flats, threads=threads)
            rows = [(p, a, v) for p, vals in rs.sup_norms.items() for a, v in zip(rs.eps_moduli, vals)]
            ctx.csv("verify", "rs_bounded.csv", ["p", "eps_abs", "sup_u"], rows)
            summary["rs"] = {"hypothesis1": rs.hypothesis1, "hypothesis2": rs.hypothesis2,
                             "growth_slopes": rs.growth_slopes, "failing": rs.failing}
            click.echo(f"Ramis-Sibuya: bounded={rs.hypothesis1}, flat={rs.hypothesis2}")
            ok &= rs.passed
        if "gevrey" in wanted:
            g = gevrey_expansion(plan, spec, n_max=DEFAULTS["gevrey_n_max"], h=DEFAULTS["gevrey_h"])
            rows = [(p, n, s) for p, sl in g.remainder_slopes.items() for n, s in sl.items()]
            ctx.csv("verify", "gevrey_slopes.csv", ["p", "n", "slope"], rows)
            ctx.csv("verify", "gevrey_orders.csv", ["m", "agreement", "recursion_residual"],
                    [(m, g.agreement[m], g.recursion_residual[m] if m < len(g.recursion_residual) else float("nan"))
                     for m in g.orders])
            summary["gevrey"] = {"passed": g.passed, "agreement": g.agreement,
                                 "recursion_residual": g.recursion_residual,
                                 "indeterminate": {str(p): v for p, v in g.indeterminate.items()}}
            click.echo(f"eps-expansion: agreement {max(g.agreement):.2e}, passed={g.passed}")
            ok &= g.passed
        summary["passed"] = bool(ok)
        click.echo(f"verify finished in {time.time() - t0:.0f} s, passed={bool(ok)}")
        ctx.summary("verify", summary)
        return EXIT_OK if ok else EXIT_HYPOTHESIS
    _run(go)


if __name__ == "__main__":
    main()
