"""Command-line entry point ``vem-sad``.

Runs are driven by a flat ``key = value`` config file; ``#`` starts a comment.
Recognised keys (defaults in brackets)::

    mesh.family         square | crossed | nonconvex | voronoi | perturbed_voronoi [square]
    mesh.n              refinement index for ``solve`` [8]
    mesh.levels         comma list for ``convergence`` / ``robustness`` [8,12,16,20]
    mesh.seed           RNG seed of random families [0]
    mesh.file           JSON mesh for ``solve`` (overrides the family)
    degrees.k1          displacement degree, only 2 is supported [2]
    degrees.k2          flux degree, 0 or 1 [1]
    params.lambda, params.mu, params.theta, params.M
    law.diffusion.type  exponential | quadratic | polynomial [exponential]
    law.diffusion.m0, law.diffusion.m1, law.diffusion.m2
    law.active.type     hill | linear | constant [hill]
    law.active.K0, law.active.K1, law.active.n
    picard.tol [1e-8], picard.max_iter [50], picard.phi0 [0]
    robustness.lambda, robustness.mu, robustness.theta   comma lists
    lithiation.n_seeds [400], lithiation.seed [0], lithiation.samples [41]
    output.dir [.], output.csv, output.vtk

Failures exit with the error's code and print ``error category=<name>`` on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from .bench import (
    LEVELS,
    MESH_FAMILIES,
    compute_total_error,
    make_mesh,
    run_convergence,
    run_lithiation,
    run_robustness,
    solve_case,
)
from .cases import example1_params, smooth_case
from .constitutive import (
    ConstantLaw,
    ExponentialLaw,
    HillLaw,
    LinearLaw,
    PhysicalParams,
    PolynomialLaw,
    QuadraticLaw,
)
from .errors import ConfigError, VemError
from .export import export_csv, export_vtk
from .mesh import generate_annulus_mesh, load_mesh, save_mesh

log = logging.getLogger("vem_sad")

_SECTION = "run"


class RunConfig:
    """Typed access to a flat key-value config."""

    def __init__(self, values: dict[str, str] | None = None):
        self.values = dict(values or {})

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        cp.optionxform = str
        try:
            cp.read_string(f"[{_SECTION}]\n{text}")
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        return cls(dict(cp[_SECTION]))

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_text(text)

    def _get(self, key, conv, default):
        if key not in self.values:
            return default
        try:
            return conv(self.values[key])
        except ValueError:
            raise ConfigError(f"bad value for {key}: {self.values[key]!r}") from None

    def get_str(self, key, default=None):
        return self.values.get(key, default)

    def get_int(self, key, default=None):
        return self._get(key, int, default)

    def get_float(self, key, default=None):
        return self._get(key, float, default)

    def get_floats(self, key, default=None):
        return self._get(key, lambda s: tuple(float(v) for v in s.split(",") if v.strip()), default)

    def get_ints(self, key, default=None):
        return self._get(key, lambda s: tuple(int(v) for v in s.split(",") if v.strip()), default)

    # ----------------------------------------------------------------- derived objects

    def degrees(self) -> tuple[int, int]:
        k1, k2 = self.get_int("degrees.k1", 2), self.get_int("degrees.k2", 1)
        if k1 != 2:
            raise ConfigError("degrees.k1 must be 2")
        if k2 not in (0, 1):
            raise ConfigError("degrees.k2 must be 0 or 1")
        return k1, k2

    def params(self) -> PhysicalParams:
        base = example1_params()
        return PhysicalParams(
            lam=self.get_float("params.lambda", base.lam),
            mu=self.get_float("params.mu", base.mu),
            theta=self.get_float("params.theta", base.theta),
            M_bound=self.get_float("params.M", base.M_bound),
        )

    def diffusion_law(self):
        kind = self.get_str("law.diffusion.type", "exponential")
        m0, m1 = self.get_float("law.diffusion.m0", 0.1), self.get_float("law.diffusion.m1", 1e-4)
        if kind == "exponential":
            return ExponentialLaw(m0, m1)
        if kind == "quadratic":
            return QuadraticLaw(m0, m1)
        if kind == "polynomial":
            return PolynomialLaw(m0, m1, self.get_float("law.diffusion.m2", 0.0))
        raise ConfigError(f"unknown law.diffusion.type {kind!r}")

    def active_law(self):
        kind = self.get_str("law.active.type", "hill")
        K0 = self.get_float("law.active.K0", 1.0)
        if kind == "hill":
            return HillLaw(K0, self.get_float("law.active.K1", 1.0), self.get_int("law.active.n", 2))
        if kind == "linear":
            return LinearLaw(K0)
        if kind == "constant":
            return ConstantLaw(K0)
        raise ConfigError(f"unknown law.active.type {kind!r}")

    def case(self):
        return dataclasses.replace(smooth_case(self.params()), diff_law=self.diffusion_law(),
                                   ell_law=self.active_law())

    def family(self) -> str:
        fam = self.get_str("mesh.family", "square")
        if fam not in MESH_FAMILIES:
            raise ConfigError(f"unknown mesh.family {fam!r}; choose from {sorted(MESH_FAMILIES)}")
        return fam

    def picard(self) -> dict:
        return {"tol": self.get_float("picard.tol", 1e-8), "max_iter": self.get_int("picard.max_iter", 50)}

    def output(self, key: str, default: str) -> Path:
        out = Path(self.get_str("output.dir", "."))
        out.mkdir(parents=True, exist_ok=True)
        return out / self.get_str(f"output.{key}", default)


# --------------------------------------------------------------------------- commands

def cmd_solve(cfg: RunConfig) -> int:
    k1, k2 = cfg.degrees()
    case = cfg.case()
    if cfg.get_str("mesh.file"):
        mesh = load_mesh(cfg.get_str("mesh.file"))
    else:
        mesh = make_mesh(cfg.family(), cfg.get_int("mesh.n", 8), cfg.get_int("mesh.seed", 0))
    pic = cfg.picard()
    disc, sol = solve_case(mesh, case, k2, k1, pic["tol"], pic["max_iter"], cfg.get_float("picard.phi0", 0.0))
    err = compute_total_error(sol, case)
    vtk = cfg.output("vtk", "solution.vtk")
    export_vtk(sol, vtk)
    print(f"dof={disc.n_dofs} h={mesh.h:.6e} e_star={err.total:.6e} iters={sol.iterations} vtk={vtk}")
    return 0


def cmd_convergence(cfg: RunConfig) -> int:
    k1, k2 = cfg.degrees()
    pic = cfg.picard()
    rows = run_convergence(cfg.family(), k2, cfg.get_ints("mesh.levels", LEVELS), cfg.case(), k1=k1,
                           seed=cfg.get_int("mesh.seed", 0), phi0_constant=cfg.get_float("picard.phi0", 0.0), **pic)
    path = cfg.output("csv", "convergence.csv")
    export_csv(rows, path)
    for r in rows:
        print(",".join(r.csv_fields()))
    return 0


def cmd_robustness(cfg: RunConfig) -> int:
    _, k2 = cfg.degrees()
    sweeps = {}
    for key, name in (("robustness.lambda", "lam"), ("robustness.mu", "mu"), ("robustness.theta", "theta")):
        if key in cfg.values:
            sweeps[name] = cfg.get_floats(key)
    res = run_robustness(sweeps or None, cfg.family(), k2, cfg.get_ints("mesh.levels", LEVELS), **cfg.picard())
    path = cfg.output("csv", "robustness.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "value", "mesh", "level", "h", "dof", "e_star", "rate", "iters"])
        for (name, value), rows in res.items():
            for r in rows:
                w.writerow([name, f"{value:g}", *r.csv_fields()])
    for (name, value), rows in res.items():
        print(f"{name}={value:g} final_rate={rows[-1].rate:.4f} iters={[r.iters for r in rows]}")
    return 0


def cmd_lithiation(cfg: RunConfig) -> int:
    results = run_lithiation(n_seeds=cfg.get_int("lithiation.n_seeds", 400), rng_seed=cfg.get_int("lithiation.seed", 0),
                             n_samples=cfg.get_int("lithiation.samples", 41), **cfg.picard())
    path = cfg.output("csv", "lithiation.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m1", "traction", "radius", "concentration", "pressure"])
        for res in results:
            for rho, c, p in zip(res.radii, res.concentration, res.pressure):
                w.writerow([f"{res.m1:g}", f"{res.traction:g}", f"{rho:.6f}", f"{c:.10e}", f"{p:.10e}"])
    stem = cfg.output("vtk", "lithiation.vtk")
    for res in results:
        export_vtk(res.solution, stem.with_name(f"{stem.stem}_m1={res.m1:g}_t={res.traction:g}{stem.suffix}"))
    print(f"wrote {path} and {len(results)} VTK files")
    return 0


def cmd_mesh_generate(args) -> int:
    if args.family == "annulus":
        mesh = generate_annulus_mesh(args.inner, args.outer, n_seeds=args.n, rng_seed=args.seed)
    else:
        mesh = make_mesh(args.family, args.n, args.seed)
    save_mesh(mesh, args.out)
    print(f"{args.family}: {mesh.n_elements} elements, {mesh.n_vertices} vertices -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vem-sad", description="Virtual element solver for stress-assisted diffusion")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log Picard progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_ in (
        ("solve", cmd_solve, "solve the manufactured problem on one mesh and write VTK"),
        ("convergence", cmd_convergence, "error and rate table over refinement levels"),
        ("robustness", cmd_robustness, "convergence tables with physical parameters swept"),
        ("lithiation", cmd_lithiation, "anode particle demo, radial profiles and VTK"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="flat key = value file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
        p.set_defaults(func=func)
    mesh = sub.add_parser("mesh", help="mesh utilities")
    msub = mesh.add_subparsers(dest="mesh_command", required=True)
    gen = msub.add_parser("generate", help="write a generated mesh as JSON")
    gen.add_argument("--family", default="square", choices=sorted(MESH_FAMILIES) + ["annulus"])
    gen.add_argument("--n", type=int, default=8, help="refinement index, or seed count for annulus")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--inner", type=float, default=1.0, help="annulus inner radius")
    gen.add_argument("--outer", type=float, default=5.0, help="annulus outer radius")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=None)
    return parser


def load_config(path, overrides) -> RunConfig:
    cfg = RunConfig.from_file(path) if path else RunConfig()
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        cfg.values[key.strip()] = value.strip()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with warnings.catch_warnings():
            if not args.verbose:
                warnings.simplefilter("ignore", RuntimeWarning)
            if args.command == "mesh":
                return cmd_mesh_generate(args)
            return args.func(load_config(args.config, args.set))
    except VemError as exc:
        print(f"error category={exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error category=io: {exc}", file=sys.stderr)
        return 7


if __name__ == "__main__":
    sys.exit(main())
