"""Command-line pipeline: phantom -> forward -> assemble -> lcurve -> invert -> metrics.

Each stage reads and writes plain-text artifacts in an experiment directory,
so runs are reproducible and individually restartable. Exit codes: 0 success,
2 usage or input-file error, 3 numerical failure (no L-curve corner, solver
breakdown). HEATK_THREADS caps internal parallelism (the alpha sweep).
"""

from __future__ import annotations

import argparse
import json
import sys
from argparse import Namespace
from pathlib import Path

import numpy as np

from . import fem, lcurve, metrics, phantoms, solvers
from .assembly import assemble, read_matrix, read_vector, write_matrix, write_vector, DesignSystem
from .grid import Domain, Grid, ScalarField, build_grid, read_field, write_field, _fmt
from .penalties import MaterialPair, build_mask, mask_to_field
from .phantoms import PhantomSpec
from .testfuncs import enumerate_family

_SETTINGS = ("lsq", "w1", "w2")


def _load_config(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    return json.loads(p.read_text())


def _config_grid(cfg: dict, override=None) -> Grid:
    if override:
        nx, ny = override
    else:
        g = cfg.get("grid") or {}
        nx, ny = g.get("nx"), g.get("ny")
        if nx is None or ny is None:
            raise ValueError("config has no grid entry; pass --grid NX NY")
    return build_grid(Domain(), int(nx), int(ny))


def _config_pair(cfg: dict) -> MaterialPair:
    try:
        return MaterialPair(float(cfg["pair"]["k_low"]), float(cfg["pair"]["k_high"]))
    except KeyError as exc:
        raise ValueError(f"config is missing key {exc}") from exc


def _require(path: Path, what: str) -> Path:
    if not path.is_file():
        raise FileNotFoundError(f"missing {what}: {path}")
    return path


def _read_samples(indir: Path):
    u = read_field(_require(indir / "u.txt", "temperature field"), role="temperature")
    ux = read_field(_require(indir / "ux.txt", "x-gradient field"))
    uy = read_field(_require(indir / "uy.txt", "y-gradient field"))
    if not (u.grid == ux.grid == uy.grid):
        raise ValueError("u, ux, uy files disagree on the grid")
    return u, ux, uy


def _read_system(indir: Path) -> DesignSystem:
    A = read_matrix(_require(indir / "A.txt", "system matrix"))
    F = read_vector(_require(indir / "F.txt", "right-hand side"))
    return DesignSystem(A, F)


def _write_pgm(path, field: ScalarField) -> None:
    mat = field.as_matrix()
    lo, hi = float(mat.min()), float(mat.max())
    if hi > lo:
        pixels = np.rint((mat - lo) / (hi - lo) * 255).astype(int)
    else:
        pixels = np.zeros_like(mat, dtype=int)
    lines = ["P2", f"{field.grid.nx} {field.grid.ny}", "255"]
    lines.extend(" ".join(str(v) for v in row) for row in pixels)
    Path(path).write_text("\n".join(lines) + "\n")
    Path(f"{path}.txt").write_text(f"min={_fmt(lo)}\nmax={_fmt(hi)}\nlevels=255\n")


def cmd_phantom(args) -> int:
    spec = phantoms.make_case(args.case)
    grid = build_grid(Domain(), args.grid[0], args.grid[1])
    k_true = phantoms.rasterize(spec, grid)
    cfg = spec.to_json_dict()
    cfg["case"] = args.case.upper()
    cfg["grid"] = {"nx": grid.nx, "ny": grid.ny}
    cfg["mesh_n"] = args.mesh_n
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")
    write_field(out / "k_true.txt", k_true)
    _write_pgm(out / "k_true.pgm", k_true)
    print(f"wrote phantom case {cfg['case']} on {grid.nx}x{grid.ny} grid to {out}")
    return 0


def cmd_forward(args) -> int:
    cfg = _load_config(args.config)
    spec = PhantomSpec.from_json_dict(cfg)
    grid = _config_grid(cfg, args.grid)
    mesh_n = args.mesh_n or int(cfg.get("mesh_n", 200))
    problem = fem.ForwardProblem(
        k=spec.conductivity,
        c=spec.c_value,
        f=0.0,
        g_left=spec.T1,
        g_right=spec.T2,
        h=0.0,
        mesh_n=mesh_n,
    )
    solution = fem.solve_forward(problem)
    u, ux, uy = solution.sample_on(grid)
    if args.noise:
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        u = phantoms.add_noise(u, args.noise, seed)
        ux = phantoms.add_noise(ux, args.noise, seed + 1)
        uy = phantoms.add_noise(uy, args.noise, seed + 2)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if Path(args.config).resolve() != (out / "config.json").resolve():
        (out / "config.json").write_text(json.dumps(cfg, indent=2) + "\n")
    write_field(out / "u.txt", u)
    write_field(out / "ux.txt", ux)
    write_field(out / "uy.txt", uy)
    print(f"solved forward problem (mesh {mesh_n}) and sampled {grid.nx}x{grid.ny} fields")
    return 0


def cmd_assemble(args) -> int:
    indir = Path(args.in_dir)
    cfg = _load_config(indir / "config.json")
    u, ux, uy = _read_samples(indir)
    c = ScalarField(u.grid, np.full(u.grid.size, float(cfg.get("c", 1.0))), role="coefficient")
    system = assemble(u, ux, uy, c, enumerate_family(args.m))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "A.txt", system.matrix)
    write_vector(out / "F.txt", system.rhs)
    print(f"assembled {system.rows}x{system.cols} system")
    return 0


def _prepare_penalized(indir: Path, penalty: str, cfg: dict):
    """System, pair, mask (w2), and descent init (w1) shared by lcurve and invert."""
    system = _read_system(indir)
    pair = _config_pair(cfg)
    mask = None
    init = None
    if penalty == "w2":
        u, ux, uy = _read_samples(indir)
        mask = build_mask(ux, uy, u, float(cfg["gamma_fraction"]))
    elif penalty == "w1":
        init = solvers.default_two_well_init(system, pair)
    return system, pair, mask, init


def cmd_lcurve(args) -> int:
    indir = Path(args.in_dir)
    cfg = _load_config(indir / "config.json")
    system, pair, mask, init = _prepare_penalized(indir, args.penalizer, cfg)
    sigma_max = solvers.condition_numbers(system).sigma_max
    alphas = lcurve.default_alphas(sigma_max, count=args.count)
    if args.penalizer == "w1":
        options = {"max_iters": args.max_iters}
    else:
        options = {"completion_rcond": args.completion_rcond}
    points = lcurve.sweep(
        system, args.penalizer, pair, alphas, mask=mask, init=init, solver_options=options
    )
    alpha_star, curvatures = lcurve.select_corner(points)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lcurve.write_csv(out / "lcurve.csv", points, curvatures, selected=alpha_star)
    (out / "alpha.txt").write_text(_fmt(alpha_star) + "\n")
    print(f"selected alpha={alpha_star:.6e} from {len(points)} sweep points")
    return 0


def cmd_invert(args) -> int:
    indir = Path(args.in_dir)
    cfg = _load_config(indir / "config.json")
    if args.setting not in _SETTINGS:
        raise ValueError(f"setting must be one of {_SETTINGS}")
    system, pair, mask, init = _prepare_penalized(indir, args.setting, cfg)
    u, _, _ = _read_samples(indir)

    if args.setting == "lsq":
        alpha = 0.0
        K, diag = solvers.min_norm_lstsq(system)
    else:
        if args.alpha == "auto":
            alpha_file = indir / "alpha.txt"
            if alpha_file.is_file():
                alpha = float(alpha_file.read_text().strip())
            else:
                sigma_max = solvers.condition_numbers(system).sigma_max
                sweep_options = (
                    {"max_iters": 800}
                    if args.setting == "w1"
                    else {"completion_rcond": args.completion_rcond}
                )
                points = lcurve.sweep(
                    system, args.setting, pair, lcurve.default_alphas(sigma_max),
                    mask=mask, init=init, solver_options=sweep_options,
                )
                alpha, _ = lcurve.select_corner(points)
        else:
            alpha = float(args.alpha)
        problem = solvers.TikhonovProblem(system, alpha, args.setting, pair, mask)
        options = (
            {"max_iters": args.max_iters, "grad_tol": args.grad_tol}
            if args.setting == "w1"
            else {"completion_rcond": args.completion_rcond}
        )
        K, diag = solvers.solve(problem, init=init, **options)
        if args.setting == "w1" and not diag.converged:
            print(
                f"warning: descent stopped at {diag.iterations} iterations "
                f"with gradient norm {diag.grad_norm:.3e}",
                file=sys.stderr,
            )

    k_field = ScalarField(u.grid, K)
    k_class = metrics.classify(K, pair)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_field(out / "K.txt", k_field)
    write_field(out / "K_class.txt", ScalarField(u.grid, k_class))
    _write_pgm(out / "K.pgm", k_field)
    if mask is not None:
        write_field(out / "mask.txt", mask_to_field(mask, u.grid))
    (out / "diagnostics.txt").write_text(
        f"setting={args.setting}\nalpha={_fmt(alpha)}\n" + diag.as_text()
    )
    print(f"inverted with setting={args.setting} alpha={alpha:.6e} "
          f"residual={diag.residual_norm:.6e}")
    return 0


def cmd_metrics(args) -> int:
    rec = read_field(_require(Path(args.rec), "reconstruction field"))
    true = read_field(_require(Path(args.true), "reference field"))
    indir = Path(args.in_dir) if args.in_dir else None
    if indir and (indir / "config.json").is_file():
        pair = _config_pair(_load_config(indir / "config.json"))
    else:
        levels = np.unique(true.values)
        if levels.size != 2:
            raise ValueError(
                "reference field is not two-valued; pass --in DIR so the material "
                "pair can be read from config.json"
            )
        pair = MaterialPair(float(levels[0]), float(levels[1]))

    class_rec = metrics.classify(rec, pair)
    class_true = metrics.classify(true, pair)
    entries = {
        "relative_l2": metrics.relative_l2(rec, true),
        "misclassification": metrics.misclassification_rate(class_rec, class_true),
    }
    if args.exclude_flat:
        if indir is None:
            raise ValueError("--exclude-flat needs --in DIR to find the gradient fields")
        _, ux, uy = _read_samples(indir)
        flat = metrics.flat_gradient_mask(ux, uy)
        entries["misclassification_excl_flat"] = metrics.misclassification_rate(
            class_rec, class_true, exclude=flat
        )
        entries["flat_cells"] = int(flat.sum())
    text = metrics.report_text(entries)
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.txt").write_text(text)
        (out / "metrics.csv").write_text(metrics.report_csv(entries))
    return 0


def cmd_pipeline(args) -> int:
    out = str(args.out)
    rc = cmd_phantom(Namespace(case=args.case, grid=args.grid, out=out, mesh_n=args.mesh_n))
    if rc:
        return rc
    rc = cmd_forward(Namespace(
        config=str(Path(out) / "config.json"), out=out, grid=None,
        mesh_n=None, noise=args.noise, seed=args.seed,
    ))
    if rc:
        return rc
    rc = cmd_assemble(Namespace(m=args.m, in_dir=out, out=out))
    if rc:
        return rc
    if args.setting != "lsq" and args.alpha == "auto":
        rc = cmd_lcurve(Namespace(
            penalizer=args.setting, in_dir=out, out=out,
            count=40, max_iters=800, completion_rcond=args.completion_rcond,
        ))
        if rc:
            return rc
    rc = cmd_invert(Namespace(
        setting=args.setting, alpha=args.alpha, in_dir=out, out=out,
        max_iters=args.max_iters, grad_tol=1e-8,
        completion_rcond=args.completion_rcond,
    ))
    if rc:
        return rc
    return cmd_metrics(Namespace(
        rec=str(Path(out) / "K.txt"), true=str(Path(out) / "k_true.txt"),
        exclude_flat=True, in_dir=out, out=out,
    ))


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatk",
        description="Two-material heat-conductivity reconstruction from temperature fields",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("phantom", help="write a preset two-material layout")
    p.add_argument("--case", required=True, choices=["I", "II", "III", "IV"])
    p.add_argument("--grid", nargs=2, type=int, default=(100, 100), metavar=("NX", "NY"))
    p.add_argument("--mesh-n", type=int, default=200, help="forward mesh stored in the config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("forward", help="solve the forward problem and sample the fields")
    p.add_argument("--config", required=True)
    p.add_argument("--grid", nargs=2, type=int, default=None, metavar=("NX", "NY"))
    p.add_argument("--mesh-n", type=int, default=None)
    p.add_argument("--noise", type=float, default=0.0, help="relative noise level")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("assemble", help="build the linear system from sampled fields")
    p.add_argument("--m", type=int, default=5, help="test-function family parameter")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("lcurve", help="sweep alpha and select the corner")
    p.add_argument("--penalizer", required=True, choices=["w1", "w2"])
    p.add_argument("--count", type=int, default=40, help="number of sweep values")
    p.add_argument("--max-iters", type=int, default=800, help="descent budget per sweep solve (w1)")
    p.add_argument("--completion-rcond", type=float, default=1e-3,
                   help="relative truncation of the unmasked completion (w2)")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lcurve)

    p = sub.add_parser("invert", help="solve for the conductivity map")
    p.add_argument("--setting", required=True, choices=list(_SETTINGS))
    p.add_argument("--alpha", default="auto", help="regularization weight or 'auto'")
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--grad-tol", type=float, default=1e-8)
    p.add_argument("--completion-rcond", type=float, default=1e-3,
                   help="relative truncation of the unmasked completion (w2)")
    p.add_argument("--in", dest="in_dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("metrics", help="compare a reconstruction against the truth")
    p.add_argument("--rec", required=True)
    p.add_argument("--true", required=True)
    p.add_argument("--exclude-flat", action="store_true",
                   help="also report the rate excluding flat-gradient cells")
    p.add_argument("--in", dest="in_dir", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("pipeline", help="run every stage into one directory")
    p.add_argument("--case", required=True, choices=["I", "II", "III", "IV"])
    p.add_argument("--setting", default="w2", choices=list(_SETTINGS))
    p.add_argument("--alpha", default="auto")
    p.add_argument("--grid", nargs=2, type=int, default=(100, 100), metavar=("NX", "NY"))
    p.add_argument("--mesh-n", type=int, default=200)
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--max-iters", type=int, default=5000)
    p.add_argument("--completion-rcond", type=float, default=1e-3)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    if not hasattr(args, "func"):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (lcurve.NoCornerError, lcurve.SweepError, fem.SolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main_entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    sys.exit(main())
