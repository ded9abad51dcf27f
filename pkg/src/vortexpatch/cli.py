"""Configuration-driven experiment runner.

Config files are line-oriented ``section.key = value`` text; blank lines
and ``#`` comments are ignored.  Every key is validated at parse time
with line-numbered diagnostics, duplicates are rejected (both lines
cited), and unknown keys are errors.  All keys have defaults, so the
empty config is valid and small configs stay small.

Subcommands: solve (descent from zero), mpass (mountain-pass saddle),
continue (mountain pass then smoothing-width continuation), sweep
(load ladder solved in 2D and by the 1D oracle, tabulated side by
side), eig (first Dirichlet eigenvalue), oracle (sharp slab shot),
check (built-in invariant suite).

Artifacts land in the output directory: ``report.txt`` with stable key
ordering and ``%.17g`` floats so identical config + seed reproduce it
byte for byte, ``run_meta.txt`` for timestamps and wall time (kept out
of the report on purpose), field dumps and plot-ready CSV tables.

Exit codes: 0 success, 2 config error, 3 solver failure, 4 I/O
failure, 5 non-finite value in the report.
"""

from __future__ import annotations

import argparse
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .domain import Grid2D, ScalarField, field_from_values, make_grid, save_field
from .energy import (
    ProblemParams,
    band_area,
    patch_area,
    sharp_energy,
    smooth_energy,
    smooth_gradient,
    hessian_vector,
)
from .freeboundary import jump_residual_stats
from .oracle import compare_to_oracle, save_slab_csv, shoot_slab
from .smoothing import SmootherSpec, G_eval, check_normalization, g_eval
from .solver import (
    ContinuationSchedule,
    SolverError,
    continue_alpha,
    first_eigenvalue,
    minimize_smooth,
    morse_index,
    mountain_pass,
    scale_to_negative_energy,
)

__all__ = ["ConfigError", "RunConfig", "parse_config", "run", "main"]

SUBCOMMANDS = ("solve", "mpass", "continue", "sweep", "eig", "oracle", "check")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4
EXIT_NONFINITE = 5


class ConfigError(ValueError):
    """Raised for any config syntax or validation problem."""


@dataclass(frozen=True)
class RunConfig:
    subcommand: str | None = None
    nx: int = 65
    ny: int = 65
    lx: float = 1.0
    ly: float = 1.0
    p: float = 2.0
    q: float = 3.0
    lam: float = 0.0
    alpha: float = 0.2
    eps: float | None = None  # resolved: 0 for p = 2, else 1e-8
    tol: float = 1e-8
    max_iter: int = 3000
    seed: int = 0
    alpha0: float = 0.2
    factor: float = 0.5
    steps: int = 5
    directory: str = "runs"
    formats: tuple[str, ...] = ("report", "csv")

    @property
    def eps_resolved(self) -> float:
        if self.eps is not None:
            return self.eps
        return 0.0 if self.p == 2.0 else 1e-8

    def problem(self, alpha: float | None = None) -> ProblemParams:
        return ProblemParams(p=self.p, q=self.q, lam=self.lam,
                             alpha=self.alpha if alpha is None else alpha,
                             eps=self.eps_resolved)

    def grid(self) -> Grid2D:
        return make_grid(self.nx, self.ny, self.lx, self.ly)

    def schedule(self) -> ContinuationSchedule:
        return ContinuationSchedule(alpha0=self.alpha0, factor=self.factor,
                                    steps=self.steps, tol=self.tol)


def _parse_formats(s: str) -> tuple[str, ...]:
    parts = tuple(x.strip() for x in s.split(",") if x.strip())
    for x in parts:
        if x not in ("report", "csv"):
            raise ValueError(f"unknown format {x!r} (allowed: report, csv)")
    if not parts:
        raise ValueError("formats must list at least one of: report, csv")
    return parts


def _parse_subcommand(s: str) -> str:
    if s not in SUBCOMMANDS:
        raise ValueError(f"unknown subcommand {s!r} (allowed: {', '.join(SUBCOMMANDS)})")
    return s


# config key -> (RunConfig field, converter); registry order fixes the echo order
_KEYS: dict[str, tuple[str, object]] = {
    "run.subcommand": ("subcommand", _parse_subcommand),
    "grid.nx": ("nx", int),
    "grid.ny": ("ny", int),
    "grid.lx": ("lx", float),
    "grid.ly": ("ly", float),
    "params.p": ("p", float),
    "params.q": ("q", float),
    "params.lambda": ("lam", float),
    "params.alpha": ("alpha", float),
    "params.eps": ("eps", float),
    "solver.tol": ("tol", float),
    "solver.max_iter": ("max_iter", int),
    "solver.seed": ("seed", int),
    "schedule.alpha0": ("alpha0", float),
    "schedule.factor": ("factor", float),
    "schedule.steps": ("steps", int),
    "output.directory": ("directory", str),
    "output.formats": ("formats", _parse_formats),
}


def parse_config(text: str) -> RunConfig:
    """Parse and fully validate ``section.key = value`` config text."""
    values: dict[str, object] = {}
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key in seen:
            raise ConfigError(
                f"line {lineno}: duplicate key {key} (already set at line {seen[key]})")
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key}")
        seen[key] = lineno
        field_name, conv = _KEYS[key]
        try:
            values[field_name] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from exc

    cfg = RunConfig(**values)
    # re-run the numeric constraints of the underlying types so bad configs
    # die here with the offending key, not deep inside a run
    try:
        cfg.grid()
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from exc
    try:
        cfg.problem()
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from exc
    try:
        cfg.schedule()
    except ValueError as exc:
        raise ConfigError(f"schedule: {exc}") from exc
    if cfg.max_iter <= 0:
        raise ConfigError("solver.max_iter must be positive")
    if cfg.tol <= 0.0:
        raise ConfigError("solver.tol must be positive")
    return cfg


# ---------------------------------------------------------------------------
# report plumbing

Row = tuple[str, str, object]


def _fmt_value(v: object) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _report_text(rows: list[Row]) -> str:
    out: list[str] = []
    current = None
    for section, key, value in rows:
        if section != current:
            if out:
                out.append("")
            out.append(f"[{section}]")
            current = section
        out.append(f"{key} = {_fmt_value(value)}")
    return "\n".join(out) + "\n"


def _nonfinite(rows: list[Row]) -> list[str]:
    bad = []
    for section, key, value in rows:
        if isinstance(value, (float, np.floating)) and not np.isfinite(value):
            bad.append(f"{section}.{key}")
    return bad


def _echo_rows(cfg: RunConfig) -> list[Row]:
    rows: list[Row] = [("run", "subcommand", cfg.subcommand),
                       ("run", "code_version", __version__)]
    for key, (field_name, _) in _KEYS.items():
        if key == "run.subcommand":
            continue
        val = getattr(cfg, field_name)
        if field_name == "eps":
            val = cfg.eps_resolved
        elif field_name == "formats":
            val = ",".join(val)
        rows.append(("config", key, val))
    return rows


def _bump_field(grid: Grid2D, amplitude: float = 1.0) -> ScalarField:
    X, Y = grid.node_mesh()
    shape = (np.sin(np.pi * X / grid.lx) * np.sin(np.pi * Y / grid.ly)) ** 1.5
    return field_from_values(grid, amplitude * shape)


def _solution_rows(section: str, u: ScalarField, prm: ProblemParams) -> list[Row]:
    return [
        (section, "energy_smooth", smooth_energy(u, prm)),
        (section, "energy_sharp", sharp_energy(u, prm)),
        (section, "residual_norm", float(np.abs(smooth_gradient(u, prm).values).max())),
        (section, "max_value", float(u.values.max())),
        (section, "patch_area", patch_area(u)),
        (section, "band_area", band_area(u, prm.alpha)),
    ]


# ---------------------------------------------------------------------------
# subcommands


def _cmd_solve(cfg: RunConfig, outdir: Path, rows: list[Row]) -> None:
    grid = cfg.grid()
    prm = cfg.problem()
    u0 = field_from_values(grid, np.zeros(grid.shape))
    rep = minimize_smooth(u0, prm, tol=cfg.tol, max_iter=cfg.max_iter)
    rows.append(("result", "status", rep.status))
    rows.append(("result", "iterations", rep.iterations))
    rows.extend(_solution_rows("result", rep.u, prm))
    if "csv" in cfg.formats:
        save_field(rep.u, outdir / "field.csv")
    if rep.status != "converged":
        raise SolverError(f"solve did not converge: status {rep.status}")


def _mountain_pass_start(cfg: RunConfig, prm: ProblemParams):
    far = scale_to_negative_energy(_bump_field(cfg.grid()), prm)
    return mountain_pass(prm, far, tol=cfg.tol, max_iter=cfg.max_iter)


def _cmd_mpass(cfg: RunConfig, outdir: Path, rows: list[Row]) -> None:
    prm = cfg.problem()
    rep = _mountain_pass_start(cfg, prm)
    rows.append(("result", "status", rep.status))
    rows.append(("result", "iterations", rep.iterations))
    rows.extend(_solution_rows("result", rep.u, prm))
    if rep.status == "converged":
        rows.append(("result", "morse_index", morse_index(rep.u, prm)))
    lam1 = first_eigenvalue(cfg.p, cfg.grid(), tol=min(cfg.tol, 1e-6))
    rows.append(("result", "lambda1", lam1))
    rows.append(("result", "lambda_over_lambda1", cfg.lam / lam1))
    if "csv" in cfg.formats:
        save_field(rep.u, outdir / "field.csv")
    if rep.status != "converged":
        raise SolverError(f"mountain pass did not converge: status {rep.status}")


def _cmd_continue(cfg: RunConfig, outdir: Path, rows: list[Row]) -> None:
    sched = cfg.schedule()
    prm0 = cfg.problem(alpha=sched.alpha0)
    start = _mountain_pass_start(replace(cfg, alpha=sched.alpha0), prm0)
    rows.append(("start", "status", start.status))
    rows.append(("start", "iterations", start.iterations))
    rows.extend(_solution_rows("start", start.u, prm0))
    if start.status != "converged":
        raise SolverError(f"mountain pass start did not converge: {start.status}")

    report = continue_alpha(start.u, prm0, sched)
    for j, step in enumerate(report.steps):
        rows.append(("continuation", f"alpha_{j}", step.alpha))
        rows.append(("continuation", f"energy_smooth_{j}", step.energy_smooth))
        rows.append(("continuation", f"jump_median_{j}", step.jump_residual_median))
    rows.append(("continuation", "steps", len(report.steps)))

    prm_last = cfg.problem(alpha=report.steps[-1].alpha)
    rows.extend(_solution_rows("final", report.u, prm_last))
    rows.append(("final", "morse_index", morse_index(report.u, prm_last)))
    lam1 = first_eigenvalue(cfg.p, cfg.grid(), tol=min(cfg.tol, 1e-6))
    rows.append(("final", "lambda1", lam1))
    rows.append(("final", "lambda_over_lambda1", cfg.lam / lam1))

    sol = shoot_slab(prm_last) if cfg.lam > 0.0 else None
    if sol is not None and abs(cfg.lx - 1.0) < 1e-12:
        cmp_ = compare_to_oracle(report.u, sol, axis="x")
        rows.append(("oracle", "sup_error", cmp_.sup_error))
        rows.append(("oracle", "l2_error", cmp_.l2_error))
        rows.append(("oracle", "interface_offset", cmp_.interface_offset))

    if "csv" in cfg.formats:
        save_field(report.u, outdir / "field.csv")
        lines = ["alpha,energy_smooth,energy_sharp,residual_norm,"
                 "max_gradient_norm,band_area,iterations"]
        for s in report.steps:
            lines.append(",".join(_fmt_value(v) for v in (
                s.alpha, s.energy_smooth, s.energy_sharp, s.residual_norm,
                s.max_gradient_norm, s.band_area, s.iterations)))
        (outdir / "energy_vs_alpha.csv").write_text("\n".join(lines) + "\n")
        lines = ["alpha,jump_residual_median"]
        for s in report.steps:
            lines.append(f"{_fmt_value(s.alpha)},{_fmt_value(s.jump_residual_median)}")
        (outdir / "jump_vs_alpha.csv").write_text("\n".join(lines) + "\n")


def _sweep_entry(cfg: RunConfig, lam: float) -> str:
    """One load value: 2D mountain pass vs 1D oracle, as a CSV row."""
    cols: dict[str, object] = {"lambda": lam}
    prm = replace(cfg, lam=lam).problem()
    sol = shoot_slab(prm)
    if sol is None:
        cols["oracle"] = "none"
    else:
        cols["oracle"] = "ok"
        cols["umax_1d"] = sol.umax
        cols["interface_1d"] = sol.interface
    try:
        rep = _mountain_pass_start(replace(cfg, lam=lam), prm)
        ok = rep.status == "converged"
    except SolverError:
        ok = False
    cols["solve_2d"] = "ok" if ok else "failed"
    if ok:
        cols["umax_2d"] = float(rep.u.values.max())
        cols["energy_2d"] = smooth_energy(rep.u, prm)
        if sol is not None and abs(cfg.lx - 1.0) < 1e-12:
            cmp_ = compare_to_oracle(rep.u, sol, axis="x")
            cols["sup_error"] = cmp_.sup_error
            cols["interface_offset"] = cmp_.interface_offset
    return ",".join(f"{k}={_fmt_value(v)}" for k, v in cols.items())


def _cmd_sweep(cfg: RunConfig, outdir: Path, rows: list[Row], jobs: int) -> None:
    if cfg.lam <= 0.0:
        raise ConfigError("sweep needs params.lambda > 0 as the ladder top")
    lams = [cfg.lam * cfg.factor ** j for j in range(cfg.steps)]
    entry_dir = outdir / "entries"
    entry_dir.mkdir(exist_ok=True)

    def work(j: int) -> str:
        line = _sweep_entry(cfg, lams[j])
        (entry_dir / f"entry_{j:03d}.csv").write_text(line + "\n")
        return line

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            lines = list(pool.map(work, range(len(lams))))
    else:
        lines = [work(j) for j in range(len(lams))]

    # deterministic merge in ladder order regardless of completion order
    (outdir / "sweep.csv").write_text("\n".join(lines) + "\n")
    n_ok = sum("solve_2d=ok" in ln for ln in lines)
    rows.append(("sweep", "entries", len(lams)))
    rows.append(("sweep", "solved_2d", n_ok))
    rows.append(("sweep", "lambda_top", cfg.lam))
    rows.append(("sweep", "lambda_bottom", lams[-1]))


def _cmd_eig(cfg: RunConfig, outdir: Path, rows: list[Row]) -> None:
    lam1 = first_eigenvalue(cfg.p, cfg.grid(), tol=cfg.tol)
    rows.append(("result", "lambda1", lam1))
    if cfg.lam > 0.0:
        rows.append(("result", "lambda_over_lambda1", cfg.lam / lam1))


def _cmd_oracle(cfg: RunConfig, outdir: Path, rows: list[Row]) -> None:
    sol = shoot_slab(cfg.problem(), tol=min(cfg.tol, 1e-10))
    if sol is None:
        rows.append(("result", "solution", "none"))
        return
    rows.append(("result", "solution", "ok"))
    rows.append(("result", "umax", sol.umax))
    rows.append(("result", "interface", sol.interface))
    rows.append(("result", "slope_plus", sol.slope_plus))
    rows.append(("result", "slope_minus", sol.slope_minus))
    p = cfg.p
    rows.append(("result", "jump_defect",
                 sol.slope_plus ** p - sol.slope_minus ** p - p / (p - 1.0)))
    rows.append(("result", "closure_defect", sol.slope_minus * sol.interface - 1.0))
    if "csv" in cfg.formats:
        save_slab_csv(sol, outdir / "oracle_profile.csv")


def _cmd_check(cfg: RunConfig, outdir: Path, rows: list[Row]) -> None:
    rng = np.random.default_rng(cfg.seed)
    spec = SmootherSpec()
    checks: list[tuple[str, bool]] = []

    quad = check_normalization(spec, 20001)
    checks.append(("smoother_unit_mass", abs(quad - 1.0) <= 1e-8))
    ts = np.linspace(-0.5, 1.5, 1000)
    Gs = G_eval(spec, ts)
    gs = g_eval(spec, ts)
    checks.append(("ramp_monotone", bool(np.all(np.diff(Gs) >= -1e-15))))
    checks.append(("density_bounded", bool(np.all((gs >= 0.0) & (gs <= 2.0)))))

    grid = make_grid(17, 17, 1.0, 1.0)
    for p, q, eps, cap in ((2.0, 3.0, 0.0, 1e-6), (1.5, 3.0, 1e-8, 1e-4),
                           (3.0, 4.0, 1e-8, 1e-4)):
        prm = ProblemParams(p=p, q=q, lam=25.0, alpha=0.3, eps=eps)
        worst = 0.0
        for _ in range(5):
            vals = np.zeros(grid.shape)
            vals[1:-1, 1:-1] = rng.uniform(0.0, 1.6, (15, 15))
            u = field_from_values(grid, vals)
            d = np.zeros(grid.shape)
            d[1:-1, 1:-1] = rng.standard_normal((15, 15))
            step = 1e-6
            up = field_from_values(grid, vals + step * d)
            dn = field_from_values(grid, vals - step * d)
            fd = (smooth_energy(up, prm) - smooth_energy(dn, prm)) / (2.0 * step)
            # the nodal gradient is a density; the pairing carries the cell area
            an = float((smooth_gradient(u, prm).values * d).sum()) * grid.cell_area
            worst = max(worst, abs(fd - an) / max(abs(fd), 1e-12))
        checks.append((f"gradient_fd_p{p:g}", worst <= cap))

    prm = ProblemParams(p=2.0, q=3.0, lam=25.0, alpha=0.3, eps=0.0)
    vals = np.zeros(grid.shape)
    vals[1:-1, 1:-1] = rng.uniform(0.0, 1.6, (15, 15))
    u = field_from_values(grid, vals)
    a = np.zeros(grid.shape)
    a[1:-1, 1:-1] = rng.standard_normal((15, 15))
    b = np.zeros(grid.shape)
    b[1:-1, 1:-1] = rng.standard_normal((15, 15))
    ha = hessian_vector(u, field_from_values(grid, a), prm).values
    hb = hessian_vector(u, field_from_values(grid, b), prm).values
    sym = abs(float((hb * a).sum()) - float((ha * b).sum()))
    checks.append(("hessian_symmetry", sym <= 1e-10))

    sol = shoot_slab(ProblemParams(p=2.0, q=3.0, lam=60.0, alpha=0.2, eps=0.0))
    ok = sol is not None and abs(sol.slope_minus * sol.interface - 1.0) <= 1e-9
    checks.append(("oracle_closure", ok))

    n_pass = sum(ok for _, ok in checks)
    for name, okc in checks:
        rows.append(("check", name, "pass" if okc else "fail"))
    rows.append(("check", "passed", n_pass))
    rows.append(("check", "failed", len(checks) - n_pass))
    rows.append(("check", "total", len(checks)))
    if n_pass != len(checks):
        raise SolverError(f"{len(checks) - n_pass} invariant checks failed")


# ---------------------------------------------------------------------------
# driver


def run(cfg: RunConfig, jobs: int = 1) -> int:
    """Execute one configured run; returns the process exit code."""
    if cfg.subcommand not in SUBCOMMANDS:
        print(f"error: no subcommand selected (got {cfg.subcommand!r})", file=sys.stderr)
        return EXIT_CONFIG

    t_start = time.time()
    try:
        outdir = Path(cfg.directory)
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"error: cannot create output directory: {exc}", file=sys.stderr)
        return EXIT_IO

    rows = _echo_rows(cfg)
    code = EXIT_OK
    try:
        if cfg.subcommand == "solve":
            _cmd_solve(cfg, outdir, rows)
        elif cfg.subcommand == "mpass":
            _cmd_mpass(cfg, outdir, rows)
        elif cfg.subcommand == "continue":
            _cmd_continue(cfg, outdir, rows)
        elif cfg.subcommand == "sweep":
            _cmd_sweep(cfg, outdir, rows, jobs)
        elif cfg.subcommand == "eig":
            _cmd_eig(cfg, outdir, rows)
        elif cfg.subcommand == "oracle":
            _cmd_oracle(cfg, outdir, rows)
        elif cfg.subcommand == "check":
            _cmd_check(cfg, outdir, rows)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        rows.append(("run", "failure", str(exc)))
        print(f"solver failure: {exc}", file=sys.stderr)
        code = EXIT_SOLVER
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO

    bad = _nonfinite(rows)
    if bad and code == EXIT_OK:
        print(f"non-finite report values: {', '.join(bad)}", file=sys.stderr)
        code = EXIT_NONFINITE

    try:
        if "report" in cfg.formats:
            (outdir / "report.txt").write_text(_report_text(rows))
        meta = (f"started_unix = {t_start:.3f}\n"
                f"elapsed_seconds = {time.time() - t_start:.3f}\n"
                f"output_directory = {outdir.resolve()}\n")
        (outdir / "run_meta.txt").write_text(meta)
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return code


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="vortexpatch",
        description="Free-boundary vortex patch toolkit: solvers, continuation, "
                    "oracle comparison, and reproducible reports.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, default=None)
        sp.add_argument("--out", type=str, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args(argv)
    if args.subcommand is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG

    text = ""
    if args.config is not None:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_IO
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if cfg.subcommand is not None and cfg.subcommand != args.subcommand:
        print(f"config error: run.subcommand = {cfg.subcommand} conflicts with "
              f"command line subcommand {args.subcommand}", file=sys.stderr)
        return EXIT_CONFIG
    cfg = replace(cfg, subcommand=args.subcommand)
    if args.out is not None:
        cfg = replace(cfg, directory=args.out)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg, jobs=args.jobs)


if __name__ == "__main__":
    raise SystemExit(main())
