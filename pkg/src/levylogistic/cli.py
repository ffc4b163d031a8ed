"""Command-line front end.

    levylogistic met --alpha 0.5 --sigma 0.5 --r 1 --domain 0,1 --n 400
    levylogistic stationary --lambda 1.0 --plot
    levylogistic sweep met --axis alpha=0.1,0.4,0.7,1.0 --sigma 0.5
    levylogistic validate --quantity met --alpha 0.5 --sigma 0.5 --x0 0.5

Every run writes a long-format CSV, a JSON sidecar with the full configuration
and solver diagnostics, and with --plot a PNG beside them. Population values
(--domain, --x0) are in units of the carrying capacity.

Exit status: 0 success, 1 validation FAIL, 2 configuration error, 3 solver
error, 4 analytic-threshold error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError

from . import __version__
from .core import DomainError, ModelParams, make_rng, nondimensionalize, stable_from_uniforms
from .gaussian import (
    ExitProblemSpec,
    SeriesConvergenceError,
    SingularSystemError,
    ThresholdError,
    exact_path,
    exit_prob_bvp,
    exit_prob_left,
    met_two_sided,
    stationary_density,
)
from .grid import Grid1D
from .montecarlo import AllCensoredError, MCConfig, estimate_ep, estimate_met, simulate_step
from .nonlocal_solver import SolverError, evolve_fpe, solve_ep, solve_met

ENV_OUT = "LEVYLOGISTIC_OUT"
COMMANDS = ("met", "ep", "fpe", "stationary", "exitprob", "path", "validate", "sweep")
SWEEP_AXES = ("alpha", "sigma", "lambda", "r", "x0", "epsilon")
COLUMNS = ("x", "value", "quantity", "alpha", "sigma", "lambda", "r", "t")
GATE = 3.0  # standard errors

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER, EXIT_THRESHOLD = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GridSettings:
    r1: float = 0.0
    r2: float = 1.0
    n: int = 400


@dataclass(frozen=True)
class RunConfig:
    command: str
    params: ModelParams = field(default_factory=ModelParams)
    grid: GridSettings = field(default_factory=GridSettings)
    mc: Optional[MCConfig] = None
    output_path: str = ""
    sweep_axis: Optional[tuple] = None   # (name, (v1, v2, ...))
    inner: Optional[str] = None          # command run by a sweep
    x0: float = 0.5
    epsilon: float = 1e-3
    t: float = 1.0                       # horizon for fpe and path
    dt: Optional[float] = None           # fpe step (None: grid spacing); mc.dt for paths
    quantity: str = "met"                # validate: met or ep
    mc_domain: Optional[tuple] = None    # validate: oracle domain if it differs
    jobs: int = 1
    plot: bool = False

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command == "sweep":
            if self.inner not in COMMANDS or self.inner in ("sweep", "validate"):
                raise ConfigError("sweep needs an inner command: one of met, ep, fpe, stationary, exitprob, path")
            if self.sweep_axis is None:
                raise ConfigError("sweep needs --axis name=v1,v2,...")
        if self.sweep_axis is not None:
            name, values = self.sweep_axis
            if name not in SWEEP_AXES:
                raise ConfigError(f"sweep axis must be one of {', '.join(SWEEP_AXES)}; got {name!r}")
            if not values:
                raise ConfigError("sweep axis has no values")
        if self.grid.n < 1 or not self.grid.r1 < self.grid.r2:
            raise ConfigError(f"invalid grid {self.grid}")
        if self.quantity not in ("met", "ep"):
            raise ConfigError("--quantity must be met or ep")
        if not self.t > 0 or (self.dt is not None and not self.dt > 0):
            raise ConfigError("--t and --dt must be > 0")
        if not self.epsilon > 0:
            raise ConfigError("--epsilon must be > 0")
        if self.jobs < 1:
            raise ConfigError("--jobs must be >= 1")

    # -- serialisation -------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["params"] = ModelParams(**d["params"])
        d["grid"] = GridSettings(**d["grid"])
        if d.get("mc") is not None:
            mc = dict(d["mc"])
            mc["domain"] = tuple(mc["domain"])
            d["mc"] = MCConfig(**mc)
        if d.get("sweep_axis") is not None:
            name, values = d["sweep_axis"]
            d["sweep_axis"] = (name, tuple(values))
        if d.get("mc_domain") is not None:
            d["mc_domain"] = tuple(d["mc_domain"])
        return cls(**d)

    def digest(self) -> str:
        """Hash of everything that can change the numbers (not paths, jobs or plotting)."""
        d = self.to_dict()
        for k in ("output_path", "jobs", "plot"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def with_value(self, name: str, value: float) -> "RunConfig":
        if name == "lambda":
            return replace(self, params=replace(self.params, lam=value))
        if name in ("alpha", "sigma", "r"):
            return replace(self, params=replace(self.params, **{name: value}))
        return replace(self, **{name: value})


# -- argument handling -------------------------------------------------------

def _floats(s: str) -> tuple:
    try:
        return tuple(float(v) for v in s.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {s!r}") from None


def _pair(s: str) -> tuple:
    v = _floats(s)
    if len(v) != 2:
        raise ConfigError(f"expected r1,r2, got {s!r}")
    return v


def _axis(s: str) -> tuple:
    if "=" not in s:
        raise ConfigError(f"--axis expects name=v1,v2,..., got {s!r}")
    name, vals = s.split("=", 1)
    return name.strip(), _floats(vals)


def _bool(s) -> bool:
    if isinstance(s, bool):
        return s
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


# key -> (converter, default); keys double as config-file keys and flag names
OPTIONS = {
    "alpha": (float, 1.0),
    "sigma": (float, 0.0),
    "lambda": (float, 0.0),
    "r": (float, 1.0),
    "kcap": (float, 1.0),
    "x0": (float, 0.5),
    "domain": (_pair, (0.0, 1.0)),
    "n": (int, 400),
    "epsilon": (float, 1e-3),
    "t": (float, 1.0),
    "t-max": (float, 1e3),
    "dt": (float, None),
    "paths": (int, 100_000),
    "seed": (int, 0),
    "axis": (_axis, None),
    "jobs": (int, 1),
    "out": (str, None),
    "quantity": (str, "met"),
    "mc-domain": (_pair, None),
    "plot": (_bool, False),
}


def read_config_file(path) -> dict:
    """Flat key=value file; '#' starts a comment. Keys are flag names without dashes."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="levylogistic", description=__doc__.split("\n\n")[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("inner", nargs="?", help="command to run for each value of a sweep")
    for key in OPTIONS:
        if key == "plot":
            p.add_argument("--plot", action="store_const", const="true", default=None,
                           help="also render a PNG next to the CSV")
        else:
            p.add_argument(f"--{key}", dest=key.replace("-", "_"), default=None, metavar=key.upper())
    p.add_argument("--config", default=None, help="key=value file; flags given on the command line win")
    return p


def config_from_args(argv=None) -> RunConfig:
    ns = build_parser().parse_args(argv)
    raw = read_config_file(ns.config) if ns.config else {}
    for key in OPTIONS:
        v = getattr(ns, key.replace("-", "_"))
        if v is not None:
            raw[key] = v
    opt = {}
    for key, (conv, default) in OPTIONS.items():
        if key in raw:
            try:
                opt[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
        else:
            opt[key] = default
    try:
        params = ModelParams(r=opt["r"], K=opt["kcap"], lam=opt["lambda"], sigma=opt["sigma"], alpha=opt["alpha"])
        r1, r2 = opt["domain"]
        mc = MCConfig(n_paths=opt["paths"], dt=opt["dt"] or 1e-3, t_max=opt["t-max"], seed=opt["seed"],
                      domain=opt["mc-domain"] or (r1, r2))
    except DomainError as exc:
        raise ConfigError(str(exc)) from None
    command = ns.command
    out = opt["out"] or (f"sweep_{ns.inner}.csv" if command == "sweep" else f"{command}.csv")
    return RunConfig(
        command=command, params=params, grid=GridSettings(r1, r2, opt["n"]), mc=mc,
        output_path=out, sweep_axis=opt["axis"], inner=ns.inner, x0=opt["x0"],
        epsilon=opt["epsilon"], t=opt["t"], dt=opt["dt"], quantity=opt["quantity"],
        mc_domain=opt["mc-domain"], jobs=opt["jobs"], plot=opt["plot"],
    )


def resolve_output(path: str) -> Path:
    p = Path(path)
    root = os.environ.get(ENV_OUT)
    if root and not p.is_absolute():
        p = Path(root) / p
    return p


# -- computations --------------------------------------------------------------

def _noise_kind(params: ModelParams) -> str:
    if params.lam > 0 and params.sigma > 0:
        raise ConfigError("mixed Gaussian and Levy noise is not supported; set one of --lambda, --sigma to 0")
    if params.sigma > 0:
        return "levy"
    if params.lam > 0:
        return "gaussian"
    raise ConfigError("no noise: set --sigma (Levy case) or --lambda (Gaussian case)")


def _rows(x, values, quantity, params: ModelParams, t=None):
    x = np.broadcast_to(np.asarray(x, dtype=float), np.shape(values))
    return [
        {"x": float(xi), "value": float(vi), "quantity": quantity, "alpha": params.alpha,
         "sigma": params.sigma, "lambda": params.lam, "r": params.r,
         "t": "" if t is None else float(t if np.ndim(t) == 0 else t[k])}
        for k, (xi, vi) in enumerate(zip(x, values))
    ]


def _gaussian_left(cfg: RunConfig) -> float:
    # the Gaussian problems need a positive left end
    return cfg.grid.r1 if cfg.grid.r1 > 0 else cfg.epsilon


def _levy_grid(cfg: RunConfig) -> Grid1D:
    return Grid1D(cfg.grid.r1, cfg.grid.r2, cfg.grid.n)


def _run_met(cfg, p):
    if _noise_kind(p) == "levy":
        f = solve_met(p, _levy_grid(cfg))
    else:
        f = met_two_sided(_gaussian_left(cfg), cfg.grid.r2, p.lam, cfg.grid.n + 2)
    rows = _rows(f.x, f.values, "met", p)
    if p.time_scale != 1:
        rows += _rows(f.x, p.to_physical_time(f.values), "met_physical", p)
    return rows, {"condition": f.diagnostics.get("condition"), "time_scale": p.time_scale}


def _run_ep(cfg, p):
    if _noise_kind(p) == "levy":
        f = solve_ep(p, _levy_grid(cfg), target="left")
    else:
        f = exit_prob_bvp(_gaussian_left(cfg), cfg.grid.r2, p.lam, cfg.grid.n + 2)
    return _rows(f.x, f.values, "ep", p), {"condition": f.diagnostics.get("condition"), "target": "left"}


def _run_exitprob(cfg, p):
    if _noise_kind(p) != "gaussian":
        raise ConfigError("exitprob is the Gaussian closed form; use 'ep' for the Levy case")
    left = _gaussian_left(cfg)
    x = Grid1D(left, cfg.grid.r2, cfg.grid.n, "log").x
    vals = [exit_prob_left(ExitProblemSpec(left, cfg.grid.r2, p.lam, xi)) for xi in x]
    return _rows(x, vals, "exitprob", p), {"epsilon": left, "L": cfg.grid.r2}


def _run_stationary(cfg, p):
    if _noise_kind(p) != "gaussian":
        raise ConfigError("stationary needs the Gaussian case (--lambda > 0, --sigma 0)")
    q = stationary_density(p.lam)
    x = Grid1D(cfg.grid.r1, cfg.grid.r2, cfg.grid.n).x
    return _rows(x, q(x), "stationary", p), {"log_normalization": q.log_normalization, "mode": q.mode()}


def _run_fpe(cfg, p):
    if _noise_kind(p) != "levy":
        raise ConfigError("fpe covers the Levy case only (--sigma > 0, --lambda 0)")
    snaps = evolve_fpe(p, _levy_grid(cfg), cfg.x0, cfg.t, dt=cfg.dt, snapshot_every=cfg.t / 4)
    rows = []
    for s in snaps:
        rows += _rows(s.field.x, s.field.values, "density", p, t=s.time)
    diag = {"times": [s.time for s in snaps], "mass": [s.mass for s in snaps], "peak": [s.peak for s in snaps]}
    return rows, diag


def _run_path(cfg, p):
    kind = _noise_kind(p)
    dt = cfg.mc.dt
    nsteps = max(1, int(round(cfg.t / dt)))
    rng = make_rng(cfg.mc.seed, 0)
    if kind == "gaussian":
        incs = math.sqrt(dt) * rng.standard_normal(nsteps)
        xs = exact_path(cfg.x0, p.lam, incs, dt)
    else:
        dL = stable_from_uniforms(p.alpha, rng.uniform(-np.pi / 2, np.pi / 2, nsteps), rng.standard_exponential(nsteps))
        xs = np.empty(nsteps + 1)
        xs[0] = cfg.x0
        for k in range(nsteps):
            xs[k + 1] = simulate_step(xs[k], p, dt, 0.0, dL[k])
    t = dt * np.arange(nsteps + 1)
    return _rows(np.full(t.size, cfg.x0), xs, "path", p, t=t), {"steps": nsteps, "dt": dt}


def _run_validate(cfg, p):
    kind = _noise_kind(p)
    q = cfg.quantity
    domain = (cfg.grid.r1, cfg.grid.r2) if kind == "levy" else (_gaussian_left(cfg), cfg.grid.r2)
    if cfg.mc_domain is not None and tuple(cfg.mc_domain) != tuple(domain):
        raise ConfigError(f"solver domain {domain} and oracle domain {tuple(cfg.mc_domain)} differ")
    if not domain[0] < cfg.x0 < domain[1]:
        raise ConfigError(f"x0 = {cfg.x0} is not inside {domain}")
    mc = replace(cfg.mc, domain=domain)
    t0 = time.perf_counter()
    if kind == "levy":
        f = solve_met(p, _levy_grid(cfg)) if q == "met" else solve_ep(p, _levy_grid(cfg))
        pde = float(f.at(cfg.x0))
    elif q == "met":
        pde = float(met_two_sided(domain[0], domain[1], p.lam, cfg.grid.n + 2).at(cfg.x0))
    else:
        pde = exit_prob_left(ExitProblemSpec(domain[0], domain[1], p.lam, cfg.x0))
    t_pde = time.perf_counter() - t0
    est = (estimate_met if q == "met" else estimate_ep)(p, cfg.x0, mc, jobs=cfg.jobs)
    se = est.std_error  # the deterministic solver carries no sampling error
    diff = abs(pde - est.mean)
    z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
    verdict = "PASS" if z < GATE else "FAIL"
    rows = (_rows(cfg.x0, [pde], f"{q}_pde", p) + _rows(cfg.x0, [est.mean], f"{q}_mc", p)
            + _rows(cfg.x0, [se], f"{q}_mc_se", p) + _rows(cfg.x0, [z], "z", p))
    diag = {"pde": pde, "mc": est.mean, "std_error": se, "z": z, "verdict": verdict, "gate": GATE,
            "censored": est.censored, "censored_warning": est.censored_warning, "pde_seconds": t_pde}
    return rows, diag


RUNNERS = {"met": _run_met, "ep": _run_ep, "exitprob": _run_exitprob, "stationary": _run_stationary,
           "fpe": _run_fpe, "path": _run_path, "validate": _run_validate}


def compute(cfg: RunConfig):
    """Rows and diagnostics for a single (non-sweep) run."""
    p = nondimensionalize(cfg.params)
    return RUNNERS[cfg.command](cfg, p)


# -- output ------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path: Path, rows: list[dict], cfg: RunConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# levylogistic {__version__} config={cfg.digest()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in COLUMNS])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(lines):
        for k in COLUMNS:
            if k != "quantity":
                row[k] = float(row[k]) if row[k] != "" else None
        out.append(row)
    return out


def write_sidecar(path: Path, cfg: RunConfig, diagnostics: dict, wall: float, status: int) -> None:
    doc = {"version": __version__, "config_hash": cfg.digest(), "config": cfg.to_dict(),
           "diagnostics": diagnostics, "wall_time_s": wall, "status": status}
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")


def load_sidecar(path) -> RunConfig:
    return RunConfig.from_dict(json.loads(Path(path).read_text())["config"])


def _single(cfg: RunConfig) -> tuple[int, list[dict], dict]:
    t0 = time.perf_counter()
    rows, diag = compute(cfg)
    status = EXIT_FAIL if diag.get("verdict") == "FAIL" else EXIT_OK
    out = resolve_output(cfg.output_path)
    write_csv(out, rows, cfg)
    write_sidecar(out.with_suffix(".json"), cfg, diag, time.perf_counter() - t0, status)
    if cfg.plot:
        from .plotting import render
        render(rows, out.with_suffix(".png"), title=f"{cfg.command} ({cfg.digest()})")
    return status, rows, diag


def _sweep_member(cfg: RunConfig, value: float) -> RunConfig:
    name, _ = cfg.sweep_axis
    stem = Path(cfg.output_path)
    member_out = stem.with_name(f"{stem.stem}.{name}_{value!r}{stem.suffix or '.csv'}")
    member = replace(cfg, command=cfg.inner, inner=None, sweep_axis=None, output_path=str(member_out), jobs=1)
    return member.with_value(name, value)


def _sweep(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    name, values = cfg.sweep_axis
    members = [_sweep_member(cfg, v) for v in values]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            results = list(pool.map(_single, members))
    else:
        results = [_single(m) for m in members]
    rows = [row for _, rs, _ in results for row in rs]
    if name in ("x0", "epsilon"):
        # these do not appear as CSV columns; tag the quantity instead
        rows = [dict(row, quantity=f"{row['quantity']}[{name}={v!r}]")
                for (_, rs, _), v in zip(results, values) for row in rs]
    out = resolve_output(cfg.output_path)
    write_csv(out, rows, cfg)
    diag = {"members": [m.output_path for m in members], "member_diagnostics": [d for _, _, d in results]}
    status = max(s for s, _, _ in results)
    write_sidecar(out.with_suffix(".json"), cfg, diag, time.perf_counter() - t0, status)
    if cfg.plot:
        from .plotting import render
        render(rows, out.with_suffix(".png"), title=f"sweep {cfg.inner} over {name}")
    return status


def run(cfg: RunConfig) -> int:
    if cfg.command == "sweep":
        return _sweep(cfg)
    status, _, diag = _single(cfg)
    if cfg.command == "validate":
        print(f"{cfg.quantity} at x0={cfg.x0}: pde={diag['pde']:.6g} mc={diag['mc']:.6g} "
              f"se={diag['std_error']:.3g} z={diag['z']:.3f} -> {diag['verdict']}"
              + (f" (censored paths: {diag['censored']})" if diag["censored_warning"] else ""))
    return status


def _fail(kind: str, msg: str, code: int) -> int:
    print(f"levylogistic: error[{kind}]: {msg}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
    except (ConfigError, DomainError) as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    try:
        return run(cfg)
    except ThresholdError as exc:
        return _fail("threshold", str(exc), EXIT_THRESHOLD)
    except (ConfigError, DomainError) as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except (SolverError, SingularSystemError, SeriesConvergenceError, AllCensoredError, LinAlgError) as exc:
        return _fail("solver", str(exc), EXIT_SOLVER)


if __name__ == "__main__":
    sys.exit(main())
