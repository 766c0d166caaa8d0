"""Command-line front end: ``frank-defect {solve,energy,verify,sweep,probe}``.

Exit codes: 0 on success, 1 when a verification or probe check fails (or a
numerical routine gives up), 2 for invalid flags or parameters.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import FrankDefectError
from .frank_core import FrankConstants, K4Convention
from .io_utils import atomic_write, fmt17
from .profile_ode import DEFAULT_TOL, solve_profile

COMMANDS = ("solve", "energy", "verify", "sweep", "probe")
MIN_GRID = 16


@dataclass
class RunConfig:
    command: str
    k1: float = 1.0
    k2: float = 1.0
    k3: float = 1.0
    k4_convention: str = K4Convention.MINUS_K2.value
    k4: float | None = None
    t: float | None = None
    t_min: float | None = None
    t_max: float | None = None
    t_steps: int = 9
    grid_r: int = 16
    grid_theta: int = 16
    tol: float = DEFAULT_TOL
    seed: int = 0
    n_perturbations: int = 100
    epsilons: list = field(default_factory=lambda: [-0.1, -0.01, 0.01, 0.1])
    direct: bool = False
    out: str | None = None
    format: str = "json"

    def constants(self) -> FrankConstants:
        return FrankConstants(self.k1, self.k2, self.k3, K4Convention(self.k4_convention), self.k4)

    def grid(self):
        from .reduced_energy import make_grid

        return make_grid(n_r=self.grid_r // 2, n_theta=self.grid_theta)

    def to_dict(self) -> dict:
        # the destination path is not part of the computation
        out = asdict(self)
        out.pop("out")
        return out


class UsageError(Exception):
    pass


def _validate(cfg: RunConfig) -> None:
    if cfg.command not in COMMANDS:
        raise UsageError(f"unknown command {cfg.command!r}")
    if cfg.tol <= 0:
        raise UsageError("--tol must be positive")
    if cfg.grid_r < MIN_GRID or cfg.grid_theta < MIN_GRID:
        raise UsageError(f"grid sizes must be at least {MIN_GRID}")
    if cfg.grid_r % 2:
        raise UsageError("--grid-r must be even (two radial panels)")
    if cfg.command == "sweep":
        if cfg.t_min is None or cfg.t_max is None:
            raise UsageError("sweep needs --t-min and --t-max")
        if not (0.0 < cfg.t_min <= cfg.t_max < math.pi):
            raise UsageError("sweep range must lie inside (0, pi)")
        if cfg.t_steps < 1:
            raise UsageError("--t-steps must be positive")
    elif cfg.t is None:
        raise UsageError(f"{cfg.command} needs --t")
    allowed = {"solve": ("csv", "json", "svg"), "sweep": ("csv", "json")}
    if cfg.format not in allowed.get(cfg.command, ("json",)):
        raise UsageError(f"format {cfg.format!r} not available for {cfg.command}")
    if cfg.n_perturbations < 1:
        raise UsageError("--n-perturbations must be positive")


def _workers() -> int:
    raw = os.environ.get("FRANK_DEFECT_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map(func, items):
    items = list(items)
    n = min(_workers(), len(items))
    if n <= 1:
        return [func(i) for i in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))


def _dumps(payload) -> str:
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


# --- commands --------------------------------------------------------------------


def _profile(cfg: RunConfig):
    return solve_profile(cfg.k1, cfg.k3, cfg.t, cfg.tol)


def _svg(profile) -> str:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise UsageError("SVG output needs matplotlib (install the 'plot' extra)") from exc
    plt.rcParams["svg.hashsalt"] = "frank-defect"
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
    axes[0].plot(profile.theta_nodes, profile.psi)
    axes[0].set_xlabel("theta")
    axes[0].set_ylabel("psi")
    axes[1].plot(profile.theta_nodes, profile.chi)
    axes[1].set_xlabel("theta")
    axes[1].set_ylabel("sin(psi)/sin(theta)")
    fig.suptitle(f"k1={profile.k1:g}  k3={profile.k3:g}  t={profile.t:.6g}")
    fig.tight_layout()
    buf = io.StringIO()
    fig.savefig(buf, format="svg", metadata={"Date": None})
    plt.close(fig)
    return buf.getvalue()


def cmd_solve(cfg: RunConfig):
    p = _profile(cfg)
    if cfg.format == "csv":
        header = dict(p.header(), config=cfg.to_dict())
        return "# " + json.dumps(header, sort_keys=True) + "\n" + p.to_csv(), 0
    if cfg.format == "svg":
        return _svg(p), 0
    payload = json.loads(p.to_json())
    payload["config"] = cfg.to_dict()
    return _dumps(payload), 0


def cmd_energy(cfg: RunConfig):
    from .lifting import RadialLifting
    from .reduced_energy import direct_energy, reduced_energy

    k = cfg.constants()
    p = _profile(cfg)
    br = reduced_energy(RadialLifting(p), k.k1, k.k3, cfg.grid())
    payload = json.loads(br.to_json())
    payload["k4"] = k.k4
    if cfg.direct:
        from .director import build_director

        payload["direct"] = direct_energy(build_director(p), k)
    payload["config"] = cfg.to_dict()
    return _dumps(payload), 0


def verify_suite(k1: float, k3: float, t: float, tol: float = DEFAULT_TOL, grid=None):
    """Run the invariant checks for one parameter tuple.

    Returns a list of ``{name, value, threshold, passed}`` dictionaries.
    """
    from .director import build_director, degree, equivariance_residual
    from .lifting import RadialLifting
    from .profile_ode import bracket_bounds
    from .reduced_energy import (
        abcd_boundary_value,
        abcd_left_side,
        completed_square_energy,
        direct_energy,
        el_residual_2d_l2,
        el_residual_profile,
        first_integral,
        make_grid,
        minimality_pair,
        reduced_energy,
        splay_pair,
    )

    grid = make_grid() if grid is None else grid
    p = solve_profile(k1, k3, t, tol)
    lift = RadialLifting(p)
    field_ = build_director(p)
    interior = p.theta_nodes[1:-1]
    checks = []

    def add(name, value, threshold, passed=None):
        value = float(value)
        ok = value <= threshold if passed is None else bool(passed)
        checks.append({"name": name, "value": value, "threshold": threshold, "passed": ok})

    add("first_integral", np.max(np.abs(first_integral(p, k1, k3))), 1e-8)
    add("el_residual_profile", np.max(np.abs(el_residual_profile(p, k1, k3)(interior))), 1e-6)
    add("el_residual_2d_l2", el_residual_2d_l2(lift, k1, k3), 1e-4)
    red = reduced_energy(lift, k1, k3, grid).total
    direct = direct_energy(field_, FrankConstants(k1, 1.0, k3))
    add("reduced_vs_direct", abs(red - direct) / abs(direct), 1e-5)
    deg, raw = degree(field_)
    add("degree", abs(raw - 1.0), 1e-6, deg == 1 and abs(raw - 1.0) < 1e-6)
    lower, upper = bracket_bounds(t, interior, k1, k3)
    logtan = np.log(np.tan(0.5 * p.psi[1:-1]))
    slack = 1e-9 * (1.0 + np.abs(logtan))
    excess = np.max(np.maximum(lower - logtan - slack, logtan - upper - slack).clip(min=0.0))
    add("bracket", excess, 0.0)
    monotone = bool(np.all(np.diff(p.psi) >= 0.0))
    ends = max(abs(p.psi[0]), abs(p.psi[-1] - math.pi))
    add("monotone_endpoints", ends, 1e-8, monotone and ends < 1e-8)
    add("equivariance", max(equivariance_residual(field_)), 1e-10)
    d_rr, d_tt, const = completed_square_energy(lift, k1, k3, p, grid)
    add("completed_square", abs(d_rr + d_tt + const - red) / abs(red), 1e-8)
    for label, (a, b) in (("splay", splay_pair()), ("minimality", minimality_pair(k1, k3))):
        left = abcd_left_side(a, b, lift, grid)
        right = abcd_boundary_value(a, b, lambda th: p.evaluate(th)[0], 1)
        add(f"abcd_{label}", abs(left - right) / max(abs(right), 1e-300), 1e-6)
    return checks


def cmd_verify(cfg: RunConfig):
    checks = verify_suite(cfg.k1, cfg.k3, cfg.t, cfg.tol, cfg.grid())
    ok = all(c["passed"] for c in checks)
    payload = {"passed": ok, "checks": checks, "config": cfg.to_dict()}
    return _dumps(payload), 0 if ok else 1


def _sweep_row(args):
    from .director import build_director, degree
    from .lifting import RadialLifting
    from .profile_ode import endpoint_rates
    from .reduced_energy import reduced_energy

    k1, k3, t, tol, grid_r, grid_theta = args
    from .reduced_energy import make_grid

    p = solve_profile(k1, k3, t, tol)
    energy = reduced_energy(RadialLifting(p), k1, k3, make_grid(grid_r // 2, n_theta=grid_theta))
    c0, cpi = endpoint_rates(p)
    deg, _ = degree(build_director(p))
    return {"t": t, "k1": k1, "k3": k3, "J": energy.total, "chi0": c0, "chipi": cpi, "degree": deg}


def cmd_sweep(cfg: RunConfig):
    ts = np.linspace(cfg.t_min, cfg.t_max, cfg.t_steps)
    jobs = [(cfg.k1, cfg.k3, float(t), cfg.tol, cfg.grid_r, cfg.grid_theta) for t in ts]
    rows = _map(_sweep_row, jobs)
    if cfg.format == "csv":
        cols = ("t", "k1", "k3", "J", "chi0", "chipi", "degree")
        lines = ["# " + json.dumps({"config": cfg.to_dict()}, sort_keys=True), ",".join(cols)]
        for row in rows:
            lines.append(
                ",".join(str(row[c]) if c == "degree" else fmt17(row[c]) for c in cols)
            )
        return "\n".join(lines) + "\n", 0
    return _dumps({"rows": rows, "config": cfg.to_dict()}), 0


def _probe_seed(args):
    from .variational import make_perturbation, minimality_probe, probe_deficit

    k1, k3, t, tol, seed, eps = args
    p = solve_profile(k1, k3, t, tol)
    phi = make_perturbation(seed)
    out = []
    for e, dj in minimality_probe(p, phi, eps):
        out.append(
            {
                "seed": seed,
                "epsilon": e,
                "delta_J": dj,
                "deficit": probe_deficit(p, phi, e),
                "x0_norm": phi.x0_norm(),
            }
        )
    return out


def cmd_probe(cfg: RunConfig):
    seeds = range(cfg.seed, cfg.seed + cfg.n_perturbations)
    jobs = [(cfg.k1, cfg.k3, cfg.t, cfg.tol, s, list(cfg.epsilons)) for s in seeds]
    rows = [r for chunk in _map(_probe_seed, jobs) for r in chunk]
    worst = min(r["delta_J"] for r in rows)
    gap = max(abs(r["delta_J"] - r["deficit"]) for r in rows)
    ok = worst >= -1e-10 and gap <= 1e-8
    payload = {
        "passed": ok,
        "min_delta_J": worst,
        "max_deficit_mismatch": gap,
        "rows": rows,
        "config": cfg.to_dict(),
    }
    return _dumps(payload), 0 if ok else 1


HANDLERS = {
    "solve": cmd_solve,
    "energy": cmd_energy,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "probe": cmd_probe,
}


# --- argument handling -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="frank-defect", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with keys mirroring the flags")
        sp.add_argument("--k1", type=float)
        sp.add_argument("--k2", type=float)
        sp.add_argument("--k3", type=float)
        sp.add_argument("--k4-convention", choices=[c.value for c in K4Convention])
        sp.add_argument("--k4", type=float)
        sp.add_argument("--t", type=float)
        sp.add_argument("--t-min", type=float)
        sp.add_argument("--t-max", type=float)
        sp.add_argument("--t-steps", type=int)
        sp.add_argument("--grid-r", type=int, help="radial Gauss nodes (even, >= 16)")
        sp.add_argument("--grid-theta", type=int, help="Gauss nodes per theta panel (>= 16)")
        sp.add_argument("--tol", type=float)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--n-perturbations", type=int)
        sp.add_argument("--epsilons", type=float, nargs="+")
        sp.add_argument("--direct", action="store_const", const=True, default=None)
        sp.add_argument("--degrees", action="store_true", help="angles given in degrees")
        sp.add_argument("--out")
        sp.add_argument("--format", choices=("csv", "json", "svg"))
    return parser


def config_from_args(argv) -> RunConfig:
    parser = build_parser()
    ns = parser.parse_args(argv)
    merged = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                merged.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file: {exc}") from exc
        merged.pop("command", None)
        degrees_in_file = bool(merged.pop("degrees", False))
    else:
        degrees_in_file = False
    names = {f.name for f in fields(RunConfig)}
    unknown = set(merged) - names
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    for key, value in vars(ns).items():
        if key in names and value is not None:
            merged[key] = value
    if ns.degrees or degrees_in_file:
        for key in ("t", "t_min", "t_max"):
            if merged.get(key) is not None:
                merged[key] = math.radians(merged[key])
    merged["command"] = ns.command
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise UsageError(str(exc)) from exc
    _validate(cfg)
    return cfg


def main(argv=None) -> int:
    try:
        cfg = config_from_args(argv)
        text, status = HANDLERS[cfg.command](cfg)
    except UsageError as exc:
        print(f"frank-defect: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"frank-defect: error: {exc}", file=sys.stderr)
        return 2
    except FrankDefectError as exc:
        print(f"frank-defect: numerical failure: {exc}", file=sys.stderr)
        return 1
    if cfg.out:
        atomic_write(cfg.out, text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
