"""Batch runner: ``hallspec {solve,friedrichs,audit,inflate,lp-norm}``.

Every run reads one YAML config (schema version 1, documented in the
README), writes its artifacts to ``--out`` and finishes with exactly one
``manifest.json`` listing the resolved config, grid, timings, peak memory
and every file written. Exit codes: 0 success, 1 configuration or
parameter error, 2 numerical non-convergence or a failed exact check.
"""
import argparse
import json
import math
import resource
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import audits as A
from . import hall_mhd as H
from . import illposedness as IP
from . import io
from . import spectral as S
from .errors import ConfigurationError, HallSpecError, NonConvergenceError
from .grid import Grid, set_threads
from .littlewood_paley import BesovIndex, besov_norm, build_partition

CONFIG_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class CheckFailed(HallSpecError):
    """An exact identity missed its tolerance."""


# ---------------------------------------------------------------------------
# config helpers
# ---------------------------------------------------------------------------
def _num(x):
    """YAML allows ``inf``/``.inf`` for exponents; accept both spellings."""
    if isinstance(x, str) and x.strip().lower() in ("inf", ".inf", "infinity"):
        return math.inf
    return float(x)


def load_config(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    version = cfg.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigurationError(f"{path}: unsupported config version {version!r}")
    return cfg


def _section(cfg, name):
    sec = cfg.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigurationError(f"config section {name!r} must be a mapping")
    return sec


def _grid(cfg):
    g = _section(cfg, "grid")
    return Grid(int(g.get("N", 32)), float(g.get("L", 1.0)), g.get("dealias", "two_thirds"))


def _params(cfg):
    p = _section(cfg, "params")
    return H.PhysicalParams(float(p.get("mu", 1.0)), float(p.get("nu", 1.0)),
                            float(p.get("hall", 1.0)))


def _forcing(cfg, grid, params, seed):
    """``(F, U_exact or None)`` from the ``forcing`` section."""
    fc = _section(cfg, "forcing")
    kind = fc.get("kind", "zero")
    scale = float(fc.get("scale", 1.0))
    exact = None
    if kind == "zero":
        F = H.ForceTriple(grid, np.zeros((9,) + grid.shape, np.complex128))
    elif kind == "manufactured":
        exact, F = H.manufactured_fixture(grid, params, amplitude=float(fc.get("amplitude", 0.05)),
                                          band=int(fc.get("band", 4)), seed=seed)
    elif kind == "smooth":
        F = H.smooth_forcing(grid, band=int(fc.get("band", 3)),
                             amplitude=float(fc.get("amplitude", 1.0)), seed=seed)
    elif kind == "file":
        f = io.read_field(fc["f"])
        g = io.read_field(fc["g"])
        if f.grid != grid or g.grid != grid:
            raise ConfigurationError("forcing files do not match the configured grid")
        F = H.ForceTriple.from_fields(f, g)
    else:
        raise ConfigurationError(f"unknown forcing kind {kind!r}")
    if scale != 1.0:
        F = F * scale
        exact = None
    return F, exact


# ---------------------------------------------------------------------------
# run bookkeeping
# ---------------------------------------------------------------------------
class RunManifest:
    """Collects what one invocation did; written once at the end."""

    def __init__(self, command, config, out_dir, seed, threads):
        self.data = {"command": command, "version": __version__, "config": config,
                     "seed": seed, "threads": threads, "grids": [], "outputs": [],
                     "status": "running", "exit_code": None, "error": None}
        self.out = Path(out_dir)
        self._t0 = time.perf_counter()

    def path(self, name):
        p = self.out / name
        self.data["outputs"].append(str(p))
        return p

    def grid(self, grid):
        self.data["grids"].append(grid.describe())

    def write_json(self, name, payload):
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, default=_json_default)

    def finish(self, code, error=None):
        self.data.update(status="ok" if code == EXIT_OK else "failed", exit_code=code,
                         error=error, wall_time=time.perf_counter() - self._t0,
                         peak_memory_mb=resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024)
        with open(self.out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=2, default=_json_default)


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def _json_safe(x):
    """Replace non-finite floats so the JSON stays standard."""
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------
def cmd_solve(cfg, run, seed):
    grid = _grid(cfg)
    run.grid(grid)
    params = _params(cfg)
    F, exact = _forcing(cfg, grid, params, seed)
    sv = _section(cfg, "solver")
    try:
        U, report = H.picard_solve(F, params, mode=sv.get("mode", "series"),
                                   tol=float(sv.get("tol", 1e-12)), max_m=int(sv.get("max_m", 50)))
    except NonConvergenceError as exc:
        if exc.report is not None:
            run.write_json("report.json", _json_safe(exc.report.to_dict()))
        raise
    out = report.to_dict()
    res = H.residual(U, F, params)
    out["residual"] = res
    if exact is not None:
        out["recovery_error"] = (U - exact).norm() / exact.norm()
    run.write_json("report.json", _json_safe(out))
    for name in ("u", "B", "J"):
        io.write_field(run.path(f"{name}.hmhd"), getattr(U, name))
    return EXIT_OK


def cmd_friedrichs(cfg, run, seed):
    grid = _grid(cfg)
    run.grid(grid)
    params = _params(cfg)
    F, _ = _forcing(cfg, grid, params, seed)
    fr = _section(cfg, "friedrichs")
    cutoffs = [float(n) for n in fr.get("cutoffs", [4, 8, 16, 32])]
    rs = [_num(r) for r in fr.get("r", [2])]
    delta = fr.get("delta")
    rows = []
    for n in cutoffs:
        K = H.estimate_bilinear_constant(grid, params, n, seed)
        for r in rs:
            d = None if delta is None else float(delta)
            U, rep = H.friedrichs_solve(F, params, n, r=r, tol=float(fr.get("tol", 1e-12)),
                                        max_iter=int(fr.get("max_iter", 200)), delta=d, K=K,
                                        seed=seed)
            e = rep.extra
            rows.append({"cutoff": n, "r": r, "K_estimate": e["K_estimate"],
                         "contraction_number": e["contraction_number"],
                         "data_norm": e["data_norm"], "uniform_bound": e["uniform_bound"],
                         "iterations": rep.iterations, "converged": rep.converged})
    _write_rows(run.path("friedrichs.csv"), rows)
    run.write_json("friedrichs.json", _json_safe({"rows": rows}))
    return EXIT_OK


def cmd_audit(cfg, run, seed):
    au = _section(cfg, "audit")
    payload = {}
    code = EXIT_OK
    idc = au.get("identities")
    if idc:
        grids = [Grid(int(N)) for N in idc.get("grids", [32])]
        for g in grids:
            run.grid(g)
        n_seeds = int(idc.get("seeds", 20))
        res = A.identity_suite(grids, range(seed, seed + n_seeds), float(idc.get("tol", 1e-10)))
        if idc.get("cancellation_only"):
            res = {k: v for k, v in res.items() if k in ("hall_energy", "lorentz_work")}
        payload["identities"] = res
        _write_rows(run.path("identities.csv"),
                    [{"check": k, **v} for k, v in res.items()])
        if not all(v["passed"] for v in res.values()):
            code = EXIT_NUMERIC
    results = []
    n_pairs = int(au.get("n_pairs", 100))
    for N in au.get("grids", [32]) if (au.get("laws") or au.get("commutator")) else []:
        grid = Grid(int(N))
        run.grid(grid)
        part = build_partition(grid)
        for spec in au.get("laws", []):
            spec = dict(spec)
            law = spec.pop("law")
            ens = A.PairEnsemble(grid, n_pairs, seed, vector=A.law_uses_vectors(law))
            results.append(A.audit_product_law(ens, law, part,
                                               **{k: _num(v) for k, v in spec.items()}))
        for spec in au.get("commutator", []):
            s, r = float(spec["s"]), _num(spec["r"])
            rho1, rho2 = _num(spec.get("rho1", "inf")), _num(spec.get("rho2", 2))
            A.check_commutator_indices(s, r, rho1, rho2)
            ens = A.PairEnsemble(grid, n_pairs, seed, vector=True)
            results.append(A.audit_commutator(ens, s, r, rho1, rho2, part))
    if results:
        A.write_audit_csv(run.path("audit.csv"), results)
        payload["estimates"] = [r.summary() for r in results]
    if not payload:
        raise ConfigurationError("audit config selects no checks")
    run.write_json("audit.json", _json_safe(payload))
    if code != EXIT_OK:
        failed = [k for k, v in payload["identities"].items() if not v["passed"]]
        raise CheckFailed(f"identity checks over tolerance: {', '.join(failed)}")
    return code


def inflation_configs(cfg):
    sec = _section(cfg, "inflate")
    ns = sec.get("n", [5, 6, 7])
    ns = [ns] if isinstance(ns, int) else list(ns)
    keys = ("epsilon", "block_set_rule", "recenter_shift", "kappa", "desk_gaps", "grid_N",
            "box_L", "mu", "target_block", "min_envelope_cells", "placement")
    common = {k: sec[k] for k in keys if k in sec}
    if "desk_gaps" in common:
        common["desk_gaps"] = tuple(common["desk_gaps"])
    return [IP.InflationConfig(n=int(n), **common) for n in ns], bool(sec.get("picard", True))


def cmd_inflate(cfg, run, seed):
    configs, picard = inflation_configs(cfg)
    for c in configs:
        run.grid(c.grid())
    rows = IP.inflation_sweep(configs, picard=picard)
    IP.write_sweep(rows, run.path("sweep.csv"), run.path("sweep.json"), configs)
    # a single-row run is a feasibility probe; only a whole sweep failing is an error
    if len(rows) > 1 and not any(r["feasible"] for r in rows):
        raise ConfigurationError("every sweep row is infeasible: "
                                 + "; ".join(r["reason"] for r in rows))
    return EXIT_OK


def cmd_lp_norm(cfg, run, seed, args):
    sec = _section(cfg, "lp_norm")
    path = args.field or sec.get("field")
    if not path:
        raise ConfigurationError("lp-norm needs --field or lp_norm.field in the config")
    u = io.read_field(path)
    run.grid(u.grid)
    p = _num(args.p if args.p is not None else sec.get("p", 2))
    out = {"field": str(path), "p": p, "lp_norm": S.lp_norm(u, p)}
    s = args.s if args.s is not None else sec.get("s")
    if s is not None:
        r = _num(args.r if args.r is not None else sec.get("r", 2))
        idx = BesovIndex(float(s), p, r)
        out.update(s=float(s), r=r, besov_norm=besov_norm(build_partition(u.grid), u, idx))
    run.write_json("lp_norm.json", _json_safe(out))
    print(json.dumps(_json_safe(out)))
    return EXIT_OK


def _write_rows(path, rows):
    import csv
    cols = list(rows[0]) if rows else []
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------
COMMANDS = {"solve": cmd_solve, "friedrichs": cmd_friedrichs, "audit": cmd_audit,
            "inflate": cmd_inflate}


def _global_flags(defaults):
    # subcommands repeat the flags without defaults so that a value given
    # before the subcommand is not overwritten
    kw = (lambda d: {"default": d}) if defaults else (lambda d: {"default": argparse.SUPPRESS})
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="YAML config file", **kw(None))
    p.add_argument("--out", help="output directory (created if missing)", **kw("."))
    p.add_argument("--threads", type=int, help="FFT worker threads", **kw(None))
    p.add_argument("--seed", type=int, help="overrides the config seed", **kw(None))
    return p


def build_parser():
    common = _global_flags(False)
    parser = argparse.ArgumentParser(prog="hallspec", parents=[_global_flags(True)],
                                     description="Steady Hall-MHD spectral experiments.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("solve", "Picard solve of the steady system"),
                       ("friedrichs", "truncated solves and the uniform bound"),
                       ("audit", "exact identities and estimate audits"),
                       ("inflate", "norm-inflation sweep")):
        sub.add_parser(name, parents=[common], help=text)
    lp = sub.add_parser("lp-norm", parents=[common], help="norm of a field file")
    lp.add_argument("--field", default=None, help="field file written by solve (.hmhd)")
    lp.add_argument("--p", default=None, help="Lebesgue exponent, 'inf' allowed (default 2)")
    lp.add_argument("--s", type=float, default=None, help="also report the Besov norm B^s_{p,r}")
    lp.add_argument("--r", default=None, help="Besov summability exponent (default 2)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    run = RunManifest(args.command, None, out, args.seed, args.threads)
    code = EXIT_OK
    try:
        cfg = load_config(args.config)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        threads = args.threads if args.threads is not None else cfg.get("threads")
        if threads is not None:
            set_threads(int(threads))
        run.data.update(config=cfg, seed=seed, threads=threads)
        if args.command == "lp-norm":
            code = cmd_lp_norm(cfg, run, seed, args)
        else:
            code = COMMANDS[args.command](cfg, run, seed)
        run.finish(code)
    except NonConvergenceError as exc:
        code = EXIT_NUMERIC
        run.finish(code, f"{type(exc).__name__}: {exc}")
    except CheckFailed as exc:
        code = EXIT_NUMERIC
        run.finish(code, str(exc))
    except (HallSpecError, ValueError, KeyError, OSError) as exc:
        code = EXIT_CONFIG
        run.finish(code, f"{type(exc).__name__}: {exc}")
    if code != EXIT_OK:
        print(f"hallspec {args.command}: {run.data['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
