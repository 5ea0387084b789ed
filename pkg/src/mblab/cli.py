"""
Command-line front end.

``mblab <command> [--config PATH] [--set key=value ...] [--out DIR]
[--threads INT] [--seed INT]`` with commands ``cell``, ``hetero``,
``multi``, ``infinite``, ``verify`` and ``report``; ``mblab resume DIR``
continues an interrupted run from its checkpoints.

Exit codes: 0 success, 1 configuration or input error, 2 convergence
failure, 3 verification failure, 4 interrupted (resumable).  Errors are
also written to stderr as one JSON object.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config, parse_config
from .energy import compute_c0, estimate_C1, ledger
from .errors import (ConfigurationError, ConvergenceError, Interrupted, MBLabError, RangeError,
                     ShapeError)
from .grid import GridSpec, dump_field, load_field
from .optim import OptState
from .serialize import dumps, write_json
from .solvers import (SolveReport, approximate_infinite, periodic_states, scan_geometry,
                      solve_heteroclinic, solve_multitransition)
from .verify import battery_passed, run_battery

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_VERIFY, EXIT_INTERRUPTED = 0, 1, 2, 3, 4
COMMANDS = ("cell", "hetero", "multi", "infinite", "verify", "report")


class CheckpointStore:
    """Optimizer states under ``<run>/checkpoints``, one pair of files per stage.

    ``stop_after`` interrupts the run after that many saved iterations.
    """

    def __init__(self, root: Path, config_hash: str, stop_after: int | None = None):
        self.dir = Path(root) / "checkpoints"
        self.config_hash = config_hash
        self.stop_after = stop_after
        self.saved = 0

    def _paths(self, key: str):
        name = key.replace("/", "__")
        return self.dir / f"{name}.json", self.dir / f"{name}.x.f64"

    def load(self, key: str, size: int | None = None) -> OptState | None:
        meta_p, x_p = self._paths(key)
        if not meta_p.exists():
            return None
        try:
            meta = json.loads(meta_p.read_text())
            x = np.fromfile(x_p, dtype="<f8")
        except (OSError, ValueError) as err:
            raise ConfigurationError(f"corrupt checkpoint {meta_p.name}: {err}") from None
        if meta.get("config_hash") != self.config_hash:
            raise ConfigurationError(f"checkpoint {meta_p.name} belongs to another configuration")
        if size is not None and x.size != size:
            raise ConfigurationError(f"checkpoint {meta_p.name} has {x.size} unknowns, expected {size}")
        try:
            return OptState.from_dict(meta["state"], x)
        except (KeyError, TypeError, ValueError) as err:
            raise ConfigurationError(f"corrupt checkpoint {meta_p.name}: {err}") from None

    def save(self, key: str, state: OptState) -> None:
        meta_p, x_p = self._paths(key)
        self.dir.mkdir(parents=True, exist_ok=True)
        tmp = x_p.with_suffix(".tmp")
        np.asarray(state.x, dtype="<f8").tofile(tmp)
        os.replace(tmp, x_p)
        tmp = meta_p.with_suffix(".tmp")
        tmp.write_text(dumps({"config_hash": self.config_hash, "key": key,
                              "state": state.to_dict()}))
        os.replace(tmp, meta_p)
        self.saved += 1
        if self.stop_after is not None and self.saved >= self.stop_after:
            raise Interrupted(f"stopped after {self.saved} iterations at stage {key}")


# ----------------------------------------------------------------------------
# helpers
# ----------------------------------------------------------------------------

def _tagged(d: dict, cfg: RunConfig) -> dict:
    d = dict(d)
    d["config_hash"] = cfg.hash()
    return d


def _write_report(out: Path, name: str, rep: SolveReport, cfg: RunConfig, extra=None) -> None:
    d = rep.to_json_dict()
    if extra:
        d.update(extra)
    write_json(out / f"{name}.json", _tagged(d, cfg))
    dump_field(rep.minimizer, out / f"{name}_field", {"config_hash": cfg.hash(), "report": name})
    L = ledger(rep.minimizer, rep.potential, rep.c0)
    (out / f"{name}_ledger.csv").write_text(f"# config_hash={cfg.hash()}\n" + L.to_csv())


def _states(cfg: RunConfig):
    pot = cfg.potential()
    c0, v0 = compute_c0(pot, n=cfg["grid.n"], N=cfg["grid.N"], seed=cfg["seed"])
    return periodic_states(pot, cfg["grid.n"], cfg["grid.N"], c0, v0)


def _heteroclinics(cfg, states, store):
    pot, hg = cfg.potential(), cfg.hetero_grid()
    kw = {"gtol": cfg["solver.gtol"], "max_iters": cfg["solver.max_iters"]}
    return (solve_heteroclinic(pot, hg, "up", states=states, store=store, key="hetero_up", **kw),
            solve_heteroclinic(pot, hg, "down", states=states, store=store, key="hetero_down",
                               **kw))


def _load_report(out: Path, name: str, cfg: RunConfig, states) -> SolveReport:
    path = out / f"{name}.json"
    if not path.exists():
        raise ConfigurationError(f"missing stored report {path}; run the producing command first")
    d = json.loads(path.read_text())
    if d.get("config_hash") != cfg.hash():
        raise ConfigurationError(f"{path.name} was produced by another configuration")
    U = load_field(out / f"{name}_field")
    return SolveReport.from_json_dict(d, U, states.v0(U.grid), cfg.potential())


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------

def cmd_cell(cfg: RunConfig, out: Path, store) -> int:
    pot = cfg.potential()
    c0, v0 = compute_c0(pot, n=cfg["grid.n"], N=cfg["grid.N"], seed=cfg["seed"])
    write_json(out / "cell.json", _tagged({"c0": c0, "minimizer_max_abs": float(np.max(np.abs(v0.full()))),
                                           "potential": pot.to_dict(), "N": cfg["grid.N"],
                                           "n": cfg["grid.n"]}, cfg))
    dump_field(v0, out / "cell_field", {"config_hash": cfg.hash()})
    print(f"c0 = {c0:.17g}")
    return EXIT_OK


def cmd_hetero(cfg: RunConfig, out: Path, store) -> int:
    states = _states(cfg)
    up, down = _heteroclinics(cfg, states, store)
    _write_report(out, "hetero_up", up, cfg)
    _write_report(out, "hetero_down", down, cfg)
    print(f"c1(v0,w0) = {up.objective:.17g}")
    print(f"c1(w0,v0) = {down.objective:.17g}")
    print(f"sum = {up.objective + down.objective:.17g}")
    return EXIT_OK


def cmd_multi(cfg: RunConfig, out: Path, store) -> int:
    pot, spec = cfg.potential(), cfg.spec()
    states = _states(cfg)
    het = _heteroclinics(cfg, states, store)
    rep = solve_multitransition(pot, cfg.grid(), spec, states=states, heteroclinics=het,
                                pad=cfg["grid.pad"], store=store, key="multi",
                                **cfg.solver_kw())
    C1 = estimate_C1(pot, cfg["verify.C1_samples"], n=cfg["grid.n"], N=cfg["grid.N"],
                     v0=states.v0(GridSpec(cfg["grid.n"], 0, 4, cfg["grid.N"])), c0=states.c0,
                     seed=cfg["seed"])
    lower = het[0].objective + het[1].objective
    scan = scan_geometry(pot, spec.rho[0], n=cfg["grid.n"], N=cfg["grid.N"], pad=cfg["grid.pad"],
                         states=states, heteroclinics=het, **cfg.solver_kw())
    extra = {"c1_sum": lower, "C1_estimate": C1, "glue_bound": 8 * spec.K * C1,
             "geometry_scan": scan}
    _write_report(out, "hetero_up", het[0], cfg)
    _write_report(out, "hetero_down", het[1], cfg)
    _write_report(out, "multi", rep, cfg, extra)
    print(f"b = {rep.objective:.17g}")
    print(f"c1 + c1' = {lower:.17g}")
    print(f"min margin = {rep.min_margin:.6g}  strictly inactive = {rep.strictly_inactive}")
    print(f"pde residual = {rep.pde_residual:.3e}")
    print(f"smallest strictly inactive geometry tested = {scan['smallest_passing']}")
    return EXIT_OK


def cmd_infinite(cfg: RunConfig, out: Path, store) -> int:
    pot = cfg.potential()
    states = _states(cfg)
    het = _heteroclinics(cfg, states, store)
    res = approximate_infinite(pot, cfg["infinite.mode"], cfg.spec(), cfg["infinite.K_list"],
                               tuple(cfg["infinite.window"]), n=cfg["grid.n"], N=cfg["grid.N"],
                               pad=cfg["grid.pad"], period=cfg["infinite.period"],
                               states=states, heteroclinics=het, store=store,
                               **cfg.solver_kw())
    summary = {"mode": res.mode, "K_list": list(res.K_list), "window": list(res.window),
               "cauchy": [{"K": a, "K_next": b, "diff": d} for a, b, d in res.cauchy],
               "window_to_v0": res.window_to_v0,
               "objectives": [r.objective for r in res.reports],
               "min_margins": [r.min_margin for r in res.reports],
               "pde_residuals": [r.pde_residual for r in res.reports]}
    write_json(out / "infinite.json", _tagged(summary, cfg))
    (out / "cauchy.csv").write_text(f"# config_hash={cfg.hash()}\n" + res.cauchy_csv())
    for K, rep in zip(res.K_list, res.reports):
        _write_report(out, f"infinite_K{K}", rep, cfg)
    for a, b, d in res.cauchy:
        print(f"K={a}->{b}: window difference {d:.3e}")
    for K, d in zip(res.K_list, res.window_to_v0):
        print(f"K={K}: window distance to v0 {d:.3e}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: Path, store) -> int:
    pot = cfg.potential()
    states = _states(cfg)
    up = _load_report(out, "hetero_up", cfg, states)
    down = _load_report(out, "hetero_down", cfg, states)
    multi = _load_report(out, "multi", cfg, states) if (out / "multi.json").exists() else None
    results = run_battery(pot, up, down, multi, local_trials=cfg["verify.local_trials"],
                          seed=cfg["seed"])
    for r in results:
        r.context["config_hash"] = cfg.hash()
        print(r.line())
    (out / "verify.json").write_text(dumps([r.to_dict() for r in results]))
    ok = battery_passed(results)
    print("battery:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_report(cfg: RunConfig, out: Path, store) -> int:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    sidecars = sorted(p for p in out.glob("*_field.json"))
    if not sidecars:
        raise ConfigurationError(f"no field dumps in {out}")
    pot = cfg.potential()
    states = _states(cfg)
    written = []
    for side in sidecars:
        name = side.name[:-len("_field.json")]
        u = load_field(side)
        x = u.grid.x1
        prof = u.full().reshape(u.grid.n1, -1).mean(axis=1)
        fig, ax = plt.subplots(figsize=(7, 3))
        ax.plot(x, prof, lw=1.2)
        ax.set_xlabel("x1")
        ax.set_ylabel("u (transverse mean)")
        ax.set_title(f"{name}  [{cfg.hash()}]", fontsize=9)
        fig.tight_layout()
        png = out / f"{name}_profile.png"
        fig.savefig(png, dpi=120, metadata={"Software": None})
        plt.close(fig)
        written.append(png.name)
        if not u.grid.periodic:
            L = ledger(u, pot, states.c0)
            (out / f"{name}_ledger.csv").write_text(f"# config_hash={cfg.hash()}\n" + L.to_csv())
            write_json(out / f"{name}_ledger.json", _tagged(L.header(), cfg))
            written += [f"{name}_ledger.csv", f"{name}_ledger.json"]
    write_json(out / "report_index.json", _tagged({"files": written}, cfg))
    for w in written:
        print(w)
    return EXIT_OK


HANDLERS = {"cell": cmd_cell, "hetero": cmd_hetero, "multi": cmd_multi,
            "infinite": cmd_infinite, "verify": cmd_verify, "report": cmd_report}


# ----------------------------------------------------------------------------
# driver
# ----------------------------------------------------------------------------

def _limit_threads(threads: int | None):
    if threads is None:
        env = os.environ.get("MBLAB_THREADS")
        threads = int(env) if env else None
    if threads is None:
        return None
    if threads < 1:
        raise ConfigurationError("--threads must be positive")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=threads)


def _run_command(command: str, cfg: RunConfig, out: Path, stop_after: int | None) -> int:
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(f"# config_hash={cfg.hash()}\n" + cfg.to_text())
    run = {"command": command, "config_hash": cfg.hash(), "status": "running"}
    write_json(out / "run.json", run)
    store = CheckpointStore(out, cfg.hash(), stop_after)
    try:
        code = HANDLERS[command](cfg, out, store)
    except Interrupted:
        run["status"] = "interrupted"
        write_json(out / "run.json", run)
        raise
    run["status"] = "complete"
    run["exit_code"] = code
    write_json(out / "run.json", run)
    return code


def _resume(run_dir: Path, args) -> int:
    try:
        run = json.loads((run_dir / "run.json").read_text())
        text = (run_dir / "config.txt").read_text()
    except (OSError, ValueError) as err:
        raise ConfigurationError(f"no resumable run in {run_dir}: {err}") from None
    cfg = parse_config(text, source=str(run_dir / "config.txt"))
    if args.config is not None or args.set or args.seed is not None:
        overrides = list(args.set or ())
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        if load_config(args.config, overrides).hash() != run.get("config_hash"):
            raise ConfigurationError("config hash does not match the stored run")
    if cfg.hash() != run.get("config_hash"):
        raise ConfigurationError("config.txt does not match the stored run's config hash")
    if run.get("status") == "complete":
        print(f"run in {run_dir} already complete")
        return EXIT_OK
    if run.get("command") not in HANDLERS:
        raise ConfigurationError(f"unknown command {run.get('command')!r} in run.json")
    return _run_command(run["command"], cfg, run_dir, None)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mblab", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key (repeatable)")
    common.add_argument("--out", default="run", help="run directory (default: ./run)")
    common.add_argument("--threads", type=int, help="BLAS thread limit (env MBLAB_THREADS)")
    common.add_argument("--seed", type=int, help="overrides the 'seed' key")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for c in COMMANDS:
        sub.add_parser(c, parents=[common], help=f"run the {c} stage")
    r = sub.add_parser("resume", parents=[common], help="continue an interrupted run")
    r.add_argument("run_dir")
    return p


def _error(code: int, err: BaseException) -> int:
    sys.stderr.write(json.dumps({"error": type(err).__name__, "message": str(err),
                                 "exit_code": code}) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    limiter = None
    try:
        limiter = _limit_threads(args.threads)
        if args.command == "resume":
            return _resume(Path(args.run_dir), args)
        overrides = list(args.set)
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        cfg = load_config(args.config, overrides)
        return _run_command(args.command, cfg, Path(args.out), cfg["solver.stop_after"])
    except Interrupted as err:
        return _error(EXIT_INTERRUPTED, err)
    except (ConfigurationError, RangeError, ShapeError) as err:
        return _error(EXIT_CONFIG, err)
    except ConvergenceError as err:
        return _error(EXIT_CONVERGENCE, err)
    except MBLabError as err:
        return _error(EXIT_CONVERGENCE, err)
    finally:
        if limiter is not None:
            limiter.restore_original_limits()


if __name__ == "__main__":
    sys.exit(main())
