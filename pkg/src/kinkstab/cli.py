"""Command line entry point: ``kinkstab {profiles,verify,simulate,sweep}``.

Exit codes: 0 success, 1 a numerical check failed (shooting, decay, golden
value, NaN), 2 bad configuration.  All data and report files are written with
sorted keys and fixed float formatting so identical configs give identical
bytes; only ``manifest.json`` records wall-clock time.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from .diagnostics import Series, decay_verdict, inequality_monitors, write_series_csv
from .grid import Grid
from .profiles import ProfileDecayError, ShootingError, build_profiles, constants_report
from .simulator import ConfigError, SimConfig, SimulationDiverged, run
from .spectral import CoercivityError, verify_all

log = logging.getLogger("kinkstab")

OUT_ENV = "KINKSTAB_OUT"
EXIT_OK, EXIT_CHECK, EXIT_CONFIG = 0, 1, 2

DEFAULTS = {
    "profiles": {"L": 60.0, "n": 24001, "sharp_potential": "V2", "a_offset": 0.0},
    "verify": {"tolerance_scale": 1.0, "coercivity": True},
    "simulate": {"scenario": "phi4-modekick-0.05", "snapshots": 3},
    "sweep": {"scenarios": ["phi4-modekick-0.025", "phi4-modekick-0.05"], "workers": 1},
    "output": {"dir": "kinkstab-out"},
}

SCENARIO_RE = re.compile(r"^(phi4-modekick|phi4-gaussian|sg-wobbler)-([0-9]*\.?[0-9]+)$")


# --- config ------------------------------------------------------------------------

def load_config(path: str | None) -> dict:
    cfg = {k: dict(v) for k, v in DEFAULTS.items()}
    if path is None:
        return cfg
    try:
        with open(path, "rb") as fh:
            user = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    for section, vals in user.items():
        if not isinstance(vals, dict):
            raise ConfigError(f"top-level key {section!r} must be a [section]")
        cfg.setdefault(section, {}).update(vals)
    return cfg


def scenario_config(name: str, overrides: dict | None = None) -> SimConfig:
    m = SCENARIO_RE.match(name)
    if not m:
        raise ConfigError(f"unknown scenario {name!r}")
    kind, val = m.group(1), float(m.group(2))
    if kind == "phi4-modekick":
        base = SimConfig(initial="mode_kick", amplitude=val)
    elif kind == "phi4-gaussian":
        base = SimConfig(initial="gaussian_odd", amplitude=val)
    else:
        base = SimConfig(model="sine_gordon_full", initial="wobbler_snapshot", alpha=val,
                         amplitude=0.0)
    known = {f.name for f in fields(SimConfig)}
    extra = {k: v for k, v in (overrides or {}).items() if k in known}
    try:
        return base.with_(**extra).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def profile_grid(section: dict) -> Grid:
    try:
        return Grid(float(section["L"]), int(section["n"]))
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad profile grid: {exc}") from exc


# --- output helpers --------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if not math.isfinite(v) else v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _schema(name: str) -> dict:
    text = resources.files("kinkstab").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def write_json(path: Path, obj, schema: str | None = None) -> None:
    obj = _clean(obj)
    if schema:
        jsonschema.validate(obj, _schema(schema))
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_snapshot(path: Path, state) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "phi1", "phi2"])
        for row in zip(state.grid.x, state.phi1.values, state.phi2.values):
            w.writerow([repr(float(v)) for v in row])


class Session:
    """Collects outputs and writes the manifest on exit."""

    def __init__(self, sub: str, outdir: Path, config: dict):
        self.sub = sub
        self.out = outdir
        self.config = config
        self.outputs: list[str] = []
        self.checksum = None
        self.t0 = time.perf_counter()
        outdir.mkdir(parents=True, exist_ok=True)

    def path(self, rel: str) -> Path:
        p = self.out / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(rel)
        return p

    def finish(self, status: int, error: str | None = None) -> int:
        man = {
            "subcommand": self.sub,
            "config": self.config,
            "profile_checksum": self.checksum,
            "outputs": sorted(self.outputs),
            "wall_clock_s": time.perf_counter() - self.t0,
            "exit_status": status,
            "version": __version__,
        }
        if error:
            man["error"] = error
        write_json(self.out / "manifest.json", man, "manifest")
        return status


# --- subcommands -------------------------------------------------------------------

def _profiles(cfg: dict):
    p = cfg["profiles"]
    return build_profiles(profile_grid(p), str(p["sharp_potential"]), float(p["a_offset"]))


def cmd_profiles(cfg: dict, out: Path) -> int:
    s = Session("profiles", out, cfg)
    try:
        ps = _profiles(cfg)
    except (ShootingError, ProfileDecayError) as exc:
        log.error("%s", exc)
        return s.finish(EXIT_CHECK, str(exc))
    s.checksum = ps.checksum()
    written = ps.write_csv(out / "profiles")
    s.outputs.extend(str(Path(w).relative_to(out)) for w in written)
    write_json(s.path("constants.json"), constants_report(ps), "constants")
    return s.finish(EXIT_OK)


def _headroom(row):
    if row.get("expected") is None or row.get("tol") is None:
        return None
    return row["tol"] - abs(row["value"] - row["expected"])


def cmd_verify(cfg: dict, out: Path) -> int:
    s = Session("verify", out, cfg)
    v = cfg["verify"]
    scale = float(v["tolerance_scale"])
    if not scale > 0:
        raise ConfigError("tolerance scale must be positive")
    try:
        ps = _profiles(cfg)
        s.checksum = ps.checksum()
        checks = verify_all(ps, tolerance_scale=scale, coercivity=bool(v["coercivity"]))
    except ProfileDecayError as exc:
        checks = [{"name": "g_decay", "value": None, "passed": False, "error": str(exc)}]
    except (ShootingError, CoercivityError) as exc:
        checks = [{"name": type(exc).__name__, "value": None, "passed": False, "error": str(exc)}]
    for row in checks:
        row["headroom"] = _headroom(row)
    failed = [r["name"] for r in checks if not r["passed"]]
    report = {"passed": not failed, "failed": failed, "tolerance_scale": scale, "checks": checks}
    write_json(s.path("verify.json"), report, "verify")
    for r in checks:
        log.info("%-22s %-5s %s", r["name"], "ok" if r["passed"] else "FAIL", r.get("value"))
    if failed:
        msg = "failed checks: " + ", ".join(failed)
        print(msg, file=sys.stderr)
        return s.finish(EXIT_CHECK, msg)
    return s.finish(EXIT_OK)


def simulate_scenario(name: str, sim: SimConfig, profiles, outdir: Path, nsnap: int = 3,
                      kappa0=None, sigma=None) -> dict:
    """Run one scenario and write its files under ``outdir``; returns the report."""
    outdir.mkdir(parents=True, exist_ok=True)
    times = [sim.T * k / max(nsnap - 1, 1) for k in range(nsnap)] if nsnap > 0 else []
    t_start = 0.0
    if sim.model == "sine_gordon_full":
        t_start = sim.t0 if sim.t0 else np.pi / (2 * sim.alpha)
    res = run(sim, profiles, kappa0, sigma, snapshot_times=[t_start + t for t in times])
    files = []
    write_series_csv(outdir / "diagnostics.csv", res.records)
    files.append("diagnostics.csv")
    (outdir / "snapshots").mkdir(exist_ok=True)
    for t, st in sorted(res.snapshots.items()):
        rel = f"snapshots/phi_t{t - t_start:010.4f}.csv"
        write_snapshot(outdir / rel, st)
        files.append(rel)
    series = Series.from_records(res.records)
    excl = [(sim.sponge_arrival + t_start, sim.T + t_start)] if sim.sponge_arrival < sim.T else []
    eps = sim.amplitude if sim.model == "phi4_perturbation" and sim.amplitude > 0 else None
    mon = inequality_monitors(series, kappa0, sigma, eps=eps, exclude=excl)
    verdict = decay_verdict(series)
    report = {
        "scenario": name,
        "verdict": verdict.to_dict(),
        "monitors": mon.to_dict(),
        "energy": {"E_full_initial": float(res.ledger.E_full[0]),
                   "relative_drift": res.ledger.relative_drift()},
        "orbital": {"initial_norm": res.initial_norm, "sup_norm": res.sup_norm},
    }
    write_json(outdir / "report.json", report, "simulate")
    files.append("report.json")
    report["files"] = files
    return report


def _sim_overrides(cfg: dict, args) -> dict:
    over = {k: v for k, v in cfg["simulate"].items() if k not in ("scenario", "snapshots", "kappa0", "sigma")}
    if args.grid_L is not None:
        over["L"] = args.grid_L
    if args.grid_n is not None:
        L = over.get("L", SimConfig.L)
        over["h"] = 2.0 * L / (args.grid_n - 1)
    return over


def cmd_simulate(cfg: dict, out: Path, args) -> int:
    s = Session("simulate", out, cfg)
    sc = cfg["simulate"]
    name = args.scenario or sc["scenario"]
    sim = scenario_config(name, _sim_overrides(cfg, args))
    s.config = dict(cfg, resolved_sim=sim.to_dict())
    ps = _profiles(cfg)
    s.checksum = ps.checksum()
    try:
        rep = simulate_scenario(name, sim, ps, out / name, int(sc["snapshots"]),
                                sc.get("kappa0"), sc.get("sigma"))
    except SimulationDiverged as exc:
        if exc.state is not None:
            write_snapshot(s.path(f"{name}/diverged_state.csv"), exc.state)
        return s.finish(EXIT_CHECK, str(exc))
    s.outputs.extend(f"{name}/{f}" for f in rep["files"])
    print(f"{name}: {rep['verdict']['verdict']}")
    return s.finish(EXIT_OK)


def _sweep_one(job):
    name, over, prof, outdir, nsnap = job
    ps = build_profiles(profile_grid(prof), str(prof["sharp_potential"]), float(prof["a_offset"]))
    sim = scenario_config(name, over)
    rep = simulate_scenario(name, sim, ps, Path(outdir) / name, nsnap)
    return name, rep


def cmd_sweep(cfg: dict, out: Path, args) -> int:
    s = Session("sweep", out, cfg)
    sw = cfg["sweep"]
    names = list(sw["scenarios"])
    for n in names:
        scenario_config(n, _sim_overrides(cfg, args))  # validate all before running any
    jobs = [(n, _sim_overrides(cfg, args), cfg["profiles"], str(out), int(cfg["simulate"]["snapshots"]))
            for n in names]
    workers = max(1, int(sw.get("workers", 1)))
    try:
        if workers == 1:
            results = [_sweep_one(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_sweep_one, jobs))
    except SimulationDiverged as exc:
        return s.finish(EXIT_CHECK, str(exc))
    summary = {}
    for name, rep in results:
        s.outputs.extend(f"{name}/{f}" for f in rep.pop("files"))
        summary[name] = {"verdict": rep["verdict"]["verdict"], "H_ratio": rep["verdict"]["H_ratio"],
                         "z_ratio": rep["verdict"]["z_ratio"], "dtK_c": rep["monitors"]["dtK_c"],
                         "sup_norm": rep["orbital"]["sup_norm"]}
    write_json(s.path("sweep.json"), summary)
    return s.finish(EXIT_OK)


# --- entry -------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kinkstab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("profiles", "verify", "simulate", "sweep"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--out", help=f"output directory (env {OUT_ENV} also works)")
        sp.add_argument("--grid-L", type=float, dest="grid_L")
        sp.add_argument("--grid-n", type=int, dest="grid_n")
        sp.add_argument("--tolerance", type=float, help="scale factor on golden tolerances")
        sp.add_argument("--scenario", help="e.g. phi4-modekick-0.05, sg-wobbler-0.9")
        sp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.tolerance is not None:
            cfg["verify"]["tolerance_scale"] = args.tolerance
        if args.command in ("profiles", "verify"):
            if args.grid_L is not None:
                cfg["profiles"]["L"] = args.grid_L
            if args.grid_n is not None:
                cfg["profiles"]["n"] = args.grid_n
            profile_grid(cfg["profiles"])
        out = Path(args.out or os.environ.get(OUT_ENV) or cfg["output"]["dir"])
        if args.command == "profiles":
            return cmd_profiles(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out, args)
        return cmd_sweep(cfg, out, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ShootingError, ProfileDecayError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
