"""Command-line entry point: ``occfluct {simulate-system, simulate-limit, verify, regimes}``.

Exit codes: 0 ok, 2 configuration or regime error, 3 resource error
(partial results are written and flagged in the manifest).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__, branching, fluctuations, limit_processes, verification
from .config import ConfigError, ScenarioConfig, load_config
from .errors import DomainError, ResourceError
from .stable_core import MotionSpec
from .testfunctions import scaled

__all__ = ["main", "run_system", "run_limit", "read_config_hash", "check_consistent_hashes"]

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE = 0, 2, 3
PATH_COLUMNS = ("replica", "t", "process", "value", "regime", "K")


def _g(x) -> str:
    return f"{float(x) + 0.0:.17g}"   # no negative zero


def _versions() -> dict:
    return {"occfluct": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, cfg: ScenarioConfig, command: str, files, partial=False, extra=None):
    manifest = {"command": command, "config_hash": cfg.config_hash, "seed": cfg.seed,
                "versions": _versions(), "partial": bool(partial),
                "files": {p.name: _sha256(p) for p in files}}
    manifest.update(extra or {})
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _dump_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_config_hash(path) -> str | None:
    """The config hash carried by an output file (CSV comment line or JSON key)."""
    path = Path(path)
    with open(path) as fh:
        first = fh.readline()
    if first.startswith("# config_hash="):
        return first.strip().split("=", 1)[1]
    if path.suffix == ".json":
        return json.loads(path.read_text()).get("config_hash")
    return None


def check_consistent_hashes(paths) -> str | None:
    """Refuse to combine outputs produced by different configurations."""
    hashes = {str(p): read_config_hash(p) for p in paths}
    distinct = {h for h in hashes.values() if h is not None}
    if len(distinct) > 1:
        detail = ", ".join(f"{p}={h[:12] if h else None}" for p, h in hashes.items())
        raise ConfigError(f"outputs come from different configurations: {detail}")
    missing = [p for p, h in hashes.items() if h is None]
    if missing:
        raise ConfigError(f"outputs without a config hash: {', '.join(missing)}")
    return distinct.pop() if distinct else None


# ---------------------------------------------------------------------------
# system simulation


def _system_spec(cfg: ScenarioConfig) -> branching.SystemSpec:
    return branching.SystemSpec(MotionSpec(cfg.alpha, cfg.d), branching.OffspringLaw(cfg.beta), cfg.V,
                                branching.Domain(cfg.L, cfg.d, cfg.torus), time_step=cfg.h,
                                max_particles=cfg.max_particles)


def _phis(cfg: ScenarioConfig):
    return [tf.build(cfg.d, cfg.L) for tf in cfg.test_functions]


def _plans(cfg: ScenarioConfig):
    return [fluctuations.RegimePlan(cfg.d, cfg.alpha, cfg.beta, cfg.V, float(T)) for T in cfg.T]


def _run_replica(cfg: ScenarioConfig, replica: int) -> branching.Trajectory:
    spec = _system_spec(cfg)
    rng = branching.replica_rng(cfg.seed, replica)
    tau_w = branching.default_warmup(spec) if cfg.tau_w is None else cfg.tau_w
    start = branching.init_poisson(spec.domain, rng)
    try:
        start = branching.warmup_to_equilibrium(spec, start, tau_w, rng)
    except ResourceError as exc:
        exc.partial = None      # nothing recorded yet for this replica
        raise
    return branching.simulate_occupation(spec, start, max(cfg.T), _phis(cfg), rng, replica=replica)


def _gather(cfg: ScenarioConfig):
    """Run all replicas (optionally in a process pool) and return them in replica order.

    On a resource error the completed replicas and the partial one are
    returned together with the error.
    """
    done, error = {}, None
    if cfg.workers <= 1 or cfg.replicas <= 1:
        for i in range(cfg.replicas):
            try:
                done[i] = _run_replica(cfg, i)
            except ResourceError as exc:
                error = exc
                if exc.partial is not None:
                    done[i] = exc.partial
                break
    else:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = {i: pool.submit(_run_replica, cfg, i) for i in range(cfg.replicas)}
            for i, fut in futures.items():
                try:
                    done[i] = fut.result()
                except ResourceError as exc:
                    error = error or exc
                    if exc.partial is not None:
                        done[i] = exc.partial
    return [done[i] for i in sorted(done)], error


def run_system(cfg: ScenarioConfig, out: Path) -> int:
    """Trajectory and fluctuation CSVs, a summary JSON and the manifest under ``out``."""
    plans = _plans(cfg)                      # regime and horizon checks before any work
    _system_spec(cfg)
    out.mkdir(parents=True, exist_ok=True)
    trajs, error = _gather(cfg)
    complete = [tr for tr in trajs if tr.complete]
    phis, ids = _phis(cfg), [tf.name for tf in cfg.test_functions]
    tag = f"config_hash={cfg.config_hash}"
    files = []
    samples = {p.T: [fluctuations.build_fluctuation(tr, p, phis, cfg.grid, cfg.seed, ids) for tr in complete]
               for p in plans}
    if "csv" in cfg.formats:
        path = out / "trajectory.csv"
        branching.write_trajectory_csv(path, trajs, ids, comment=tag)
        files.append(path)
        path = out / "fluctuation.csv"
        with open(path, "w", newline="") as fh:
            fh.write(f"# {tag}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("T",) + fluctuations.FLUCTUATION_COLUMNS)
            for p in plans:
                for s in samples[p.T]:
                    for j, name in enumerate(s.phi_ids):
                        for t, x in zip(s.t, s.values[j]):
                            w.writerow([_g(p.T), s.replica, _g(t), name, _g(x), p.regime, _g(p.F_T)])
        files.append(path)
    if "json" in cfg.formats:
        path = out / "summary.json"
        _dump_json(path, {"config_hash": cfg.config_hash, "partial": error is not None,
                          "horizons": [fluctuations.fluctuation_summary(samples[p.T], p) for p in plans]})
        files.append(path)
    extra = {"replicas_requested": cfg.replicas, "replicas_complete": len(complete)}
    if error is not None:
        extra["error"] = str(error)
    _write_manifest(out, cfg, "simulate-system", files, partial=error is not None, extra=extra)
    if error is not None:
        print(f"resource error: {error}; partial results in {out}", file=sys.stderr)
        return EXIT_RESOURCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# limit processes


def _limit_tables(cfg: ScenarioConfig, samples: int):
    """(regime, K, paths, times, char-fn entries) for the configured mode."""
    mode = cfg.mode
    times = np.array(sorted(set(float(t) for t in cfg.times)))
    rng = branching.replica_rng(cfg.seed, 0)
    regime = fluctuations.classify_regime(cfg.d, cfg.alpha, cfg.beta)
    q = 1.0 + cfg.beta
    entries = []
    if mode in ("eta", "eta1", "eta2"):
        proc = limit_processes.LimitProcess(cfg.d, cfg.alpha, cfg.beta, mode)
        K = limit_processes.theorem_constants(regime, cfg.d, cfg.alpha, cfg.beta, cfg.V).value
        paths = (limit_processes.eta_path(times, cfg.d, cfg.alpha, cfg.beta, mode, rng, size=samples,
                                          level=cfg.level) if samples else np.empty((0, times.size)))
        level = max(cfg.level, 2)
        for t in times:
            for z in cfg.z:
                val = proc.charfn([t], [z], level=level) if t > 0 else 1.0 + 0j
                entries.append((t, z, val, f"quadrature level {level}"))
        return regime, K, paths, times, entries
    if mode == "xi":
        if regime != fluctuations.CRITICAL:
            raise fluctuations.RegimeError(f"xi needs the critical dimension, got the {regime} regime")
        K = limit_processes.theorem_constants(regime, cfg.d, cfg.alpha, cfg.beta, cfg.V).value
        paths = limit_processes.xi_sample(times, cfg.beta, rng, size=samples)
        for t in times:
            for z in cfg.z:
                entries.append((t, z, complex(limit_processes.xi_charfn(t, z, cfg.beta)), "closed form"))
        return regime, K, paths, times, entries
    # sdsm: <X(t), phi> is a (1+beta)-stable motion with scale (K^q int (G phi)^q)^(1/q)
    if regime != fluctuations.LARGE:
        raise fluctuations.RegimeError(f"sdsm needs d > alpha(1+beta)/beta, got the {regime} regime")
    phi = _phis(cfg)[0]
    K = limit_processes.theorem_constants(regime, cfg.d, cfg.alpha, cfg.beta, cfg.V).value
    c = limit_processes.sdsm_exponent(phi, 1.0, cfg.d, cfg.alpha, cfg.beta, cfg.V).real ** (1.0 / q)
    paths = c * limit_processes.xi_sample(times, cfg.beta, rng, size=samples)
    for t in times:
        for z in cfg.z:
            val = limit_processes.sdsm_charfn(scaled(phi, z), t, cfg.d, cfg.alpha, cfg.beta, cfg.V)
            entries.append((t, z, val, f"quadrature, test function {cfg.test_functions[0].name}"))
    return regime, K, paths, times, entries


def run_limit(cfg: ScenarioConfig, out: Path, samples: int | None = None) -> int:
    """Path CSV (replica, t, process, value, regime, K) and the analytic char-fn JSON."""
    samples = cfg.samples if samples is None else samples
    regime, K, paths, times, entries = _limit_tables(cfg, samples)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if "csv" in cfg.formats:
        path = out / "paths.csv"
        with open(path, "w", newline="") as fh:
            fh.write(f"# config_hash={cfg.config_hash}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(PATH_COLUMNS)
            for i, row in enumerate(paths):
                for t, x in zip(times, row):
                    w.writerow([i, _g(t), cfg.mode, _g(x), regime, _g(K)])
        files.append(path)
    if "json" in cfg.formats:
        path = out / "charfn.json"
        _dump_json(path, {"config_hash": cfg.config_hash, "mode": cfg.mode, "regime": regime, "K": K,
                          "entries": [{"t": float(t), "z": float(z), "re": float(v.real), "im": float(v.imag),
                                       "method": m} for t, z, v, m in entries]})
        files.append(path)
    _write_manifest(out, cfg, "simulate-limit", files, extra={"samples": samples, "mode": cfg.mode})
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify and regimes


def run_verify(suite: str, out: Path | None, fmt: str | None, replicas_factor: float, inputs) -> int:
    if inputs:
        h = check_consistent_hashes(inputs)
        print(f"inputs share config hash {h}")
    report = verification.run_suite(suite, replicas_factor=replicas_factor, echo=print)
    passed = sum(c["status"] == verification.PASS for c in report["criteria"])
    print(f"suite {suite}: {passed}/{len(report['criteria'])} passed")
    if "regime_table" in report:
        _print_regimes(report["regime_table"], "text")
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if fmt in (None, "json"):
            _dump_json(out / f"verify_{suite}.json", report)
        if fmt in (None, "csv"):
            with open(out / f"verify_{suite}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(("criterion", "name", "status", "measured", "tolerance", "runtime"))
                for c in report["criteria"]:
                    w.writerow((c["number"], c["name"], c["status"], json.dumps(c["measured"], sort_keys=True),
                                c["tolerance"], _g(c["runtime"])))
    return EXIT_OK


def _print_regimes(rows, fmt: str, stream=None):
    stream = stream or sys.stdout
    if fmt == "json":
        stream.write(json.dumps(rows, indent=2) + "\n")
        return
    if fmt == "csv":
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(("regime", "dimensions", "process", "family", "convergence", "F_T"))
        for r in rows:
            w.writerow((r["regime"], r["dimensions"], r["process"], r["family"], "; ".join(r["convergence"]), r["F_T"]))
        return
    for r in rows:
        stream.write(f"{r['regime']:12s} {r['dimensions']:38s} {r['process']:13s} {r['family']:8s} "
                     f"{', '.join(r['convergence']):31s} F_T = {r['F_T']}\n")


def run_regimes(fmt: str | None, out: Path | None, cfg: ScenarioConfig | None) -> int:
    rows = fluctuations.regime_table()
    fmt = fmt or "text"
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        buf = io.StringIO()
        _print_regimes(rows, "csv" if fmt == "csv" else "json", buf)
        (out / f"regimes.{'csv' if fmt == 'csv' else 'json'}").write_text(buf.getvalue())
    _print_regimes(rows, fmt)
    if cfg is not None:
        for T in cfg.T:
            plan = fluctuations.RegimePlan(cfg.d, cfg.alpha, cfg.beta, cfg.V, float(T))
            print(f"config: d={cfg.d} alpha={cfg.alpha:g} beta={cfg.beta:g} -> {plan.regime}, "
                  f"T={T:g}, F_T={plan.F_T:.17g}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="scenario file (INI sections)")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--replicas", type=int, help="override replica / sample count")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--format", choices=("csv", "json"), help="write only this format")
    p = argparse.ArgumentParser(prog="occfluct", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"occfluct {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("simulate-system", parents=[common], help="branching particle system runs")
    s.add_argument("--workers", type=int, help="override [run] workers")
    sub.add_parser("simulate-limit", parents=[common], help="limit-process samples and char-fn tables")
    v = sub.add_parser("verify", parents=[common], help="run an acceptance suite")
    v.add_argument("suite", choices=sorted(verification.SUITES))
    v.add_argument("--replicas-factor", type=float, default=1.0,
                   help="scale Monte Carlo sizes; < 1 widens bands and softens failures")
    v.add_argument("--inputs", nargs="*", type=Path, default=(),
                   help="output files that must share one config hash")
    sub.add_parser("regimes", parents=[common], help="print the regime table")
    return p


def _load(args, need: bool) -> ScenarioConfig | None:
    if args.config is None:
        if need:
            raise ConfigError(f"{args.command} needs --config PATH")
        return None
    cfg = load_config(args.config)
    over = {"seed": args.seed, "directory": str(args.out) if args.out else None,
            "formats": (args.format,) if args.format else None,
            "workers": getattr(args, "workers", None)}
    if args.replicas is not None:
        over["replicas" if args.command == "simulate-system" else "samples"] = args.replicas
    return cfg.with_overrides(**over)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "simulate-system":
            cfg = _load(args, need=True)
            return run_system(cfg, Path(cfg.directory))
        if args.command == "simulate-limit":
            cfg = _load(args, need=True)
            return run_limit(cfg, Path(cfg.directory))
        if args.command == "verify":
            if args.replicas_factor <= 0 or not math.isfinite(args.replicas_factor):
                raise ConfigError("--replicas-factor must be positive")
            return run_verify(args.suite, args.out, args.format, args.replicas_factor, args.inputs)
        return run_regimes(args.format, args.out, _load(args, need=False))
    except (ConfigError, DomainError) as exc:     # RegimeError is a DomainError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
