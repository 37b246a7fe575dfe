"""Command-line entry point.

Exit codes: 0 success, 1 domain failure (collision), 2 usage or config
error, 3 solver hard failure (more than half of the steps not converged).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import geometry as geo
from . import sim
from .planner import MODES
from .setlearn import SetLearner

EXIT_OK, EXIT_COLLISION, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("reachplan")


class UsageError(Exception):
    pass


def _read_config(path):
    if path is None:
        return {}, "", "<defaults>"
    p = Path(path)
    if not p.exists() and (sim.CONFIG_DIR / f"{path}.json").exists():
        p = sim.CONFIG_DIR / f"{path}.json"
    try:
        raw = p.read_bytes()
        data = json.loads(raw.decode("utf-8"))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read config {path}: {e}") from e
    if not isinstance(data, dict):
        raise UsageError("config must be a JSON object")
    return data, hashlib.sha256(raw).hexdigest(), str(p)


def _write(out: Path, name: str, text: str):
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8", newline="")


def _manifest(out: Path, args, cfg_path, cfg_hash, seed, modes, t0=None):
    m = {"command": args.command, "config": cfg_path, "config_sha256": cfg_hash,
         "seed": seed, "version": __version__, "modes": list(modes), "out": str(out)}
    if t0 is not None:
        m["wall_time_s"] = round(time.time() - t0, 3)
    _write(out, "manifest.json", json.dumps(m, indent=2) + "\n")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _g(x) -> str:
    return format(float(x), ".10g")


# --------------------------------------------------------------------------


def cmd_learn_demo(args) -> int:
    cfg, h, path = _read_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    rng = np.random.default_rng(seed)
    adm = sim._admissible(cfg.get("admissible", {"hexagon": 1.0}))
    if "samples" in cfg:
        stream = np.asarray(cfg["samples"], dtype=float).reshape(-1, adm.n_u)
    else:
        st = cfg.get("stream", {})
        stream = sim.switch_stream(adm, int(st.get("length", 100)), int(st.get("switch", 50)),
                                   float(st.get("mild", 0.2)), float(st.get("aggressive", 0.9)), rng)
    if stream.shape[0] == 0:
        raise UsageError("sample stream is empty")
    if not all(adm.contains(u) for u in stream):
        raise UsageError("sample stream leaves the admissible set")
    window = int(cfg.get("window", 30))
    learners = {m: SetLearner(adm, method=m, window=window) for m in ("batch", "recursive", "moving")}
    rows = []
    for t, u in enumerate(stream, start=1):
        for m, lr in learners.items():
            s = lr.update(u)
            rows.append([t, m, _g(s.area()), _g(s.rho), _g(s.objective), _g(u[0]), _g(u[1])])
    out = Path(args.out)
    _write(out, "learn.csv", _csv(["t", "method", "area", "rho", "objective", "u0", "u1"], rows))
    if args.emit_polytopes:
        sets = {m: lr.learned.to_dict() for m, lr in learners.items()}
        _write(out, "learned_sets.json", geo.dumps(sets) + "\n")
    _manifest(out, args, path, h, seed, [])
    final = {m: lr.learned.area() for m, lr in learners.items()}
    print("final areas: " + ", ".join(f"{m}={a:.4f}" for m, a in final.items()))
    return EXIT_OK


def cmd_reach_demo(args) -> int:
    cfg, h, path = _read_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    N = int(cfg.get("N", 10))
    if N < 1:
        raise UsageError("horizon must be at least 1")
    res = sim.reach_coverage(delta_max=float(cfg.get("delta_max", 0.2)),
                             eta_max=float(cfg.get("eta_max", 0.4)),
                             warmup=int(cfg.get("warmup", 100)),
                             rollouts=int(cfg.get("rollouts", 200)), N=N,
                             T=float(cfg.get("T", 0.25)), seed=seed)
    out = Path(args.out)
    rows = [[r, i, _g(p[0]), _g(p[1])] for r, tr in enumerate(res.trajectories)
            for i, p in enumerate(tr)]
    _write(out, "trajectories.csv", _csv(["rollout", "i", "x", "y"], rows))
    rows = [[i + 1, j, _g(v[0]), _g(v[1])] for i, O in enumerate(res.occupancies)
            for j, v in enumerate(O.vertices)]
    _write(out, "occupancy.csv", _csv(["i", "vertex", "x", "y"], rows))
    _manifest(out, args, path, h, seed, [])
    print(f"coverage at end of horizon: {res.fraction:.3f}")
    return EXIT_OK


def _scenario(cfg, path):
    if not cfg:
        raise UsageError("a scenario config is required")
    try:
        return sim.scenario_from_dict(cfg)
    except (sim.ScenarioError, ValueError) as e:
        raise UsageError(f"bad scenario {path}: {e}") from e


def cmd_run(args) -> int:
    cfg, h, path = _read_config(args.config)
    scn = _scenario(cfg, path)
    seed = args.seed if args.seed is not None else scn.seed
    out = Path(args.out)
    t0 = time.time()
    _manifest(out, args, path, h, seed, [args.mode])
    tr = sim.run_closed_loop(scn, args.mode, seed, emit_polytopes=args.emit_polytopes)
    m = sim.evaluate(tr, scn)
    _write(out, "trace.csv", tr.to_csv())
    _write(out, "trace.json", json.dumps(tr.to_dict(args.emit_polytopes)) + "\n")
    _write(out, "metrics.json", json.dumps(m.to_dict(), indent=2) + "\n")
    _manifest(out, args, path, h, seed, [args.mode], t0)
    print(json.dumps(m.to_dict()))
    if m.steps and m.nonconverged > 0.5 * m.steps:
        return EXIT_SOLVER
    return EXIT_OK if m.collision_free else EXIT_COLLISION


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("REACHPLAN_THREADS", "1")))
    except ValueError:
        raise UsageError("REACHPLAN_THREADS must be an integer") from None


def cmd_monte_carlo(args) -> int:
    cfg, h, path = _read_config(args.config)
    scn = _scenario(cfg, path)
    modes = tuple(m.strip() for m in args.modes.split(",") if m.strip())
    bad = [m for m in modes if m not in MODES]
    if bad or not modes:
        raise UsageError(f"unknown mode(s): {', '.join(bad) or '(none)'}")
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    seed = args.seed if args.seed is not None else scn.seed
    out = Path(args.out)
    t0 = time.time()
    _manifest(out, args, path, h, seed, modes)
    recs, table = sim.monte_carlo(scn, args.n, modes, seed, workers=_threads())
    _write(out, "table.csv", sim.table_csv(table))
    _write(out, "runs.csv", sim.runs_csv(recs))
    _manifest(out, args, path, h, seed, modes, t0)
    sys.stdout.write(sim.table_csv(table))
    steps = sum(r.metrics.steps for r in recs)
    bad_steps = sum(r.metrics.nonconverged for r in recs)
    return EXIT_SOLVER if steps and bad_steps > 0.5 * steps else EXIT_OK


# --------------------------------------------------------------------------


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {s!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="reachplan", description="Robust motion planning with learned obstacle sets.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, out_default):
        sp.add_argument("--config", help="JSON config path or bundled config name")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", default=out_default)
        sp.add_argument("--emit-polytopes", type=_bool, default=False, metavar="BOOL")

    sp = sub.add_parser("learn-demo", help="compare batch, recursive and moving-horizon learning")
    common(sp, "out/learn")
    sp.set_defaults(func=cmd_learn_demo)
    sp = sub.add_parser("reach-demo", help="occupancy coverage of single-track rollouts")
    common(sp, "out/reach")
    sp.set_defaults(func=cmd_reach_demo)
    sp = sub.add_parser("run", help="one closed-loop simulation")
    common(sp, "out/run")
    sp.add_argument("--mode", default="proposed", choices=MODES)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("monte-carlo", help="Monte-Carlo comparison of planner modes")
    common(sp, "out/mc")
    sp.add_argument("--n", type=int, default=30)
    sp.add_argument("--modes", default=",".join(MODES))
    sp.set_defaults(func=cmd_monte_carlo)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command is None:
            raise UsageError("a subcommand is required (learn-demo, reach-demo, run, monte-carlo)")
        return args.func(args)
    except UsageError as e:
        print(f"reachplan: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
