"""``simbridge`` command line."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from pathlib import Path

from .errors import InputError, SimbridgeError, SimulationDiverged

EXIT_OK, EXIT_INPUT, EXIT_DIVERGED, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("simbridge")


def cache_dir():
    return Path(os.environ.get("SIM_CACHE_DIR", ".simcache"))


# -- subcommands --------------------------------------------------------------

def cmd_compile(args):
    from .mesh import DecompositionCache
    from .scene import load_scene
    from .spec import compile_scene, write_compiled

    scene = load_scene(args.scene)
    cache = DecompositionCache(cache_dir())
    spec = compile_scene(scene, cache, threshold=args.threshold, max_depth=args.max_depth,
                         workers=args.workers, hf_res=tuple(args.hf_res) if args.hf_res else None)
    files = write_compiled(spec, args.out_dir)
    return {
        "scene": files["scene"],
        "assets": sorted(files["meshes"].values()) + files["hfields"],
        "bodies": len(spec.bodies),
        "decompositions": cache.recompute_count,
        "cache_hits": cache.hit_count,
    }


def cmd_run(args):
    from .bench import BenchConfig
    from .runner import RunOptions, run_scene

    bench = None
    if args.bench:
        bench = BenchConfig.load(args.bench)
        if bench.timeout_s == float("inf"):
            bench.timeout_s = max(args.duration, bench.grace_s + bench.sample_interval_s)
    opts = RunOptions(duration=args.duration, hz=args.hz, realtime=args.realtime, bus_port=args.bus_port,
                      bench=bench, record_dir=args.record, out_dir=args.out, consumers=args.consumers)
    res = run_scene(args.scene, opts)
    return {
        "steps": res.steps,
        "sim_time": res.sim_time,
        "wall_s": round(res.wall_s, 3),
        "messages": res.messages,
        "bench_files": res.bench_files,
        "replay_files": res.replay_files,
        "checksum_failures": res.checksum_failures,
    }


def cmd_decompose(args):
    from .mesh import decompose_with_info, mesh_volume, read_obj, write_obj
    from .mesh.volume import concavity

    mesh = read_obj(args.mesh)
    mesh_volume(mesh)  # watertightness check with boundary edge listing
    res = decompose_with_info(mesh, threshold=args.threshold, max_depth=args.max_depth, workers=args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, part in enumerate(res.parts):
        p = out / f"part_{i:03d}.obj"
        p.write_text(write_obj(part, header=f"part {i}"), encoding="utf-8")
        files.append(str(p))
    report = {
        "source": str(args.mesh),
        "parts": len(res.parts),
        "converged": res.converged,
        "source_concavity": concavity(mesh),
        "leaf_concavities": res.leaf_concavities,
        "files": files,
    }
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if not res.converged:
        log.warning("depth limit reached before every part met the threshold")
    return report


def cmd_replay(args):
    from .bus import Bus, serve
    from .replay import load, replay

    streams = load(args.dir)
    bus = Bus()
    server = serve(bus, args.bus_port) if args.bus_port is not None else None
    try:
        rep = replay(bus, streams, speed=args.speed, flat_out=args.flat_out)
    finally:
        if server is not None:
            server.close()
    return {"counts": rep.counts, "total": rep.total, "wall_s": round(rep.wall_s, 3)}


def cmd_eval_ate(args):
    from .evaluation import evaluate_trajectory, load_trajectory

    r = evaluate_trajectory(load_trajectory(args.gt), load_trajectory(args.est), do_align=args.align, max_dt=args.max_dt)
    return {"ate": r.ate, "coverage": r.coverage, "scaled_ate": r.scaled_ate, "pairs": r.pairs, "scale": r.scale}


def cmd_eval_sc(args):
    from .evaluation import load_episodes, sc

    eps = load_episodes(args.episodes)
    return {"sc": sc(eps), "episodes": len(eps)}


def cmd_eval_imgstats(args):
    import math

    from .evaluation import cosine, kl, load_hist

    a, b = load_hist(args.a), load_hist(args.b)
    return {"cosine": cosine(a, b), "kl": kl(a, b, base=args.base if args.base else math.e)}


# -- parser ---------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="simbridge", description=__doc__)
    p.add_argument("--json", action="store_true", help="print a JSON result object")
    p.add_argument("--config", help="JSON file whose keys override flag defaults")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="scene JSON -> scene.xml + assets")
    c.add_argument("scene")
    c.add_argument("out_dir")
    c.add_argument("--threshold", type=float, default=0.05, help="decomposition concavity threshold")
    c.add_argument("--max-depth", type=int, default=6)
    c.add_argument("--hf-res", type=int, nargs=2, metavar=("NX", "NY"), help="override landscape resolution")
    c.add_argument("--workers", type=int, default=1)
    c.set_defaults(func=cmd_compile)

    r = sub.add_parser("run", help="simulate a compiled scene.xml")
    r.add_argument("scene")
    r.add_argument("--duration", type=float, default=1.0, help="simulated seconds")
    r.add_argument("--hz", type=float, default=1000.0, help="physics rate")
    r.add_argument("--realtime", action="store_true", help="pace to the wall clock")
    r.add_argument("--bus-port", type=int, nargs="?", const=7447, default=None,
                   help="serve the bus over TCP (default port 7447)")
    r.add_argument("--bench", help="benchmark config JSON")
    r.add_argument("--record", help="directory for recorded sensor streams")
    r.add_argument("--out", default="run_out", help="directory for CSVs and summary.json")
    r.add_argument("--consumers", type=int, default=0, help="in-process polling consumers to attach")
    r.set_defaults(func=cmd_run)

    d = sub.add_parser("decompose", help="convex decomposition of one OBJ")
    d.add_argument("mesh")
    d.add_argument("out_dir")
    d.add_argument("--threshold", type=float, default=0.05)
    d.add_argument("--max-depth", type=int, default=6)
    d.add_argument("--workers", type=int, default=1)
    d.set_defaults(func=cmd_decompose)

    rp = sub.add_parser("replay", help="republish recorded streams")
    rp.add_argument("dir")
    rp.add_argument("--speed", type=float, default=1.0)
    rp.add_argument("--flat-out", action="store_true", help="ignore recorded timing")
    rp.add_argument("--bus-port", type=int, nargs="?", const=7447, default=None)
    rp.set_defaults(func=cmd_replay)

    e = sub.add_parser("eval", help="offline metrics")
    es = e.add_subparsers(dest="metric", required=True)
    a = es.add_parser("ate", help="ATE, coverage and scaled ATE between two trajectory CSVs")
    a.add_argument("--gt", required=True)
    a.add_argument("--est", required=True)
    a.add_argument("--align", action=argparse.BooleanOptionalAction, default=True,
                   help="similarity-align est onto gt first (default on)")
    a.add_argument("--max-dt", type=float, default=0.02)
    a.set_defaults(func=cmd_eval_ate)
    s = es.add_parser("sc", help="success weighted by collision")
    s.add_argument("--episodes", required=True)
    s.set_defaults(func=cmd_eval_sc)
    i = es.add_parser("imgstats", help="cosine and KL between two histograms")
    i.add_argument("--a", required=True)
    i.add_argument("--b", required=True)
    i.add_argument("--base", type=float, default=None, help="log base for KL (default e)")
    i.set_defaults(func=cmd_eval_imgstats)
    return p


def _set_defaults(parser, cfg):
    # subparser defaults override the parent's, so push them all the way down
    parser.set_defaults(**cfg)
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sp in action.choices.values():
                _set_defaults(sp, cfg)


def _apply_config(parser, argv):
    """Two-pass parse so config-file values act as defaults and explicit flags still win."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: invalid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise InputError(f"{args.config}: config must be a JSON object")
    known = vars(args)
    cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
    unknown = sorted(k for k in cfg if k not in known)
    if unknown:
        raise InputError(f"{args.config}: unknown keys {unknown}")
    _set_defaults(parser, cfg)
    return parser.parse_args(argv)


def _emit(args, result):
    if args.json:
        print(json.dumps(result, indent=2, sort_keys=True, default=str))
        return
    for k, v in result.items():
        if isinstance(v, dict):
            for kk, vv in v.items():
                print(f"{k}.{kk}: {vv}")
        elif isinstance(v, list):
            print(f"{k}: {len(v)}")
            for item in v:
                print(f"  {item}")
        else:
            print(f"{k}: {v}")


def _fail(args, code, exc):
    kind = type(exc).__name__
    if getattr(args, "json", False):
        err = {"error": {"type": kind, "message": str(exc), "exit_code": code}}
        if isinstance(exc, SimulationDiverged):
            err["error"]["body"] = exc.body
        print(json.dumps(err, indent=2))
    print(f"simbridge: error: {kind}: {exc}", file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    args = None
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            result = args.func(args)
        _emit(args, result)
        return EXIT_OK
    except SimulationDiverged as exc:
        return _fail(args, EXIT_DIVERGED, exc)
    except InputError as exc:
        return _fail(args, EXIT_INPUT, exc)
    except OSError as exc:
        return _fail(args, EXIT_IO, exc)
    except SimbridgeError as exc:
        return _fail(args, exc.exit_code, exc)


if __name__ == "__main__":
    sys.exit(main())
