"""Command-line entry point: gen, plan, eval, ablate, srnc."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import evaluation as ev
from .cluster import crowd_index, make_cluster
from .geometry import dims_fit
from .graph import enumerate_cliques
from .planner import ClusterTrace, Planner, RequestError
from .pose import PickPose, check_collision, covers_hull
from .scene import CapacityError, SceneError, SceneLayout, load_scene, scene_to_dict

log = logging.getLogger("opos")

PLAN_VERSION = "opos-plan/1"


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON run configuration (version opos-config/1)")
    p.add_argument("--seed", type=int, help="base seed, overrides the config")
    p.add_argument("--jobs", type=int, help="worker processes (default: $OPOS_JOBS or CPU count)")
    p.add_argument("--predictor", choices=("oracle", "heuristic"))
    p.add_argument("--sigma", type=float, help="execution jitter in mm")
    p.add_argument("--hc", type=float, help="good-enough confidence threshold")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--object", help="catalog index name, e.g. cube_m_s")
    p.add_argument("-n", "--n-scenes", type=int, help="scenes per density")
    p.add_argument("--densities", type=int, nargs="+")
    p.add_argument("--k", type=int, nargs="+", dest="k_values", help="target counts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="opos", description="Only-pick-once multi-object grasp planning")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate scene files and a manifest")
    _add_common(g)

    p = sub.add_parser("plan", help="plan one pick on a scene file")
    p.add_argument("scene", type=Path)
    p.add_argument("--k", "-k", type=int, required=True, help="number of objects to pick")
    p.add_argument("--predictor", choices=("oracle", "heuristic"), default="oracle")
    p.add_argument("--hc", type=float, default=ev.DEFAULT_HC)
    p.add_argument("--out", type=Path, help="plan JSON path (default: <scene>.plan.json)")
    p.add_argument("--dump-clusters", action="store_true", help="print every clique with its fit result")
    p.add_argument(
        "--trace",
        choices=("quiet", "summary", "full"),
        default="full",
        help="quiet prints only the outcome, summary adds module counts, full adds one line per cluster",
    )
    p.add_argument("--quiet", "-q", dest="trace", action="store_const", const="quiet", help="same as --trace quiet")

    helps = {
        "eval": "run the evaluation protocol",
        "ablate": "compare planner variants",
        "srnc": "sweep the confidence threshold",
    }
    for name, text in helps.items():
        c = sub.add_parser(name, help=text)
        _add_common(c)
    return parser


def config_from_args(args, defaults: dict | None = None) -> ev.RunConfig:
    """Defaults, then the config file, then command-line flags."""
    data = dict(defaults or {})
    if args.config:
        data.update(ev.read_config_dict(args.config))
    overrides = {
        "object": args.object,
        "base_seed": args.seed,
        "predictor": args.predictor,
        "noise_sigma_mm": args.sigma,
        "h_c": args.hc,
        "output_dir": str(args.out) if args.out else None,
        "n_scenes": args.n_scenes,
        "densities": args.densities,
        "k_values": args.k_values,
        "jobs": args.jobs,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ev.RunConfig.from_dict(data)


def cmd_gen(cfg: ev.RunConfig) -> int:
    out = Path(cfg.output_dir)
    entries = []
    for density in cfg.densities:
        for i in range(cfg.n_scenes):
            scene = ev.make_scene(cfg, density, i)
            path = out / "scenes" / f"{cfg.object}_d{density}_{i:04d}.json"
            ev.write_atomic(path, json.dumps(scene_to_dict(scene), indent=1) + "\n")
            entries.append({"path": str(path.relative_to(out)), "object": cfg.object, "density": density, "seed": scene.seed})
    manifest = {"config": cfg.to_dict(), "scenes": entries}
    ev.write_atomic(out / "manifest.json", json.dumps(manifest, indent=1) + "\n")
    print(f"wrote {len(entries)} scenes and {out / 'manifest.json'}")
    return 0


def _fmt_vec(v) -> str:
    return "[" + ", ".join(f"{x:.3f}" for x in v) + "]"


def plan_to_dict(scene_path, k, h_c, predictor, result) -> dict:
    d = {
        "version": PLAN_VERSION,
        "scene": str(scene_path),
        "k": k,
        "h_c": h_c,
        "predictor": predictor,
        "outcome": result.outcome,
        "clusters_inspected": result.clusters_inspected,
    }
    if result.found:
        d.update(
            pose=result.pose.as_dict(),
            confidence=result.confidence,
            confidences=[float(c) for c in result.confidences],
            cluster=list(result.cluster),
        )
    return d


def validate_plan(plan: dict, scene: SceneLayout) -> list[str]:
    """Problems found when re-checking a saved plan against its scene."""
    if plan.get("outcome") != "found":
        return []
    pl = Planner(scene)
    p = plan["pose"]
    pose = PickPose(p["x_mm"], p["y_mm"], p["gamma_deg"])
    problems = []
    if check_collision(pose, scene, None, pl.gripper):
        problems.append("pose collides with an object or the bin")
    cl = make_cluster(plan["cluster"], scene)
    if not covers_hull(pose, cl.hull, pl.ega):
        problems.append("gripping area does not cover the cluster")
    return problems


def cmd_plan(args) -> int:
    scene = load_scene(args.scene)
    planner = Planner(scene)
    shape = planner.shape
    if not 1 <= args.k <= shape.max_pick:
        raise RequestError(f"k={args.k} outside 1..{shape.max_pick} for {shape.index_name}")
    say = (lambda *a: None) if args.trace == "quiet" else print
    g = planner.graph
    say(f"scene: {args.scene} ({len(scene)} x {shape.index_name}, bin {scene.bin_width:g}x{scene.bin_height:g} mm)")
    say(f"neighbor graph: H_d = {planner.h_d:.2f} mm, {g.n} nodes, {len(g.edges)} edges")
    clusters = planner.clusters
    say(f"cliques: {planner.n_cliques} enumerated, {len(clusters)} fit the {planner.ega.length_a:g}x{planner.ega.width_b:g} mm gripping area")
    if args.dump_clusters:
        rows = []
        for members in enumerate_cliques(g, 1):
            c = make_cluster(members, scene)
            fits = dims_fit(c.min_rect.length, c.min_rect.width, planner.ega.length_a, planner.ega.width_b)
            crowd = crowd_index(members, g, planner.h_d, shape.effective_width)
            rect = f"{c.min_rect.length:.1f}x{c.min_rect.width:.1f}"
            rows.append((" ".join(map(str, members)), str(c.order), str(crowd), rect, "yes" if fits else "no"))
        print(ev.format_table(("members", "order", "crowd", "rect", "fits"), rows))
    ranked = planner.candidates(args.k)
    say(f"ranked clusters for k={args.k}: {len(ranked)}")
    trace: list[ClusterTrace] = []
    result = planner.select(args.k, args.predictor, args.hc, trace=trace)
    if args.trace == "full":
        for i, t in enumerate(trace, 1):
            print(
                f"  #{i} members={list(t.members)} crowd={t.crowd_index} poses sampled={t.sampled} "
                f"collision-free={t.collision_free} predicted={t.predicted} best@k={t.best:.3f}"
            )
    if result.found:
        pose = result.pose
        say(f"prediction: {_fmt_vec(result.confidences)}")
        print(
            f"found: x={pose.x:.3f} y={pose.y:.3f} gamma={pose.gamma:g} confidence={result.confidence:.3f} "
            f"after {result.clusters_inspected} clusters"
        )
    else:
        print(f"unavailable after {result.clusters_inspected} clusters")
    out = args.out or args.scene.with_suffix(".plan.json")
    ev.write_atomic(out, json.dumps(plan_to_dict(args.scene, args.k, args.hc, args.predictor, result), indent=1) + "\n")
    say(f"plan written to {out}")
    return 0


def cmd_eval(cfg: ev.RunConfig) -> int:
    rows, records = ev.run_protocol(cfg)
    out = Path(cfg.output_dir)
    ev.write_atomic(out / "records.csv", ev.records_csv(records))
    ev.write_atomic(out / "summary.csv", ev.summary_csv(rows))
    table = ev.summary_table(rows)
    ev.write_atomic(out / "summary.txt", table + "\n")
    print(table)
    return 0


def cmd_ablate(cfg: ev.RunConfig) -> int:
    rows, records = ev.run_ablation(cfg)
    out = Path(cfg.output_dir)
    ev.write_atomic(out / "ablation_records.csv", ev.records_csv(records))
    ev.write_atomic(out / "ablation_summary.csv", ev.summary_csv(rows))
    table = ev.ablation_table(rows)
    ev.write_atomic(out / "ablation.txt", table + "\n")
    print(f"k={cfg.ablation_k}, cells are clusters inspected/OSR/ESR")
    print(table)
    return 0


def cmd_srnc(cfg: ev.RunConfig) -> int:
    points, records = ev.run_srnc(cfg)
    out = Path(cfg.output_dir)
    ev.write_atomic(out / "srnc_records.csv", ev.records_csv(records))
    text = ev.srnc_csv(points)
    ev.write_atomic(out / "srnc.csv", text)
    print(text, end="")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plan":
            return cmd_plan(args)
        # the one-hot oracle makes every threshold below 1 equivalent
        defaults = {"predictor": "heuristic"} if args.command == "srnc" else None
        cfg = config_from_args(args, defaults)
        return {"gen": cmd_gen, "eval": cmd_eval, "ablate": cmd_ablate, "srnc": cmd_srnc}[args.command](cfg)
    except (ev.ConfigError, RequestError, SceneError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ev.StratumError, CapacityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
