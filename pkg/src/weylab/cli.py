"""Command-line driver: corpus generation, single pipeline stages, full
epsilon sweeps with verification and plots, and reproducibility re-runs.

Exit codes: 0 success, 1 verifier property failure, 2 input error,
3 schema error, 4 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .corpus import gen_flat_spot, gen_round, gen_spheroid
from .embed import (
    RoundInit,
    SolverConfig,
    SpectralInit,
    SweepMember,
    SweepResult,
    continuation_sweep,
    embed,
)
from .errors import InputError, SchemaError, SolverError, WeylabError
from .extrinsic import curvature_report
from .io import (
    RunManifest,
    check_output_hashes,
    eps_dirname,
    file_hash,
    load_embedding,
    load_manifest,
    load_metric,
    load_report,
    load_topology,
    save_embedding,
    save_manifest,
    save_metric,
    save_report,
    save_topology,
    write_json,
)
from .mesh import build_patches
from .metric import MetricField, angle_defect_curvature, regularize
from .plots import emit_plots
from .verify import VerifierConfig, sweep_verdict

EXIT_OK = 0
EXIT_VERIFY_FAIL = 1
EXIT_INPUT = 2
EXIT_SCHEMA = 3
EXIT_SOLVER = 4

SWEEP_CONFIG_KEYS = {
    "eps", "k0", "tau_deg", "ring", "a0", "tau_k1", "patch_hops", "delta",
    "b0", "ineq_tol", "tol", "max_iter", "bend_schedule",
}


def _parse_params(text: str | None) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if not item:
            continue
        key, sep, val = item.partition("=")
        if not sep:
            raise InputError(f"malformed --params entry {item!r}, expected k=v")
        out[key.strip()] = val.strip()
    return out


def _parse_eps_list(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        eps = [float(tok) for tok in str(text).replace(",", " ").split()]
    except ValueError as exc:
        raise InputError(f"bad epsilon list {text!r}") from exc
    if not eps:
        raise InputError("empty epsilon list")
    return eps


def _parse_schedule(text) -> tuple[float, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(float(x) for x in text)
    try:
        return tuple(float(tok) for tok in str(text).replace(",", " ").split())
    except ValueError as exc:
        raise InputError(f"bad bending schedule {text!r}") from exc


def _solver_config(config: dict) -> SolverConfig:
    cfg = SolverConfig()
    if config.get("tol") is not None:
        cfg.residual_tol = float(config["tol"])
    if config.get("max_iter") is not None:
        cfg.max_iterations = int(config["max_iter"])
    if config.get("bend_schedule") is not None:
        cfg.bend_schedule = _parse_schedule(config["bend_schedule"])
        cfg.__post_init__()
    return cfg


def _verifier_config(config: dict) -> VerifierConfig:
    return VerifierConfig(
        a0=None if config.get("a0") is None else float(config["a0"]),
        tau_k1=None if config.get("tau_k1") is None else float(config["tau_k1"]),
        patch_hops=int(config.get("patch_hops") or 2),
        delta_override=None if config.get("delta") is None else float(config["delta"]),
        b0_override=None if config.get("b0") is None else float(config["b0"]),
        ineq_tol=float(config.get("ineq_tol") or 0.05),
    )


def _merge_config(args, keys: set[str]) -> dict:
    config = {}
    config_path = getattr(args, "config", None)
    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise InputError(f"missing config file: {path}")
        loaded = json.loads(path.read_text())
        if not isinstance(loaded, dict):
            raise SchemaError(f"{path}: config must be a JSON object")
        unknown = set(loaded) - keys
        if unknown:
            raise SchemaError(f"{path}: unknown config keys {sorted(unknown)}")
        config.update(loaded)
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            config[key] = val
    return config


# ---------------------------------------------------------------------------
# corpus

def cmd_corpus(args) -> int:
    params = _parse_params(args.params)
    level = args.level
    if args.family == "round":
        surf = gen_round(level, radius=float(params.get("radius", 1.0)))
    elif args.family == "spheroid":
        surf = gen_spheroid(level, a=float(params.get("a", 1.0)),
                            c=float(params.get("c", 2.0)))
    elif args.family == "flatspot":
        kind = params.get("flat", "pole")
        kind = {"pole": "flat_pole", "circle": "flat_circle", "none": "none"}.get(kind, kind)
        surf = gen_flat_spot(level, kind=kind,
                             order=int(params.get("order", 2)),
                             t0=float(params.get("t0", np.pi / 2)))
    else:
        raise InputError(f"unknown family {args.family!r}")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_topology(out / "topology.json", surf.mesh)
    save_metric(out / "metric.json", surf.metric)
    save_embedding(out / "embedding.json", surf.embedding)
    intr = angle_defect_curvature(surf.metric)
    write_json(out / "generator.json", {
        "family": args.family,
        "level": level,
        "params": params,
        "min_K": float(intr.K.min()),
        "sup_K": float(intr.K.max()),
        "zero_set": [] if surf.zero_set is None else surf.zero_set.tolist(),
    })
    print(f"wrote {out}/topology.json metric.json embedding.json generator.json")
    return EXIT_OK


# ---------------------------------------------------------------------------
# single stages

def _load_pair(metric_path: str, topology_path: str | None) -> MetricField:
    mpath = Path(metric_path)
    tpath = Path(topology_path) if topology_path else mpath.parent / "topology.json"
    mesh = load_topology(tpath)
    return load_metric(mpath, mesh)


def cmd_regularize(args) -> int:
    g = _load_pair(args.metric, args.topology)
    step = regularize(g, epsilon=args.epsilon, K0=args.k0, tau_deg=args.tau_deg)
    save_metric(Path(args.out), step.metric, reg=step)
    print(f"epsilon={step.epsilon:g} min_K={step.min_K:.6g} "
          f"doublings={step.amplitude_doublings} -> {args.out}")
    return EXIT_OK


def cmd_embed(args) -> int:
    g = _load_pair(args.metric, args.topology)
    if args.init == "round":
        init = RoundInit()
    elif args.init == "spectral":
        init = SpectralInit()
    elif args.init == "file":
        if not args.init_file:
            raise InputError("--init file requires --init-file")
        init = load_embedding(Path(args.init_file))
    else:
        raise InputError(f"unknown init {args.init!r}")
    cfg = _solver_config({"tol": args.tol, "max_iter": args.max_iter,
                          "bend_schedule": args.bend_schedule})
    emb = embed(g, init, cfg)
    save_embedding(Path(args.out), emb)
    print(f"residual={emb.residual:.3e} converged={emb.converged} "
          f"iterations={emb.iterations} -> {args.out}")
    return EXIT_SOLVER if not emb.converged else EXIT_OK


def cmd_analyze(args) -> int:
    g = _load_pair(args.metric, args.topology)
    emb = load_embedding(Path(args.embedding))
    report = curvature_report(emb, g, ring=args.ring, epsilon=args.epsilon)
    save_report(Path(args.out), report)
    print(f"report: {len(report.K_intr)} vertices, ring={report.fit_ring}, "
          f"clamped={report.clamp_count} -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep / verify / plots

def run_sweep(metric_path: Path, topology_path: Path | None, out_dir: Path,
              config: dict, command: list[str] | None = None) -> dict:
    """Full pipeline: regularize -> embed -> analyze per epsilon, then all
    verifier checks; writes the sweep directory and returns the verdict."""
    g = _load_pair(metric_path, topology_path)
    eps = _parse_eps_list(config["eps"])
    k0 = float(config.get("k0") or 0.0)
    tau_deg = config.get("tau_deg")
    tau_deg = None if tau_deg is None else float(tau_deg)
    ring = int(config.get("ring") or 2)
    solver_cfg = _solver_config(config)
    verifier_cfg = _verifier_config(config)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        command=command or ["(library call)"],
        config=dict(config),
        inputs={
            "metric": file_hash(Path(metric_path)),
            "topology": file_hash(
                Path(topology_path) if topology_path
                else Path(metric_path).parent / "topology.json"),
        },
    )
    save_topology(out / "topology.json", g.mesh)
    save_metric(out / "metric.json", g)
    manifest.outputs["topology.json"] = file_hash(out / "topology.json")
    manifest.outputs["metric.json"] = file_hash(out / "metric.json")

    sweep = continuation_sweep(g, eps, K0=k0, cfg=solver_cfg, tau_deg=tau_deg)
    failed = None
    for member in sweep.members:
        if member.error is not None:
            failed = member
            break
        edir = out / eps_dirname(member.epsilon)
        member.intr = angle_defect_curvature(member.reg.metric)
        member.report = curvature_report(
            member.embedding, member.reg.metric, ring=ring,
            epsilon=member.epsilon, intr=member.intr,
        )
        save_metric(edir / "metric.json", member.reg.metric, reg=member.reg)
        save_embedding(edir / "embedding.json", member.embedding)
        save_report(edir / "report.csv", member.report)
        for name in ("metric.json", "embedding.json", "report.csv"):
            rel = f"{eps_dirname(member.epsilon)}/{name}"
            manifest.outputs[rel] = file_hash(edir / name)

    save_manifest(out / "manifest.json", manifest)
    if failed is not None:
        raise SolverError(f"epsilon={failed.epsilon:g}: {failed.error}")

    patches = build_patches(g.mesh, verifier_cfg.patch_hops)
    verdict = sweep_verdict(sweep, patches, verifier_cfg)
    write_json(out / "verdict.json", verdict)
    emit_plots(out)
    return verdict


def cmd_sweep(args) -> int:
    if args.from_manifest:
        manifest = load_manifest(Path(args.from_manifest))
        config = dict(manifest.config)
        metric_path = Path(config.pop("_metric_path"))
        topology_path = config.pop("_topology_path", None)
        topology_path = Path(topology_path) if topology_path else None
    else:
        if not args.metric:
            raise InputError("sweep requires --metric (or --from-manifest)")
        config = _merge_config(args, SWEEP_CONFIG_KEYS)
        if "eps" not in config:
            raise InputError("sweep requires --eps (or eps in --config)")
        metric_path = Path(args.metric)
        topology_path = Path(args.topology) if args.topology else None
    if not metric_path.exists():
        raise InputError(f"missing metric file: {metric_path}")

    # Record resolved input paths so the manifest alone can re-run the sweep.
    config["_metric_path"] = str(metric_path)
    if topology_path is not None:
        config["_topology_path"] = str(topology_path)
    command = ["weylab", "sweep", f"--metric={metric_path}",
               f"--out={args.out}"]
    verdict = run_sweep(metric_path, topology_path, Path(args.out), config,
                        command=command)
    n_eps = len(verdict["epsilons"])
    print(f"sweep: {n_eps} epsilon(s), corollary={verdict['corollary']}, "
          f"all_pass={verdict['all_pass']} -> {args.out}")
    return EXIT_OK if verdict["all_pass"] else EXIT_VERIFY_FAIL


def rebuild_sweep(sweep_dir: Path) -> SweepResult:
    """Reload a persisted sweep directory for re-verification."""
    sweep_dir = Path(sweep_dir)
    manifest = load_manifest(sweep_dir / "manifest.json")
    check_output_hashes(sweep_dir, manifest)
    mesh = load_topology(sweep_dir / "topology.json")
    base = load_metric(sweep_dir / "metric.json", mesh)
    k0 = float(manifest.config.get("k0") or 0.0)
    sweep = SweepResult(base_metric=base, K0=k0)
    for eps in _parse_eps_list(manifest.config["eps"]):
        edir = sweep_dir / eps_dirname(eps)
        member = SweepMember(epsilon=eps)
        reg_metric = load_metric(edir / "metric.json", mesh)
        member.intr = angle_defect_curvature(reg_metric)
        member.embedding = load_embedding(edir / "embedding.json")
        member.report = load_report(edir / "report.csv")
        sweep.members.append(member)
    return sweep


def cmd_verify(args) -> int:
    sweep_dir = Path(args.sweep)
    if not sweep_dir.exists():
        raise InputError(f"missing sweep directory: {sweep_dir}")
    manifest = load_manifest(sweep_dir / "manifest.json")
    sweep = rebuild_sweep(sweep_dir)
    config = dict(manifest.config)
    for key in ("a0", "tau_k1", "patch_hops", "delta", "b0", "ineq_tol"):
        val = getattr(args, key, None)
        if val is not None:
            config[key] = val
    verifier_cfg = _verifier_config(config)
    patches = build_patches(sweep.base_metric.mesh, verifier_cfg.patch_hops)
    verdict = sweep_verdict(sweep, patches, verifier_cfg)
    write_json(sweep_dir / "verdict.json", verdict)
    print(f"verify: corollary={verdict['corollary']} all_pass={verdict['all_pass']}")
    return EXIT_OK if verdict["all_pass"] else EXIT_VERIFY_FAIL


def cmd_plots(args) -> int:
    sweep_dir = Path(args.sweep)
    if not (sweep_dir / "verdict.json").exists():
        print(f"warning: no verdict.json under {sweep_dir}; nothing to plot",
              file=sys.stderr)
        return EXIT_OK
    written = emit_plots(sweep_dir)
    print(f"wrote {len(written)} figure(s) under {sweep_dir}/plots")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weylab",
                                description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("corpus", help="generate ground-truth surfaces")
    pcs = pc.add_subparsers(dest="corpus_command", required=True)
    pg = pcs.add_parser("gen", help="write topology/metric/embedding files")
    pg.add_argument("--family", required=True,
                    choices=["round", "spheroid", "flatspot"])
    pg.add_argument("--level", type=int, required=True)
    pg.add_argument("--params", default="",
                    help="comma list k=v (radius= | a=,c= | flat=pole|circle|none,order=,t0=)")
    pg.add_argument("--out", required=True)
    pg.set_defaults(func=cmd_corpus)

    pr = sub.add_parser("regularize", help="conformal curvature lift")
    pr.add_argument("--metric", required=True)
    pr.add_argument("--topology")
    pr.add_argument("--epsilon", type=float, required=True)
    pr.add_argument("--k0", type=float, default=0.0)
    pr.add_argument("--tau-deg", dest="tau_deg", type=float)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_regularize)

    pe = sub.add_parser("embed", help="edge-length least-squares embedding")
    pe.add_argument("--metric", required=True)
    pe.add_argument("--topology")
    pe.add_argument("--init", choices=["round", "spectral", "file"],
                    default="round")
    pe.add_argument("--init-file", dest="init_file")
    pe.add_argument("--tol", type=float)
    pe.add_argument("--max-iter", dest="max_iter", type=int)
    pe.add_argument("--bend-schedule", dest="bend_schedule")
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=cmd_embed)

    pa = sub.add_parser("analyze", help="extrinsic curvature report")
    pa.add_argument("--embedding", required=True)
    pa.add_argument("--metric", required=True)
    pa.add_argument("--topology")
    pa.add_argument("--ring", type=int, default=2)
    pa.add_argument("--epsilon", type=float)
    pa.add_argument("--out", required=True)
    pa.set_defaults(func=cmd_analyze)

    ps = sub.add_parser("sweep", help="regularize/embed/analyze/verify family")
    ps.add_argument("--metric")
    ps.add_argument("--topology")
    ps.add_argument("--eps", help="decreasing comma list, e.g. 1e-1,3e-2,1e-2")
    ps.add_argument("--k0", type=float)
    ps.add_argument("--tau-deg", dest="tau_deg", type=float)
    ps.add_argument("--ring", type=int)
    ps.add_argument("--a0", type=float)
    ps.add_argument("--tau-k1", dest="tau_k1", type=float)
    ps.add_argument("--patch-hops", dest="patch_hops", type=int)
    ps.add_argument("--delta", type=float)
    ps.add_argument("--b0", type=float)
    ps.add_argument("--ineq-tol", dest="ineq_tol", type=float)
    ps.add_argument("--tol", type=float)
    ps.add_argument("--max-iter", dest="max_iter", type=int)
    ps.add_argument("--bend-schedule", dest="bend_schedule")
    ps.add_argument("--config", help="JSON config; explicit flags win")
    ps.add_argument("--from-manifest", dest="from_manifest",
                    help="re-run a sweep from its manifest")
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_sweep)

    pv = sub.add_parser("verify", help="re-run verifier on a sweep directory")
    pv.add_argument("--sweep", required=True)
    pv.add_argument("--a0", type=float)
    pv.add_argument("--tau-k1", dest="tau_k1", type=float)
    pv.add_argument("--patch-hops", dest="patch_hops", type=int)
    pv.add_argument("--delta", type=float)
    pv.add_argument("--b0", type=float)
    pv.add_argument("--ineq-tol", dest="ineq_tol", type=float)
    pv.set_defaults(func=cmd_verify)

    pp = sub.add_parser("plots", help="render sweep figures and series CSVs")
    pp.add_argument("--sweep", required=True)
    pp.set_defaults(func=cmd_plots)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except WeylabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
