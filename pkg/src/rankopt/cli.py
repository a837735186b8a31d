"""Command-line front end: scripted optimization runs, benchmark grids,
prior-store construction and sampling, and the HTTP service.

Every command is deterministic given its flags and seeds; rerunning writes
byte-identical primary artifacts (timestamps never enter hashed content).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .decoder import decode
from .errors import RankOptError
from .optimizer import OptimizerConfig, StopRule, run_scripted
from .oracles import ScriptedOracle, objective_from_spec
from .priors import (
    DEFAULT_SIGMA,
    attach_optimum,
    kmeans_representatives,
    load_store,
    read_embeddings_jsonl,
    sample_latent,
    save_store,
    select_prior,
    toy_embed,
    PriorStore,
)
from .transcript import write_transcript

BENCHMARK_COLUMNS = [
    "objective",
    "d",
    "m",
    "k",
    "eta",
    "gamma",
    "mu1",
    "mu2",
    "mu3",
    "elitism",
    "seed",
    "rounds",
    "best_f_per_round",
    "final_f",
]


def _parse_rounds(text: str) -> StopRule:
    try:
        s1, s2 = (int(x) for x in text.split(","))
    except ValueError:
        raise SystemExit(f"--rounds expects 'stage1,stage2' counts, got {text!r}")
    return StopRule(s1, s2)


def _parse_vector(text: str, d: int) -> np.ndarray:
    vals = [float(x) for x in text.split(",") if x.strip() != ""]
    if len(vals) == 1:
        return np.full(d, vals[0])
    if len(vals) == d:
        return np.asarray(vals)
    raise SystemExit(f"expected 1 or {d} comma-separated floats, got {len(vals)}")


def _parse_seeds(text: str) -> list[int]:
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        return list(range(lo, hi))
    return [int(x) for x in text.split(",")]


def _objective_spec_from_flags(args) -> dict:
    if args.objective_json:
        raw = args.objective_json
        if raw.startswith("@"):
            raw = Path(raw[1:]).read_text()
        return json.loads(raw)
    if not args.objective:
        raise SystemExit("specify --objective KIND or --objective-json SPEC")
    params: dict = {"d": args.d}
    if args.objective == "sphere" and args.center is not None:
        params["center"] = _parse_vector(args.center, args.d).tolist()
    return {"kind": args.objective, "params": params}


def _config_from_flags(args, seed: int) -> OptimizerConfig:
    return OptimizerConfig(
        d=args.d,
        m=args.m,
        k=args.k,
        eta=args.eta,
        gamma=args.gamma,
        mu1=args.mu1,
        mu2=args.mu2,
        mu3=args.mu3,
        elitism=args.elitism,
        seed=seed,
    )


def _add_optimizer_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d", type=int, required=True, help="latent dimension")
    p.add_argument("--m", type=int, default=4, help="candidates per round")
    p.add_argument("--k", type=int, default=None, help="stage-1 ranking depth (default m)")
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--mu1", type=float, default=0.8)
    p.add_argument("--mu2", type=float, default=0.4)
    p.add_argument("--mu3", type=float, default=0.1)
    p.add_argument("--elitism", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--rounds", type=str, default="10,5", help="stage1,stage2 round counts")
    p.add_argument("--noise-std", type=float, default=0.0, help="oracle score noise")
    p.add_argument("--oracle-seed", type=int, default=0)


def _add_objective_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--objective",
        choices=["sphere", "rosenbrock", "embedding_quadratic", "trajectory_distance"],
        help="objective kind (sphere/rosenbrock need only --d)",
    )
    p.add_argument(
        "--objective-json",
        type=str,
        default=None,
        help="full objective spec as JSON, or @path to a JSON file",
    )
    p.add_argument("--center", type=str, default=None, help="sphere center (scalar or comma list)")


def cmd_optimize(args) -> int:
    spec = _objective_spec_from_flags(args)
    objective = objective_from_spec(spec)
    stop = _parse_rounds(args.rounds)
    config = _config_from_flags(args, args.seed)
    oracle = ScriptedOracle(objective, noise_std=args.noise_std, seed=args.oracle_seed)
    result = run_scripted(config, oracle, stop)
    if args.output:
        write_transcript(args.output, result.log)
    if args.result:
        payload = {
            "objective": spec,
            "config": config.to_wire(),
            "rounds": [stop.stage1_rounds, stop.stage2_rounds],
            "oracle_seed": args.oracle_seed,
            "noise_std": args.noise_std,
            "final_latent": result.final.tolist(),
            "final_f": float(objective(result.final)),
        }
        Path(args.result).write_text(json.dumps(payload, indent=2) + "\n")
    print(f"final objective value: {float(objective(result.final)):.6g}")
    return 0


def _benchmark_row(kind: str, spec: dict, args, seed: int) -> dict:
    objective = objective_from_spec(spec)
    stop = _parse_rounds(args.rounds)
    config = _config_from_flags(args, seed)
    oracle = ScriptedOracle(objective, noise_std=args.noise_std, seed=args.oracle_seed + seed)
    result = run_scripted(config, oracle, stop)
    best_per_round = [rec.best_objective for rec in result.log]
    return {
        "objective": kind,
        "d": config.d,
        "m": config.m,
        "k": config.ranking_depth,
        "eta": config.eta,
        "gamma": config.gamma,
        "mu1": config.mu1,
        "mu2": config.mu2,
        "mu3": config.mu3,
        "elitism": config.elitism,
        "seed": seed,
        "rounds": len(result.log),
        "best_f_per_round": json.dumps(best_per_round),
        "final_f": float(objective(result.final)),
    }


def cmd_benchmark(args) -> int:
    if args.sigma_sweep:
        return _sigma_sweep(args)
    kinds = [k.strip() for k in args.objectives.split(",") if k.strip()]
    if not kinds:
        raise SystemExit("--objectives must list at least one kind")
    seeds = _parse_seeds(args.seeds)
    jobs = []
    for kind in kinds:
        spec = {"kind": kind, "params": {"d": args.d}}
        if kind == "sphere" and args.center is not None:
            spec["params"]["center"] = _parse_vector(args.center, args.d).tolist()
        for seed in seeds:
            jobs.append((kind, spec, seed))
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(lambda j: _benchmark_row(j[0], j[1], args, j[2]), jobs))
    rows.sort(key=lambda r: (r["objective"], r["seed"]))
    with open(args.output, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCHMARK_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.output}")
    return 0


def _sigma_sweep(args) -> int:
    if not args.store or not args.entry:
        raise SystemExit("--sigma-sweep requires --store and --entry")
    store = load_store(args.store)
    entry = store.get(args.entry)
    if entry.z_star_star is None:
        raise SystemExit(f"entry {args.entry!r} has no optimized latent")
    sigmas = [float(s) for s in args.sigmas.split(",")]
    rows = []
    import dataclasses

    for sigma in sigmas:
        probe = dataclasses.replace(entry, sigma=sigma)
        rng = np.random.default_rng(args.seed)
        draws = np.stack([sample_latent(probe, rng) for _ in range(args.samples)])
        dispersion = float(draws.std(axis=0).mean())
        rows.append(
            {
                "entry": entry.id,
                "sigma": sigma,
                "samples": args.samples,
                "latent_dispersion": dispersion,
            }
        )
    with open(args.output, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["entry", "sigma", "samples", "latent_dispersion"])
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {args.output}")
    return 0


def _resolve_query_embedding(args, store) -> np.ndarray:
    if args.embedding:
        raw = args.embedding
        if raw.startswith("@"):
            raw = Path(raw[1:]).read_text()
        return np.asarray(json.loads(raw), dtype=np.float64)
    if args.text:
        return toy_embed(args.text, dim=store.embedding_dim)
    raise SystemExit("provide --text or --embedding")


def cmd_priors(args) -> int:
    if args.priors_cmd == "build":
        ids, texts, vectors = read_embeddings_jsonl(args.embeddings, dim=args.embedding_dim)
        reps = kmeans_representatives(
            vectors, texts, k=args.k, iters=args.iters, rng=np.random.default_rng(args.seed)
        )
        store = PriorStore(
            entries=tuple(reps),
            latent_dim=args.latent_dim,
            embedding_dim=vectors.shape[1],
        )
        save_store(store, args.output)
        print(f"built store with {len(store.entries)} representatives -> {args.output}")
        return 0

    store = load_store(args.store)
    if args.priors_cmd == "attach":
        raw = args.latent
        if raw.startswith("@"):
            raw = Path(raw[1:]).read_text()
        z = np.asarray(json.loads(raw), dtype=np.float64)
        store = attach_optimum(store, args.id, z, sigma=args.sigma)
        save_store(store, args.output or args.store)
        print(f"attached latent to {args.id!r}")
        return 0
    if args.priors_cmd == "select":
        query = _resolve_query_embedding(args, store)
        entry = select_prior(store, query)
        print(entry.id)
        return 0
    if args.priors_cmd == "sample":
        if args.id:
            entry = store.get(args.id)
        else:
            entry = select_prior(store, _resolve_query_embedding(args, store))
        if entry.z_star_star is None:
            raise SystemExit(f"entry {entry.id!r} has no optimized latent")
        rng = np.random.default_rng(args.seed)
        items = []
        for _ in range(args.count):
            z = sample_latent(entry, rng)
            item = {"latent": z.tolist()}
            if args.decode:
                item["trajectory"] = decode(z, entry.embedding, args.decoder_seed).to_wire()
            items.append(item)
        payload = json.dumps({"entry_id": entry.id, "items": items}, indent=2)
        if args.output:
            Path(args.output).write_text(payload + "\n")
        else:
            print(payload)
        return 0
    raise SystemExit(f"unknown priors subcommand {args.priors_cmd!r}")


def cmd_serve(args) -> int:
    import uvicorn

    from .service import ServiceSettings, create_app

    data_dir = args.data_dir or os.environ.get("RANKOPT_DATA_DIR")
    if not data_dir:
        raise SystemExit("provide --data-dir or set RANKOPT_DATA_DIR")
    default_config = {}
    if args.default_config:
        raw = args.default_config
        if raw.startswith("@"):
            raw = Path(raw[1:]).read_text()
        default_config = json.loads(raw)
    settings = ServiceSettings(
        data_dir=Path(data_dir),
        latent_dim=args.latent_dim,
        embedding_dim=args.embedding_dim,
        decoder_seed=args.decoder_seed,
        default_config=default_config,
    )
    app = create_app(settings)
    host = args.host or os.environ.get("RANKOPT_HOST", "127.0.0.1")
    port = args.port if args.port is not None else int(os.environ.get("RANKOPT_PORT", "8000"))
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rankopt", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("optimize", help="run one scripted optimization session")
    _add_optimizer_flags(p)
    _add_objective_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", type=str, default=None, help="transcript JSONL path")
    p.add_argument("--result", type=str, default=None, help="result JSON path")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("benchmark", help="run a grid of scripted sessions, write CSV")
    _add_optimizer_flags(p)
    p.add_argument("--objectives", type=str, default="sphere")
    p.add_argument("--center", type=str, default=None)
    p.add_argument("--seeds", type=str, default="0:5", help="comma list or lo:hi range")
    p.add_argument("--seed", type=int, default=0, help="seed for sigma sweeps")
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--output", type=str, required=True)
    p.add_argument("--sigma-sweep", action="store_true", help="sweep sampling sigma for a store entry")
    p.add_argument("--store", type=str, default=None)
    p.add_argument("--entry", type=str, default=None)
    p.add_argument("--sigmas", type=str, default="0.1,0.2,0.3,0.4,0.5")
    p.add_argument("--samples", type=int, default=2000)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("priors", help="build and query prior stores")
    psub = p.add_subparsers(dest="priors_cmd", required=True)

    b = psub.add_parser("build", help="k-means representatives from an embedding JSONL")
    b.add_argument("--embeddings", type=str, required=True)
    b.add_argument("--k", type=int, default=5)
    b.add_argument("--iters", type=int, default=25)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--latent-dim", type=int, required=True)
    b.add_argument("--embedding-dim", type=int, default=None)
    b.add_argument("--output", type=str, required=True)

    a = psub.add_parser("attach", help="bind an optimized latent to an entry")
    a.add_argument("--store", type=str, required=True)
    a.add_argument("--id", type=str, required=True)
    a.add_argument("--latent", type=str, required=True, help="JSON list or @file")
    a.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    a.add_argument("--output", type=str, default=None, help="defaults to rewriting --store")

    s = psub.add_parser("select", help="cosine-similarity lookup")
    s.add_argument("--store", type=str, required=True)
    s.add_argument("--text", type=str, default=None)
    s.add_argument("--embedding", type=str, default=None, help="JSON list or @file")

    sm = psub.add_parser("sample", help="draw latents (and paths) from an entry's prior")
    sm.add_argument("--store", type=str, required=True)
    sm.add_argument("--id", type=str, default=None)
    sm.add_argument("--text", type=str, default=None)
    sm.add_argument("--embedding", type=str, default=None)
    sm.add_argument("--count", type=int, default=1)
    sm.add_argument("--seed", type=int, default=0)
    sm.add_argument("--decode", action="store_true")
    sm.add_argument("--decoder-seed", type=int, default=0)
    sm.add_argument("--output", type=str, default=None)
    p.set_defaults(func=cmd_priors)

    p = sub.add_parser("serve", help="start the HTTP session service")
    p.add_argument("--data-dir", type=str, default=None, help="or RANKOPT_DATA_DIR")
    p.add_argument("--host", type=str, default=None, help="or RANKOPT_HOST (default 127.0.0.1)")
    p.add_argument("--port", type=int, default=None, help="or RANKOPT_PORT (default 8000)")
    p.add_argument("--latent-dim", type=int, default=256)
    p.add_argument("--embedding-dim", type=int, default=768)
    p.add_argument("--decoder-seed", type=int, default=0)
    p.add_argument(
        "--default-config", type=str, default=None,
        help="session hyperparameter defaults as JSON, or @path",
    )
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RankOptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
