"""Command-line entry point: simulate | reliability | fit | cf | synth.

Every subcommand is a pure function of its manifest and input files; the
effective manifest is written beside the outputs and its hash is embedded
in every result file.  Exit codes: 0 success, 2 usage, 3 data validation,
4 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import cf as cfmod
from .dataset import (
    DataValidationError,
    NppcPlanted,
    SynthSpec,
    export,
    ingest,
    synthesize,
    write_ground_truth,
)
from .decoders import DecoderKind, DecoderSpec
from .fitting import (
    GridSpec,
    Objective,
    SamplingBudget,
    fit_dataset,
    read_fit_results,
    write_fit_results,
)
from .manifest import RunManifest, load_manifest
from .population import CognitionVector, Scale, sample_response, static_response
from .reliability import (
    feedback_distribution,
    histogram_filename,
    reliability_sweep,
    surface_filename,
    write_histogram_csv,
    write_surface_csv,
)
from .seeds import substream

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


class UsageError(Exception):
    pass


def _parse_xi(text: str) -> CognitionVector:
    parts = text.split(",")
    if len(parts) != 5:
        raise UsageError("--xi expects n,g,w,o,s")
    try:
        n, g, w, o, s = (float(p) for p in parts)
        return CognitionVector(n=int(n), g=g, w=w, o=o, s=s)
    except ValueError as exc:
        raise UsageError(f"bad --xi: {exc}") from exc


def _parse_decoders(text: str) -> tuple[DecoderSpec, ...]:
    if text == "all":
        text = "mvd,wad,mld,mad"
    specs = []
    for name in text.split(","):
        name = name.strip().lower()
        try:
            kind = DecoderKind(name)
        except ValueError as exc:
            raise UsageError(f"unknown decoder {name!r}") from exc
        specs.append(DecoderSpec.mad() if kind is DecoderKind.MAD else DecoderSpec(kind))
    return tuple(specs)


def _parse_axis(text: str) -> list[float]:
    """Either comma-separated values or lo:hi:count."""
    if ":" in text:
        lo, hi, count = text.split(":")
        return [float(v) for v in np.linspace(float(lo), float(hi), int(count))]
    return [float(v) for v in text.split(",")]


def _parse_grid(text: str) -> GridSpec:
    """Axis spec like ``n=1:250:6,g=1:100:6,w=0.1:2:6,o=1:15:6,s=1:5:5``."""
    ranges = {}
    for part in text.split(","):
        key, _, rng = part.partition("=")
        lo, hi, count = rng.split(":")
        ranges[key.strip()] = (float(lo), float(hi), int(count))
    kwargs = {f"{k}_range": v for k, v in ranges.items() if k in "ngwos"}
    unknown = set(ranges) - set("ngwos")
    if unknown:
        raise UsageError(f"unknown grid axes {sorted(unknown)}")
    return GridSpec(**kwargs)


def _effective(args, parser_defaults: dict) -> dict:
    """Manifest file overrides flags; flags override defaults."""
    params = dict(parser_defaults)
    params.update({k: v for k, v in vars(args).items() if k in parser_defaults and v is not None})
    if getattr(args, "manifest", None):
        doc = load_manifest(args.manifest)
        params.update(doc.get("params", {}))
        if "seed" in doc:
            params["seed"] = doc["seed"]
    return params


def _out_dir(args) -> str:
    out = args.out_dir or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_simulate(args) -> int:
    defaults = {"xi": None, "decoders": "all", "samples": 100000, "bins": 80,
                "draws": 2, "seed": 0}
    params = _effective(args, defaults)
    if not params.get("xi"):
        raise UsageError("simulate requires --xi")
    xi = _parse_xi(params["xi"])
    decoders = _parse_decoders(params["decoders"])
    scale = Scale()
    out = _out_dir(args)
    manifest = RunManifest("simulate", params, int(params["seed"]), args.workers, out)
    mhash = manifest.content_hash()
    manifest.save(os.path.join(out, "manifest.json"))

    static = static_response(xi, scale)
    with open(os.path.join(out, "static_response.csv"), "w", newline="") as fh:
        fh.write(f"# manifest_hash={mhash}\n")
        writer = csv.writer(fh)
        writer.writerow(["preferred", "rate"])
        for p, r in zip(static.preferred, static.rates):
            writer.writerow([repr(float(p)), repr(float(r))])
    with open(os.path.join(out, "sampled_responses.csv"), "w", newline="") as fh:
        fh.write(f"# manifest_hash={mhash}\n")
        writer = csv.writer(fh)
        writer.writerow(["draw", "preferred", "rate"])
        for d in range(int(params["draws"])):
            resp = sample_response(xi, scale, substream(int(params["seed"]), d))
            for p, r in zip(resp.preferred, resp.rates):
                writer.writerow([d, repr(float(p)), repr(float(r))])
    for spec in decoders:
        hist = feedback_distribution(
            xi, spec, bins=int(params["bins"]), samples=int(params["samples"]),
            rng_seed=int(params["seed"]), scale=scale,
        )
        write_histogram_csv(
            os.path.join(out, histogram_filename(hist, params["seed"])), hist, mhash
        )
    return EXIT_OK


def cmd_reliability(args) -> int:
    defaults = {"xi": "100,1,1,5,3", "decoders": "all", "s_axis": "1:5:9",
                "g_axis": "1,5,10,25,50,100", "trials": 10000, "seed": 0}
    params = _effective(args, defaults)
    base_xi = _parse_xi(params["xi"])
    decoders = _parse_decoders(params["decoders"])
    try:
        s_axis = _parse_axis(params["s_axis"])
        g_axis = _parse_axis(params["g_axis"])
    except ValueError as exc:
        raise UsageError(f"bad axis: {exc}") from exc
    out = _out_dir(args)
    manifest = RunManifest("reliability", params, int(params["seed"]), args.workers, out)
    mhash = manifest.content_hash()
    manifest.save(os.path.join(out, "manifest.json"))
    for spec in decoders:
        surface = reliability_sweep(
            base_xi, spec, s_axis, g_axis, trials=int(params["trials"]),
            rng_seed=int(params["seed"]), scale=Scale(),
        )
        write_surface_csv(os.path.join(out, surface_filename(surface, params["seed"])), surface, mhash)
    return EXIT_OK


def cmd_fit(args) -> int:
    defaults = {"data": None, "objective": "jsd", "grid": "n=1:250:6,g=1:100:6,w=0.1:2:6,o=1:15:6,s=1:5:5",
                "samples": 10000, "repeats": 1000, "seed": 0, "resume": False}
    params = _effective(args, defaults)
    if not params.get("data"):
        raise UsageError("fit requires --data")
    # resume is an execution detail, like the worker count: it cannot change
    # the results, so it stays out of the manifest
    resume = bool(params.pop("resume", False))
    data = ingest(params["data"])
    spec = _parse_grid(params["grid"])
    objective = Objective(params["objective"])
    budget = SamplingBudget(samples=int(params["samples"]), repeats=int(params["repeats"]))
    out = _out_dir(args)
    manifest = RunManifest("fit", params, int(params["seed"]), args.workers, out)
    mhash = manifest.content_hash()
    manifest.save(os.path.join(out, "manifest.json"))
    checkpoint_dir = os.path.join(out, "checkpoint") if resume else None
    results = fit_dataset(
        data, spec, objective, budget, workers=args.workers,
        rng_seed=int(params["seed"]), checkpoint_dir=checkpoint_dir,
    )
    write_fit_results(os.path.join(out, "fits.jsonl"), results, objective, mhash)
    return EXIT_OK


def cmd_cf(args) -> int:
    defaults = {"data": None, "fits": None, "k": cfmod.DEFAULT_K, "holdout": 0.3,
                "repeats": 5, "bootstrap": 1000, "seed": 0, "methods": "all"}
    params = _effective(args, defaults)
    if not params.get("data"):
        raise UsageError("cf requires --data")
    methods = params["methods"]
    if methods == "all":
        methods = "noiseless,noisy,xi,n,g,w,o,profile"
    methods = [m.strip() for m in methods.split(",")]
    neural = {"xi", "n", "g", "w", "o", "profile"}
    if (neural & set(methods)) and not params.get("fits"):
        raise UsageError("neural methods require --fits")
    data = ingest(params["data"])
    fits = read_fit_results(params["fits"]) if params.get("fits") else []
    out = _out_dir(args)
    manifest = RunManifest("cf", params, int(params["seed"]), args.workers, out)
    mhash = manifest.content_hash()
    manifest.save(os.path.join(out, "manifest.json"))

    seed = int(params["seed"])
    k, frac, reps = int(params["k"]), float(params["holdout"]), int(params["repeats"])
    dists = []
    for m in methods:
        if m == "noiseless":
            dists.append(cfmod.noiseless_reference(data, k, frac, reps, seed))
        elif m == "noisy":
            dists.append(cfmod.noisy_reference(data, k, frac, reps, seed))
        elif m == "xi":
            dists.append(cfmod.xi_clustering(data, fits, k, frac, reps, seed))
        elif m in {"n", "g", "w", "o"}:
            dists.append(cfmod.subspace_clustering(data, fits, cfmod.SubspaceDim(m), k, frac, reps, seed))
        elif m == "profile":
            dists.append(cfmod.noise_profiling(data, fits, k, frac, reps, seed))
        else:
            raise UsageError(f"unknown method {m!r}")
    barrier, (ci_lo, ci_hi) = cfmod.magic_barrier(data, int(params["bootstrap"]), seed)

    trials = data.trial_count()
    with open(os.path.join(out, "cf_scores.csv"), "w", newline="") as fh:
        fh.write(f"# manifest_hash={mhash}\n")
        writer = csv.writer(fh)
        writer.writerow(["method", "trial", "repeat", "rmse"])
        for dist in dists:
            for idx, score in enumerate(dist.scores):
                writer.writerow(
                    [dist.method, idx // reps + 1, idx % reps, repr(float(score))]
                )
    with open(os.path.join(out, "cf_summary.csv"), "w", newline="") as fh:
        fh.write(f"# manifest_hash={mhash}\n")
        writer = csv.writer(fh)
        writer.writerow(["method", "q1", "median", "q3"])
        for dist in dists:
            q1, q2, q3 = dist.quartiles()
            writer.writerow([dist.method, repr(q1), repr(q2), repr(q3)])
        writer.writerow(["magic_barrier", repr(float(ci_lo)), repr(float(barrier)), repr(float(ci_hi))])
    return EXIT_OK


def cmd_synth(args) -> int:
    defaults = {"users": 67, "items": 5, "trials": 5, "mode": "stochastic",
                "mix": "0.35,0.50,0.15", "variance_rate": 2.5, "seed": 0}
    params = _effective(args, defaults)
    try:
        mix = tuple(float(p) for p in str(params["mix"]).split(","))
        spec = SynthSpec(
            users=int(params["users"]), items=int(params["items"]),
            trials=int(params["trials"]), consistency_mix=mix,
            variance_rate=float(params["variance_rate"]),
        )
    except ValueError as exc:
        raise UsageError(f"bad synth spec: {exc}") from exc
    mode = params["mode"]
    if mode == "nppc":
        mode = NppcPlanted()
    elif mode != "stochastic":
        raise UsageError(f"unknown mode {params['mode']!r}")
    out = _out_dir(args)
    manifest = RunManifest("synth", params, int(params["seed"]), args.workers, out)
    mhash = manifest.content_hash()
    manifest.save(os.path.join(out, "manifest.json"))
    data, truth = synthesize(spec, mode, int(params["seed"]))
    export(data, os.path.join(out, "ratings.csv"), mhash)
    write_ground_truth(os.path.join(out, "ground_truth.jsonl"), truth, mhash)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nppc",
        description="Noisy probabilistic population codes: simulate, fit, evaluate.",
    )
    parser.add_argument("--seed", type=int, default=None, help="run seed")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out-dir", default=None)
    parser.add_argument("--manifest", default=None, help="manifest JSON overriding flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="population responses and feedback histograms")
    p.add_argument("--xi", default=None, help="n,g,w,o,s")
    p.add_argument("--decoders", default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--bins", type=int, default=None)
    p.add_argument("--draws", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reliability", help="MSE/MSE_max surfaces per decoder")
    p.add_argument("--xi", default=None, help="base n,g,w,o,s (g and s are swept)")
    p.add_argument("--decoders", default=None)
    p.add_argument("--s-axis", dest="s_axis", default=None)
    p.add_argument("--g-axis", dest="g_axis", default=None)
    p.add_argument("--trials", type=int, default=None)
    p.set_defaults(func=cmd_reliability)

    p = sub.add_parser("fit", help="grid-search cognition vectors for a dataset")
    p.add_argument("--data", default=None)
    p.add_argument("--objective", choices=["jsd", "kappa"], default=None)
    p.add_argument("--grid", default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--resume", action="store_true", default=None)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cf", help="collaborative-filtering comparison")
    p.add_argument("--data", default=None)
    p.add_argument("--fits", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--holdout", type=float, default=None)
    p.add_argument("--repeats", type=int, default=None)
    p.add_argument("--bootstrap", type=int, default=None)
    p.add_argument("--methods", default=None)
    p.set_defaults(func=cmd_cf)

    p = sub.add_parser("synth", help="generate a synthetic rating dataset")
    p.add_argument("--users", type=int, default=None)
    p.add_argument("--items", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--mode", default=None, choices=["stochastic", "nppc"])
    p.add_argument("--mix", default=None)
    p.add_argument("--variance-rate", dest="variance_rate", type=float, default=None)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataValidationError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
