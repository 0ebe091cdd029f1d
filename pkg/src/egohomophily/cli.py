"""Command-line pipeline: ingest, detect, overlap, order-stats, simulate,
model-curve and synth.

Every CSV artifact starts with ``#`` comment lines carrying the run manifest
(subcommand, resolved options, input digests, seed, version) and its digest.
Only the ``wall-clock`` line differs between identical re-runs.

Exit codes: 0 success, 1 internal error, 2 usage/config error, 3 data error.
Options fall back to ``EGOHOM_<OPTION>`` environment variables, e.g.
``EGOHOM_SEED``, ``EGOHOM_THREADS`` or ``EGOHOM_TRIALS``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import secrets
import sys
import time
from datetime import date, datetime, timezone
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .community import DEFAULT_TRIALS
from .features import FeatureSchema, SchemaError
from .graph import (
    SECONDS_PER_YEAR,
    EgoFilter,
    IngestError,
    IngestReport,
    PseudoTimeError,
    filter_egos,
    load_store,
    read_edges_csv,
    read_profiles_csv,
    save_store,
)
from .model import (
    ModelConfig,
    OverlapModel,
    local_extrema,
    model_community_overlap,
    model_order_overlap,
    moving_average,
    simulate_ensemble,
)
from .orderstats import NoFitError, fit_exponential_scale, geometric_scale
from .pipeline import (
    assignments_from_frame,
    assignments_to_frame,
    detect_all,
    overlap_curve,
    pcm_for,
)
from .synth import SynthConfig, SynthConfigError, generate_population

log = logging.getLogger("egohomophily")

ENV_PREFIX = "EGOHOM_"
EXIT_INTERNAL, EXIT_CONFIG, EXIT_DATA = 1, 2, 3


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# manifest and atomic output


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def input_digests(paths) -> dict[str, str]:
    out = {}
    for p in paths:
        p = Path(p)
        files = sorted(f for f in p.rglob("*") if f.is_file()) if p.is_dir() else [p]
        for f in files:
            if f.suffix == ".tmp":
                continue
            out[str(f)] = _sha256_file(f)
    return out


def build_manifest(command: str, options: dict, inputs, seed) -> dict:
    return {
        "subcommand": command,
        "config": options,
        "inputs": input_digests(inputs),
        "seed": seed,
        "version": __version__,
    }


def manifest_lines(manifest: dict, started: float) -> list[str]:
    body = json.dumps(manifest, sort_keys=True, separators=(",", ":"))
    digest = hashlib.sha256(body.encode()).hexdigest()
    stamp = datetime.fromtimestamp(started, timezone.utc).isoformat(timespec="seconds")
    return [
        f"manifest-digest: {digest}",
        f"manifest: {body}",
        f"wall-clock: start={stamp} elapsed={time.time() - started:.3f}s",
    ]


def write_atomic(path, text: str) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _csv_text(header: list[str], rows, comments) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    return repr(float(x))


# --------------------------------------------------------------------------
# helpers


def _resolve_seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(32)
        log.info("no --seed given; using entropy seed %d (recorded in manifest)", args.seed)
    return args.seed


def _options(args) -> dict:
    skip = {"func", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _load_pairs(args):
    g = load_store(args.store)
    try:
        df = pd.read_csv(args.communities, comment="#")
    except FileNotFoundError:
        raise ConfigError(f"communities file {args.communities} not found") from None
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestError(f"{args.communities}: {exc}") from exc
    return g, assignments_from_frame(g, df)


def _select_egos(g, args) -> np.ndarray:
    if args.egos:
        try:
            df = pd.read_csv(args.egos, comment="#")
        except FileNotFoundError:
            raise ConfigError(f"egos file {args.egos} not found") from None
        if "ego" not in df.columns:
            raise IngestError(f"{args.egos}: needs an 'ego' column")
        try:
            return g.node_indices(np.unique(df["ego"].to_numpy()))
        except KeyError as exc:
            raise IngestError(str(exc)) from exc
    span = None if args.min_span_years is None else args.min_span_years * SECONDS_PER_YEAR
    try:
        flt = EgoFilter(span, args.kmin, args.kmax)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return g.node_indices(filter_egos(g, flt))


# --------------------------------------------------------------------------
# subcommands


def cmd_ingest(args, started) -> int:
    try:
        schema = FeatureSchema.load(args.schema)
    except FileNotFoundError:
        raise ConfigError(f"schema file {args.schema} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.schema}: {exc}") from exc
    ref = date.fromisoformat(args.age_reference) if args.age_reference else None
    report = IngestReport()
    for p in (args.edges, args.profiles):
        if not Path(p).exists():
            raise ConfigError(f"input file {p} not found")
    g = read_edges_csv(args.edges, max_errors=args.max_errors, report=report)
    ids, table = read_profiles_csv(args.profiles, schema, age_reference=ref)
    g = g.with_profiles(table.align(ids, g.node_ids))
    manifest = build_manifest("ingest", _options(args), [args.edges, args.profiles, args.schema], None)
    manifest["report"] = {
        "records": report.records, "self_loops": report.self_loops,
        "duplicates": report.duplicates, "rejected": report.rejected[:20],
        "n_rejected": len(report.rejected), "pseudo_time": report.pseudo_time,
        "availability_pct": table.availability(),
    }
    save_store(g, args.out, manifest)
    print(f"ingested {g.n_nodes} nodes, {g.n_edges} edges into {args.out}"
          f"{' (pseudo-time)' if g.pseudo_time else ''}", file=sys.stderr)
    for name, pct in table.availability().items():
        print(f"  availability {name}: {pct:.1f}%", file=sys.stderr)
    return 0


def cmd_detect(args, started) -> int:
    seed = _resolve_seed(args)
    if args.trials < 1:
        raise ConfigError("--trials must be >= 1")
    g = load_store(args.store)
    egos = _select_egos(g, args)
    asg = detect_all(g, egos, seed=seed, trials=args.trials,
                     include_ego=args.include_ego, threads=args.threads)
    df = assignments_to_frame(g, asg)
    inputs = [args.store] + ([args.egos] if args.egos else [])
    lines = manifest_lines(build_manifest("detect", _options(args), inputs, seed), started)
    rows = zip(df["ego"].tolist(), df["alter"].tolist(), df["community_index"].tolist(),
               map(_fmt, df["codelength"]))
    write_atomic(args.out, _csv_text(list(df.columns), rows, lines))
    print(f"detected communities for {len(asg)} egos", file=sys.stderr)
    return 0


def cmd_overlap(args, started) -> int:
    g, pairs = _load_pairs(args)
    curve = overlap_curve(g, pairs, args.curve, args.size)
    lines = manifest_lines(build_manifest("overlap", _options(args), [args.store, args.communities], None),
                           started)
    write_atomic(args.out, curve.to_csv(header_lines=lines))
    return 0


def cmd_order_stats(args, started) -> int:
    if args.c < 2:
        raise ConfigError("--c must be >= 2 (single-community egos carry no order information)")
    g, pairs = _load_pairs(args)
    dist = pcm_for(g, pairs, args.c)
    if len(dist) == 0:
        raise IngestError(f"no egos with exactly {args.c} communities")
    rows = [[int(b), _fmt(m), int(n), _fmt(s), "", ""]
            for b, m, n, s in zip(dist.bins, dist.mean, dist.count, dist.stderr)]
    try:
        fit = fit_exponential_scale(dist, args.mmax)
        rows.append(["fit", "", fit.n_bins, "", _fmt(fit.m0), _fmt(fit.r2)])
        print(f"m0 = {fit.m0:.4f} (geometric {geometric_scale(args.c):.4f}, c = {args.c}), "
              f"R^2 = {fit.r2:.4f}", file=sys.stderr)
    except NoFitError as exc:
        rows.append(["fit", "", 0, "", "", ""])
        print(f"no exponential fit: {exc}", file=sys.stderr)
    lines = manifest_lines(build_manifest("order-stats", _options(args),
                                          [args.store, args.communities], None), started)
    write_atomic(args.out, _csv_text(["bin", "mean", "count", "stderr", "m0", "r2"], rows, lines))
    return 0


def _overlap_params(args) -> OverlapModel:
    return OverlapModel(a=args.a, b=args.b, c0=args.c0, bump=args.bump, shift=args.shift)


def cmd_simulate(args, started) -> int:
    seed = _resolve_seed(args)
    try:
        cfg = ModelConfig(k_real=args.kreal, exponent=args.exponent, s_min=args.smin, s_max=args.smax,
                          overlap=_overlap_params(args), n_egos=args.egos, seed=seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    curve = simulate_ensemble(cfg)
    lines = manifest_lines(build_manifest("simulate", _options(args), [], seed), started)
    if len(curve) >= 3:
        smooth = moving_average(curve.mean, args.window)
        i, j = local_extrema(smooth)
        lines.append(f"smoothed(window={args.window}): local-min k={int(curve.bins[i])} "
                     f"local-max k={int(curve.bins[j])}")
    write_atomic(args.out, curve.to_csv(header_lines=lines))
    return 0


def cmd_model_curve(args, started) -> int:
    params = _overlap_params(args)
    if args.smax < args.smin or args.smin < 1:
        raise ConfigError("need 1 <= --smin <= --smax")
    sizes = range(args.smin, args.smax + 1)
    if args.what == "os":
        header = ["s", "value"]
        rows = [[s, _fmt(model_community_overlap(s, params))] for s in sizes]
    else:
        header = ["s", "n", "value"]
        rows = [[s, n, _fmt(model_order_overlap(s, n, params))] for s in sizes for n in range(1, s + 1)]
    lines = manifest_lines(build_manifest("model-curve", _options(args), [], None), started)
    write_atomic(args.out, _csv_text(header, rows, lines))
    return 0


def cmd_synth(args, started) -> int:
    try:
        cfg = SynthConfig.load(args.config) if args.config else SynthConfig()
    except FileNotFoundError:
        raise ConfigError(f"config file {args.config} not found") from None
    if args.seed is not None:
        cfg = SynthConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    args.seed = cfg.seed
    pop = generate_population(cfg)
    options = _options(args)
    options["resolved"] = cfg.to_dict()
    inputs = [args.config] if args.config else []
    lines = manifest_lines(build_manifest("synth", options, inputs, cfg.seed), started)
    pop.write(args.out, lines)
    print(f"wrote {len(pop.egos)} egos, {len(pop.profiles)} users, {len(pop.edges)} edges to {args.out}",
          file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# parser


def _env(name, default=None, conv=str):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return default
    try:
        return conv(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {ENV_PREFIX}{name.upper()}") from None


def _add_model_constants(p):
    d = OverlapModel()
    p.add_argument("--a", type=float, default=d.a, help="overlap amplitude (default %(default)s)")
    p.add_argument("--b", type=float, default=d.b, help="size exponent in the overlap curve")
    p.add_argument("--c0", type=float, default=d.c0, help="overlap denominator offset")
    p.add_argument("--bump", type=float, default=d.bump, help="extra overlap of the first member")
    p.add_argument("--shift", type=float, default=d.shift, help="size shift in the prefactor")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egohomophily",
        description="Homophily statistics of egocentric networks and the community growth model.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load edges and profiles into a store")
    p.add_argument("--edges", required=True, help="CSV with header src,dst[,ts]")
    p.add_argument("--profiles", required=True, help="CSV with header id,<features...>")
    p.add_argument("--schema", required=True, help="feature schema JSON")
    p.add_argument("--out", required=True, help="store directory")
    p.add_argument("--max-errors", type=int, default=_env("max_errors", 100, int),
                   help="malformed edge lines tolerated before aborting")
    p.add_argument("--age-reference", default=_env("age_reference"),
                   help="ISO date; numeric columns holding ISO birth dates become ages at this date")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("detect", help="egocentric community detection")
    p.add_argument("--store", required=True)
    p.add_argument("--seed", type=int, default=_env("seed", None, int))
    p.add_argument("--trials", type=int, default=_env("trials", DEFAULT_TRIALS, int))
    p.add_argument("--out", required=True, help="communities CSV")
    p.add_argument("--egos", help="CSV with an 'ego' column restricting the egos")
    p.add_argument("--min-span-years", type=float, help="keep egos active at least this long")
    p.add_argument("--kmin", type=int, help="lower end of the kept degree interval")
    p.add_argument("--kmax", type=int, help="upper end of the kept degree interval")
    p.add_argument("--include-ego", action="store_true",
                   help="search on the graph including the ego (then drop it from its module)")
    p.add_argument("--threads", type=int, default=_env("threads", None, int))
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("overlap", help="overlap curve over s, k or appearance order")
    p.add_argument("--store", required=True)
    p.add_argument("--communities", required=True)
    p.add_argument("--curve", required=True, choices=["s", "k", "order"])
    p.add_argument("--size", type=int, help="community size for --curve order")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("order-stats", help="first-appearance distribution and exponential fit")
    p.add_argument("--store", required=True)
    p.add_argument("--communities", required=True)
    p.add_argument("--c", type=int, required=True, help="number of communities per ego")
    p.add_argument("--mmax", type=int, default=25)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_order_stats)

    p = sub.add_parser("simulate", help="growth-model ensemble curve over k")
    p.add_argument("--kreal", type=int, default=150)
    p.add_argument("--egos", type=int, default=5000)
    p.add_argument("--seed", type=int, default=_env("seed", None, int))
    p.add_argument("--exponent", type=float, default=-1.5)
    p.add_argument("--smin", type=int, default=2)
    p.add_argument("--smax", type=int, default=100)
    p.add_argument("--window", type=int, default=5, help="smoothing window for the extrema note")
    _add_model_constants(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("model-curve", help="analytic overlap tables")
    p.add_argument("--what", required=True, choices=["os", "osn"])
    p.add_argument("--smin", type=int, default=2)
    p.add_argument("--smax", type=int, default=100)
    _add_model_constants(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_model_curve)

    p = sub.add_parser("synth", help="generate a synthetic population")
    p.add_argument("--config", help="SynthConfig JSON (defaults if omitted)")
    p.add_argument("--seed", type=int, default=_env("seed", None, int), help="overrides the config seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    started = time.time()
    try:
        parser = build_parser()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, started)
    except (ConfigError, SchemaError, SynthConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IngestError, PseudoTimeError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
