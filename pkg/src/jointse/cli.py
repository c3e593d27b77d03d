"""Command line entry point: ``jointse simulate|train|enhance|evaluate|report``.

Exit codes: 0 success, 1 invalid configuration or inputs, 2 runtime failure,
3 partial failure (some utterances failed).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

from pydantic import ValidationError

from .config import RunConfig, load_config, parse_override, write_resolved
from .corpus import (
    RirSpec,
    build_joint_corpus,
    build_noisy_corpus,
    build_reverb_corpus,
    compose_mixed_objective,
    impulse_rir,
    materialize,
    read_manifest,
    write_toy_sources,
)
from .errors import CheckpointError, JointSEError, ParameterError
from .metrics.report import HIGHER_IS_BETTER, KNOWN_METRICS
from .pipeline import (
    Enhancer,
    ExperimentConfig,
    Strategy,
    load_side_inputs,
    run_experiment,
    run_strategy,
)
from .score.checkpoint import from_network, passthrough_checkpoint, save_checkpoint
from .score.network import build_network, n_parameters
from .score.training import train
from .spectral import read_wav, write_wav

log = logging.getLogger("jointse")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_PARTIAL = 0, 1, 2, 3
WORKERS_ENV = "JOINTSE_WORKERS"


class UsageError(Exception):
    pass


# config sections each command depends on; run directories hash only these
_SECTIONS = {
    "corpus": ("seed", "corpus"),
    "train": ("seed", "sde", "spectral", "training", "paths"),
}


def _run_dir(cfg: RunConfig, prefix: str) -> Path:
    sections = _SECTIONS.get(prefix)
    return Path(cfg.paths.out) / f"{prefix}-{cfg.digest(sections)[:10]}"


def _slug(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in label) or "run"


def _sources(directory: str | None) -> dict[str, Path]:
    if directory is None:
        return {}
    d = Path(directory)
    if not d.is_dir():
        raise UsageError(f"source directory {d} does not exist")
    found = {p.stem: p.resolve() for p in sorted(d.glob("*.wav"))}
    if not found:
        raise UsageError(f"no .wav files in {d}")
    return found


def _manifest_path(args, cfg: RunConfig) -> Path:
    path = args.manifest or cfg.paths.manifest
    if path is None:
        raise UsageError("no manifest given (use --manifest or paths.manifest)")
    path = Path(path)
    if not path.exists():
        raise UsageError(f"manifest {path} does not exist")
    return path


def cmd_simulate(args, cfg: RunConfig) -> int:
    c = cfg.corpus
    if c is None:
        raise UsageError("simulate needs a corpus section")
    run = _run_dir(cfg, "corpus")
    if c.clean_dir is not None:
        clean = _sources(c.clean_dir)
        noise = _sources(c.noise_dir)
    else:
        s = c.synthetic
        clean, noise = write_toy_sources(run / "sources", s.n_clean, s.n_noise, seed=cfg.seed,
                                         duration=s.duration, sample_rate=c.sample_rate)
    if c.kind in ("noisy", "joint", "mixed") and not noise:
        raise UsageError(f"corpus kind {c.kind!r} needs noise sources")
    grid = None
    if c.rir == "impulse":
        grid = [impulse_rir(0, c.sample_rate)]
    elif c.rir_grid is not None:
        grid = [RirSpec(t60=r.t60, direct_delay=r.direct_delay, drr_db=r.drr_db, sample_rate=c.sample_rate)
                for r in c.rir_grid]
    common = dict(master_seed=cfg.seed, sample_rate=c.sample_rate)

    def noisy(n):
        return build_noisy_corpus(clean, noise, snr_range=tuple(c.snr_range), n_entries=n, **common)

    def reverb(n):
        return build_reverb_corpus(clean, grid, t60_range=tuple(c.t60_range), n_entries=n,
                                   delay_range=tuple(c.delay_range), **common)

    def joint(n):
        return build_joint_corpus(clean, noise, grid, snr_range=tuple(c.snr_range), n_entries=n,
                                  t60_range=tuple(c.t60_range), delay_range=tuple(c.delay_range), **common)

    if c.kind == "mixed":
        need = math.ceil(c.n_entries / 3)
        manifest = compose_mixed_objective(noisy(need), reverb(need), joint(need), c.n_entries, cfg.seed)
    else:
        manifest = {"noisy": noisy, "reverb": reverb, "joint": joint}[c.kind](c.n_entries)
    materialize(manifest, run, name="manifest", workers=cfg.workers)
    write_resolved(cfg, run)
    print(run / "manifest.jsonl")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    manifest = read_manifest(_manifest_path(args, cfg))
    run = _run_dir(cfg, "train")
    p = cfg.sde.build()
    spectral = cfg.spectral.build()
    tcfg = cfg.training.build(cfg.seed)
    arch = {"kind": "toy_unet", "widths": cfg.training.network.widths, "n_time": cfg.training.network.n_time}
    net = build_network(arch, p, seed=cfg.seed)
    log.info("training %d-parameter network for %d steps", n_parameters(net), tcfg.n_steps)
    result = train(net, manifest, tcfg, p, spectral)
    run.mkdir(parents=True, exist_ok=True)
    ckpt = from_network(net, p, spectral, cfg.seed,
                        extra={"sample_rate": manifest.sample_rate, "train": tcfg.to_dict()})
    save_checkpoint(ckpt, run / "checkpoint.npz")
    with open(run / "loss.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "loss"])
        for i, v in enumerate(result.losses, 1):
            w.writerow([i, repr(v)])
    write_resolved(cfg, run)
    print(run / "checkpoint.npz")
    return EXIT_OK


def _strategy(cfg: RunConfig) -> Strategy:
    if cfg.strategy is None:
        raise UsageError("this command needs a strategy section")
    p = cfg.sde.build()
    spectral = cfg.spectral.build()
    sampler = cfg.sampler.build()
    stages = []
    for st in cfg.strategy.stages:
        if st.checkpoint == "passthrough":
            stages.append(Enhancer(passthrough_checkpoint(p, spectral), sampler, st.label))
        else:
            path = Path(st.checkpoint)
            if not path.exists():
                raise UsageError(f"checkpoint {path} does not exist")
            stages.append(Enhancer.from_file(path, sampler, st.label, ouve=p, spectral=spectral))
    return Strategy(tuple(stages), cfg.strategy.label)


def cmd_enhance(args, cfg: RunConfig) -> int:
    strategy = _strategy(cfg)
    if args.input is None:
        raise UsageError("enhance needs --input (a directory of .wav files or a manifest)")
    src = Path(args.input)
    if src.is_dir():
        inputs = {p.stem: p for p in sorted(src.glob("*.wav"))}
    elif src.exists():
        m = read_manifest(src)
        inputs = {e.id: m.path(e, "noisy") for e in m}
    else:
        raise UsageError(f"input {src} does not exist")
    if not inputs:
        raise UsageError(f"no inputs found in {src}")
    run = _run_dir(cfg, f"enhance-{_slug(strategy.label)}")
    stage1 = run / "stage1" if args.keep_intermediates else None
    failures = {}

    def work(item):
        uid, path = item
        try:
            out = run_strategy(read_wav(path), strategy, cfg.seed, uid, stage1)
            write_wav(run / "enhanced" / f"{uid}.wav", out)
        except (JointSEError, OSError, ValueError) as exc:
            log.error("%s: %s", uid, exc)
            return uid, str(exc)
        return uid, None

    items = sorted(inputs.items())
    if cfg.workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, items))
    else:
        results = [work(i) for i in items]
    failures = {u: e for u, e in results if e is not None}
    run.mkdir(parents=True, exist_ok=True)
    write_resolved(cfg, run)
    (run / "run.json").write_text(json.dumps({"label": strategy.label, "n_inputs": len(items),
                                              "failures": failures}, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    print(run / "enhanced")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    manifest_path = _manifest_path(args, cfg)
    metrics = list(cfg.metrics)
    paths = cfg.paths
    if "wer" in metrics and not (paths.reference_transcripts and paths.hypothesis_transcripts):
        log.warning("no transcripts configured; dropping the wer column")
        metrics.remove("wer")
    if "dnsmos" in metrics and not paths.external_scores:
        log.warning("no external scores configured; dropping the dnsmos column")
        metrics.remove("dnsmos")
    side = load_side_inputs(paths.reference_transcripts, paths.hypothesis_transcripts, paths.external_scores)
    if args.enhanced is not None:
        strategy, label = None, args.label or Path(args.enhanced).name
    else:
        strategy = _strategy(cfg)
        label = args.label or strategy.label
    run = _run_dir(cfg, f"eval-{_slug(label)}")
    exp = ExperimentConfig(manifest=manifest_path, strategy=strategy, metrics=tuple(metrics), out_dir=run,
                           master_seed=cfg.seed, workers=cfg.workers, keep_intermediates=args.keep_intermediates,
                           side=side, label=label, enhanced_dir=args.enhanced)
    report = run_experiment(exp)
    write_resolved(cfg, run)
    for name, s in report.summary().items():
        log.info("%s: %s", name, s["formatted"])
    print(run)
    return EXIT_PARTIAL if report.failures else EXIT_OK


def render_report(dirs: list[Path]) -> tuple[str, str]:
    """Text and CSV comparison tables; best mean per column marked with ``*``."""
    runs = []
    for d in dirs:
        path = Path(d) / "summary.json"
        if not path.exists():
            raise UsageError(f"{d} has no summary.json")
        s = json.loads(path.read_text(encoding="utf-8"))
        runs.append((s.get("label") or Path(d).name, s.get("metrics", {})))
    runs.sort(key=lambda r: r[0])
    present = {m for _, ms in runs for m in ms}
    metrics = [m for m in KNOWN_METRICS if m in present] + sorted(present - set(KNOWN_METRICS))
    best = {}
    for m in metrics:
        vals = [ms[m]["mean"] for _, ms in runs if m in ms]
        best[m] = (max if HIGHER_IS_BETTER.get(m, True) else min)(vals)

    header = ["system", *metrics]
    rows = []
    for label, ms in runs:
        cells = [label]
        for m in metrics:
            if m not in ms:
                cells.append("")
                continue
            mark = " *" if ms[m]["mean"] == best[m] else ""
            cells.append(f"{ms[m]['mean']:.2f} ± {ms[m]['std']:.2f}{mark}")
        rows.append(cells)
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = [" | ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in [header, *rows]]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    text = "\n".join(lines) + "\n"

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["system", *(f"{m}_{k}" for m in metrics for k in ("mean", "std")), "best"])
    for label, ms in runs:
        cells = [label]
        for m in metrics:
            cells += [repr(ms[m]["mean"]), repr(ms[m]["std"])] if m in ms else ["", ""]
        cells.append(";".join(m for m in metrics if m in ms and ms[m]["mean"] == best[m]))
        w.writerow(cells)
    return text, buf.getvalue()


def cmd_report(args, cfg: RunConfig | None) -> int:
    if not args.dirs:
        raise UsageError("report needs at least one result directory")
    text, table = render_report([Path(d) for d in args.dirs])
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(text, encoding="utf-8")
        (out / "report.csv").write_text(table, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointse", description="Score-based speech enhancement toolkit.")
    parser.add_argument("--log-level", default="INFO", help="logging level (default: %(default)s)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        p.add_argument("--config", required=needs_config, help="YAML run configuration")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--workers", type=int, help=f"parallel utterances (default from ${WORKERS_ENV} or 1)")
        p.add_argument("--out", help="override paths.out")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key, e.g. training.n_steps=10")

    p = sub.add_parser("simulate", help="render a corpus and its manifest")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="fit a score network on a manifest")
    common(p)
    p.add_argument("--manifest", help="training manifest (overrides paths.manifest)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("enhance", help="run a strategy over audio files")
    common(p)
    p.add_argument("--input", help="directory of .wav files or a manifest")
    p.add_argument("--keep-intermediates", action="store_true", help="write stage-1 audio of cascades")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("evaluate", help="enhance (or load outputs) and compute metrics")
    common(p)
    p.add_argument("--manifest", help="evaluation manifest (overrides paths.manifest)")
    p.add_argument("--enhanced", help="score existing <id>.wav outputs instead of running the strategy")
    p.add_argument("--label", help="row label in reports")
    p.add_argument("--keep-intermediates", action="store_true", help="write stage-1 audio of cascades")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="compare evaluation runs in one table")
    p.add_argument("dirs", nargs="*", help="evaluation run directories")
    p.add_argument("--out", help="directory for report.txt and report.csv")
    p.set_defaults(func=cmd_report)
    return parser


def _config(args) -> RunConfig:
    overrides = dict(parse_override(s) for s in args.set)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["paths.out"] = args.out
    workers = args.workers
    if workers is None and os.environ.get(WORKERS_ENV):
        try:
            workers = int(os.environ[WORKERS_ENV])
        except ValueError:
            raise UsageError(f"${WORKERS_ENV} must be an integer")
    if workers is not None:
        overrides["workers"] = workers
    return load_config(args.config, overrides)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = None if args.command == "report" else _config(args)
        return args.func(args, cfg)
    except (UsageError, ValidationError, ParameterError, CheckpointError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (JointSEError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
