"""Command-line entry point: ``generate``, ``translate``, ``baseline``, ``evaluate``, ``report``.

Exit codes: 0 success, 1 some language or sentence failed (others were
still written), 2 configuration or input error before any output.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
import uuid
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from ._io import atomic_write_text
from .bootstrap import BootstrapError, bootstrap, generate_baseline, replay_sketch_id
from .config import ConfigError, RunConfig, load_config, make_gateway
from .evaluator import (
    METRICS_SUFFIX,
    FeatureSetChecksumError,
    diversity,
    encode_profile,
    export_distance_matrix,
    language_consistency,
    load_feature_set,
    metrics_report,
    translation_consistency,
    write_metrics,
)
from .gateway import GatewayError
from .fields import ParseError
from .providers import RedactSecrets
from .report import build_report
from .sketch import SKETCH_SUFFIX, SketchFormatError, load_sketch, save_sketch
from .translator import (
    TRANSLATIONS_SUFFIX,
    load_test_sentences,
    read_translations,
    translate_suite,
    write_translations,
)

log = logging.getLogger("conlangkit")

MANIFEST_SUFFIX = ".manifest.json"
PARTIAL_SUFFIX = ".partial.json"
METRICS_FILE = "run" + METRICS_SUFFIX
MATRIX_FILE = "distance_matrix.csv"

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2


def _write_json(path: Path, doc) -> Path:
    return atomic_write_text(path, json.dumps(doc, ensure_ascii=False, indent=2) + "\n")


def _sketch_id(cfg: RunConfig, seed: int, prefix: str = "") -> str:
    if cfg.gateway_mode == "replay":
        return replay_sketch_id(seed, prefix + cfg.user_constraint)
    return uuid.uuid4().hex


def _manifest_base(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "gateway_mode": cfg.gateway_mode,
        "generator_model_id": cfg.generator_model_id,
        "judge_model_id": cfg.judge_model_id,
        "user_constraint": cfg.user_constraint,
    }


def _timed(cfg: RunConfig, entry: dict, start: float) -> dict:
    # Wall-clock times would break byte-identical replay output.
    if cfg.gateway_mode != "replay":
        entry["elapsed_s"] = round(time.monotonic() - start, 3)
    return entry


def cmd_generate(cfg: RunConfig, backend=None) -> int:
    """Bootstrap ``n_languages`` sketches with seeds ``seed, seed+1, ...``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    gw = make_gateway(cfg, backend)
    refine_cfg = cfg.refine_config()

    def one(i: int) -> dict:
        seed = cfg.seed + i
        sid = _sketch_id(cfg, seed)
        start = time.monotonic()
        entry = {"seed": seed, "sketch_id": sid}
        try:
            sketch = bootstrap(
                gw, seed, cfg.user_constraint, refine_cfg, sid,
                partial_path=out / (sid + PARTIAL_SUFFIX), lexicon_size=cfg.lexicon_size,
            )
        except BootstrapError as exc:
            log.error("language %s (seed %d): %s", sid, seed, exc)
            entry.update(status="failed", failed_stage=exc.stage, error=str(exc), file=sid + PARTIAL_SUFFIX)
            return _timed(cfg, entry, start)
        save_sketch(sketch, out / (sid + SKETCH_SUFFIX))
        entry.update(status="ok", file=sid + SKETCH_SUFFIX)
        return _timed(cfg, entry, start)

    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        languages = list(pool.map(one, range(cfg.n_languages)))
    doc = _manifest_base(cfg, "generate")
    doc["seed"], doc["n_languages"], doc["languages"] = cfg.seed, cfg.n_languages, languages
    _write_json(out / ("generate" + MANIFEST_SUFFIX), doc)
    failed = sum(e["status"] != "ok" for e in languages)
    print(f"generated {len(languages) - failed}/{len(languages)} language(s) in {out}")
    return EXIT_PARTIAL if failed else EXIT_OK


def _sketch_paths(cfg: RunConfig, paths) -> list[Path]:
    if paths:
        return [Path(p) for p in paths]
    found = sorted(Path(cfg.output_dir).glob("*" + SKETCH_SUFFIX))
    if not found:
        raise ConfigError(f"no {SKETCH_SUFFIX} files in {cfg.output_dir}")
    return found


def cmd_translate(cfg: RunConfig, sketch_paths=None, backend=None) -> int:
    """Translate the sentence suite with each sketch.

    In corpus mode (``independent_translation`` false) the grown sketch is
    written back as a new version next to the translations.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    sentences = load_test_sentences(cfg.sentences_path)
    sketches = [load_sketch(p) for p in _sketch_paths(cfg, sketch_paths)]
    gw = make_gateway(cfg, backend)
    entries, failed = [], 0
    for sketch in sketches:
        start = time.monotonic()
        res = translate_suite(
            gw, sketch, sentences, cfg.independent_translation, cfg.refine_config(), jobs=cfg.jobs
        )
        write_translations(res.records, out / (sketch.id + TRANSLATIONS_SUFFIX))
        if not cfg.independent_translation:
            save_sketch(res.sketch, out / (sketch.id + SKETCH_SUFFIX))
        for idx, src, msg in res.errors:
            log.error("sketch %s, sentence %d (%r): %s", sketch.id, idx, src, msg)
        failed += len(res.errors)
        entry = {
            "sketch_id": sketch.id,
            "file": sketch.id + TRANSLATIONS_SUFFIX,
            "translated": len(res.records),
            "errors": [{"index": i, "source": s, "error": m} for i, s, m in res.errors],
            "sketch_version": res.sketch.version,
        }
        entries.append(_timed(cfg, entry, start))
    doc = _manifest_base(cfg, "translate")
    doc["independent"], doc["sentences"], doc["languages"] = cfg.independent_translation, sentences, entries
    _write_json(out / ("translate" + MANIFEST_SUFFIX), doc)
    print(f"translated {len(sentences)} sentence(s) for {len(sketches)} language(s); {failed} failure(s)")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_baseline(cfg: RunConfig, backend=None) -> int:
    """Single-prompt comparison languages, written in the same formats as ``generate``/``translate``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    sentences = load_test_sentences(cfg.sentences_path)
    gw = make_gateway(cfg, backend)

    def one(i: int) -> dict:
        seed = cfg.seed + i
        sid = _sketch_id(cfg, seed, "baseline:")
        start = time.monotonic()
        entry = {"seed": seed, "sketch_id": sid}
        try:
            sketch, records = generate_baseline(
                gw, cfg.user_constraint, sentences, seed, sid, cfg.max_retries
            )
        except (GatewayError, ParseError, ValueError) as exc:
            log.error("baseline language (seed %d): %s", seed, exc)
            entry.update(status="failed", error=str(exc))
            return _timed(cfg, entry, start)
        save_sketch(sketch, out / (sid + SKETCH_SUFFIX))
        write_translations(records, out / (sid + TRANSLATIONS_SUFFIX))
        entry.update(status="ok", file=sid + SKETCH_SUFFIX)
        return _timed(cfg, entry, start)

    with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
        languages = list(pool.map(one, range(cfg.n_languages)))
    doc = _manifest_base(cfg, "baseline")
    doc["seed"], doc["languages"] = cfg.seed, languages
    _write_json(out / ("baseline" + MANIFEST_SUFFIX), doc)
    failed = sum(e["status"] != "ok" for e in languages)
    print(f"baseline: {len(languages) - failed}/{len(languages)} language(s) in {out}")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_evaluate(cfg: RunConfig, sketch_paths=None, translations_paths=None, backend=None) -> int:
    """Typological profiles, diversity, and both consistency rates.

    Translation files are matched to sketches by name (``<id>.translations.jsonl``),
    from ``translations_paths`` if given, else from the output directory.
    Diversity is reported as unavailable for a single language.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    feature_set = load_feature_set(cfg.features_path, cfg.features_checksum)
    sketches = [load_sketch(p) for p in _sketch_paths(cfg, sketch_paths)]
    tfiles = {Path(p).name: Path(p) for p in translations_paths or ()}
    gw = make_gateway(cfg, backend)
    judge = cfg.judge_model_id
    notes, profiles, lang_rates, trans_rates = [], [], {}, {}
    failures = 0
    for sketch in sketches:
        try:
            profiles.append(encode_profile(gw, judge, sketch, feature_set, cfg.max_retries))
            lang_rates[sketch.id] = language_consistency(
                gw, judge, sketch, cfg.per_section, sketch.seed, cfg.max_retries, cfg.jobs
            )
        except (GatewayError, ValueError) as exc:
            failures += 1
            log.error("evaluating %s: %s", sketch.id, exc)
            notes.append(f"{sketch.id}: evaluation failed ({exc})")
            continue
        tname = sketch.id + TRANSLATIONS_SUFFIX
        tpath = tfiles.get(tname, out / tname) if translations_paths is None else tfiles.get(tname)
        records = read_translations(tpath) if tpath is not None and tpath.exists() else []
        if records:
            trans_rates[sketch.id] = translation_consistency(gw, judge, sketch, records, cfg.max_retries, cfg.jobs)
        else:
            notes.append(f"{sketch.id}: no translations, translation consistency not computed")

    div = None
    if len(profiles) < 2:
        notes.append("diversity unavailable: fewer than two languages")
    else:
        try:
            div = diversity(profiles)
            export_distance_matrix(div, out / MATRIX_FILE)
        except ValueError as exc:
            notes.append(f"diversity unavailable: {exc}")
            div = None
    doc = metrics_report(
        feature_set, profiles, div, lang_rates, trans_rates, MATRIX_FILE if div else None, notes
    )
    write_metrics(doc, out / METRICS_FILE)
    summary = f"d_mean={div.d_mean:.4f}" if div else "diversity unavailable"
    print(f"evaluated {len(profiles)} language(s): {summary}")
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    path = build_report(cfg.output_dir)
    print(f"report written to {path / 'index.html'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--constraint", dest="user_constraint")
    common.add_argument("--model", dest="generator_model_id")
    common.add_argument("--judge-model", dest="judge_model_id")
    common.add_argument("--mode", dest="gateway_mode", choices=("live", "record", "replay"))
    common.add_argument("--fixtures", dest="fixtures_path")
    common.add_argument("--out", dest="output_dir")
    common.add_argument("--n", dest="n_languages", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="conlangkit", description="Generate and evaluate constructed languages.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="bootstrap new language sketches")
    p = sub.add_parser("translate", parents=[common], help="translate the sentence suite")
    p.add_argument("sketches", nargs="*", help="sketch files (default: all in --out)")
    p.add_argument("--sentences", dest="sentences_path")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--independent", dest="independent_translation", action="store_const", const=True)
    mode.add_argument("--corpus", dest="independent_translation", action="store_const", const=False)
    p = sub.add_parser("baseline", parents=[common], help="single-prompt comparison languages")
    p.add_argument("--sentences", dest="sentences_path")
    p = sub.add_parser("evaluate", parents=[common], help="compute diversity and consistency metrics")
    p.add_argument("sketches", nargs="*", help="sketch files (default: all in --out)")
    p.add_argument("--features", dest="features_path")
    p.add_argument("--translations", nargs="+", help="translation files (default: matched in --out)")
    sub.add_parser("report", parents=[common], help="render the static HTML report")
    return parser


_CONFIG_KEYS = (
    "seed", "user_constraint", "generator_model_id", "judge_model_id", "gateway_mode", "fixtures_path",
    "output_dir", "n_languages", "jobs", "sentences_path", "independent_translation", "features_path",
)


def _setup_logging(verbose: bool):
    handler = logging.StreamHandler(sys.stderr)
    handler.addFilter(RedactSecrets())
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger()
    root.handlers[:] = [handler]
    root.setLevel(logging.INFO if verbose else logging.WARNING)
    logging.captureWarnings(True)


def main(argv=None, backend=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            cfg = load_config(args.config, **overrides)
            if args.command != "report":
                cfg.validate()
        sketches = getattr(args, "sketches", None)
        if args.command == "generate":
            return cmd_generate(cfg, backend)
        if args.command == "translate":
            return cmd_translate(cfg, sketches, backend)
        if args.command == "baseline":
            return cmd_baseline(cfg, backend)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, sketches, args.translations, backend)
        return cmd_report(cfg)
    except (ConfigError, SketchFormatError, FeatureSetChecksumError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
