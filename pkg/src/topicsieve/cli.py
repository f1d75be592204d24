"""Config-driven command line for the full pipeline.

Each subcommand reads its inputs from files, writes its artifacts into
the output directory, and drops a manifest (resolved config, config
checksum, seed, library versions) next to them, so any artifact can be
regenerated from its manifest alone. Stages compose via files only:

    synth -> sweep -> select -> classify -> evaluate / ensemble
    ingest -> dedup -> featurize -> train -> dump-topics

Exit status is 0 on success and nonzero with a diagnostic on any
validation or module error. Environment overrides are deliberately
limited: TOPICSIEVE_OUT replaces the output directory, and
TOPICSIEVE_THREADS caps the numba thread count.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from . import __version__

log = logging.getLogger("topicsieve")

_DEFAULT_CONFIG = {
    "hazard": "hazard",
    "seed": 123,
    "paths": {
        "corpus": None,
        "keywords": None,
        "stopwords": None,
        "gazetteer": None,
        "gold": None,
        "output_dir": "out",
    },
    "filters": {
        "min_tokens": 30,
        "max_tokens": 1700,
        "max_nonalpha_ratio": 0.11,
        "forbidden_ressort_substrings": ["lokal"],
        "require_location": True,
    },
    "dedup": {"num_hashes": 128, "shingle_size": 3, "threshold": 0.8, "seed": 1},
    "features": {
        "min_doc_freq": 5,
        "allowed_pos": None,
        "keyword_mode": "exact",
        "weighting": "counts",
    },
    "model": {
        "kind": "lda",
        "num_topics": 100,
        "alpha": "auto",
        "eta": "auto",
        "iterations": 400,
        "passes": 20,
        "burn_in": 50,
        "nmf_max_iters": 200,
        "nmf_tol": 1e-4,
    },
    "grid": {
        "kinds": ["lda"],
        "num_topics": None,
        "min_doc_freq": None,
        "pos_sets": None,
        "methods": ["keyword_proximity", "top_terms"],
        "thetas": None,
        "gammas": None,
        "ks": None,
        "keyword_mode": "exact",
    },
    "selection": {"recall_floor": 0.05, "balanced": "min"},
    "synth": {},
}


class ConfigError(ValueError):
    pass


def _deep_merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if key not in merged:
            raise ConfigError(f"unknown config key {key!r}")
        if isinstance(merged[key], dict) and isinstance(value, dict):
            for sub, sub_value in value.items():
                if sub not in merged[key]:
                    raise ConfigError(f"unknown config key {key}.{sub}")
                merged[key][sub] = sub_value
        else:
            merged[key] = value
    return merged


class PipelineConfig:
    """Resolved pipeline settings: defaults overlaid with a JSON file."""

    def __init__(self, data: dict):
        self.data = data

    @classmethod
    def load(cls, path: Optional[str]) -> "PipelineConfig":
        if path is None:
            return cls(copy.deepcopy(_DEFAULT_CONFIG))
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}")
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        # synth keys are validated by SynthConfig itself
        merged = _deep_merge({**_DEFAULT_CONFIG, "synth": raw.get("synth", {})}, raw)
        return cls(merged)

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    def out_dir(self, cli_override: Optional[str]) -> Path:
        env = os.environ.get("TOPICSIEVE_OUT")
        chosen = cli_override or env or self.data["paths"]["output_dir"]
        return Path(chosen)

    def checksum(self) -> str:
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _write_manifest(out: Path, subcommand: str, cfg: PipelineConfig, inputs, outputs):
    import numba
    import numpy
    import scipy

    manifest = {
        "subcommand": subcommand,
        "package_version": __version__,
        "python": sys.version.split()[0],
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "seed": cfg.seed,
        "config_checksum": cfg.checksum(),
        "config": cfg.data,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
    }
    path = out / f"manifest_{subcommand.replace('-', '_')}.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _load_filter_rules(cfg: PipelineConfig):
    from .corpus import FilterRules, Gazetteer

    gaz_path = cfg["paths"].get("gazetteer")
    gazetteer = Gazetteer.from_json(gaz_path) if gaz_path else Gazetteer.default()
    f = cfg["filters"]
    return FilterRules(
        min_tokens=f["min_tokens"],
        max_tokens=f["max_tokens"],
        max_nonalpha_ratio=f["max_nonalpha_ratio"],
        forbidden_ressort_substrings=tuple(f["forbidden_ressort_substrings"]),
        require_location=f["require_location"],
        location_gazetteer=gazetteer,
    )


def _resolve_corpus_input(cfg: PipelineConfig, out: Path, explicit: Optional[str]) -> Path:
    """Latest pipeline stage available: --input > unique > kept > config/synth."""
    if explicit:
        p = Path(explicit)
        if not p.exists():
            raise ConfigError(f"--input: file not found: {p}")
        return p
    for name in ("unique.jsonl", "kept.jsonl"):
        if (out / name).exists():
            return out / name
    return _resolve_artifact(cfg, out, "corpus", "corpus.jsonl")


def _resolve_artifact(cfg: PipelineConfig, out: Path, key: str, filename: str) -> Path:
    """A configured path wins; otherwise fall back to the out-dir artifact."""
    value = cfg["paths"].get(key)
    if value:
        p = Path(value)
        if not p.exists():
            raise ConfigError(f"paths.{key}: file not found: {p}")
        return p
    fallback = out / filename
    if fallback.exists():
        return fallback
    raise ConfigError(
        f"config paths.{key} is not set and {fallback} does not exist"
    )


def _tokenized_corpus(cfg: PipelineConfig, corpus_path: Path):
    from .corpus import load_jsonl
    from .features import load_stopwords, normalize_tokens

    stopwords = load_stopwords(cfg["paths"].get("stopwords"))
    return [normalize_tokens(d, stopwords=stopwords) for d in load_jsonl(corpus_path)]


def _grid_from_config(cfg: PipelineConfig):
    from . import classifier as cl

    g = cfg["grid"]

    def axis(value, default):
        return tuple(value) if value is not None else default

    pos_sets = g["pos_sets"]
    if pos_sets is None:
        pos = cl.DEFAULT_POS_SETS
    else:
        pos = tuple(frozenset(p) if p else None for p in pos_sets)
    return cl.SweepGrid(
        kinds=tuple(g["kinds"]),
        num_topics=axis(g["num_topics"], cl.DEFAULT_NUM_TOPICS),
        min_doc_freq=axis(g["min_doc_freq"], cl.DEFAULT_MIN_DOC_FREQ),
        pos_sets=pos,
        methods=tuple(g["methods"]),
        thetas=axis(g["thetas"], cl.DEFAULT_THETA_GRID),
        gammas=axis(g["gammas"], cl.DEFAULT_GAMMA_GRID),
        ks=axis(g["ks"], cl.DEFAULT_K_GRID),
        keyword_mode=g["keyword_mode"],
    )


def _fit_from_variant(cfg: PipelineConfig, variant, tokenized, keywords, debug):
    from .classifier import model_key as make_key
    from .features import build_feature_space, vectorize
    from .lda import fit_lda
    from .nmf import fit_nmf
    from .topicmodel import LDAConfig, NMFConfig

    fs = build_feature_space(
        tokenized,
        keywords,
        variant.min_doc_freq,
        variant.pos_tags,
        keyword_mode=cfg["grid"]["keyword_mode"],
    )
    m = cfg["model"]
    if variant.kind == "lda":
        matrix = vectorize(tokenized, fs, "counts")
        model = fit_lda(
            matrix,
            LDAConfig(
                num_topics=variant.num_topics,
                iterations=m["iterations"],
                passes=m["passes"],
                burn_in=m["burn_in"],
                seed=cfg.seed,
            ),
            debug=debug,
        )
    else:
        matrix = vectorize(tokenized, fs, "tfidf")
        model = fit_nmf(
            matrix,
            NMFConfig(
                num_topics=variant.num_topics,
                max_iters=m["nmf_max_iters"],
                tol=m["nmf_tol"],
                seed=cfg.seed,
            ),
        )
    assert make_key(variant.kind, variant.num_topics, variant.min_doc_freq, variant.pos_tags) == variant.model_key
    return model, fs


# --------------------------------------------------------------------------
# Subcommands


def cmd_synth(cfg: PipelineConfig, args) -> dict:
    from .synth import SynthConfig, generate, write_bundle

    synth_kwargs = dict(cfg["synth"])
    synth_kwargs.setdefault("seed", cfg.seed)
    synth_kwargs.setdefault("hazard", cfg["hazard"])
    bundle = generate(SynthConfig(**synth_kwargs))
    paths = write_bundle(bundle, args.out_path)
    n_rel = sum(g.relevant for g in bundle.gold)
    log.info("generated %d documents (%d relevant) in %s",
             len(bundle.documents), n_rel, args.out_path)
    return {"inputs": {}, "outputs": paths}


def cmd_ingest(cfg: PipelineConfig, args) -> dict:
    from .corpus import (
        KeywordList, apply_filters, clean_and_split, load_jsonl,
        save_jsonl, write_rejection_log,
    )
    from .features import tokenize

    corpus_path = _resolve_artifact(cfg, args.out_path, "corpus", "corpus.jsonl")
    kw_path = _resolve_artifact(cfg, args.out_path, "keywords", "keywords.json")
    keywords = KeywordList.from_json(kw_path)
    rules = _load_filter_rules(cfg)
    docs = load_jsonl(corpus_path)
    cleaned = clean_and_split(docs, rules)
    kept, rejected = [], []
    for doc in cleaned:
        verdict = apply_filters(doc, tokenize(doc.text), keywords, rules)
        if verdict.keep:
            kept.append(doc)
        else:
            rejected.append((doc.id, verdict.reasons))
    out = args.out_path
    kept_path, rej_path = out / "kept.jsonl", out / "rejected.csv"
    save_jsonl(kept, kept_path)
    write_rejection_log(rejected, rej_path)
    log.info("ingest: %d raw -> %d cleaned -> %d kept (%d rejected)",
             len(docs), len(cleaned), len(kept), len(rejected))
    return {
        "inputs": {"corpus": corpus_path, "keywords": kw_path},
        "outputs": {"kept": kept_path, "rejected": rej_path},
    }


def cmd_dedup(cfg: PipelineConfig, args) -> dict:
    from .corpus import load_jsonl, save_jsonl
    from .dedup import group_duplicates, save_groups, save_signatures, sign_corpus
    from .features import tokenize

    src = _resolve_corpus_input(cfg, args.out_path, args.input)
    docs = load_jsonl(src)
    d = cfg["dedup"]
    sigs = sign_corpus(
        ((doc.id, tokenize(doc.text)) for doc in docs),
        num_hashes=d["num_hashes"],
        seed=d["seed"],
        shingle_size=d["shingle_size"],
    )
    groups = group_duplicates(sigs, threshold=d["threshold"])
    keep_ids = set(groups.representative_ids())
    signed = {s.doc_id for s in sigs}
    # docs too short to sign have no near-duplicates; keep them
    unique = [doc for doc in docs if doc.id in keep_ids or doc.id not in signed]
    out = args.out_path
    paths = {
        "signatures": out / "signatures.bin",
        "groups": out / "groups.csv",
        "unique": out / "unique.jsonl",
    }
    save_signatures(sigs, paths["signatures"])
    save_groups(groups, paths["groups"])
    save_jsonl(unique, paths["unique"])
    n_dupes = len(docs) - len(unique)
    log.info("dedup: %d docs -> %d unique (%d near-duplicates dropped)",
             len(docs), len(unique), n_dupes)
    return {"inputs": {"corpus": src}, "outputs": paths}


def cmd_featurize(cfg: PipelineConfig, args) -> dict:
    from .corpus import KeywordList
    from .features import build_feature_space, save_matrix, vectorize

    kw_path = _resolve_artifact(cfg, args.out_path, "keywords", "keywords.json")
    src = _resolve_corpus_input(cfg, args.out_path, args.input)
    keywords = KeywordList.from_json(kw_path)
    tokenized = _tokenized_corpus(cfg, src)
    f = cfg["features"]
    pos = frozenset(f["allowed_pos"]) if f["allowed_pos"] else None
    fs = build_feature_space(
        tokenized, keywords, f["min_doc_freq"], pos, keyword_mode=f["keyword_mode"]
    )
    matrix = vectorize(tokenized, fs, f["weighting"])
    out = args.out_path
    outputs = {"features": out / "features.txt", "matrix": out / "matrix.bin"}
    fs.save(outputs["features"])
    save_matrix(matrix, outputs["matrix"])
    log.info("featurize: %d docs x %d terms (%s)",
             matrix.matrix.shape[0], matrix.matrix.shape[1], f["weighting"])
    return {"inputs": {"corpus": src, "keywords": kw_path}, "outputs": outputs}


def cmd_train(cfg: PipelineConfig, args) -> dict:
    from .features import load_matrix
    from .lda import fit_lda
    from .nmf import fit_nmf
    from .topicmodel import LDAConfig, NMFConfig, save_model

    out = args.out_path
    matrix_path = Path(args.input) if args.input else out / "matrix.bin"
    if not matrix_path.exists():
        raise ConfigError(f"matrix not found: {matrix_path} (run featurize first)")
    matrix = load_matrix(matrix_path)
    m = cfg["model"]
    if m["kind"] == "lda":
        model = fit_lda(
            matrix,
            LDAConfig(
                num_topics=m["num_topics"],
                alpha=m["alpha"],
                eta=m["eta"],
                iterations=m["iterations"],
                passes=m["passes"],
                burn_in=m["burn_in"],
                seed=cfg.seed,
            ),
            debug=args.debug,
        )
    elif m["kind"] == "nmf":
        model = fit_nmf(
            matrix,
            NMFConfig(
                num_topics=m["num_topics"],
                max_iters=m["nmf_max_iters"],
                tol=m["nmf_tol"],
                seed=cfg.seed,
            ),
        )
    else:
        raise ConfigError(f"model.kind must be lda or nmf, got {m['kind']!r}")
    model_path = out / "model.bin"
    save_model(model, model_path)
    log.info("train: %s with %d topics over %d docs",
             m["kind"], model.num_topics, len(model.doc_ids))
    return {"inputs": {"matrix": matrix_path}, "outputs": {"model": model_path}}


def cmd_dump_topics(cfg: PipelineConfig, args) -> dict:
    from .features import FeatureSpace
    from .topicmodel import dump_topics, load_model

    out = args.out_path
    model_path = Path(args.model) if args.model else out / "model.bin"
    features_path = out / "features.txt"
    for p in (model_path, features_path):
        if not p.exists():
            raise ConfigError(f"required artifact not found: {p}")
    model = load_model(model_path)
    fs = FeatureSpace.load(features_path)
    topics_path = out / "topics.csv"
    dump_topics(model, fs, topics_path, n=args.num_terms)
    log.info("dump-topics: %d topics x %d terms -> %s",
             model.num_topics, args.num_terms, topics_path)
    return {
        "inputs": {"model": model_path, "features": features_path},
        "outputs": {"topics": topics_path},
    }


def cmd_sweep(cfg: PipelineConfig, args) -> dict:
    from .classifier import save_sweep_results, sweep
    from .corpus import KeywordList
    from .evaluation import load_gold

    kw_path = _resolve_artifact(cfg, args.out_path, "keywords", "keywords.json")
    gold_path = _resolve_artifact(cfg, args.out_path, "gold", "gold.csv")
    src = _resolve_corpus_input(cfg, args.out_path, args.input)
    keywords = KeywordList.from_json(kw_path)
    gold = load_gold(gold_path)
    train_gold = {g.doc_id: g.relevant for g in gold if g.split == "train"}
    if not train_gold:
        raise ConfigError(f"{gold_path}: no train-split labels")
    tokenized = _tokenized_corpus(cfg, src)
    m = cfg["model"]
    outcome = sweep(
        tokenized,
        keywords,
        train_gold,
        _grid_from_config(cfg),
        seed=cfg.seed,
        lda_passes=m["passes"],
        lda_iterations=m["iterations"],
        nmf_max_iters=m["nmf_max_iters"],
        debug=args.debug,
    )
    sweep_path = args.out_path / "sweep.csv"
    save_sweep_results(outcome.results, sweep_path)
    log.info("sweep: %d grid cells over %d models -> %s",
             len(outcome.results), len(outcome.models), sweep_path)
    return {
        "inputs": {"corpus": src, "keywords": kw_path, "gold": gold_path},
        "outputs": {"sweep": sweep_path},
    }


def cmd_select(cfg: PipelineConfig, args) -> dict:
    from .classifier import load_sweep_results, save_variant_manifest, select_variants

    out = args.out_path
    sweep_path = Path(args.input) if args.input else out / "sweep.csv"
    if not sweep_path.exists():
        raise ConfigError(f"sweep results not found: {sweep_path} (run sweep first)")
    results = load_sweep_results(sweep_path)
    s = cfg["selection"]
    variants = select_variants(
        results, recall_floor=s["recall_floor"], balanced=s["balanced"]
    )
    variants_path = out / "variants.json"
    save_variant_manifest(variants, variants_path)
    for name, row in sorted(variants.items()):
        log.info("select: %s = %s %s theta=%.3f (train P=%.3f R=%.3f F1=%.3f)",
                 name, row.model_key, row.rule().describe(), row.theta,
                 row.precision, row.recall, row.f1)
    return {"inputs": {"sweep": sweep_path}, "outputs": {"variants": variants_path}}


def cmd_classify(cfg: PipelineConfig, args) -> dict:
    from .classifier import (
        classify, load_variant_manifest, partition_topics, save_predictions,
    )
    from .corpus import KeywordList
    from .topicmodel import save_model

    out = args.out_path
    kw_path = _resolve_artifact(cfg, out, "keywords", "keywords.json")
    variants_path = Path(args.variants) if args.variants else out / "variants.json"
    if not variants_path.exists():
        raise ConfigError(f"variant manifest not found: {variants_path} (run select first)")
    src = _resolve_corpus_input(cfg, out, args.input)
    keywords = KeywordList.from_json(kw_path)
    tokenized = _tokenized_corpus(cfg, src)
    variants = load_variant_manifest(variants_path)
    outputs = {}
    fitted = {}
    for name, variant in sorted(variants.items()):
        if variant.model_key in fitted:
            model, fs = fitted[variant.model_key]
        else:
            model, fs = _fit_from_variant(cfg, variant, tokenized, keywords, args.debug)
            fitted[variant.model_key] = (model, fs)
            model_path = out / f"model_{variant.model_key}.bin"
            save_model(model, model_path)
            outputs[f"model_{variant.model_key}"] = model_path
        partition = partition_topics(model, fs, variant.rule())
        preds = classify(
            model, partition, variant.classifier_config(),
            source=name.replace("_", "-"),
        )
        pred_path = out / f"predictions_{name}.csv"
        save_predictions(preds, pred_path)
        outputs[f"predictions_{name}"] = pred_path
        log.info("classify: %s labeled %d/%d docs relevant", name,
                 sum(preds.predictions.values()), len(preds.predictions))
    return {
        "inputs": {"corpus": src, "variants": variants_path, "keywords": kw_path},
        "outputs": outputs,
    }


def cmd_evaluate(cfg: PipelineConfig, args) -> dict:
    from .evaluation import (
        baseline, evaluate, import_external, load_gold,
        render_report, save_report_json,
    )

    out = args.out_path
    gold_path = _resolve_artifact(cfg, out, "gold", "gold.csv")
    gold = load_gold(gold_path)
    if args.baseline:
        report = baseline(gold, args.split)
        source = "baseline"
        inputs = {"gold": gold_path}
    else:
        if not args.predictions:
            raise ConfigError("evaluate needs --predictions FILE or --baseline")
        pred_path = Path(args.predictions)
        if not pred_path.exists():
            raise ConfigError(f"predictions file not found: {pred_path}")
        source = args.source or pred_path.stem
        preds = import_external(pred_path, source)
        report = evaluate(preds, gold, args.split)
        inputs = {"predictions": pred_path, "gold": gold_path}
    json_path = out / f"report_{source}_{args.split}.json"
    text_path = out / f"report_{source}_{args.split}.txt"
    save_report_json(report, json_path)
    rendered = render_report(report)
    text_path.write_text(rendered + "\n", encoding="utf-8")
    if log.isEnabledFor(logging.INFO):
        print(rendered)
    return {"inputs": inputs, "outputs": {"json": json_path, "text": text_path}}


def cmd_ensemble(cfg: PipelineConfig, args) -> dict:
    from .classifier import save_predictions
    from .evaluation import import_external, majority_vote

    if len(args.inputs) != 3:
        raise ConfigError(f"ensemble needs exactly 3 prediction files, got {len(args.inputs)}")
    preds = []
    for p in args.inputs:
        path = Path(p)
        if not path.exists():
            raise ConfigError(f"predictions file not found: {path}")
        preds.append(import_external(path, path.stem))
    voted = majority_vote(preds)
    out_path = args.out_path / "ensemble.csv"
    save_predictions(voted, out_path)
    log.info("ensemble: majority over %s -> %s",
             ", ".join(p.source for p in preds), out_path)
    return {
        "inputs": {f"predictions_{i}": p for i, p in enumerate(args.inputs)},
        "outputs": {"ensemble": out_path},
    }


_COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "dedup": cmd_dedup,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "dump-topics": cmd_dump_topics,
    "sweep": cmd_sweep,
    "select": cmd_select,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "ensemble": cmd_ensemble,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topicsieve",
        description="Refine keyword-retrieved news into hazard-relevant subsets.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("-c", "--config", help="pipeline config JSON")
        p.add_argument("-o", "--out", help="output directory (or TOPICSIEVE_OUT)")
        level = p.add_mutually_exclusive_group()
        level.add_argument("-q", "--quiet", action="store_true", help="warnings only")
        level.add_argument("--debug", action="store_true",
                           help="debug logging plus sampler consistency asserts")
        return p

    add("synth", "generate the synthetic hazard corpus with known labels")
    p = add("ingest", "clean, split and filter a raw corpus")
    p = add("dedup", "group near-duplicates and keep one representative each")
    p.add_argument("--input", help="corpus JSONL (default: latest pipeline stage)")
    p = add("featurize", "build the feature space and document-term matrix")
    p.add_argument("--input", help="corpus JSONL (default: latest pipeline stage)")
    p = add("train", "fit a single topic model from the config")
    p.add_argument("--input", help="matrix file (default: OUT/matrix.bin)")
    p = add("dump-topics", "write each topic's top terms as CSV")
    p.add_argument("--model", help="model file (default: OUT/model.bin)")
    p.add_argument("-n", "--num-terms", type=int, default=10)
    p = add("sweep", "grid-search models and rules against train labels")
    p.add_argument("--input", help="corpus JSONL (default: latest pipeline stage)")
    p = add("select", "pick best-F1 / balanced / precision variants")
    p.add_argument("--input", help="sweep CSV (default: OUT/sweep.csv)")
    p = add("classify", "refit selected variants and write predictions")
    p.add_argument("--input", help="corpus JSONL (default: latest pipeline stage)")
    p.add_argument("--variants", help="variant manifest (default: OUT/variants.json)")
    p = add("evaluate", "score a prediction file against gold labels")
    p.add_argument("--predictions", help="prediction CSV to score")
    p.add_argument("--source", help="label for the report (default: file stem)")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--baseline", action="store_true",
                   help="score the all-positive baseline instead of a file")
    p = add("ensemble", "majority-vote three prediction files")
    p.add_argument("inputs", nargs="*", help="exactly three prediction CSVs")
    return parser


def _setup_logging(args) -> None:
    if args.quiet:
        level = logging.WARNING
    elif args.debug:
        level = logging.DEBUG
    else:
        level = logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _apply_thread_limit() -> None:
    raw = os.environ.get("TOPICSIEVE_THREADS")
    if not raw:
        return
    try:
        threads = max(1, int(raw))
    except ValueError:
        log.warning("ignoring non-integer TOPICSIEVE_THREADS=%r", raw)
        return
    import numba

    try:
        numba.set_num_threads(min(threads, numba.config.NUMBA_NUM_THREADS))
    except ValueError as exc:
        log.warning("could not apply TOPICSIEVE_THREADS=%s: %s", threads, exc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args)
    _apply_thread_limit()
    try:
        cfg = PipelineConfig.load(args.config)
        out = cfg.out_dir(args.out)
        out.mkdir(parents=True, exist_ok=True)
        args.out_path = out
        handler = _COMMANDS[args.subcommand]
        io_map = handler(cfg, args)
        manifest = _write_manifest(
            out, args.subcommand, cfg, io_map["inputs"], io_map["outputs"]
        )
        log.debug("manifest written to %s", manifest)
        return 0
    except ConfigError as exc:
        log.error("invalid configuration: %s", exc)
        return 2
    except (ValueError, KeyError, OSError, AssertionError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
