#!/usr/bin/env python3
"""Full pipeline demo on the synthetic hazard corpus.

Generates 1,000 documents with known ground truth, sweeps a small model
grid on the train split, selects the three named variants, and reports
train/test metrics for each variant, their majority-vote ensemble, and
the all-positive baseline.

Usage:
    python3 scripts/run_synthetic_experiment.py [--out DIR] [--seed N]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from topicsieve.classifier import (
    SweepGrid,
    classify,
    partition_topics,
    save_predictions,
    save_sweep_results,
    save_variant_manifest,
    select_variants,
    sweep,
)
from topicsieve.evaluation import baseline, evaluate, majority_vote, render_report
from topicsieve.features import load_stopwords, normalize_tokens
from topicsieve.synth import SynthConfig, generate, write_bundle
from topicsieve.topicmodel import save_model


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out/synthetic", help="artifact directory")
    parser.add_argument("--seed", type=int, default=123)
    parser.add_argument("--num-docs", type=int, default=1000)
    return parser.parse_args()


def main():
    args = parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    print(f"generating {args.num_docs} synthetic documents (seed {args.seed}) ...")
    bundle = generate(SynthConfig(num_docs=args.num_docs, seed=args.seed))
    write_bundle(bundle, out)
    n_rel = sum(g.relevant for g in bundle.gold)
    print(f"  {n_rel} relevant / {len(bundle.documents)} total")

    stopwords = load_stopwords()
    tokenized = [normalize_tokens(d, stopwords=stopwords) for d in bundle.documents]
    train_gold = {g.doc_id: g.relevant for g in bundle.gold if g.split == "train"}

    grid = SweepGrid(
        kinds=("lda", "nmf"),
        num_topics=(6, 8, 12),
        min_doc_freq=(2, 5),
        pos_sets=(None,),
    )
    n_models = len(grid.kinds) * len(grid.num_topics) * len(grid.min_doc_freq)
    print(f"sweeping {n_models} models x rule grid on the train split ...")
    outcome = sweep(tokenized, bundle.keywords, train_gold, grid, seed=args.seed)
    save_sweep_results(outcome.results, out / "sweep.csv")
    print(f"  {len(outcome.results)} grid cells -> {out / 'sweep.csv'}")

    variants = select_variants(outcome.results)
    save_variant_manifest(variants, out / "variants.json")

    predictions = {}
    for name, row in sorted(variants.items()):
        model, fs = outcome.models[row.model_key]
        save_model(model, out / f"model_{row.model_key}.bin")
        part = partition_topics(model, fs, row.rule())
        preds = classify(
            model, part, row.classifier_config(), source=name.replace("_", "-")
        )
        save_predictions(preds, out / f"predictions_{name}.csv")
        predictions[name] = preds

    print()
    for name in ("tm_f1", "tm_b", "tm_p"):
        row = variants[name]
        print(f"== {name}: {row.model_key} {row.rule().describe()} theta={row.theta}")
        for split in ("train", "test"):
            report = evaluate(predictions[name], bundle.gold, split)
            print(
                f"   {split:<5}  P={report.precision:.3f} R={report.recall:.3f} "
                f"F1={report.f1:.3f}  (tp={report.tp} fp={report.fp} fn={report.fn})"
            )

    voted = majority_vote([predictions[n] for n in ("tm_f1", "tm_b", "tm_p")])
    save_predictions(voted, out / "predictions_majority.csv")
    print("\n== majority vote over the three variants")
    print(render_report(evaluate(voted, bundle.gold, "test")))

    print("\n== all-positive baseline")
    print(render_report(baseline(bundle.gold, "test")))
    print(f"\nartifacts in {out}/")


if __name__ == "__main__":
    main()
