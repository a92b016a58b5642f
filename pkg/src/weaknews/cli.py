"""The ``weaknews`` command line.

Subcommands: ingest, synth, weak-label, train-trifn, train-defend, evaluate,
explain, sweep-early, ablate-defend. Every command is deterministic given its
inputs and seeds: reruns produce bit-identical models, metrics.csv, and
explanation files. Each command writes a run manifest recording resolved
arguments and SHA-256 digests of its inputs (no timestamps, by design).
"""

import argparse
import dataclasses
import hashlib
import json
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, coattend, harness, synthgen, trifn, weaksup
from .corpus import (EDGES_FILE, ENGAGEMENTS_FILE, NEWS_FILE, PUBLISHERS_FILE,
                     USERS_FILE, build_networks, load_corpus_dir, save_corpus)
from .metrics import evaluate_classification


def read_config(path):
    """key = value lines; '#' starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def coerce_config(values, cls):
    """Pick out and type-coerce the fields of a config dataclass."""
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in values:
            continue
        raw = values[f.name]
        if f.type is int or f.type == "int":
            kwargs[f.name] = int(raw)
        elif f.type is float or f.type == "float":
            kwargs[f.name] = float(raw)
        elif f.type is bool or f.type == "bool":
            kwargs[f.name] = raw.lower() in ("1", "true", "yes")
        else:
            kwargs[f.name] = raw
    return kwargs


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _corpus_files(directory):
    directory = Path(directory)
    return [directory / name for name in
            (NEWS_FILE, USERS_FILE, PUBLISHERS_FILE, ENGAGEMENTS_FILE, EDGES_FILE)]


def write_manifest(path, command, args, inputs, outputs):
    arguments = {}
    for key, value in vars(args).items():
        if key == "func":
            continue
        arguments[key] = str(value) if isinstance(value, Path) else value
    manifest = {
        "command": command,
        "arguments": arguments,
        "inputs": {str(p): _sha256(p) for p in inputs if Path(p).exists()},
        "outputs": sorted(str(o) for o in outputs),
        "package_version": __version__,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def _write_ndjson(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def _resolved_seed(args, config_values=None):
    if args.seed is not None:
        return args.seed
    if config_values and "seed" in config_values:
        return int(config_values["seed"])
    return 0


def _gold_networks(corpus, cutoff):
    gold = corpus.gold_labels()
    cred = weaksup.credibility_scores(corpus, gold)
    return gold, build_networks(corpus, cutoff, credibility=cred)


def _thresholds(args):
    return weaksup.RuleThresholds(cred_low=args.cred_low, cred_high=args.cred_high,
                                  bias=args.bias_threshold,
                                  sentiment=args.sentiment_threshold)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_ingest(args):
    corpus = load_corpus_dir(args.corpus)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out)
    gold = corpus.gold_labels()
    summary = {
        "news": len(corpus.news),
        "fake": sum(1 for y in gold.values() if y == 1),
        "real": sum(1 for y in gold.values() if y == 0),
        "unlabeled": len(corpus.news) - len(gold),
        "users": len(corpus.users),
        "publishers": len(corpus.publishers),
        "engagements": len(corpus.engagements),
        "comments": sum(1 for e in corpus.engagements if e.kind == "comment"),
        "edges": len(corpus.edges),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(out / "manifest.json", "ingest", args,
                   _corpus_files(args.corpus),
                   [p.name for p in _corpus_files(out)] + ["summary.json"])
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_synth(args):
    values = read_config(args.config) if args.config else {}
    kwargs = coerce_config(values, synthgen.SynthConfig)
    kwargs["seed"] = _resolved_seed(args, values)
    config = synthgen.SynthConfig(**kwargs)
    corpus, truth = synthgen.generate(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, out)
    synthgen.save_ground_truth(truth, out / "ground_truth.ndjson")
    write_manifest(out / "manifest.json", "synth", args,
                   [args.config] if args.config else [],
                   [p.name for p in _corpus_files(out)] + ["ground_truth.ndjson"])
    print(f"wrote {len(corpus.news)} news / {len(corpus.users)} users / "
          f"{len(corpus.engagements)} engagements to {out}")
    return 0


def cmd_weak_label(args):
    corpus = load_corpus_dir(args.corpus)
    gold, networks = _gold_networks(corpus, args.cutoff)
    votes, weights, dists = harness.weak_label_corpus(
        corpus, networks, gold, _thresholds(args),
        weaksup.load_lexicon(args.lexicon) if args.lexicon else None)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_ndjson(out / "votes.ndjson",
                  [{"news_id": v.news_id, "rule_id": v.rule_id, "verdict": v.verdict}
                   for v in votes])
    _write_ndjson(out / "labels.ndjson",
                  [{"news_id": nid, "p_fake": dists[nid].p_fake}
                   for nid in sorted(dists)])
    (out / "weights.json").write_text(
        json.dumps(weights, indent=2, sort_keys=True) + "\n")
    write_manifest(out / "manifest.json", "weak-label", args,
                   _corpus_files(args.corpus),
                   ["votes.ndjson", "labels.ndjson", "weights.json"])
    print(f"labeled {len(dists)} news items with {len(votes)} votes")
    return 0


def cmd_train_trifn(args):
    corpus = load_corpus_dir(args.corpus)
    gold, networks = _gold_networks(corpus, args.cutoff)
    _, _, dists = harness.weak_label_corpus(corpus, networks, gold, _thresholds(args))
    weak = {nid: d.p_fake for nid, d in dists.items()
            if nid not in gold and d.p_fake != 0.5}
    hyper = trifn.TriFNHyper(d=args.d, alpha=args.alpha, beta=args.beta,
                             gamma=args.gamma, eta=args.eta, lam=args.lam,
                             max_iters=args.max_iters, tol=args.tol,
                             seed=_resolved_seed(args))
    model, trace = trifn.fit(networks, gold, weak, hyper)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    trifn.save_model(model, out)
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "train-trifn",
                   args, _corpus_files(args.corpus), [out.name])
    print(f"fit stopped after {len(trace) - 1} iteration(s); "
          f"objective {trace[0]:.6g} -> {trace[-1]:.6g}")
    return 0


def cmd_train_defend(args):
    corpus = load_corpus_dir(args.corpus)
    values = read_config(args.config) if args.config else {}
    kwargs = coerce_config(values, coattend.CoAttendConfig)
    kwargs["seed"] = _resolved_seed(args, values)
    config = coattend.CoAttendConfig(**kwargs)
    model = coattend.train(corpus, config, mode=args.mode)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    coattend.save_model(model, out)
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "train-defend",
                   args,
                   _corpus_files(args.corpus) + ([args.config] if args.config else []),
                   [out.name])
    best = max(model.history["val_accuracy"]) if model.history else float("nan")
    print(f"trained {args.mode} model; best validation accuracy {best:.3f}")
    return 0


def _defend_predictions(model, corpus, ids):
    preds, p_fakes = {}, {}
    for nid in ids:
        article = corpus.news_by_id[nid]
        comments = [eng.text for _, eng in corpus.comments_for(nid)]
        p_fake, _, _ = coattend.forward(article, comments, model)
        p_fakes[nid] = p_fake
        preds[nid] = 1 if p_fake > 0.5 else 0
    return preds, p_fakes


def cmd_evaluate(args):
    corpus = load_corpus_dir(args.corpus)
    gold = corpus.gold_labels()
    if not gold:
        raise ValueError("corpus has no gold labels to evaluate against")
    with open(args.model, "rb") as fh:
        magic = fh.read(6)
    if magic == trifn.MAGIC:
        method = "trifn"
        model = trifn.load_model(args.model)
        _, networks = _gold_networks(corpus, args.cutoff)
        if model.D.shape[0] != len(corpus.news):
            raise ValueError("model was trained on a different corpus "
                             f"({model.D.shape[0]} news vs {len(corpus.news)})")
        p_fakes = {nid: trifn.predict(model, networks.news_pos[nid]) for nid in gold}
        preds = {nid: trifn.classify(p) for nid, p in p_fakes.items()}
        seed = model.hyper.seed
    elif magic == coattend.model.MAGIC:
        method = "defend"
        model = coattend.load_model(args.model)
        preds, p_fakes = _defend_predictions(model, corpus, sorted(gold))
        seed = model.config.seed
    else:
        raise ValueError(f"{args.model}: unknown model format")
    metrics = evaluate_classification(preds, gold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    record = harness.SweepRecord(method=method, cutoff=args.cutoff, seed=seed,
                                 fold=-1, metrics=metrics)
    harness.write_metrics_csv([record], out / "metrics.csv")
    _write_ndjson(out / "predictions.ndjson",
                  [{"news_id": nid, "p_fake": p_fakes[nid],
                    "predicted": preds[nid], "label": gold[nid]}
                   for nid in sorted(gold)])
    write_manifest(out / "manifest.json", "evaluate", args,
                   _corpus_files(args.corpus) + [args.model],
                   ["metrics.csv", "predictions.ndjson"])
    print(f"{method}: accuracy {metrics.accuracy:.3f} f1 {metrics.f1:.3f} "
          f"on {len(gold)} labeled items")
    return 0


def cmd_explain(args):
    model = coattend.load_model(args.model)
    corpus = load_corpus_dir(args.corpus)
    article = corpus.news_by_id.get(args.news_id)
    if article is None:
        raise ValueError(f"unknown news id {args.news_id!r}")
    comments = [(cid, eng.text) for cid, eng in corpus.comments_for(args.news_id)]
    explanation = coattend.explain(model, article, comments)
    rows = [{"news_id": explanation.news_id, "kind": "prediction",
             "p_fake": explanation.p_fake}]
    for rank, (idx, weight, text) in enumerate(explanation.sentences[:args.top_k], 1):
        rows.append({"news_id": explanation.news_id, "kind": "sentence",
                     "rank": rank, "index": idx, "weight": weight, "text": text})
    for rank, (cid, weight, text) in enumerate(explanation.comments[:args.top_k], 1):
        rows.append({"news_id": explanation.news_id, "kind": "comment",
                     "rank": rank, "comment_id": cid, "weight": weight, "text": text})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_ndjson(out / "explanations.ndjson", rows)
    write_manifest(out / "manifest.json", "explain", args,
                   _corpus_files(args.corpus) + [args.model],
                   ["explanations.ndjson"])
    print(f"p_fake = {explanation.p_fake:.3f}")
    for rank, (idx, weight, text) in enumerate(explanation.sentences[:args.top_k], 1):
        print(f"  sentence #{rank}: [{idx}] w={weight:.4f} {text}")
    for rank, (cid, weight, text) in enumerate(explanation.comments[:args.top_k], 1):
        print(f"  comment  #{rank}: [{cid}] w={weight:.4f} {text}")
    return 0


def _plot_sweep(records, path):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_method = {}
    for r in records:
        by_method.setdefault(r.method, {}).setdefault(r.cutoff, []).append(
            r.metrics.accuracy)
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in sorted(by_method):
        cutoffs = sorted(by_method[method])
        means = [float(np.mean(by_method[method][c])) for c in cutoffs]
        ax.plot(cutoffs, means, marker="o", label=method)
    ax.set_xlabel("engagement cutoff (hours)")
    ax.set_ylabel("mean accuracy")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_sweep_early(args):
    corpus = load_corpus_dir(args.corpus)
    cutoffs = [float(c) for c in args.cutoffs.split(",") if c.strip()]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    base_seed = _resolved_seed(args)
    seeds = [base_seed + i for i in range(args.seeds)]
    hyper = trifn.TriFNHyper(d=args.d, alpha=args.alpha, beta=args.beta,
                             gamma=args.gamma, eta=args.eta, lam=args.lam,
                             max_iters=args.max_iters, tol=args.tol)
    records = []
    for method in methods:
        result = harness.early_detection_sweep(
            corpus, cutoffs, method, seeds, n_folds=args.folds, hyper=hyper,
            thresholds=_thresholds(args))
        records.extend(result.records)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_metrics_csv(records, out / "metrics.csv")
    _plot_sweep(records, out / "sweep_accuracy.png")
    write_manifest(out / "manifest.json", "sweep-early", args,
                   _corpus_files(args.corpus),
                   ["metrics.csv", "sweep_accuracy.png"])
    for method in methods:
        for cutoff in cutoffs:
            vals = [r.metrics.accuracy for r in records
                    if r.method == method and r.cutoff == cutoff]
            print(f"{method} @ {cutoff:g}h: accuracy {np.mean(vals):.3f}")
    return 0


def cmd_ablate_defend(args):
    corpus = load_corpus_dir(args.corpus)
    values = read_config(args.config) if args.config else {}
    kwargs = coerce_config(values, coattend.CoAttendConfig)
    config = coattend.CoAttendConfig(**kwargs)
    gold = corpus.gold_labels()
    base_seed = _resolved_seed(args, values)
    records = []
    for offset in range(args.seeds):
        seed = base_seed + offset
        folds = harness.stratified_folds(gold, 3, seed)
        test_ids = folds[0]
        train_ids = [n for n in gold if n not in set(test_ids)]
        for mode in coattend.MODES:
            model = coattend.train(corpus, replace(config, seed=seed),
                                   mode=mode, news_ids=train_ids)
            preds, _ = _defend_predictions(model, corpus, test_ids)
            metrics = evaluate_classification(preds, {n: gold[n] for n in test_ids})
            records.append(harness.SweepRecord(method=mode, cutoff=None,
                                               seed=seed, fold=0, metrics=metrics))
            print(f"seed {seed} {mode}: accuracy {metrics.accuracy:.3f} "
                  f"f1 {metrics.f1:.3f}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    harness.write_metrics_csv(records, out / "metrics.csv")
    write_manifest(out / "manifest.json", "ablate-defend", args,
                   _corpus_files(args.corpus) + ([args.config] if args.config else []),
                   ["metrics.csv"])
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_threshold_flags(parser):
    parser.add_argument("--cred-low", type=float, default=0.4)
    parser.add_argument("--cred-high", type=float, default=0.6)
    parser.add_argument("--bias-threshold", type=float, default=0.5)
    parser.add_argument("--sentiment-threshold", type=float, default=0.5)


def _add_trifn_flags(parser):
    parser.add_argument("--d", type=int, default=16)
    parser.add_argument("--alpha", type=float, default=1.0)
    parser.add_argument("--beta", type=float, default=1.0)
    parser.add_argument("--gamma", type=float, default=1.0)
    parser.add_argument("--eta", type=float, default=10.0)
    parser.add_argument("--lambda", dest="lam", type=float, default=0.01)
    parser.add_argument("--max-iters", type=int, default=300)
    parser.add_argument("--tol", type=float, default=1e-5)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="weaknews",
        description="Fake news detection from weak social supervision.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(func=func)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", type=str, default=None)
        return p

    p = command("ingest", cmd_ingest, help="validate and normalize a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)

    p = command("synth", cmd_synth, help="generate a synthetic corpus")
    p.add_argument("--out", required=True)

    p = command("weak-label", cmd_weak_label,
                help="apply labeling rules and aggregate votes")
    p.add_argument("--corpus", required=True)
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--lexicon", type=str, default=None)
    p.add_argument("--out", required=True)
    _add_threshold_flags(p)

    p = command("train-trifn", cmd_train_trifn,
                help="fit the factorization detector")
    p.add_argument("--corpus", required=True)
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--out", required=True, type=Path)
    _add_trifn_flags(p)
    _add_threshold_flags(p)

    p = command("train-defend", cmd_train_defend,
                help="train the co-attention detector")
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=coattend.MODES, default="full")
    p.add_argument("--out", required=True, type=Path)

    p = command("evaluate", cmd_evaluate, help="score a model on a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--cutoff", type=float, default=None)
    p.add_argument("--out", required=True)

    p = command("explain", cmd_explain,
                help="rank sentences/comments for one news item")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--news-id", required=True)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--out", required=True)

    p = command("sweep-early", cmd_sweep_early,
                help="cross-validated early-detection sweep")
    p.add_argument("--corpus", required=True)
    p.add_argument("--cutoffs", default="12,24,36,48,96")
    p.add_argument("--methods", default=",".join(harness.SWEEP_METHODS))
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--out", required=True)
    _add_trifn_flags(p)
    _add_threshold_flags(p)

    p = command("ablate-defend", cmd_ablate_defend,
                help="train full and ablated co-attention variants")
    p.add_argument("--corpus", required=True)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--out", required=True)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
