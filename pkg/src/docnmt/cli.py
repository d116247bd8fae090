"""Command line entry point.

Subcommands cover the whole pipeline: generate a synthetic corpus, train a
tokenizer, materialize context examples, train a model, translate, score
BLEU, run the contrastive pronoun evaluation, and export sentence
embeddings. Logs go to stderr; data goes to files or stdout. Exit codes:
0 on success, 1 for usage errors, 2 for data or file errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import corpus as cp
from .bpe import BpeError, load_bpe, save_bpe, train_bpe
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, build_run_config
from .embeddings import (EmbeddingError, extract_source_repr,
                         extract_target_repr, write_embeddings)
from .figures import save_contrastive_figure, save_training_figure
from .metrics import (aggregate_contrastive, bleu, doc_bleu,
                      evaluate_contrastive, format_report_table,
                      majority_class_rate)
from .model import Model
from .search import translate_corpus
from .seeding import derive_seed
from .training import encode_examples, train_loop, write_training_log

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors map to code 1."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _load_plain_docs(path: str | Path) -> list[list[str]]:
    """Read documents of plain lines separated by blank lines.

    Lines containing a TAB are taken from their target side, so parallel
    corpus files work here too.
    """
    docs: list[list[str]] = []
    current: list[str] = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            if current:
                docs.append(current)
                current = []
            continue
        current.append(line.split("\t")[1] if "\t" in line else line)
    if current:
        docs.append(current)
    if not docs:
        raise cp.CorpusError(f"{path}: no documents found")
    return docs


def _docs_from_lines(lines: list[str], shapes: list[int], what: str) -> list[list[str]]:
    """Split translation-output lines into documents of the given sizes.

    Boundaries are single blank lines between documents. Going by position
    keeps empty translated sentences distinguishable from separators.
    """
    docs: list[list[str]] = []
    pos = 0
    for i, n in enumerate(shapes):
        if i:
            if pos >= len(lines) or lines[pos].strip():
                raise cp.CorpusError(
                    f"{what}: line {pos + 1}: expected a blank document separator")
            pos += 1
        if pos + n > len(lines):
            raise cp.CorpusError(
                f"{what}: document {i} needs {n} lines, file ran out")
        docs.append(lines[pos:pos + n])
        pos += n
    if any(line.strip() for line in lines[pos:]):
        raise cp.CorpusError(
            f"{what}: {len(lines) - pos} unexpected lines after the last document")
    return docs


def _resolve_bpe(ckpt_path: str, bpe_ref: str | None, flag: str | None):
    if flag:
        return load_bpe(flag)
    if not bpe_ref:
        raise BpeError(
            f"{ckpt_path}: checkpoint names no tokenizer; pass --bpe explicitly")
    ref = Path(bpe_ref)
    if not ref.is_absolute():
        ref = Path(ckpt_path).parent / ref
    return load_bpe(ref)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--profile", choices=("paper", "desk"), default=None,
                   help="hyperparameter profile (default: desk)")
    p.add_argument("--config", default=None, metavar="FILE",
                   help="config file with 'key = value' lines")


def _add_override_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("hyperparameter overrides")
    g.add_argument("--n-layers", type=int, default=None)
    g.add_argument("--n-heads", type=int, default=None)
    g.add_argument("--d-model", type=int, default=None)
    g.add_argument("--d-ff", type=int, default=None)
    g.add_argument("--max-len", type=int, default=None)
    g.add_argument("--dropout", type=float, default=None)
    g.add_argument("--vocab-size", type=int, default=None)
    g.add_argument("--base-lr", type=float, default=None)
    g.add_argument("--warmup-steps", type=int, default=None)
    g.add_argument("--batch-size", type=int, default=None)
    g.add_argument("--patience", type=int, default=None)
    g.add_argument("--max-epochs", type=int, default=None)
    g.add_argument("--beam-size", type=int, default=None)
    g.add_argument("--length-penalty", type=float, default=None)
    g.add_argument("--max-decode-len", type=int, default=None)


_OVERRIDE_KEYS = ("n_layers", "n_heads", "d_model", "d_ff", "max_len",
                  "dropout", "vocab_size", "base_lr", "warmup_steps",
                  "batch_size", "patience", "max_epochs", "beam_size",
                  "length_penalty", "max_decode_len")


def _run_config(args) -> "RunConfig":
    overrides = {k: getattr(args, k, None) for k in _OVERRIDE_KEYS}
    for k in ("context_mode", "k", "seed", "adapt_loss"):
        if getattr(args, k, None) is not None:
            overrides[k] = getattr(args, k)
    return build_run_config(profile=args.profile,
                            config_file=args.config,
                            overrides=overrides)


# ---------------------------------------------------------------- commands

def _cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    train, valid = cp.make_synthetic_corpus(args.docs, args.doc_len, args.seed,
                                            n_val_docs=args.val_docs)
    test, _ = cp.make_synthetic_corpus(args.test_docs, args.doc_len,
                                       derive_seed(args.seed, "test"),
                                       n_val_docs=2)
    cp.save_documents(train, out / "train.txt")
    cp.save_documents(valid, out / "valid.txt")
    cp.save_documents(test, out / "test.txt")
    instances = cp.make_contrastive_set(test, args.k)
    cp.write_contrastive(instances, out / "contrastive.jsonl")
    _log(f"wrote {len(train)} train, {len(valid)} valid, {len(test)} test "
         f"documents and {len(instances)} contrastive instances to {out}")
    return 0


def _cmd_bpe_train(args) -> int:
    lines = cp.bpe_training_lines(args.input)
    model = train_bpe(lines, args.vocab_size)
    save_bpe(model, args.out)
    _log(f"trained tokenizer with {model.size} entries "
         f"({len(model.merges)} merges) on {len(lines)} lines -> {args.out}")
    return 0


def _cmd_prepare(args) -> int:
    docs = cp.load_documents(args.input)
    examples = cp.build_context(docs, args.context_mode, args.k, args.seed)
    with open(args.out, "w", encoding="utf-8") as f:
        f.write("context\tsource\ttarget\tlabel\n")
        for ex in examples:
            f.write(f"{ex.context}\t{ex.source}\t{ex.target}\t{ex.label}\n")
    _log(f"wrote {len(examples)} examples ({args.context_mode}@{args.k}) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    cfg = _run_config(args)
    bpe = load_bpe(args.bpe)
    train_docs = cp.load_documents(args.train)
    val_docs = cp.load_documents(args.valid)

    mode = cfg.context_mode
    train_raw = cp.build_context(train_docs, mode, cfg.k,
                                 derive_seed(cfg.seed, "context"))
    # validation always sees the previous-sentence context so that
    # perplexities are comparable across training regimes
    val_raw = cp.build_context(val_docs, "prev", cfg.k,
                               derive_seed(cfg.seed, "val-context"))
    train_ex = encode_examples(bpe, train_raw, cfg.max_len)
    val_ex = encode_examples(bpe, val_raw, cfg.max_len)
    _log(f"{len(train_ex)} training and {len(val_ex)} validation examples "
         f"({mode}@{cfg.k}, adapt_loss={cfg.adapt_loss})")

    model = Model.init(cfg.model_config(bpe.size), derive_seed(cfg.seed, "init"))
    n_params = sum(p.data.size for p in model.params.values())
    _log(f"initialized model with {n_params} parameters")

    result = train_loop(model, train_ex, val_ex, cfg.train_config(), progress=_log)
    if result.aborted:
        _log("training aborted on non-finite loss; keeping last good parameters")

    save_checkpoint(args.out, model, bpe_ref=args.bpe)
    log_path = args.log or (args.out + ".log.tsv")
    write_training_log(result.events, log_path)
    _log(f"best epoch {result.best_epoch} "
         f"(validation perplexity {result.best_ppl:.4f}) after {result.steps} steps")
    _log(f"checkpoint -> {args.out}, log -> {log_path}")
    if not args.no_figures:
        fig = save_training_figure(result.events, str(Path(log_path).with_suffix("")) + ".png")
        _log(f"figure -> {fig}")
    return 0


def _cmd_translate(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    bpe = _resolve_bpe(args.checkpoint, ckpt.bpe_ref, args.bpe)
    model = ckpt.to_model()
    cfg = _run_config(args)
    docs = cp.load_documents(args.input)
    examples = cp.build_context(docs, args.context_mode, args.k, args.seed)
    texts = translate_corpus(model, bpe, examples, cfg.decode_config())

    blocks = []
    pos = 0
    for doc in docs:
        blocks.append("\n".join(texts[pos:pos + len(doc.sentences)]))
        pos += len(doc.sentences)
    payload = "\n\n".join(blocks) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
        _log(f"wrote {len(texts)} translations to {args.out}")
    else:
        sys.stdout.write(payload)
    return 0


def _cmd_bleu(args) -> int:
    ref_docs = _load_plain_docs(args.ref)
    hyp_lines = Path(args.hyp).read_text(encoding="utf-8").split("\n")
    if hyp_lines and hyp_lines[-1] == "":
        hyp_lines.pop()
    hyp_lines = [line.split("\t")[1] if "\t" in line else line
                 for line in hyp_lines]
    hyp_docs = _docs_from_lines(hyp_lines, [len(d) for d in ref_docs], args.hyp)
    flat_hyp = [s for d in hyp_docs for s in d]
    flat_ref = [s for d in ref_docs for s in d]
    print(f"s-BLEU {bleu(flat_hyp, flat_ref):.1f}")
    print(f"d-BLEU {doc_bleu(hyp_docs, ref_docs):.1f}")
    return 0


def _cmd_contrastive(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    bpe = _resolve_bpe(args.checkpoint, ckpt.bpe_ref, args.bpe)
    model = ckpt.to_model()
    instances = cp.load_contrastive(args.test)
    results = evaluate_contrastive(model, bpe, instances, args.k,
                                   args.context_mode, progress=_log)
    report = aggregate_contrastive(results)
    meta = {"checkpoint": args.checkpoint, "test_set": args.test,
            "context_mode": args.context_mode, "k": args.k,
            "majority_class_rate": majority_class_rate(results)}
    payload = json.dumps(report.to_dict(meta), indent=2, sort_keys=True) + "\n"
    table = format_report_table(report)
    if args.out_report:
        Path(args.out_report).write_text(payload, encoding="utf-8")
        _log(f"report -> {args.out_report}")
        if not args.no_figures:
            fig = save_contrastive_figure(
                report, str(Path(args.out_report).with_suffix("")) + ".png")
            _log(f"figure -> {fig}")
        print(table)
    else:
        sys.stdout.write(payload)
        print(table)
    _log(f"accuracy {report.total.correct}/{report.total.count} "
         f"= {report.total.accuracy:.4f}")
    return 0


def _cmd_export_embeddings(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    bpe = _resolve_bpe(args.checkpoint, ckpt.bpe_ref, args.bpe)
    model = ckpt.to_model()
    docs = cp.load_documents(args.input)
    if not 0 <= args.doc_index < len(docs):
        raise cp.CorpusError(
            f"--doc-index {args.doc_index} out of range, file has {len(docs)} documents")
    doc = docs[args.doc_index]
    tag = args.model_tag or Path(args.checkpoint).stem
    modes = [m.strip() for m in args.context_modes.split(",") if m.strip()]
    if not modes:
        raise cp.CorpusError("--context-modes is empty")

    reprs = {"source": (extract_source_repr,),
             "target": (extract_target_repr,),
             "both": (extract_source_repr, extract_target_repr)}[args.repr]
    append = args.append
    written = 0
    for mode in modes:
        for fn in reprs:
            embs = fn(model, bpe, doc, mode, args.k, args.seed, tag)
            write_embeddings(embs, args.out, append=append)
            append = True
            written += len(embs)
    _log(f"wrote {written} embedding rows to {args.out}")
    return 0


# ----------------------------------------------------------------- parser

def build_parser() -> _Parser:
    parser = _Parser(prog="docnmt",
                     description="Document-context NMT laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth",
                       help="generate a synthetic discourse corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--docs", type=int, default=2000)
    p.add_argument("--doc-len", type=int, default=12)
    p.add_argument("--val-docs", type=int, default=None)
    p.add_argument("--test-docs", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=2)
    p.set_defaults(fn=_cmd_synth)

    p = sub.add_parser("bpe-train",
                       help="train a subword tokenizer")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--vocab-size", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_bpe_train)

    p = sub.add_parser("prepare",
                       help="materialize context examples as TSV")
    p.add_argument("--input", required=True)
    p.add_argument("--context-mode", choices=cp.CONTEXT_MODES, default="prev")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_prepare)

    p = sub.add_parser("train",
                       help="train a context-aware translation model")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--bpe", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--log", default=None, help="training log TSV (default <out>.log.tsv)")
    p.add_argument("--context-mode", choices=cp.CONTEXT_MODES, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--adapt-loss", action="store_true", default=None)
    p.add_argument("--no-figures", action="store_true")
    _add_config_flags(p)
    _add_override_flags(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("translate",
                       help="translate a document file with beam search")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bpe", default=None)
    p.add_argument("--input", required=True)
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--context-mode", choices=cp.CONTEXT_MODES, default="prev")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    _add_config_flags(p)
    _add_override_flags(p)
    p.set_defaults(fn=_cmd_translate)

    p = sub.add_parser("bleu",
                       help="sentence- and document-level BLEU of a translation")
    p.add_argument("--hyp", required=True)
    p.add_argument("--ref", required=True)
    p.set_defaults(fn=_cmd_bleu)

    p = sub.add_parser("contrastive",
                       help="pronoun disambiguation accuracy on a contrastive set")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bpe", default=None)
    p.add_argument("--test", required=True, help="contrastive JSONL file")
    p.add_argument("--context-mode", choices=("prev", "self"), default="prev")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--out-report", default=None, help="JSON report path")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=_cmd_contrastive)

    p = sub.add_parser("export-embeddings",
                       help="write pooled sentence representations as TSV")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bpe", default=None)
    p.add_argument("--input", required=True)
    p.add_argument("--doc-index", type=int, default=0)
    p.add_argument("--repr", choices=("source", "target", "both"), default="source")
    p.add_argument("--context-modes", default="prev",
                   help="comma-separated list, e.g. prev,random,self")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model-tag", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--append", action="store_true")
    p.set_defaults(fn=_cmd_export_embeddings)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _UsageError as e:
        _log(str(e))
        return 1
    except (cp.CorpusError, BpeError, CheckpointError, EmbeddingError,
            ConfigError, ValueError, OSError) as e:
        _log(f"error: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
