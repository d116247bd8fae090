"""Document-context neural machine translation laboratory.

A two-encoder translation model where the second encoder reads preceding
sentences and its attention output is fused into the source encoding,
trained under four context regimes and evaluated with BLEU, document BLEU,
and a contrastive pronoun-accuracy harness.
"""

from .autodiff import ShapeError, Tensor, backward, no_grad
from .bpe import (BOS, EOS, PAD, UNK, BpeError, BpeModel, load_bpe, save_bpe,
                  train_bpe)
from .checkpoint import (Checkpoint, CheckpointError, load_checkpoint,
                         save_checkpoint)
from .config import (PROFILES, ConfigError, RunConfig, build_run_config,
                     parse_config_file, profile_config)
from .corpus import (CONTEXT_MODES, ContextExample, ContrastiveInstance,
                     CorpusError, Document, PronounRef, build_context,
                     load_contrastive, load_documents, make_contrastive_set,
                     make_synthetic_corpus, save_documents, write_contrastive)
from .embeddings import (EmbeddingError, SentenceEmbedding,
                         extract_source_repr, extract_target_repr,
                         read_embeddings, write_embeddings)
from .metrics import (BleuStats, ContrastiveReport, InstanceResult, bleu,
                      bleu_score_from_stats, bleu_stats, doc_bleu,
                      evaluate_contrastive, aggregate_contrastive,
                      format_report_table, majority_class_rate, tokenize_13a)
from .model import Model, ModelConfig, init_parameters
from .optim import AdamState, OptimError, adam_step, zero_gradients
from .search import DecodeConfig, beam_search, length_penalty, translate_corpus
from .seeding import derive_seed, rng_for
from .training import (TrainConfig, TrainResult, encode_examples, lr_at,
                       train_loop, validate_perplexity, write_training_log)

__version__ = "0.1.0"

__all__ = [
    "Tensor", "backward", "no_grad", "ShapeError",
    "BpeModel", "BpeError", "train_bpe", "load_bpe", "save_bpe",
    "PAD", "BOS", "EOS", "UNK",
    "Checkpoint", "CheckpointError", "save_checkpoint", "load_checkpoint",
    "RunConfig", "ConfigError", "PROFILES", "profile_config",
    "parse_config_file", "build_run_config",
    "Document", "PronounRef", "ContextExample", "ContrastiveInstance",
    "CorpusError", "CONTEXT_MODES", "load_documents", "save_documents",
    "build_context", "make_synthetic_corpus", "make_contrastive_set",
    "write_contrastive", "load_contrastive",
    "SentenceEmbedding", "EmbeddingError", "extract_source_repr",
    "extract_target_repr", "write_embeddings", "read_embeddings",
    "BleuStats", "bleu_stats", "bleu_score_from_stats", "bleu", "doc_bleu",
    "tokenize_13a", "InstanceResult", "ContrastiveReport",
    "evaluate_contrastive", "aggregate_contrastive", "format_report_table",
    "majority_class_rate",
    "Model", "ModelConfig", "init_parameters",
    "AdamState", "OptimError", "adam_step", "zero_gradients",
    "DecodeConfig", "beam_search", "length_penalty", "translate_corpus",
    "derive_seed", "rng_for",
    "TrainConfig", "TrainResult", "encode_examples", "train_loop",
    "validate_perplexity", "lr_at", "write_training_log",
    "__version__",
]
