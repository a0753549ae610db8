"""Cross-lingual dependency SRL with a shared BiLSTM encoder and
language-specific linear decoders."""

from .corpus import (
    Corpus,
    CorpusError,
    LabelInventory,
    PredicateFrame,
    Sentence,
    Token,
    build_inventory,
    parse_conll09,
    read_conll09,
    sample_fraction,
    validate_sentence,
    write_conll09,
)
from .embedder import EmbedderSpec, concat_top_layers, project, read_cache, toy_embed, write_cache
from .evaluator import MetricsReport, f1, render_report, run_sweep, score
from .model import ModelConfig, SrlModel
from .trainer import (
    TrainConfig,
    apply_freeze,
    load_checkpoint,
    make_batches,
    save_checkpoint,
    total_loss,
    train,
)

__version__ = "0.1.0"
