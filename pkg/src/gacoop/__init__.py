"""Gradient-aligned context optimization for few-shot OOD detection.

Library + CLI: prompt tuning against a frozen linear text-encoder
surrogate, entropy regularization over ID-irrelevant image regions, a
gradient-projection update rule that resolves conflicts between the two
objectives, and an FPR95/AUROC/accuracy evaluation harness with a seeded
synthetic benchmark.
"""

from .align import ConflictStats, align, decompose, record_conflict
from .config import SynthConfig, TrainConfig, default_config, load_config
from .data_io import Checkpoint, FeatureBank, generate_synthetic, read_bank, write_bank
from .metrics import EvalReport, auroc, evaluate, fpr_at_tpr, id_accuracy, mcm_score
from .model import (
    FrozenTextEncoder,
    PromptParams,
    TextFeatures,
    build_encoder,
    class_logits,
    encode_text,
    encode_text_jacobian_transpose_apply,
    init_prompt,
)
from .objectives import (
    LossBreakdown,
    RegionSelection,
    Sample,
    ce_loss,
    combined_loss,
    grad_ce,
    grad_ood,
    id_probability,
    ood_reg_loss,
    region_probabilities,
    select_ood_regions,
)
from .rng import SeededRng, derive_seed
from .trainer import TrainLog, make_batches, step, train

__version__ = "0.1.0"
