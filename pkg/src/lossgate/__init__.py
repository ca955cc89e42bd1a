"""Two-stage self-supervised speaker representation learning on a synthetic
corpus, with loss-gated pseudo-label selection.

Stage 1 pretrains a small embedding network contrastively on augmented
segment pairs. Stage 2 alternates k-means pseudo-labeling with angular-margin
classification, keeping only low-loss samples (the loss gate) in the second
half of each iteration. Evaluation covers equal error rate on cosine trials,
normalized mutual information, and Hungarian-mapped cluster accuracy.
"""

from .config import RunConfig, child_rng, child_seed, load_config, parse_config_text, validate_config
from .corpus import (
    Corpus,
    TrialPair,
    Utterance,
    augment,
    generate_corpus,
    inject_label_noise,
    load_corpus,
    load_trials,
    make_trials,
    sample_segments,
    save_corpus,
    save_trials,
)
from .cluster import KMeansResult, PseudoLabelSet, elbow_scan, kmeans
from .contrastive import batch_backward, batch_loss, pair_loss, stage1_lr, train_contrastive
from .encoder import (
    EncoderParams,
    encode,
    encode_backward,
    encode_batch,
    encode_batch_backward,
    init_encoder,
    load_encoder,
    save_encoder,
)
from .errors import ConfigError, DomainError, NumericError
from .gated import (
    ClassifierParams,
    GateReport,
    GatedTrainerState,
    IterationRecord,
    aam_backward,
    aam_loss,
    check_selection_growth,
    gated_loss,
    init_classifier,
    run_stage2,
    train_epoch,
)
from .mathops import cosine_similarity, finite_diff_grad, log_sum_exp, max_rel_error
from .metrics import (
    Assignment,
    RunReport,
    cluster_accuracy,
    eer,
    hungarian,
    nmi,
    reliable_mask,
    toy_loss_split,
)
from .optim import AdamOptimizer, AdamState, adam_step, init_adam

__version__ = "0.1.0"
