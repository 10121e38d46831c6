"""Out-of-intended-distribution detection.

Detectors score how in-distribution an input looks (higher is safer) and
flag OOD when the score falls strictly below a calibrated threshold. The
scores come from per-pixel segmentation maps (foreground confidence, with
or without an input perturbation) or from structural similarity against a
per-class reference set; an evaluation harness with exact ROC metrics and
a deterministic synthetic corpus ties it together.
"""

from .empdist import (
    BOTTOM,
    ConvergenceReport,
    DiscreteDistribution,
    convergence_experiment,
    corrupted,
    d_k,
    empirical,
)
from .errors import OiddError, TensorFormatError
from .evalharness import (
    EvalReport,
    ExperimentConfig,
    ScoredSample,
    SynthSpec,
    auroc,
    auroc_mann_whitney,
    calibrate_epsilon,
    evaluate,
    generate_synthetic,
    roc_curve,
    run_experiment,
    tnr_at_tpr,
)
from .felzseg import CenterParams, FelzParams, SegmentLabeling, felzenszwalb, n_r, remove_background
from .odinprep import (
    LinearClassifier,
    OdinParams,
    baseline_score,
    grad_log_maxsoftmax,
    odin_score,
    perturb,
    softmax_t,
)
from .refdetect import (
    LabeledCorpus,
    ReferenceSet,
    build_reference_set,
    detect_alg3,
    load_reference_set,
    save_reference_set,
)
from .scores import DetectionScore, ScoreKind
from .segscore import FileSegmapBackend, SegmentationBackend, bls, detect_alg2, ods, v_score
from .ssim import SsimParams, ssim
from .tensorio import (
    BinaryMap,
    RgbImage,
    SegMap,
    TensorFile,
    as_segmap,
    read_image,
    read_tensor,
    read_tensors,
    write_image,
    write_tensor,
    write_tensors,
)
from .toyseg import ToySegmenter, toy_segment

__version__ = "0.1.0"
