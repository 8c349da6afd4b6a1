"""Self-supervised persistent-change detection for image time series.

A temporal-ordering classifier is trained on synthetic satellite-like scenes;
its confidence series over a time series is reduced to change scores (pivot
and Spearman measures), evaluated with AUROC/max-F1, and localized spatially
by iterative patch retraining. A CLI and an HTTP triage service expose the
pipeline; labels flow back through an append-only JSONL store.
"""

from .imagery import (
    ChangeEvent,
    DatasetManifest,
    Rect,
    SceneSpec,
    TimeSeries,
    benchmark_specs,
    filter_series,
    generate_dataset,
    generate_scene,
    load_dataset,
    save_dataset,
    split_patches,
)
from .model import Classifier, EncoderConfig, TrainConfig, load_classifier, train
from .scoring import (
    ChangeResult,
    ScoreSeries,
    change_score,
    distance_ratio_baseline,
    pivot_score,
    score_series,
    spearman,
)
from .evaluation import EvalReport, LabeledScore, auroc, max_f1, run_ablation, run_benchmark
from .localization import (
    PatchGrid,
    PatchLabelMap,
    filter_top_fraction,
    iterative_train,
    patch_change_map,
    propagate_parent_labels,
)

__version__ = "0.1.0"
