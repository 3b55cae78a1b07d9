"""Permutation importance for image classifiers through a concept-text bridge,
on a synthetic world of coloured shapes."""

from .captions import CaptionError, parse_caption, render_caption
from .concepts import ConceptSpace, permute_column, sample_concept_matrix, sample_concept_vector
from .engine import (
    ExperimentConfig,
    ImportanceReport,
    Thresholds,
    bottleneck_oracle,
    depict_run,
    effective_generation_check,
    independent_permutation_check,
    rank_concepts,
    reference_performance,
    tabular_permutation_importance,
)
from .generators import GeneratorSpec, generate, generate_dataset
from .metrics import auroc, bootstrap_ci, pearson, standardized_coefficients, topk_agreement
from .models import ConceptClassifier, TargetTask, make_task, predict_concepts, target_score
from .render import CanvasSpec, PlacementError, ShapeScene, concept_masks, place_shapes, rasterize

__version__ = "0.1.0"
