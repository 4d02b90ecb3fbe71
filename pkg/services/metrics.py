"""
Evaluation metrics: per-template F1, macro F1, accuracy, rejection
accuracy, accuracy per depth band and convergence statistics.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from sklearn.metrics import f1_score

from .dag_core import RelationTemplate
from .errors import InputError

logger = logging.getLogger(__name__)

DEPTH_BANDS = ((7, 10), (11, 15), (16, 20), (21, 24))


def band_label(low: int, high: int) -> str:
    return f"{low}-{high}"


def band_of(d: int) -> Optional[str]:
    for low, high in DEPTH_BANDS:
        if low <= d <= high:
            return band_label(low, high)
    return None


@dataclass
class MetricsReport:
    """
    Aggregated scores, all in percent.

    macro_f1 averages the templates present in the data; missing_templates
    lists the ones that are absent.
    """
    per_template_f1: dict[str, float]
    macro_f1: float
    accuracy: float
    rejection_accuracy: Optional[float]
    band_accuracy: dict[str, Optional[float]]
    n_instances: int
    missing_templates: list[str] = field(default_factory=list)
    mean_rounds: Optional[float] = None
    median_rounds: Optional[float] = None
    fraction_converged: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            'n_instances': self.n_instances,
            'per_template_f1': dict(self.per_template_f1),
            'macro_f1': self.macro_f1,
            'accuracy': self.accuracy,
            'rejection_accuracy': self.rejection_accuracy,
            'band_accuracy': dict(self.band_accuracy),
            'missing_templates': list(self.missing_templates),
            'convergence': {
                'mean_rounds': self.mean_rounds,
                'median_rounds': self.median_rounds,
                'fraction_converged': self.fraction_converged
            }
        }


def _percent(x: float) -> float:
    return float(100.0 * x)


def compute_metrics(predictions: Sequence[int], gold: Sequence[int],
                    templates: Sequence[Union[str, RelationTemplate]], depths: Sequence[int],
                    rounds: Optional[Sequence[int]] = None,
                    converged: Optional[Sequence[bool]] = None) -> MetricsReport:
    """
    Score aligned predictions against gold labels.

    Args:
        predictions: Predicted label bits
        gold: Gold label bits
        templates: Relation template of each instance
        depths: Number of variables of each instance
        rounds: Optional rounds used per instance
        converged: Optional stop-rule flag per instance

    Raises:
        InputError: If the inputs are empty or misaligned
    """
    n = len(predictions)
    if n == 0:
        raise InputError("Cannot compute metrics on no predictions")
    if not len(gold) == len(templates) == len(depths) == n:
        raise InputError("Predictions, gold labels, templates and depths must align")
    pred = np.asarray(predictions, dtype=int)
    true = np.asarray(gold, dtype=int)
    tags = np.asarray([RelationTemplate.coerce(t).value for t in templates])
    depth_arr = np.asarray(depths, dtype=int)

    per_template = {}
    for template in RelationTemplate:
        mask = tags == template.value
        if mask.any():
            per_template[template.value] = _percent(
                f1_score(true[mask], pred[mask], pos_label=1, zero_division=1.0)
            )
    missing = [t.value for t in RelationTemplate if t.value not in per_template]
    if missing:
        logger.info(f"Macro F1 averages {len(per_template)} templates; missing {missing}")

    negatives = true == 0
    band_accuracy = {}
    for low, high in DEPTH_BANDS:
        mask = (depth_arr >= low) & (depth_arr <= high)
        band_accuracy[band_label(low, high)] = _percent(np.mean(pred[mask] == true[mask])) if mask.any() else None

    report = MetricsReport(
        per_template_f1=per_template,
        macro_f1=float(np.mean(list(per_template.values()))),
        accuracy=_percent(np.mean(pred == true)),
        rejection_accuracy=_percent(np.mean(pred[negatives] == 0)) if negatives.any() else None,
        band_accuracy=band_accuracy,
        n_instances=n,
        missing_templates=missing
    )
    if rounds is not None:
        if len(rounds) != n:
            raise InputError("rounds must align with predictions")
        report.mean_rounds = float(np.mean(rounds))
        report.median_rounds = float(np.median(rounds))
    if converged is not None:
        if len(converged) != n:
            raise InputError("converged must align with predictions")
        report.fraction_converged = float(np.mean(np.asarray(converged, dtype=bool)))
    return report
