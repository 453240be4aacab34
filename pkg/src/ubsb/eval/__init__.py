from .metrics import (
    PrecisionRecallF1,
    precision_recall_f1,
    roc_auc,
    select_threshold_max_f1,
)

__all__ = [
    "PrecisionRecallF1",
    "precision_recall_f1",
    "roc_auc",
    "select_threshold_max_f1",
]
