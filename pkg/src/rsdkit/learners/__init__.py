"""Five classifiers behind one fit/predict contract."""

from .base import (
    ALGORITHMS,
    MODEL_FORMAT_VERSION,
    ModelSpec,
    TrainedModel,
    fit_model,
    load_model,
)
from .boosting import fit_gradient_boosting
from .forest import fit_random_forest
from .logistic import fit_logistic_l1
from .qda import fit_qda
from .svm import fit_svm_rbf, kkt_report

__all__ = [
    "ALGORITHMS",
    "MODEL_FORMAT_VERSION",
    "ModelSpec",
    "TrainedModel",
    "fit_model",
    "load_model",
    "fit_gradient_boosting",
    "fit_random_forest",
    "fit_logistic_l1",
    "fit_qda",
    "fit_svm_rbf",
    "kkt_report",
]
