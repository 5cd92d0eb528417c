from .features import (
    FEATURE_NAMES, FeatureScaler, FeatureVector, apply_scaler, extract_batch,
    extract_engineered, feature_names, fit_scaler, write_feature_csv,
)
from .trees import FeatureRanking, gini_rank

__all__ = [
    "FEATURE_NAMES", "FeatureRanking", "FeatureScaler", "FeatureVector", "apply_scaler",
    "extract_batch", "extract_engineered", "feature_names", "fit_scaler", "gini_rank",
    "write_feature_csv",
]
