"""Estimators used by codebook sectors.

The MLP backend needs torch; the other kinds are plain numpy, so each
implementation is imported only when it is requested.
"""

from .base import BaseEstimator

__all__ = ["BaseEstimator", "get_estimator"]


def get_estimator(kind: str, **kwargs) -> BaseEstimator:
    """Create an estimator instance by kind.

    Args:
        kind: One of 'mlp', 'oracle', 'constant'
        **kwargs: Arguments to pass to the estimator constructor

    Returns:
        Estimator instance

    Raises:
        ValueError: If kind is unknown
    """
    if kind == "mlp":
        from .mlp import MlpEstimator
        return MlpEstimator(**kwargs)
    elif kind == "oracle":
        from .oracle import LabelReplayEstimator
        return LabelReplayEstimator(**kwargs)
    elif kind == "constant":
        from .oracle import ConstantEstimator
        return ConstantEstimator(**kwargs)
    else:
        raise ValueError(f"Unknown estimator kind: {kind}")
