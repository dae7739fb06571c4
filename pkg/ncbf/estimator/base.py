"""Base estimator class for codebook sectors."""

import abc

import numpy as np


class BaseEstimator(metaclass=abc.ABCMeta):
    """Maps normalized user locations to one per-element output vector.

    A codebook sector holds two estimators: one for phases (radians) and one
    for magnitudes (dB).
    """

    @abc.abstractmethod
    def predict(self, inputs: np.ndarray) -> np.ndarray:
        """Predict outputs for a batch.

        Args:
            inputs: (B, 2K) normalized inputs

        Returns:
            np.ndarray: (B, N) float64 outputs
        """
        raise NotImplementedError
