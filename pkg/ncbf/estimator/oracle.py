"""Estimators that need no training.

LabelReplayEstimator recomputes the exact LCMV label for every input, so a
codebook built from it exercises the whole inference path with perfect
models. ConstantEstimator emits a fixed value for every element.
"""

import numpy as np

from ncbf.array import ArrayConfig
from ncbf.dataset import denormalize_inputs, label_scenario
from ncbf.partition import PartitionSpec

from .base import BaseEstimator


class LabelReplayEstimator(BaseEstimator):
    def __init__(self, config: ArrayConfig, spec: PartitionSpec, output: str):
        if output not in ("phase", "magnitude"):
            raise ValueError(f"output must be 'phase' or 'magnitude', got {output}")
        self._config = config
        self._spec = spec
        self._index = 0 if output == "phase" else 1

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.atleast_2d(inputs)
        rows = []
        for row in inputs:
            scenario = denormalize_inputs(row, self._spec)
            rows.append(label_scenario(self._config, scenario)[self._index])
        return np.array(rows, dtype=np.float64)


class ConstantEstimator(BaseEstimator):
    def __init__(self, num_elements: int, value: float = 0.0):
        self._num_elements = num_elements
        self._value = value

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        batch = np.atleast_2d(inputs).shape[0]
        return np.full((batch, self._num_elements), self._value, dtype=np.float64)
