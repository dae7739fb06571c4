"""Closed-form LCMV nulling-control beam focusing.

The array response at location p for weights w is h(p)^H w. With that
convention the LCMV constraints C^H w = d are exact: unit gain at the
desired user (column 0 of C) and zero gain at every interferer.
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from ncbf.array import (
    ArrayConfig,
    UserLocation,
    channel_matrix,
    channel_vector,
    vector_correlation,
)
from ncbf.errors import CoincidentUsers, SingularConstraints, ZeroVector

MAX_USER_CORRELATION = 0.95
SINGULARITY_THRESHOLD = 1e12


@dataclass(frozen=True)
class NcbfScenario:
    desired: UserLocation
    interferers: tuple[UserLocation, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "interferers", tuple(self.interferers))

    @property
    def users(self) -> tuple[UserLocation, ...]:
        return (self.desired, *self.interferers)

    @property
    def num_users(self) -> int:
        return 1 + len(self.interferers)


@dataclass(frozen=True, eq=False)
class LcmvInputs:
    constraints: np.ndarray  # C, (N, K) complex
    response: np.ndarray  # d, (K,) real
    covariance: np.ndarray  # R, (N, N) Hermitian positive-definite


@dataclass(frozen=True, eq=False)
class BeamWeights:
    values: np.ndarray

    @property
    def num_elements(self) -> int:
        return self.values.shape[0]

    @property
    def phases(self) -> np.ndarray:
        return np.angle(self.values)

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def power(self) -> float:
        return float(np.sum(self.magnitudes**2))


def response(h: np.ndarray, weights) -> complex:
    """Array gain h^H w."""
    w = weights.values if isinstance(weights, BeamWeights) else weights
    return complex(np.vdot(h, w))


def build_constraints(
    config: ArrayConfig, scenario: NcbfScenario, covariance: np.ndarray | None = None
) -> LcmvInputs:
    vectors = [channel_vector(config, loc) for loc in scenario.users]
    for (i, h_i), (k, h_k) in itertools.combinations(enumerate(vectors), 2):
        rho = vector_correlation(h_i, h_k)
        if rho > MAX_USER_CORRELATION:
            raise CoincidentUsers(
                f"users {i} ({scenario.users[i]!r}) and {k} ({scenario.users[k]!r}) "
                f"have channel correlation {rho:.4f} > {MAX_USER_CORRELATION}"
            )

    n = config.num_elements
    response_vector = np.zeros(scenario.num_users)
    response_vector[0] = 1.0
    if covariance is None:
        covariance = np.eye(n, dtype=np.complex128)
    return LcmvInputs(
        constraints=channel_matrix(config, scenario.users),
        response=response_vector,
        covariance=np.asarray(covariance, dtype=np.complex128),
    )


def _whitened_constraints(inputs: LcmvInputs):
    try:
        factor = scipy.linalg.cho_factor(inputs.covariance, lower=True)
    except np.linalg.LinAlgError as e:
        raise SingularConstraints("covariance is not positive definite") from e
    r_inv_c = scipy.linalg.cho_solve(factor, inputs.constraints)
    gram = inputs.constraints.conj().T @ r_inv_c
    return r_inv_c, gram


def constraint_condition(inputs: LcmvInputs) -> float:
    """Condition number of C^H R^-1 C."""
    _, gram = _whitened_constraints(inputs)
    return float(np.linalg.cond(gram))


def lcmv_weights(inputs: LcmvInputs) -> np.ndarray:
    """w = R^-1 C (C^H R^-1 C)^-1 d, before any normalization."""
    r_inv_c, gram = _whitened_constraints(inputs)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > SINGULARITY_THRESHOLD:
        raise SingularConstraints(
            f"constraint Gram matrix condition number {cond:.3e} exceeds "
            f"{SINGULARITY_THRESHOLD:.0e}"
        )
    coeffs = scipy.linalg.solve(
        gram, inputs.response.astype(np.complex128), assume_a="her"
    )
    return r_inv_c @ coeffs


def solve_lcmv(inputs: LcmvInputs) -> BeamWeights:
    w = lcmv_weights(inputs)
    logging.debug(f"LCMV solved for K={inputs.constraints.shape[1]}")
    return normalize_and_reference(w)


def normalize_and_reference(weights) -> BeamWeights:
    """Rotate so element 0 has zero phase and scale to unit power."""
    w = weights.values if isinstance(weights, BeamWeights) else weights
    w = np.asarray(w, dtype=np.complex128)
    norm = np.linalg.norm(w)
    if not norm > 0:
        raise ZeroVector("cannot normalize an all-zero weight vector")
    w = w * np.exp(-1j * np.angle(w[0])) / norm
    w[0] = abs(w[0])
    return BeamWeights(w)


def max_directivity_weights(config: ArrayConfig, loc: UserLocation) -> BeamWeights:
    """Phase-aligned matched filter: maximum gain at `loc`, no nulls."""
    return normalize_and_reference(channel_vector(config, loc))
