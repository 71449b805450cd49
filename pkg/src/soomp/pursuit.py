"""Simultaneous greedy pursuit over a redundant dictionary.

A set of Q signals is approximated in one common subspace spanned by atoms
picked one at a time.  The optimized selection (SOOMP) picks, at every step,
the atom whose inclusion minimizes the weighted mean squared residual of the
whole set:

    argmax_n  sum_q p(q) |<d_n, r_q>|^2 / (1 - sum_i |<d_n, w~_i>|^2)

where w~_i is an orthonormal basis of the current subspace.  SOMP keeps only
the numerator.  Both share the same subspace machinery: Gram-Schmidt with one
re-orthogonalization pass, and adaptive biorthogonalization so that the
coefficients of every signal are plain inner products with a dual basis.
"""

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateAtomError,
    DictionaryExhaustedError,
    DimensionMismatchError,
    EmptyDictionaryError,
    InvalidDimensionError,
)

log = logging.getLogger(__name__)

# Candidates with 1 - sum_i |<d_n, w~_i>|^2 below this are treated as lying in
# the span of the selected atoms.
EPS_DEP = 1e-10


@dataclass
class SignalSet:
    """Q signals of common length N (rows of ``signals``) with weights p(q)."""

    signals: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.signals, dtype=float))
        if f.ndim != 2 or f.shape[0] < 1 or f.shape[1] < 1:
            raise InvalidDimensionError("signals must form a non-empty (Q, N) array")
        self.signals = f
        q = f.shape[0]
        if self.weights is None:
            w = np.full(q, 1.0 / q)
        else:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != (q,):
                raise DimensionMismatchError(f"expected {q} weights, got {w.size}")
            if np.any(w < 0) or not np.isfinite(w).all():
                raise ValueError("weights must be finite and nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise ValueError(f"weights must sum to 1 (sum = {w.sum()!r})")
        self.weights = w

    @property
    def count(self):
        return self.signals.shape[0]

    @property
    def length(self):
        return self.signals.shape[1]


class StopMode(enum.Enum):
    SQUARED = "squared"      # sum_q p(q) ||r_q||^2 < tolerance
    NORM = "norm"            # sum_q p(q) ||r_q||   < tolerance
    MAX_ATOMS = "max_atoms"  # exactly max_atoms iterations


@dataclass
class StopRule:
    mode: StopMode = StopMode.SQUARED
    tolerance: float = 0.0
    max_atoms: int = None

    def __post_init__(self):
        self.mode = StopMode(self.mode)
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if self.mode is StopMode.MAX_ATOMS and self.max_atoms is None:
            raise ValueError("MAX_ATOMS mode needs max_atoms")

    def cap(self, dictionary):
        limit = min(len(dictionary), dictionary.ambient_dim)
        return limit if self.max_atoms is None else min(self.max_atoms, limit)

    def error(self, signals, residuals):
        norms_sq = np.einsum("qn,qn->q", residuals, residuals)
        if self.mode is StopMode.NORM:
            return float(signals.weights @ np.sqrt(norms_sq))
        return float(signals.weights @ norms_sq)

    def satisfied(self, signals, residuals):
        if self.mode is StopMode.MAX_ATOMS:
            return False
        return self.error(signals, residuals) < self.tolerance


@dataclass
class PursuitState:
    selected: list
    ortho_basis: list
    ortho_norms_sq: list
    dual_basis: np.ndarray
    residuals: np.ndarray
    atom_proj_energy: np.ndarray

    @classmethod
    def start(cls, signals, dictionary):
        return cls(
            selected=[],
            ortho_basis=[],
            ortho_norms_sq=[],
            dual_basis=np.zeros((0, dictionary.ambient_dim)),
            residuals=signals.signals.copy(),
            atom_proj_energy=np.zeros(len(dictionary)),
        )

    @property
    def k(self):
        return len(self.selected)


@dataclass
class ApproximationResult:
    indices: np.ndarray
    coefficients: np.ndarray          # (Q, k), C[q, n] = <beta_n, f_q>
    residual_norms: np.ndarray
    iterations: int
    residuals: np.ndarray = None
    algorithm: str = "soomp"
    capped: bool = False
    error_history: list = field(default_factory=list)
    criterion_history: list = field(default_factory=list)

    def approximations(self, dictionary):
        """Rows f_q^k = sum_n C[q, n] d_{l_n}."""
        return self.coefficients @ dictionary.atoms[self.indices]


def _check_inputs(signals, dictionary):
    if len(dictionary) == 0:
        raise EmptyDictionaryError("dictionary has no atoms")
    if signals.length != dictionary.ambient_dim:
        raise DimensionMismatchError(
            f"signals have length {signals.length}, dictionary atoms {dictionary.ambient_dim}"
        )


def selection_scores(state, signals, dictionary, optimized=True):
    """Criterion value for every atom; excluded candidates get -inf."""
    corr = dictionary.atoms @ state.residuals.T
    scores = (corr * corr) @ signals.weights
    denom = 1.0 - state.atom_proj_energy
    excluded = denom < EPS_DEP
    if state.selected:
        excluded[state.selected] = True
    if optimized:
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = scores / denom
    scores[excluded] = -np.inf
    return scores


def _argmax(scores, k):
    best = int(np.argmax(scores))
    if not np.isfinite(scores[best]):
        raise DictionaryExhaustedError(
            f"every unselected atom lies in the span of the {k} selected atoms"
        )
    return best


def select_first(signals, dictionary):
    """Index maximizing sum_q p(q) |<d_n, f_q>|^2 (lowest index on ties)."""
    _check_inputs(signals, dictionary)
    state = PursuitState.start(signals, dictionary)
    return _argmax(selection_scores(state, signals, dictionary), 0)


def select_next(state, signals, dictionary, optimized=True):
    return _argmax(selection_scores(state, signals, dictionary, optimized), state.k)


def extend_orthogonal_basis(state, dictionary, index):
    """Append w_{k+1}: Gram-Schmidt of atom ``index`` plus one re-orthogonalization."""
    atom = dictionary.atoms[index]
    w = atom.copy()
    if state.ortho_basis:
        basis = np.array(state.ortho_basis)
        norms_sq = np.array(state.ortho_norms_sq)
        w -= basis.T @ ((basis @ atom) / norms_sq)
        w -= basis.T @ ((basis @ w) / norms_sq)
    norm_sq = float(w @ w)
    if norm_sq < EPS_DEP:
        raise DegenerateAtomError(
            f"atom {index} is numerically dependent on the selected atoms (||w||^2 = {norm_sq:.3e})"
        )
    state.selected.append(int(index))
    state.ortho_basis.append(w)
    state.ortho_norms_sq.append(norm_sq)
    proj = dictionary.atoms @ w
    state.atom_proj_energy += proj * proj / norm_sq
    return state


def update_duals(state, dictionary):
    """Adaptive biorthogonalization for the most recently appended atom."""
    w = state.ortho_basis[-1]
    new = w / state.ortho_norms_sq[-1]
    atom = dictionary.atoms[state.selected[-1]]
    old = state.dual_basis
    if len(old):
        old = old - np.outer(old @ atom, new)
    state.dual_basis = np.vstack([old, new])
    return state


def update_residuals(state, signals):
    w = state.ortho_basis[-1]
    amp = signals.signals @ w / state.ortho_norms_sq[-1]
    state.residuals -= np.outer(amp, w)
    return state


def _result(state, signals, algorithm, capped, errors, criteria):
    coefficients = signals.signals @ state.dual_basis.T
    return ApproximationResult(
        indices=np.array(state.selected, dtype=int),
        coefficients=coefficients,
        residual_norms=np.linalg.norm(state.residuals, axis=1),
        iterations=state.k,
        residuals=state.residuals,
        algorithm=algorithm,
        capped=capped,
        error_history=errors,
        criterion_history=criteria,
    )


def _run(signals, dictionary, stop, optimized, callback=None):
    _check_inputs(signals, dictionary)
    algorithm = "soomp" if optimized else "somp"
    cap = stop.cap(dictionary)
    state = PursuitState.start(signals, dictionary)
    sq_rule = StopRule(StopMode.SQUARED)
    errors = [sq_rule.error(signals, state.residuals)]
    criteria = []
    capped = False
    while not stop.satisfied(signals, state.residuals):
        if state.k >= cap:
            capped = stop.mode is not StopMode.MAX_ATOMS
            break
        scores = selection_scores(state, signals, dictionary, optimized)
        try:
            index = _argmax(scores, state.k)
        except DictionaryExhaustedError as exc:
            exc.result = _result(state, signals, algorithm, False, errors, criteria)
            raise
        extend_orthogonal_basis(state, dictionary, index)
        update_duals(state, dictionary)
        update_residuals(state, signals)
        criteria.append(float(scores[index]))
        errors.append(sq_rule.error(signals, state.residuals))
        if callback is not None:
            callback(state)
    if capped:
        log.debug("%s stopped at the safety cap of %d atoms", algorithm, cap)
    return _result(state, signals, algorithm, capped, errors, criteria)


def run_soomp(signals, dictionary, stop=None, callback=None):
    """Simultaneous optimized orthogonal matching pursuit.

    ``callback(state)`` is invoked after every iteration.
    """
    return _run(signals, dictionary, stop or StopRule(), True, callback)


def run_somp(signals, dictionary, stop=None, callback=None):
    """Simultaneous OMP: correlation-only selection, same projection machinery."""
    return _run(signals, dictionary, stop or StopRule(), False, callback)
