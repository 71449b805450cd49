import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import projection, random_dictionary, weighted_error
from soomp.dictionary import Dictionary, Family, build_rdct
from soomp.errors import (
    DegenerateAtomError,
    DictionaryExhaustedError,
    DimensionMismatchError,
    EmptyDictionaryError,
    InvalidDimensionError,
)
from soomp.pursuit import (
    EPS_DEP,
    PursuitState,
    SignalSet,
    StopMode,
    StopRule,
    extend_orthogonal_basis,
    run_somp,
    run_soomp,
    select_first,
    select_next,
    selection_scores,
    update_duals,
    update_residuals,
)


def step(state, signals, dic, index):
    extend_orthogonal_basis(state, dic, index)
    update_duals(state, dic)
    update_residuals(state, signals)


def max_atoms(k):
    return StopRule(StopMode.MAX_ATOMS, max_atoms=k)


def brute_force_next(signals, dic, selected):
    """Candidate minimizing the weighted squared projection error (lowest index on ties)."""
    best, best_err = None, np.inf
    for n in range(len(dic)):
        if n in selected:
            continue
        atoms = dic.atoms[list(selected) + [n]]
        if np.linalg.matrix_rank(atoms, tol=1e-8) < len(atoms):
            continue
        err = weighted_error(atoms, signals.signals, signals.weights)
        if err < best_err - 1e-12:
            best, best_err = n, err
    return best, best_err


# --------------------------------------------------------------------------
# signal sets and stop rules


def test_signal_set_default_weights():
    s = SignalSet(np.ones((4, 3)))
    np.testing.assert_allclose(s.weights, 0.25)
    assert s.count == 4 and s.length == 3


def test_signal_set_single_vector():
    assert SignalSet(np.arange(5.0)).signals.shape == (1, 5)


@pytest.mark.parametrize("weights", [[0.5, 0.6], [1.0, 0.0, 0.0], [-0.5, 1.5]])
def test_signal_set_rejects_bad_weights(weights):
    with pytest.raises(ValueError):
        SignalSet(np.ones((2, 3)), np.array(weights))


def test_signal_set_rejects_empty():
    with pytest.raises(InvalidDimensionError):
        SignalSet(np.zeros((0, 3)))


def test_stop_rule_validation():
    with pytest.raises(ValueError):
        StopRule(StopMode.SQUARED, -1.0)
    with pytest.raises(ValueError):
        StopRule(StopMode.MAX_ATOMS)


def test_stop_rule_cap_is_bounded_by_dimension():
    dic = build_rdct(6, 20)
    assert StopRule().cap(dic) == 6
    assert StopRule(max_atoms=50).cap(dic) == 6
    assert StopRule(max_atoms=3).cap(dic) == 3


def test_input_mismatches(rng):
    dic = random_dictionary(rng, 5, 7)
    with pytest.raises(DimensionMismatchError):
        run_soomp(SignalSet(rng.standard_normal((2, 6))), dic)
    with pytest.raises(EmptyDictionaryError):
        select_first(SignalSet(rng.standard_normal((2, 5))), Dictionary.empty(5))


# --------------------------------------------------------------------------
# selection


def test_select_first_orthonormal_single_signal(rng):
    dic = build_rdct(8, 8)
    f = rng.standard_normal(8)
    assert select_first(SignalSet(f), dic) == int(np.argmax(np.abs(dic.atoms @ f)))


def test_select_first_perfect_correlation(rng):
    dic = random_dictionary(rng, 8, 12)
    signals = SignalSet(np.vstack([dic.atoms[2], dic.atoms[2]]), np.array([0.3, 0.7]))
    assert select_first(signals, dic) == 2


def test_select_first_matches_exhaustive_scoring(rng):
    for _ in range(20):
        dic = random_dictionary(rng, 8, 12)
        w = rng.random(3)
        signals = SignalSet(rng.standard_normal((3, 8)), w / w.sum())
        scores = [sum(signals.weights[q] * (dic.atoms[n] @ signals.signals[q]) ** 2
                      for q in range(3)) for n in range(12)]
        assert select_first(signals, dic) == int(np.argmax(scores))


def test_ties_go_to_lowest_index():
    atoms = np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 1.0, 0], [0, 0, 1.0]])
    dic = Dictionary(atoms, Family.UNION)
    assert select_first(SignalSet(np.array([0.0, 2.0, 2.0])), dic) == 1
    assert select_first(SignalSet(np.array([1.0, 1.0, 1.0])), dic) == 0


def test_select_next_is_stepwise_optimal(rng):
    for _ in range(30):
        dic = random_dictionary(rng, 8, 12)
        signals = SignalSet(rng.standard_normal((3, 8)))
        state = PursuitState.start(signals, dic)
        step(state, signals, dic, select_first(signals, dic))
        expected, _ = brute_force_next(signals, dic, state.selected)
        assert select_next(state, signals, dic) == expected


def test_atom_in_span_is_never_selected(rng):
    base = random_dictionary(rng, 6, 4)
    combo = base.atoms[0] + base.atoms[1]
    atoms = np.vstack([base.atoms, combo / np.linalg.norm(combo)])
    dic = Dictionary(atoms, Family.UNION)
    signals = SignalSet(rng.standard_normal((2, 6)))
    state = PursuitState.start(signals, dic)
    step(state, signals, dic, 0)
    step(state, signals, dic, 1)
    scores = selection_scores(state, signals, dic)
    assert scores[4] == -np.inf
    assert 1 - state.atom_proj_energy[4] < EPS_DEP
    result = run_soomp(signals, dic, max_atoms(4))
    assert len(set(result.indices)) == 4


def test_exhaustion_raises_with_partial_result(rng):
    # three atoms spanning only a 2-d subspace of R^4
    a, b = np.eye(4)[:2]
    c = (a + b) / np.sqrt(2)
    dic = Dictionary(np.vstack([a, b, c]), Family.UNION)
    signals = SignalSet(np.array([[1.0, 2.0, 3.0, 4.0]]))
    with pytest.raises(DictionaryExhaustedError) as info:
        run_soomp(signals, dic, StopRule(StopMode.SQUARED, 0.0))
    assert info.value.result.iterations == 2


def test_extend_rejects_dependent_atom(rng):
    dic = Dictionary(np.array([[1.0, 0, 0], [1.0, 0, 0]]), Family.UNION)
    signals = SignalSet(np.ones(3))
    state = PursuitState.start(signals, dic)
    step(state, signals, dic, 0)
    with pytest.raises(DegenerateAtomError):
        extend_orthogonal_basis(state, dic, 1)


# --------------------------------------------------------------------------
# basis, duals and residuals


def test_first_vector_is_the_atom(rng):
    dic = random_dictionary(rng, 7, 9)
    signals = SignalSet(rng.standard_normal((2, 7)))
    state = PursuitState.start(signals, dic)
    extend_orthogonal_basis(state, dic, 4)
    np.testing.assert_allclose(state.ortho_basis[0], dic.atoms[4], atol=1e-15)
    assert abs(state.ortho_norms_sq[0] - 1) < 1e-12
    update_duals(state, dic)
    np.testing.assert_allclose(state.dual_basis[0], dic.atoms[4], atol=1e-15)


def test_orthogonal_atom_is_unchanged():
    dic = build_rdct(8, 8)
    signals = SignalSet(np.ones(8))
    state = PursuitState.start(signals, dic)
    step(state, signals, dic, 2)
    step(state, signals, dic, 5)
    np.testing.assert_allclose(state.ortho_basis[1], dic.atoms[5], atol=1e-14)
    np.testing.assert_allclose(state.dual_basis, dic.atoms[[2, 5]], atol=1e-14)


def audit(state, signals, dic):
    atoms = dic.atoms[state.selected]
    k = state.k
    w = np.array(state.ortho_basis)
    wn = w / np.linalg.norm(w, axis=1, keepdims=True)
    gram_w = wn @ wn.T
    assert np.max(np.abs(gram_w - np.eye(k))) < 1e-10
    assert np.max(np.abs(state.dual_basis @ atoms.T - np.eye(k))) < 1e-9
    assert np.max(np.abs(atoms @ state.residuals.T)) < 1e-8
    expected = signals.signals - projection(atoms, signals.signals)
    assert np.max(np.abs(state.residuals - expected)) < 1e-8
    assert len(set(state.selected)) == k


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 12), extra=st.integers(0, 12),
       q=st.integers(1, 4))
def test_state_invariants_hold_every_iteration(seed, n, extra, q):
    rng = np.random.default_rng(seed)
    dic = random_dictionary(rng, n, n + extra)
    signals = SignalSet(rng.standard_normal((q, n)))
    run_soomp(signals, dic, max_atoms(n), callback=lambda s: audit(s, signals, dic))


def test_error_history_non_increasing(rng):
    dic = random_dictionary(rng, 10, 25)
    signals = SignalSet(rng.standard_normal((4, 10)))
    for run in (run_soomp, run_somp):
        hist = run(signals, dic, max_atoms(10)).error_history
        assert len(hist) == 11
        assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))


def test_selected_atoms_well_conditioned(rng):
    dic = random_dictionary(rng, 12, 24)
    signals = SignalSet(rng.standard_normal((3, 12)))
    res = run_soomp(signals, dic, max_atoms(8))
    atoms = dic.atoms[res.indices]
    assert np.linalg.cond(atoms @ atoms.T) < 1e8


# --------------------------------------------------------------------------
# full runs


def test_exact_recovery_with_complete_dictionary(rng):
    dic = random_dictionary(rng, 10, 20)
    signals = SignalSet(rng.standard_normal((4, 10)))
    res = run_soomp(signals, dic, StopRule(StopMode.SQUARED, 0.0, max_atoms=10))
    assert res.iterations == 10
    assert np.all(res.residual_norms < 1e-8)


def test_reconstruction_identity(rng):
    dic = random_dictionary(rng, 9, 15)
    signals = SignalSet(rng.standard_normal((3, 9)))
    res = run_soomp(signals, dic, max_atoms(5))
    approx = res.approximations(dic)
    assert np.max(np.linalg.norm(signals.signals - approx - res.residuals, axis=1)) < 1e-8
    np.testing.assert_allclose(res.residual_norms, np.linalg.norm(res.residuals, axis=1))


def test_identical_signals_share_everything(rng):
    dic = random_dictionary(rng, 8, 16)
    f = rng.standard_normal(8)
    res = run_soomp(SignalSet(np.vstack([f, f])), dic, max_atoms(4))
    np.testing.assert_array_equal(res.coefficients[0], res.coefficients[1])
    single = run_soomp(SignalSet(f), dic, max_atoms(4))
    np.testing.assert_array_equal(res.indices, single.indices)


def test_per_step_error_is_minimal(rng):
    dic = random_dictionary(rng, 10, 20)
    signals = SignalSet(rng.standard_normal((4, 10)))
    res = run_soomp(signals, dic, max_atoms(3))
    for k in range(3):
        _, best = brute_force_next(signals, dic, list(res.indices[:k]))
        assert res.error_history[k + 1] == pytest.approx(best, abs=1e-10)


def test_stop_modes(rng):
    dic = random_dictionary(rng, 12, 30)
    signals = SignalSet(rng.standard_normal((3, 12)))
    full = run_soomp(signals, dic, max_atoms(12))
    rho = full.error_history[5] * 1.0000001
    sq = run_soomp(signals, dic, StopRule(StopMode.SQUARED, rho))
    assert sq.iterations == 5 and not sq.capped
    norm_rule = StopRule(StopMode.NORM, 0.5)
    res = run_soomp(signals, dic, norm_rule)
    assert norm_rule.error(signals, res.residuals) < 0.5
    before = run_soomp(signals, dic, max_atoms(res.iterations - 1))
    assert norm_rule.error(signals, before.residuals) >= 0.5
    assert run_soomp(signals, dic, max_atoms(7)).iterations == 7


def test_cap_flags_partial_result(rng):
    dic = random_dictionary(rng, 12, 30)
    signals = SignalSet(rng.standard_normal((3, 12)))
    res = run_soomp(signals, dic, StopRule(StopMode.SQUARED, 1e-30, max_atoms=4))
    assert res.iterations == 4 and res.capped


def test_zero_tolerance_already_met():
    dic = build_rdct(4, 8)
    res = run_soomp(SignalSet(np.zeros((2, 4))), dic, StopRule(StopMode.SQUARED, 1e-12))
    assert res.iterations == 0 and res.coefficients.shape == (2, 0)


def test_single_signal_weight_invariance(rng):
    dic = random_dictionary(rng, 8, 16)
    f = rng.standard_normal(8)
    a = run_soomp(SignalSet(f), dic, max_atoms(6)).indices
    b = run_soomp(SignalSet(3.7 * f), dic, max_atoms(6)).indices
    np.testing.assert_array_equal(a, b)


def test_somp_equals_soomp_for_orthonormal_single_signal(rng):
    dic = build_rdct(10, 10)
    f = rng.standard_normal(10)
    a = run_soomp(SignalSet(f), dic, max_atoms(10))
    b = run_somp(SignalSet(f), dic, max_atoms(10))
    np.testing.assert_array_equal(a.indices, b.indices)
    np.testing.assert_allclose(a.coefficients, b.coefficients, atol=1e-12)


def test_somp_first_atom_matches_soomp(rng):
    for _ in range(10):
        dic = random_dictionary(rng, 8, 20)
        signals = SignalSet(rng.standard_normal((3, 8)))
        assert run_somp(signals, dic, max_atoms(1)).indices[0] == \
            run_soomp(signals, dic, max_atoms(1)).indices[0]


def test_somp_selects_by_correlation(rng):
    dic = random_dictionary(rng, 8, 20)
    signals = SignalSet(rng.standard_normal((3, 8)))
    res = run_somp(signals, dic, max_atoms(4))
    for k in range(1, 4):
        atoms = dic.atoms[res.indices[:k]]
        r = signals.signals - projection(atoms, signals.signals)
        scores = ((dic.atoms @ r.T) ** 2) @ signals.weights
        scores[res.indices[:k]] = -np.inf
        assert res.indices[k] == int(np.argmax(scores))


def test_somp_needs_more_atoms_on_coherent_dictionaries():
    counts = {"soomp": 0, "somp": 0}
    for seed in range(50):
        rng = np.random.default_rng(seed)
        base = rng.standard_normal((24, 16))
        base = base / np.linalg.norm(base, axis=1, keepdims=True)
        # coherent pairs: every atom has a close neighbour
        near = base + 0.3 * rng.standard_normal(base.shape)
        atoms = np.vstack([base, near / np.linalg.norm(near, axis=1, keepdims=True)])
        dic = Dictionary(atoms, Family.UNION)
        coef = np.zeros((3, 24))
        support = rng.choice(24, 6, replace=False)
        coef[:, support] = rng.standard_normal((3, 6))
        f = coef @ base
        signals = SignalSet(f)
        rho = 1e-3 * float(signals.weights @ np.sum(f * f, axis=1))
        for name, run in (("soomp", run_soomp), ("somp", run_somp)):
            counts[name] += run(signals, dic, StopRule(StopMode.SQUARED, rho)).iterations
    assert counts["somp"] >= counts["soomp"]
