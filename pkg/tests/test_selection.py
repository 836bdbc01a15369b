import numpy as np
import pytest

from cobs import (
    ActiveConfig,
    ActiveSession,
    Clustering,
    ClusteringEnsemble,
    ConstraintSet,
    Kind,
    NOISE,
    Provenance,
    SimulatedOracle,
    cobs_select,
    numsat_select,
    run_active_session,
    run_kmeans,
    satisfaction_score,
    silhouette_select,
    weighted_agreement,
)
from cobs.data import Dataset
from cobs.selection import (
    BudgetExhaustedError,
    PendingQueryError,
    PoolExhaustedError,
    satisfaction_scores,
    silhouette_values,
)
from scipy.spatial.distance import pdist, squareform

from .oracles import brute_silhouette


def _clustering(assignment, tag="test", **params) -> Clustering:
    return Clustering(np.asarray(assignment, dtype=np.int64),
                      Provenance.make(tag, **params))


def _ensemble(assignments, weights=None) -> ClusteringEnsemble:
    cs = tuple(_clustering(a, idx=i) for i, a in enumerate(assignments))
    n = len(cs)
    w = np.asarray(weights, dtype=float) if weights is not None \
        else np.full(n, 1.0 / n)
    return ClusteringEnsemble(clusterings=cs, weights=w)


def _random_ensemble(rng, size=30, n=25, k=4) -> ClusteringEnsemble:
    return _ensemble(rng.integers(0, k, size=(size, n)))


# -- batch selection ------------------------------------------------------------

def test_cobs_select_empty_constraints_uniform_tie():
    ens = _ensemble([[0, 0, 1], [0, 1, 1], [0, 1, 2]])
    picks = {cobs_select(ens, ConstraintSet(), seed).provenance.param("idx")
             for seed in range(40)}
    assert picks == {0, 1, 2}


def test_cobs_select_recovers_ground_truth():
    truth = [0, 0, 0, 1, 1, 1, 2, 2, 2]
    ens = _ensemble([truth, [0] * 9, [0, 1, 2, 0, 1, 2, 0, 1, 2]])
    oracle = SimulatedOracle(np.asarray(truth))
    cs = ConstraintSet()
    for i, j in [(0, 1), (3, 4), (6, 7), (0, 3), (3, 6), (1, 8)]:
        cs.add(i, j, oracle.answer(i, j))
    selected = cobs_select(ens, cs, seed=0)
    assert satisfaction_score(selected, cs) == len(cs)
    assert selected.provenance.param("idx") == 0


def test_cobs_select_score_equals_exhaustive_max():
    rng = np.random.default_rng(3)
    ens = _random_ensemble(rng)
    cs = ConstraintSet()
    for _ in range(15):
        i, j = sorted(rng.choice(25, size=2, replace=False).tolist())
        if (i, j) not in cs:
            kind = Kind.MUST_LINK if rng.random() < 0.5 else Kind.CANNOT_LINK
            cs.add(i, j, kind)
    selected = cobs_select(ens, cs, seed=1)
    exhaustive = max(satisfaction_score(c, cs) for c in ens.clusterings)
    assert satisfaction_score(selected, cs) == exhaustive
    assert satisfaction_scores(ens, cs).max() == exhaustive


def test_cobs_select_empty_ensemble_errors():
    ens = ClusteringEnsemble(clusterings=(), weights=np.empty(0))
    with pytest.raises(ValueError):
        cobs_select(ens, ConstraintSet(), seed=0)


# -- weighted agreement -----------------------------------------------------------

def test_agreement_unanimous_equals_total_weight():
    ens = _ensemble([[0, 0, 1], [2, 2, 0]], weights=[0.6, 0.4])
    assert weighted_agreement(ens, (0, 1)) == pytest.approx(1.0)


def test_agreement_perfect_split_is_zero():
    ens = _ensemble([[0, 0], [0, 1]], weights=[0.5, 0.5])
    assert weighted_agreement(ens, (0, 1)) == pytest.approx(0.0)


def test_agreement_weighted_arithmetic():
    ens = _ensemble([[0, 0], [1, 1], [0, 1]], weights=[0.5, 0.25, 0.25])
    assert weighted_agreement(ens, (0, 1)) == pytest.approx(0.5)


def test_agreement_noise_votes_different():
    ens = _ensemble([[NOISE, NOISE], [0, 0]], weights=[0.5, 0.5])
    assert weighted_agreement(ens, (0, 1)) == pytest.approx(0.0)


def test_agreement_bounded_by_total_weight():
    rng = np.random.default_rng(8)
    ens = _random_ensemble(rng, size=20, n=10)
    total = ens.weights.sum()
    for _ in range(30):
        i, j = sorted(rng.choice(10, size=2, replace=False).tolist())
        assert weighted_agreement(ens, (i, j)) <= total + 1e-12


# -- active session ----------------------------------------------------------------

def test_session_pool_of_one():
    ens = _ensemble([[0, 1], [0, 0]])
    s = ActiveSession(ens, ActiveConfig(budget=1, sample_size=1, seed=0))
    assert s.next_query() == (0, 1)


def test_session_prefers_max_disagreement():
    # ensemble unanimous on pair (2,3), split 50/50 on pair (0,1)
    ens = _ensemble([[0, 0, 1, 1], [0, 1, 2, 2]])
    s = ActiveSession(ens, ActiveConfig(budget=2, sample_size=6, seed=0))
    assert s.next_query() == (0, 1)


def test_session_rejects_double_query_and_foreign_answer():
    ens = _ensemble([[0, 1, 2], [0, 0, 0]])
    s = ActiveSession(ens, ActiveConfig(budget=3, sample_size=3, seed=0))
    pair = s.next_query()
    with pytest.raises(PendingQueryError):
        s.next_query()
    other = (0, 2) if pair != (0, 2) else (0, 1)
    with pytest.raises(PendingQueryError):
        s.answer(other, Kind.MUST_LINK)
    s.answer(pair, Kind.MUST_LINK)
    with pytest.raises(PendingQueryError):
        s.answer(pair, Kind.MUST_LINK)


def test_session_budget_and_pool_exhaustion():
    ens = _ensemble([[0, 1], [0, 0]])
    s = ActiveSession(ens, ActiveConfig(budget=0, sample_size=5, seed=0))
    with pytest.raises(BudgetExhaustedError):
        s.next_query()
    s2 = ActiveSession(ens, ActiveConfig(budget=5, sample_size=5, seed=0))
    s2.answer(s2.next_query(), Kind.MUST_LINK)
    with pytest.raises(PoolExhaustedError):
        s2.next_query()


def test_update_with_m_one_leaves_weights():
    rng = np.random.default_rng(2)
    ens = _random_ensemble(rng, size=10, n=8)
    s = ActiveSession(ens, ActiveConfig(budget=4, m=1.0, sample_size=10, seed=1))
    for _ in range(4):
        s.answer(s.next_query(), Kind.CANNOT_LINK)
    assert np.array_equal(s.weights, np.full(10, 0.1))


def test_update_doubles_correct_weight():
    ens = _ensemble([[0, 0, 1], [0, 1, 1], [0, 1, 2], [0, 0, 0]])
    s = ActiveSession(ens, ActiveConfig(budget=1, m=2.0, sample_size=3, seed=0))
    pair = s.next_query()
    s.answer(pair, Kind.MUST_LINK)
    same = [bool(c.assignment[pair[0]] == c.assignment[pair[1]])
            for c in ens.clusterings]
    for idx, predicted_same in enumerate(same):
        expected = 0.5 if predicted_same else 0.125
        assert s.weights[idx] == pytest.approx(expected)


def test_weights_match_power_formula_from_log():
    rng = np.random.default_rng(17)
    for trial in range(10):
        ens = _random_ensemble(rng, size=25, n=15)
        m = float(rng.choice([1.5, 2.0, 3.0]))
        budget = int(rng.integers(1, 12))
        s = ActiveSession(ens, ActiveConfig(budget=budget, m=m,
                                            sample_size=40, seed=trial))
        while s.u < budget and s.pool_size() > 0:
            pair = s.next_query()
            kind = Kind.MUST_LINK if rng.random() < 0.5 else Kind.CANNOT_LINK
            s.answer(pair, kind)
        A = ens.assignment_matrix()
        for idx in range(len(ens)):
            right = wrong = 0
            for (i, j), kind in s.log:
                same = A[idx, i] == A[idx, j] and A[idx, i] != NOISE
                if same == (kind is Kind.MUST_LINK):
                    right += 1
                else:
                    wrong += 1
            expected = (1.0 / len(ens)) * m ** (right - wrong)
            assert s.weights[idx] == pytest.approx(expected, rel=1e-9)


def test_replay_log_reproduces_session():
    rng = np.random.default_rng(23)
    ens = _random_ensemble(rng, size=20, n=12)
    config = ActiveConfig(budget=6, m=2.0, sample_size=30, seed=4)
    s = ActiveSession(ens, config)
    while s.u < s.budget and s.pool_size() > 0:
        pair = s.next_query()
        s.answer(pair, Kind.MUST_LINK if rng.random() < 0.5 else Kind.CANNOT_LINK)
    fresh = ActiveSession(ens, config)
    fresh.replay_log(s.log)
    assert np.array_equal(fresh.weights, s.weights)
    assert fresh.result() is s.result()


def test_result_at_zero_queries_is_first_index():
    ens = _ensemble([[0, 1, 2], [0, 0, 1], [0, 1, 1]])
    s = ActiveSession(ens, ActiveConfig(budget=2, sample_size=3, seed=0))
    assert s.result().provenance.param("idx") == 0


def test_result_strict_max_weight_wins():
    truth = np.asarray([0, 0, 1, 1, 2, 2])
    ens = _ensemble([truth.tolist(), [0, 1, 1, 2, 2, 0], [0] * 6])
    oracle = SimulatedOracle(truth)
    s = run_active_session(ens, ActiveConfig(budget=10, m=2.0,
                                             sample_size=15, seed=0), oracle)
    assert s.result().provenance.param("idx") == 0


def test_result_m_one_reduces_to_batch_cobs_on_queried():
    rng = np.random.default_rng(31)
    truth = rng.integers(0, 3, size=12)
    ens = _random_ensemble(rng, size=15, n=12)
    oracle = SimulatedOracle(truth)
    s = run_active_session(ens, ActiveConfig(budget=8, m=1.0,
                                             sample_size=25, seed=2), oracle)
    got = s.result()
    best = max(satisfaction_score(c, s.queried) for c in ens.clusterings)
    assert satisfaction_score(got, s.queried) == best
    assert s.result() is got  # repeated calls agree


def test_scaling_weights_changes_nothing():
    """Argmin/argmax invariance under a positive rescaling of all weights."""
    rng = np.random.default_rng(41)
    for trial in range(20):
        ens = _random_ensemble(rng, size=18, n=14)
        config = ActiveConfig(budget=10, m=2.0, sample_size=30, seed=trial)
        a = ActiveSession(ens, config)
        b = ActiveSession(ens, config)
        b.weights *= 7.0
        steps = int(rng.integers(1, 10))
        for _ in range(steps):
            if a.u >= a.budget or a.pool_size() == 0:
                break
            pa, pb = a.next_query(), b.next_query()
            assert pa == pb
            kind = Kind.MUST_LINK if rng.random() < 0.5 else Kind.CANNOT_LINK
            a.answer(pa, kind)
            b.answer(pb, kind)
            assert a.result() is b.result()


def test_scaling_by_powers_of_two_exact_for_any_m():
    rng = np.random.default_rng(43)
    for trial in range(10):
        ens = _random_ensemble(rng, size=12, n=10)
        m = float(rng.uniform(1.1, 3.5))
        config = ActiveConfig(budget=6, m=m, sample_size=20, seed=trial)
        a = ActiveSession(ens, config)
        b = ActiveSession(ens, config)
        # a couple of shared answers first, then rescale the twin
        for _ in range(3):
            pair = a.next_query()
            assert b.next_query() == pair
            kind = Kind.MUST_LINK if rng.random() < 0.5 else Kind.CANNOT_LINK
            a.answer(pair, kind)
            b.answer(pair, kind)
        b.weights *= 2.0 ** int(rng.integers(-6, 7))
        while a.u < a.budget and a.pool_size() > 0:
            pa, pb = a.next_query(), b.next_query()
            assert pa == pb
            kind = Kind.MUST_LINK if rng.random() < 0.5 else Kind.CANNOT_LINK
            a.answer(pa, kind)
            b.answer(pb, kind)
        assert a.result() is b.result()


# -- silhouette baseline ------------------------------------------------------------

def test_silhouette_matches_brute_force():
    rng = np.random.default_rng(5)
    X = rng.uniform(size=(25, 3))
    dists = squareform(pdist(X))
    for trial in range(8):
        assignment = rng.integers(-1, 3, size=25)
        ours = silhouette_values(dists, assignment)
        brute = brute_silhouette(X, assignment)
        assert np.allclose(ours, brute, atol=1e-9)


def test_silhouette_select_prefers_three_blobs(blobs_dataset):
    sweep = [run_kmeans(blobs_dataset, k, seed)
             for k in range(2, 7) for seed in range(5)]
    best = silhouette_select(blobs_dataset, sweep)
    assert best.provenance.param("K") == 3


def test_q1_wine_kmeans_baselines(wine_dataset, wine_ensemble):
    """Unsupervised silhouette selection vs constraint-based selection over
    the K-means sweep alone, against the published wine values (0.85 / 0.81,
    same tolerance band as the acceptance reproduction)."""
    from cobs import (adjusted_rand_index, evaluate_selected,
                      generate_random_constraints, split_supervision)
    from cobs.evaluation import _run_seeds

    km = wine_ensemble.restrict("kmeans")
    sil = silhouette_select(wine_dataset, km.clusterings)
    sil_ari = adjusted_rand_index(sil, wine_dataset.labels)
    assert abs(sil_ari - 0.85) <= 0.15

    aris = []
    for rep in range(25):
        split_seed, cons_seed, tie_seed, _ = _run_seeds(0, 50, rep)
        split = split_supervision(wine_dataset, split_seed)
        oracle = SimulatedOracle(wine_dataset.labels)
        cs = generate_random_constraints(split, oracle, 50, cons_seed)
        sel = cobs_select(km, cs, tie_seed)
        aris.append(evaluate_selected(sel, wine_dataset, cs))
    assert abs(float(np.mean(aris)) - 0.81) <= 0.15


def test_silhouette_skips_single_cluster():
    d = Dataset(np.arange(8, dtype=float).reshape(-1, 1))
    single = _clustering([0] * 8)
    with pytest.raises(ValueError):
        silhouette_select(d, [single])
    two = _clustering([0, 0, 0, 0, 1, 1, 1, 1])
    assert silhouette_select(d, [single, two]) is two


# -- NumSat baseline -----------------------------------------------------------------

def test_numsat_tie_breaks_to_fewest_clusters():
    a = _clustering([0, 0, 1, 1], idx=0)
    b = _clustering([0, 1, 2, 3], idx=1)
    cs = ConstraintSet()
    cs.add(0, 2, Kind.CANNOT_LINK)
    assert numsat_select([b, a], cs) is a


def test_numsat_single_candidate():
    only = _clustering([0, 1])
    assert numsat_select([only], ConstraintSet()) is only


def test_numsat_unique_satisfier_wins(blobs_dataset):
    truth = np.repeat([0, 1, 2], 30)
    sweep = [run_kmeans(blobs_dataset, k, seed=0) for k in range(2, 7)]
    oracle = SimulatedOracle(truth)
    rng = np.random.default_rng(1)
    cs = ConstraintSet()
    while len(cs) < 10:
        i, j = sorted(rng.choice(90, size=2, replace=False).tolist())
        if (i, j) not in cs:
            cs.add(i, j, oracle.answer(i, j))
    chosen = numsat_select(sweep, cs)
    scores = [satisfaction_score(c, cs) for c in sweep]
    if scores.count(max(scores)) == 1:
        assert chosen.provenance.param("K") == 3


def test_numsat_empty_candidates():
    with pytest.raises(ValueError):
        numsat_select([], ConstraintSet())
