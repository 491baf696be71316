import numpy as np
import pytest

from gstdesign import germs as G
from gstdesign.builtins import make_xycphase_gateset
from gstdesign.model import Circuit, circuit_ptm, matrix_rank_rel, non_gauge_count, param_blocks, to_vector, from_vector
from gstdesign.noise import perturbed_models


def finite_power_twirl(tau, deriv, power):
    """Oracle: the repetition average (1/p) sum_i G^i D G^-i."""
    acc = np.zeros_like(deriv)
    fwd = np.eye(tau.shape[0])
    bwd = np.eye(tau.shape[0])
    taui = np.linalg.inv(tau)
    for _ in range(power):
        acc += fwd @ deriv @ bwd
        fwd = tau @ fwd
        bwd = bwd @ taui
    return acc / power


def test_idle_kite_is_single_full_block(xyi):
    kite = G.kite_structure(xyi.gates["Gi"])
    assert kite.blocks == ((0, 4),)
    assert kite.num_params == 16  # d^4


def test_gx_kite_blocks(xyi):
    # oracle: the rotation PTM has eigenvalues {1, 1, i, -i}
    evals = np.sort_complex(np.linalg.eigvals(xyi.gates["Gx"]))
    assert np.allclose(np.sort_complex(np.array([1, 1, 1j, -1j])), evals, atol=1e-12)
    kite = G.kite_structure(xyi.gates["Gx"])
    assert sorted(size for _, size in kite.blocks) == [1, 1, 2]
    assert kite.num_params == 6


def test_generic_matrix_kite_all_singletons(rng):
    mat = rng.standard_normal((4, 4))
    kite = G.kite_structure(mat)
    assert all(size == 1 for _, size in kite.blocks)
    assert kite.num_params == 4  # d^2


def test_kite_rejects_non_finite():
    bad = np.full((4, 4), np.nan)
    with pytest.raises(ValueError):
        G.kite_structure(bad)


def test_twirl_idempotent(xyi, rng):
    kite = G.kite_structure(xyi.gates["Gx"])
    for _ in range(5):
        sl = rng.standard_normal((4, 4))
        once = G.twirl_project(sl, kite)
        twice = G.twirl_project(once, kite)
        assert np.max(np.abs(twice - once)) < 1e-10


def test_twirl_fixes_commuting_slice(xyi):
    tau = xyi.gates["Gx"]
    kite = G.kite_structure(tau)
    commuting = 0.3 * np.eye(4) + 0.2 * tau + 0.1 * tau @ tau
    out = G.twirl_project(commuting, kite)
    assert np.max(np.abs(out - commuting)) < 1e-9


def test_twirl_on_idle_kite_is_identity_map(xyi, rng):
    kite = G.kite_structure(xyi.gates["Gi"])
    sl = rng.standard_normal((4, 4))
    assert np.max(np.abs(G.twirl_project(sl, kite) - sl)) < 1e-12


def test_finite_power_average_matches_projection(xyi, rng):
    # germs whose eigenvalue ratios are fourth roots of unity converge
    # exactly at powers divisible by four
    for labels in (("Gx",), ("Gy",), ("Gx", "Gx")):
        tau = circuit_ptm(xyi, Circuit(labels))
        kite = G.kite_structure(tau)
        gaps = [
            abs(a - b)
            for i, a in enumerate(kite.eigenvalues)
            for b in kite.eigenvalues[i + 1 :]
        ]
        assert min(gaps) >= 0.1
        sl = rng.standard_normal((4, 4))
        avg = finite_power_twirl(tau, sl, 512)
        proj = G.twirl_project(sl, kite)
        assert np.max(np.abs(avg - proj)) < 1e-3


def test_repetition_normalized_jacobian_bounded(xyi):
    # (1/p) d(tau^p)/dtheta stays bounded in p for a unitary germ
    tau = circuit_ptm(xyi, Circuit(("Gx", "Gy")))
    deriv = np.zeros((4, 4))
    deriv[2, 3] = 1.0
    norms = []
    for power in (1, 2, 4, 8, 16, 32, 64):
        total = np.zeros((4, 4))
        for i in range(power):
            total += np.linalg.matrix_power(tau, i) @ deriv @ np.linalg.matrix_power(tau, power - 1 - i)
        norms.append(np.linalg.norm(total) / power)
    assert max(norms) < 2 * norms[0] + 1e-9


def test_single_germ_stack_equals_jacobian(xyi):
    germ = Circuit(("Gx",))
    j_single = G.germ_twirled_jacobian(xyi, germ)
    stacked = G.germset_jacobian([xyi], [germ])[0]
    assert np.array_equal(j_single, stacked)


def test_stacking_preserves_row_blocks(xyi):
    germs = [Circuit(("Gx",)), Circuit(("Gy",))]
    stacked = G.germset_jacobian([xyi], germs)[0]
    j0 = G.germ_twirled_jacobian(xyi, germs[0])
    j1 = G.germ_twirled_jacobian(xyi, germs[1])
    assert np.array_equal(stacked[:16], j0)
    assert np.array_equal(stacked[16:], j1)


def test_twirled_jacobian_zero_columns_for_absent_gates(xyi):
    jac = G.germ_twirled_jacobian(xyi, Circuit(("Gx",)))
    blocks = param_blocks(xyi)
    assert np.count_nonzero(jac[:, blocks["Gy"]]) == 0
    assert np.count_nonzero(jac[:, blocks["rho"]]) == 0
    assert np.count_nonzero(jac[:, blocks["meas"]]) == 0


def test_amplifiable_count_xyi(xyi):
    # consistency identity: non-gauge minus SPAM-dominated plateau count
    assert G.amplifiable_count(xyi) == 25 == 31 - 6


def test_amplifiable_count_perturbed_idle(xyi):
    single = type(xyi)(
        gates={"Gi": xyi.gates["Gi"]}, prep=xyi.prep, effects=xyi.effects
    )
    perturbed = perturbed_models(single, 1, 1e-3, seed=3)[0]
    assert G.amplifiable_count(perturbed) > 0


def test_amplifiable_count_xycphase():
    gs = make_xycphase_gateset()
    amp = G.amplifiable_count(gs)
    spam_non_gauge = non_gauge_count(gs) - amp
    assert non_gauge_count(gs) == 1023
    assert amp == 1023 - spam_non_gauge
    assert 0 < spam_non_gauge < 63  # fewer than the raw SPAM parameter count


def test_bare_germ_rank_below_target_at_perturbed_model(xyi):
    model = perturbed_models(xyi, 1, 1e-3, seed=11)[0]
    jac = G.germset_jacobian([model], G.bare_germs(xyi), [G.PERTURBED_DEGENERACY_TOL])[0]
    target = G.amplifiable_count(model)
    # at least 3 amplifiable directions beyond SPAM are missed
    assert matrix_rank_rel(jac) <= target - 3


def test_candidate_pool_no_cycles_or_repeats(xyi):
    pool = G.germ_candidate_pool(xyi.labels, 4)
    seqs = set(g.labels for g in pool)
    assert ("Gx", "Gx") not in seqs  # power of Gx
    assert ("Gx", "Gy") in seqs
    assert ("Gy", "Gx") not in seqs  # cyclic rotation of GxGy
    assert ("Gx", "Gx", "Gy", "Gy") in seqs
    for g in pool:
        n = len(g.labels)
        rotations = [g.labels[k:] + g.labels[:k] for k in range(n)]
        assert g.labels == min(rotations)
        assert all(g.labels != r for r in rotations[1:])


def test_standard_selection_reaches_target(xyi):
    pool = G.germ_candidate_pool(xyi.labels, 6)
    result = G.select_germs([xyi], pool)
    assert result.targets == [25]
    assert result.ranks[0] >= 25
    # independent rank check through the stacked Jacobian's SVD
    jac = G.germset_jacobian([xyi], result.germs)[0]
    assert matrix_rank_rel(jac) == 25


def test_robust_selection_covers_all_models(xyi):
    models = [xyi] + perturbed_models(xyi, 5, 1e-3, seed=2026)
    pool = G.germ_candidate_pool(xyi.labels, 6)
    result = G.select_germs(models, pool)
    assert all(r >= t for r, t in zip(result.ranks, result.targets))
    tols = [G.IDEAL_DEGENERACY_TOL] + [G.PERTURBED_DEGENERACY_TOL] * 5
    for jac, target in zip(G.germset_jacobian(models, result.germs, tols), result.targets):
        assert matrix_rank_rel(jac) >= target


def test_greedy_rank_monotone(xyi):
    models = [xyi] + perturbed_models(xyi, 2, 1e-3, seed=5)
    pool = G.germ_candidate_pool(xyi.labels, 4)
    result = G.select_germs(models, pool)
    worst_prev = 0
    for step in result.trajectory:
        worst = min(step["ranks"])
        assert worst >= worst_prev
        worst_prev = worst


def test_bare_pool_fails_pretest(xyi):
    model = perturbed_models(xyi, 1, 1e-3, seed=11)[0]
    with pytest.raises(G.GermSelectionError):
        G.select_germs([model], G.bare_germs(xyi), degeneracy_tols=[G.PERTURBED_DEGENERACY_TOL])
