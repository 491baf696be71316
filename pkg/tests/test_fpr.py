import numpy as np
import pytest
from hypothesis import given, strategies as st

from gstdesign import fpr as FP
from gstdesign import germs as G
from gstdesign.model import (
    Circuit,
    circuit_ptm,
    effective_fiducial_effects,
    effective_fiducial_states,
)

GERMS = [
    Circuit(("Gx",)),
    Circuit(("Gy",)),
    Circuit(("Gx", "Gx", "Gy")),
]


def test_keep_count_paper_fractions():
    assert FP.keep_count(0.125, 36) == 4
    assert FP.keep_count(0.03, 36) == 1
    assert FP.keep_count(1.0, 36) == 36
    # ceiling mode stays available behind the flag
    assert FP.keep_count(0.125, 36, rounding="ceil") == 5
    assert FP.keep_count(0.03, 36, rounding="ceil") == 2


@given(st.floats(0.001, 1.0), st.integers(1, 400))
def test_keep_count_bounds(gamma, n):
    k = FP.keep_count(gamma, n)
    assert 1 <= k <= n


def test_keep_count_rejects_bad_gamma():
    with pytest.raises(Exception):
        FP.keep_count(0.0, 36)
    with pytest.raises(Exception):
        FP.keep_count(1.5, 36)


def test_kite_jacobian_shapes(xyi, xyi_fiducials):
    germ = GERMS[0]
    kite = G.kite_structure(circuit_ptm(xyi, germ))
    jac = FP.kite_param_jacobian(xyi, germ, [(0, 0)], xyi_fiducials, xyi_fiducials, kite)
    assert jac.shape == (xyi.num_effects, kite.num_params)
    full = [(j, i) for j in range(6) for i in range(6)]
    jac_full = FP.kite_param_jacobian(xyi, germ, full, xyi_fiducials, xyi_fiducials, kite)
    assert jac_full.shape == (36 * xyi.num_effects, kite.num_params)


def test_kite_jacobian_matches_finite_differences(xyi, xyi_fiducials):
    germ = GERMS[2]
    kite = G.kite_structure(circuit_ptm(xyi, germ))
    pairs = [(0, 0), (2, 3), (5, 1)]
    jac = FP.kite_param_jacobian(xyi, germ, pairs, xyi_fiducials, xyi_fiducials, kite)
    states = effective_fiducial_states(xyi, xyi_fiducials)
    effects = effective_fiducial_effects(xyi, xyi_fiducials)
    coords = FP._kite_coordinates(kite)
    base = kite.basis_inv @ circuit_ptm(xyi, germ) @ kite.basis
    m = xyi.num_effects
    step = 1e-6
    for col in range(0, len(coords), 2):
        u, v = coords[col]
        kp, km = base.copy(), base.copy()
        kp[u, v] += step
        km[u, v] -= step
        gp = kite.basis @ kp @ kite.basis_inv
        gm = kite.basis @ km @ kite.basis_inv
        for r, (j, i) in enumerate(pairs):
            for t in range(m):
                fd = (effects[i * m + t] @ (gp - gm) @ states[j]) / (2 * step)
                assert abs(fd - jac[r * m + t, col]) < 1e-6


def test_per_germ_fpr_meets_threshold(xyi, xyi_fiducials):
    eps = 1.0 / 30.0
    result = FP.per_germ_fpr(xyi, xyi_fiducials, xyi_fiducials, GERMS, eps_lambda=eps, search_seed=5)
    for k in range(len(GERMS)):
        assert result.achieved_ratio[k] >= eps
        assert len(result.pairs_by_germ[k]) >= 1
        assert len(result.pairs_by_germ[k]) < 36  # actually reduced
    assert result.fell_back_to_full == set()


def test_per_germ_fpr_bad_eps(xyi, xyi_fiducials):
    with pytest.raises(ValueError):
        FP.per_germ_fpr(xyi, xyi_fiducials, xyi_fiducials, GERMS, eps_lambda=0.0)


def test_degenerate_search_falls_back_to_full_grid(xyi, xyi_fiducials):
    # a search that proposes nothing can only return the full grid
    result = FP.per_germ_fpr(
        xyi, xyi_fiducials, xyi_fiducials, GERMS[:1],
        eps_lambda=1.0, search_seed=0, candidates_per_size=0,
    )
    assert result.pairs_by_germ[0] == tuple((j, i) for j in range(6) for i in range(6))
    assert result.achieved_ratio[0] == 1.0
    assert result.fell_back_to_full == {0}


def test_baseline_dominance(xyi, xyi_fiducials):
    germ = GERMS[2]
    kite = G.kite_structure(circuit_ptm(xyi, germ))
    full = [(j, i) for j in range(6) for i in range(6)]
    jac_full = FP.kite_param_jacobian(xyi, germ, full, xyi_fiducials, xyi_fiducials, kite)
    top_full = np.linalg.svd(jac_full, compute_uv=False)[0]
    rng = np.random.default_rng(0)
    for _ in range(10):
        size = int(rng.integers(1, 36))
        sel = rng.choice(36, size=size, replace=False)
        sub = [full[s] for s in sel]
        jac_sub = FP.kite_param_jacobian(xyi, germ, sub, xyi_fiducials, xyi_fiducials, kite)
        assert np.linalg.svd(jac_sub, compute_uv=False)[0] <= top_full + 1e-10


def test_random_fpr_reproducible_and_exact_counts(xyi_fiducials):
    sched = (1, 2, 4, 8, 16)
    a = FP.random_fpr(xyi_fiducials, xyi_fiducials, GERMS, sched, 0.125, seed=13)
    b = FP.random_fpr(xyi_fiducials, xyi_fiducials, GERMS, sched, 0.125, seed=13)
    assert a == b
    keep = FP.keep_count(0.125, 36)
    for pairs in a.values():
        assert len(pairs) == keep
        assert len(set(pairs)) == keep  # no duplicates within a plaquette


def test_random_fpr_plaquettes_draw_independently(xyi_fiducials):
    sched = (1, 2, 4, 8, 16, 32, 64)
    sets = FP.random_fpr(xyi_fiducials, xyi_fiducials, GERMS, sched, 0.125, seed=13)
    distinct = set(tuple(v) for v in sets.values())
    assert len(distinct) > 1  # not all plaquettes share one draw


def test_random_fpr_different_seeds_differ(xyi_fiducials):
    sched = (1, 2, 4, 8)
    a = FP.random_fpr(xyi_fiducials, xyi_fiducials, GERMS, sched, 0.125, seed=13)
    b = FP.random_fpr(xyi_fiducials, xyi_fiducials, GERMS, sched, 0.125, seed=14)
    assert a != b
