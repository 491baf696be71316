import json

import numpy as np
import pytest
import scipy.stats

from gstdesign import noise as N
from gstdesign.model import Circuit, circuit_probabilities


def test_zero_noise_returns_target_exactly(xyi):
    out = N.sample_noisy_gateset(xyi, N.NoiseSpec("coherent-only", 0.0, 0.0, 1))
    assert out is xyi


def test_spec_validation():
    with pytest.raises(ValueError):
        N.NoiseSpec("weird", 0.01, 0.0, 1)
    with pytest.raises(ValueError):
        N.NoiseSpec("coherent-only", -1.0, 0.0, 1)
    with pytest.raises(ValueError):
        N.NoiseSpec("coherent-depol", 0.01, 1.0, 1)


def test_coherent_error_factor_is_orthogonal(xyi):
    spec = N.NoiseSpec("coherent-only", 0.01, 0.0, 7)
    noisy = N.sample_noisy_gateset(xyi, spec)
    for label in xyi.gates:
        err = noisy.gates[label] @ np.linalg.inv(xyi.gates[label])
        assert np.max(np.abs(err.T @ err - np.eye(4))) < 1e-9
        # TP: first row preserved exactly up to rounding
        assert np.max(np.abs(noisy.gates[label][0] - [1, 0, 0, 0])) < 1e-12
    # SPAM untouched
    assert np.array_equal(noisy.prep, xyi.prep)


def test_paper_regime_samples(xyi):
    spec = N.NoiseSpec("coherent-depol", 0.01, 0.001, 17)
    noisy = N.sample_noisy_gateset(xyi, spec)
    noisy.validate()
    for label in xyi.gates:
        assert np.max(np.abs(noisy.gates[label] - xyi.gates[label])) < 0.2


def test_depolarization_shrinks_bloch_block(xyi):
    eta = 0.25
    spec = N.NoiseSpec("coherent-depol", 0.0, eta, 3)
    noisy = N.sample_noisy_gateset(xyi, spec)
    for label in xyi.gates:
        g = xyi.gates[label]
        got = noisy.gates[label]
        assert np.allclose(got[0], g[0], atol=1e-12)
        assert np.allclose(got[1:], (1 - eta) * g[1:], atol=1e-12)


def test_noise_seed_determinism(xyi):
    a = N.sample_noisy_gateset(xyi, N.NoiseSpec("coherent-only", 0.01, 0.0, 5))
    b = N.sample_noisy_gateset(xyi, N.NoiseSpec("coherent-only", 0.01, 0.0, 5))
    c = N.sample_noisy_gateset(xyi, N.NoiseSpec("coherent-only", 0.01, 0.0, 6))
    for label in xyi.gates:
        assert np.array_equal(a.gates[label], b.gates[label])
    assert any(not np.array_equal(a.gates[label], c.gates[label]) for label in xyi.gates)


def test_perturbed_models_distinct(xyi):
    models = N.perturbed_models(xyi, 5, 1e-3, seed=2)
    assert len(models) == 5
    mats = [m.gates["Gx"].tobytes() for m in models]
    assert len(set(mats)) == 5


def test_dataset_deterministic_outcome(xyi):
    ds = N.simulate_dataset(xyi, [Circuit(())], shots=500, seed=3)
    assert ds.counts.tolist() == [[500, 0]]


def test_dataset_counts_sum_to_shots(xyi, rng):
    circuits = [Circuit(tuple(rng.choice(["Gi", "Gx", "Gy"], size=rng.integers(0, 10)))) for _ in range(20)]
    ds = N.simulate_dataset(xyi, circuits, shots=1000, seed=4)
    assert np.all(ds.counts.sum(axis=1) == 1000)
    assert np.all(ds.counts >= 0)


def test_dataset_seed_determinism_byte_identical(xyi, tmp_path):
    circuits = [Circuit(("Gx",)), Circuit(("Gy", "Gx"))]
    paths = []
    for k in range(2):
        ds = N.simulate_dataset(xyi, circuits, shots=1000, seed=11)
        p = tmp_path / f"d{k}.json"
        ds.save(p)
        paths.append(p.read_bytes())
    assert paths[0] == paths[1]


def test_dataset_roundtrip(xyi, tmp_path):
    circuits = [Circuit(("Gx",))]
    ds = N.simulate_dataset(xyi, circuits, shots=100, seed=1)
    p = tmp_path / "ds.json"
    ds.save(p)
    loaded = N.Dataset.load(p)
    assert loaded.shots == 100
    assert loaded.circuits == ds.circuits
    assert np.array_equal(loaded.counts, ds.counts)


def test_empirical_frequencies_concentrate(xyi, rng):
    shots = 100_000
    circuits = []
    while len(circuits) < 60:
        c = Circuit(tuple(rng.choice(["Gi", "Gx", "Gy"], size=rng.integers(1, 12))))
        circuits.append(c)
    ds = N.simulate_dataset(xyi, circuits, shots=shots, seed=12)
    good = 0
    for c, counts in zip(ds.circuits, ds.counts):
        p = circuit_probabilities(xyi, c)
        f = counts / shots
        bound = 5 * np.sqrt(np.clip(p * (1 - p), 0, None) / shots)
        if np.all(np.abs(f - p) <= bound + 1e-12):
            good += 1
    assert good >= 0.99 * len(circuits) - 1


def test_loglikelihood_zero_for_deterministic(xyi):
    ds = N.Dataset(circuits=(Circuit(()),), counts=np.array([[400, 0]]), shots=400)
    assert abs(N.log_likelihood(xyi, ds)) < 1e-9


def test_loglikelihood_matches_multinomial_pmf(xyi, rng):
    # restrict to circuits where the clip floor is inactive so the pmf
    # oracle and the clipped sum describe the same distribution
    circuits = []
    while len(circuits) < 10:
        c = Circuit(tuple(rng.choice(["Gi", "Gx", "Gy"], size=5)))
        if np.min(circuit_probabilities(xyi, c)) > 1e-6:
            circuits.append(c)
    ds = N.simulate_dataset(xyi, circuits, shots=200, seed=8)
    expected = 0.0
    for c, counts in zip(ds.circuits, ds.counts):
        p = circuit_probabilities(xyi, c)
        expected += scipy.stats.multinomial.logpmf(counts, 200, p / p.sum())
    got = N.log_likelihood(xyi, ds)
    assert abs(got - expected) < 1e-9


def test_likelihood_dominance(xyi, rng):
    from gstdesign.model import from_vector, to_vector

    theta0 = to_vector(xyi)
    circuits = [Circuit(tuple(rng.choice(["Gi", "Gx", "Gy"], size=6))) for _ in range(15)]
    wins = 0
    trials = 40
    for t in range(trials):
        ds = N.simulate_dataset(xyi, circuits, shots=500, seed=100 + t)
        l_true = N.log_likelihood(xyi, ds)
        other = from_vector(xyi, theta0 + 0.2 * np.random.default_rng(t).standard_normal(43))
        if l_true >= N.log_likelihood(other, ds):
            wins += 1
    assert wins >= 0.95 * trials