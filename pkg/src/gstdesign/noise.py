"""Noise-model sampling and multinomial dataset simulation.

Two noise classes are supported: coherent-only, where every gate is
preceded by nothing and followed by a random small unitary
``expm(sum_a h_a H_a)`` with Hamiltonian-generator weights drawn i.i.d.
from N(0, sigma); and coherent+depolarization, which additionally applies
a uniform depolarizing factor ``diag(1, 1-eta, ..., 1-eta)`` after each
gate.  SPAM is left untouched.  The same sampler doubles as the source of
"unitarily perturbed" models for robust germ selection and for Fisher
certification evaluation points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from .model import Circuit, GateSet, circuit_probabilities, depolarizing_ptm, hamiltonian_generator_ptms

__all__ = [
    "NoiseSpec",
    "Dataset",
    "sample_noisy_gateset",
    "perturbed_models",
    "simulate_dataset",
    "log_likelihood",
    "PROB_CLIP_FLOOR",
]

# probabilities are clipped to [PROB_CLIP_FLOOR, 1] wherever their inverse
# or logarithm is taken
PROB_CLIP_FLOOR = 1e-10


@dataclass(frozen=True)
class NoiseSpec:
    """kind in {"coherent-only", "coherent-depol"}; sigma >= 0; eta in [0, 1)."""

    kind: str = "coherent-only"
    sigma: float = 0.01
    eta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("coherent-only", "coherent-depol"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if not (0.0 <= self.eta < 1.0):
            raise ValueError("eta must lie in [0, 1)")


def sample_noisy_gateset(target: GateSet, spec: NoiseSpec) -> GateSet:
    """Apply per-gate sampled coherent error (and optional depolarization).

    Each gate becomes ``D_eta . expm(sum_a h_a H_a) . G`` with independent
    weights per gate; the error factor acts after the gate.  With
    sigma = eta = 0 the target is returned unchanged.
    """
    if spec.sigma == 0.0 and (spec.kind == "coherent-only" or spec.eta == 0.0):
        return target
    gens = hamiltonian_generator_ptms(target.num_qubits)
    depol = depolarizing_ptm(target.dim, spec.eta) if spec.kind == "coherent-depol" else None
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), 0x6E6F6973]))
    gates = {}
    for label, g in target.gates.items():
        weights = rng.normal(0.0, spec.sigma, size=len(gens))
        generator = sum(w * h for w, h in zip(weights, gens))
        err = scipy.linalg.expm(generator)
        noisy = err @ g
        if depol is not None:
            noisy = depol @ noisy
        gates[label] = noisy
    return GateSet(gates, target.prep, target.effects, target.two_qubit_labels)


def perturbed_models(target: GateSet, count: int, sigma: float, seed: int) -> list[GateSet]:
    """Independent coherent-only perturbations of the target."""
    return [
        sample_noisy_gateset(target, NoiseSpec("coherent-only", sigma, 0.0, seed + k))
        for k in range(count)
    ]


@dataclass(frozen=True)
class Dataset:
    """Outcome counts per circuit; rows of ``counts`` sum to ``shots``."""

    circuits: tuple[Circuit, ...]
    counts: np.ndarray  # (n_circuits, n_outcomes) int64
    shots: int

    def to_json_dict(self) -> dict:
        return {
            "shots": self.shots,
            "circuits": [list(c.labels) for c in self.circuits],
            "counts": self.counts.tolist(),
        }

    @staticmethod
    def from_json_dict(doc: dict) -> "Dataset":
        return Dataset(
            circuits=tuple(Circuit(tuple(c)) for c in doc["circuits"]),
            counts=np.array(doc["counts"], dtype=np.int64),
            shots=int(doc["shots"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json_dict(), f, indent=1, sort_keys=True)

    @staticmethod
    def load(path) -> "Dataset":
        with open(path) as f:
            return Dataset.from_json_dict(json.load(f))


def _validated_probabilities(gs: GateSet, circuit: Circuit) -> np.ndarray:
    p = circuit_probabilities(gs, circuit)
    if np.min(p) < -1e-9:
        raise ValueError(f"model predicts negative probability {np.min(p):.3e} for {circuit}")
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"model probabilities sum to {total:.6f} for {circuit}")
    return p / total


def simulate_dataset(gs: GateSet, circuits, shots: int, seed: int) -> Dataset:
    """Draw multinomial counts for every circuit, one RNG stream per circuit."""
    circuits = tuple(circuits)
    counts = np.zeros((len(circuits), gs.num_effects), dtype=np.int64)
    for idx, c in enumerate(circuits):
        p = _validated_probabilities(gs, c)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), idx]))
        counts[idx] = rng.multinomial(shots, p)
    return Dataset(circuits=circuits, counts=counts, shots=shots)


def log_likelihood(gs: GateSet, dataset: Dataset) -> float:
    """Multinomial log likelihood of the dataset under the gate set."""
    total = 0.0
    shots = dataset.shots
    for c, n in zip(dataset.circuits, dataset.counts):
        p = np.clip(circuit_probabilities(gs, c), PROB_CLIP_FLOOR, 1.0)
        total += (
            gammaln(shots + 1) - np.sum(gammaln(n + 1)) + float(n @ np.log(p))
        )
    return float(total)
