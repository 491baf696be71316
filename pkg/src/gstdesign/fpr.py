"""Fiducial pair reduction: structured per-germ search and random thinning.

Per-germ FPR reparameterizes each germ by its kite structure (entries
inside the commutant blocks, expressed in the germ's generalized
eigenbasis) and asks which fiducial pairs produce outcome probabilities
sensitive to those coordinates.  A random incremental search keeps the
smallest pair set whose Jacobian Gram spectrum retains at least a fraction
``eps_lambda`` of the full grid's smallest non-trivial eigenvalue, at the
full grid's rank.

Random FPR ignores the structure entirely: each (germ, power) plaquette
independently keeps ``keep_count(gamma, n_pairs)`` pairs drawn without
replacement.  The count uses floor-with-minimum-one so that fractions of
12.5% and 3% of a 36-pair grid keep 4 and 1 pairs; a ceiling mode is
available behind the ``rounding`` flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .design import keep_count, random_pairs_for_plaquette, FprPolicy, germ_power, validate_schedule
from .germs import IDEAL_DEGENERACY_TOL, KiteStructure, kite_structure
from .model import (
    RANK_RTOL,
    Circuit,
    GateSet,
    effective_fiducial_effects,
    effective_fiducial_states,
    circuit_ptm,
)

__all__ = [
    "PerGermFprResult",
    "keep_count",
    "kite_param_jacobian",
    "per_germ_fpr",
    "random_fpr",
]


def _kite_coordinates(kite: KiteStructure) -> list[tuple[int, int]]:
    coords = []
    for start, size in kite.blocks:
        for u in range(start, start + size):
            for v in range(start, start + size):
                coords.append((u, v))
    return coords


def kite_param_jacobian(
    gs: GateSet,
    germ: Circuit,
    pairs,
    prep_fiducials,
    meas_fiducials,
    kite: KiteStructure | None = None,
) -> np.ndarray:
    """Jacobian of pair probabilities with respect to kite coordinates.

    Rows run over (pair, outcome); columns over the in-block entries of the
    germ superoperator written in its generalized eigenbasis, evaluated at
    the germ's value.  Entries are complex because the eigenbasis is; the
    derivative of ``<<E'| S K S^-1 |rho'>>`` in coordinate (u, v) is the
    exact product ``(E'^T S)_u (S^-1 rho')_v``.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("kite_param_jacobian needs at least one fiducial pair")
    if kite is None:
        kite = kite_structure(circuit_ptm(gs, germ), IDEAL_DEGENERACY_TOL)
    m = gs.num_effects
    states = effective_fiducial_states(gs, list(prep_fiducials))
    all_effects = effective_fiducial_effects(gs, list(meas_fiducials))
    coords = _kite_coordinates(kite)
    jac = np.empty((len(pairs) * m, len(coords)), dtype=complex)
    for r, (j, i) in enumerate(pairs):
        right = kite.basis_inv @ states[j]
        for t in range(m):
            left = all_effects[i * m + t] @ kite.basis
            row = np.array([left[u] * right[v] for u, v in coords])
            jac[r * m + t] = row
    return jac


def _gram_spectrum(jac: np.ndarray) -> np.ndarray:
    svals = np.linalg.svd(jac, compute_uv=False)
    return svals**2


@dataclass
class PerGermFprResult:
    """Retained pairs and achieved eigenvalue ratios per germ index."""

    pairs_by_germ: dict[int, tuple[tuple[int, int], ...]]
    achieved_ratio: dict[int, float]
    baseline_rank: dict[int, int]
    eps_lambda: float
    fell_back_to_full: set[int] = field(default_factory=set)

    def to_policy(self) -> FprPolicy:
        return FprPolicy(
            mode="per-germ", eps_lambda=self.eps_lambda, pairs_by_germ=dict(self.pairs_by_germ)
        )


def per_germ_fpr(
    gs: GateSet,
    prep_fiducials,
    meas_fiducials,
    germs,
    eps_lambda: float = 1.0 / 30.0,
    search_seed: int = 0,
    candidates_per_size: int = 100,
    degeneracy_tol: float = IDEAL_DEGENERACY_TOL,
) -> PerGermFprResult:
    """Random incremental pair search per germ (accept at eps_lambda ratio).

    For each germ the full-grid Jacobian sets the baseline: its rank k and
    its k-th largest Gram eigenvalue.  Candidate pair sets start at the
    size needed for rank k, draw ``candidates_per_size`` sets per size from
    a per-germ stream split off the master seed, and grow by one pair until
    a set's k-th Gram eigenvalue reaches ``eps_lambda`` times the baseline.
    If nothing short of the full grid is accepted the full grid is returned
    with a fallback flag.
    """
    if not (0.0 < eps_lambda <= 1.0):
        raise ValueError("eps_lambda must lie in (0, 1]")
    preps = list(prep_fiducials)
    meass = list(meas_fiducials)
    germs = list(germs)
    m = gs.num_effects
    full_grid = [(j, i) for j in range(len(preps)) for i in range(len(meass))]

    pairs_by_germ: dict[int, tuple[tuple[int, int], ...]] = {}
    achieved: dict[int, float] = {}
    base_rank: dict[int, int] = {}
    fallback: set[int] = set()

    for k, germ in enumerate(germs):
        kite = kite_structure(circuit_ptm(gs, germ), degeneracy_tol)
        jac_full = kite_param_jacobian(gs, germ, full_grid, preps, meass, kite)
        svals = np.linalg.svd(jac_full, compute_uv=False)
        rank = int(np.sum(svals > RANK_RTOL * svals[0])) if svals[0] > 0 else 0
        if rank == 0:
            raise ValueError(f"germ {germ} has a rank-0 full-grid Jacobian")
        lam_baseline = float(svals[rank - 1] ** 2)
        base_rank[k] = rank
        # row cache: pair r occupies rows [r*m, (r+1)*m)
        rng = np.random.default_rng(np.random.SeedSequence([int(search_seed), k]))

        found = None
        start_size = max(1, math.ceil(rank / m))
        for size in range(start_size, len(full_grid)):
            # draw the whole batch for this size, then test best ratio first
            # (the candidate generator is free; ordering by quality keeps the
            # accepted set well away from the eps_lambda floor)
            batch = []
            for _ in range(candidates_per_size):
                sel = sorted(rng.choice(len(full_grid), size=size, replace=False).tolist())
                rows = np.concatenate([np.arange(r * m, (r + 1) * m) for r in sel])
                spec = np.sort(_gram_spectrum(jac_full[rows]))[::-1]
                lam = float(spec[rank - 1]) if spec.size >= rank else 0.0
                batch.append((lam, sel))
            if not batch:
                continue
            batch.sort(key=lambda t: -t[0])
            lam, sel = batch[0]
            if lam >= eps_lambda * lam_baseline:
                found = (sel, lam / lam_baseline)
                break
        if found is None:
            pairs_by_germ[k] = tuple(full_grid)
            achieved[k] = 1.0
            fallback.add(k)
        else:
            sel, ratio = found
            pairs_by_germ[k] = tuple(full_grid[r] for r in sel)
            achieved[k] = ratio

    return PerGermFprResult(
        pairs_by_germ=pairs_by_germ,
        achieved_ratio=achieved,
        baseline_rank=base_rank,
        eps_lambda=eps_lambda,
        fell_back_to_full=fallback,
    )


def random_fpr(
    prep_fiducials, meas_fiducials, germs, maxdepths, gamma: float, seed: int,
    rounding: str = "floor",
) -> dict[tuple[int, int], tuple[tuple[int, int], ...]]:
    """Per-(germ, max depth) retained pair sets, as used by random designs.

    Streams are split per plaquette from the master seed so the draw for a
    given (germ, depth) does not depend on the rest of the schedule.
    """
    sched = validate_schedule(maxdepths)
    policy = FprPolicy(mode="random", gamma=gamma, seed=seed, rounding=rounding)
    out = {}
    for k, germ in enumerate(germs):
        for depth in sched:
            if germ_power(germ, depth) < 1:
                continue
            out[(k, depth)] = random_pairs_for_plaquette(
                policy, k, depth, len(list(prep_fiducials)), len(list(meas_fiducials))
            )
    return out
