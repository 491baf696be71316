"""Fisher-information assembly and experiment-design certification.

Per circuit the Fisher information under multinomial sampling is
``N_c sum_i (1/p_i) (grad p_i)(grad p_i)^T`` (the Hessian terms cancel
because outcome probabilities sum to one); information is additive over
circuits, so a design's matrix is the sum over its circuit list.  Series
bucket each deduplicated circuit at the smallest max depth at which it
enters the design: the incremental matrix at L sums bucket L only, the
cumulative matrix sums all buckets up to L.

Certification evaluates the cumulative series at a point unitarily
perturbed off the target (degenerate spectra at the exact target hide the
standard germ set's deficiencies), projects out the gauge directions, and
classifies each remaining eigen-direction as growing or plateaued from the
log-log slope of its eigenvalue trajectory.  A well-constructed design
plateaus only in SPAM-dominated directions, which no germ repetition can
amplify.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .design import ExperimentDesign
from .germs import amplifiable_count
from .model import (
    Circuit,
    GateSet,
    circuit_probabilities,
    gauge_tangent,
    n_params,
    non_gauge_count,
    param_blocks,
    probability_hessian,
    probability_jacobian,
)
from .noise import PROB_CLIP_FLOOR, NoiseSpec, sample_noisy_gateset

__all__ = [
    "FisherSeries",
    "CertificationThresholds",
    "CertificationReport",
    "circuit_fim",
    "circuit_fim_hessian_form",
    "circuits_fim",
    "design_fim",
    "cumulative_series",
    "incremental_series",
    "projected_fim",
    "nongauge_projector",
    "principal_angles",
    "certify_design",
    "default_eval_model",
    "series_to_csv",
    "DEFAULT_SHOTS",
]

DEFAULT_SHOTS = 1000


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("GSTDESIGN_THREADS", "1")))
    except ValueError:
        return 1


def circuit_fim(
    gs: GateSet, circuit: Circuit, shots: int = DEFAULT_SHOTS, clip_floor: float = PROB_CLIP_FLOOR
) -> np.ndarray:
    """Outer-product form ``N_c sum_i (1/p_i) grad p_i grad p_i^T``.

    Probabilities are clipped to ``[clip_floor, 1]`` inside the inverse, so
    exact zeros never divide out.
    """
    jac = probability_jacobian(gs, circuit)
    p = np.clip(circuit_probabilities(gs, circuit), clip_floor, 1.0)
    return shots * (jac.T @ (jac / p[:, None]))


def circuit_fim_hessian_form(
    gs: GateSet, circuit: Circuit, shots: int = DEFAULT_SHOTS, clip_floor: float = PROB_CLIP_FLOOR
) -> np.ndarray:
    """Hessian-inclusive form; equals the outer-product form when the
    probabilities are normalized (the Hessian slices sum to zero)."""
    jac = probability_jacobian(gs, circuit)
    hess = probability_hessian(gs, circuit)
    p = np.clip(circuit_probabilities(gs, circuit), clip_floor, 1.0)
    return shots * (jac.T @ (jac / p[:, None]) - hess.sum(axis=0))


def _pairwise_sum(mats: list[np.ndarray]) -> np.ndarray:
    """Deterministic pairwise tree reduction (order independent of threading)."""
    if not mats:
        raise ValueError("nothing to sum")
    work = list(mats)
    while len(work) > 1:
        nxt = []
        for i in range(0, len(work) - 1, 2):
            nxt.append(work[i] + work[i + 1])
        if len(work) % 2:
            nxt.append(work[-1])
        work = nxt
    return work[0]


def circuits_fim(
    gs: GateSet,
    circuits,
    shots: int = DEFAULT_SHOTS,
    threads: int | None = None,
    clip_floor: float = PROB_CLIP_FLOOR,
) -> np.ndarray:
    """Sum of per-circuit matrices with a fixed chunked pairwise reduction.

    The chunking is constant (independent of the thread count), so results
    are bit-identical however many workers compute the chunks.
    """
    circuits = list(circuits)
    npar = n_params(gs)
    if not circuits:
        return np.zeros((npar, npar))
    threads = threads or default_threads()
    chunk = 64
    ranges = [(lo, min(lo + chunk, len(circuits))) for lo in range(0, len(circuits), chunk)]

    def chunk_sum(bounds):
        lo, hi = bounds
        return _pairwise_sum([circuit_fim(gs, c, shots, clip_floor) for c in circuits[lo:hi]])

    if threads > 1 and len(ranges) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sums = list(pool.map(chunk_sum, ranges))
    else:
        sums = [chunk_sum(r) for r in ranges]
    return _pairwise_sum(sums)


def design_fim(
    gs: GateSet, design: ExperimentDesign, shots: int = DEFAULT_SHOTS, threads: int | None = None
) -> np.ndarray:
    return circuits_fim(gs, design.circuits, shots, threads)


def certification_clip_floor(shots: int) -> float:
    """Probability floor used for certification: the resolution scale of
    ``shots`` samples.  Outcomes rarer than one event per shot budget are
    statistically indistinguishable from zero, and letting their inverse
    run to the hard clip floor floods the spectra with depth-independent
    information that masks the growth signature certification looks for."""
    return max(PROB_CLIP_FLOOR, 1.0 / shots)


@dataclass(frozen=True)
class FisherSeries:
    """Eigen-spectra of Fisher matrices across the depth schedule."""

    maxdepths: tuple[int, ...]
    spectra: tuple[tuple[float, ...], ...]  # sorted descending per depth
    kind: str  # "cumulative" | "incremental" | "projected:<label>"
    gauge_null_count: int
    matrices: tuple[np.ndarray, ...] = field(default=(), compare=False, repr=False)


def _series(
    gs: GateSet,
    design: ExperimentDesign,
    shots: int,
    cumulative: bool,
    threads: int | None,
    clip_floor: float = PROB_CLIP_FLOOR,
) -> FisherSeries:
    incs = []
    for depth in design.maxdepths:
        bucket = [c for c, b in zip(design.circuits, design.buckets) if b == depth]
        incs.append(
            circuits_fim(gs, bucket, shots, threads, clip_floor)
            if bucket
            else np.zeros((n_params(gs), n_params(gs)))
        )
    mats = list(np.cumsum(incs, axis=0)) if cumulative else incs
    spectra = tuple(tuple(np.sort(np.linalg.eigvalsh(m))[::-1]) for m in mats)
    null = n_params(gs) - non_gauge_count(gs)
    return FisherSeries(
        maxdepths=design.maxdepths,
        spectra=spectra,
        kind="cumulative" if cumulative else "incremental",
        gauge_null_count=null,
        matrices=tuple(mats),
    )


def cumulative_series(
    gs, design, shots: int = DEFAULT_SHOTS, threads=None, clip_floor: float = PROB_CLIP_FLOOR
) -> FisherSeries:
    return _series(gs, design, shots, cumulative=True, threads=threads, clip_floor=clip_floor)


def incremental_series(
    gs, design, shots: int = DEFAULT_SHOTS, threads=None, clip_floor: float = PROB_CLIP_FLOOR
) -> FisherSeries:
    return _series(gs, design, shots, cumulative=False, threads=threads, clip_floor=clip_floor)


def projected_fim(fim: np.ndarray, gs: GateSet, label: str) -> np.ndarray:
    """Coordinate projection onto one operation's parameter block."""
    blocks = param_blocks(gs)
    if label not in blocks:
        raise KeyError(f"unknown operation label {label!r}; have {sorted(blocks)}")
    sl = blocks[label]
    out = np.zeros_like(fim)
    out[sl, sl] = fim[sl, sl]
    return out


def projected_series(series: FisherSeries, gs: GateSet, label: str) -> FisherSeries:
    mats = tuple(projected_fim(m, gs, label) for m in series.matrices)
    spectra = tuple(tuple(np.sort(np.linalg.eigvalsh(m))[::-1]) for m in mats)
    return FisherSeries(
        maxdepths=series.maxdepths,
        spectra=spectra,
        kind=f"projected:{label}",
        gauge_null_count=series.gauge_null_count,
        matrices=mats,
    )


def nongauge_projector(gs: GateSet) -> np.ndarray:
    """Orthonormal basis (columns) of the non-gauge parameter subspace."""
    basis = gauge_tangent(gs).basis
    u, s, _ = np.linalg.svd(basis, full_matrices=True)
    rank = int(np.sum(s > 1e-8 * s[0])) if s.size and s[0] > 0 else 0
    return u[:, rank:]


def principal_angles(subspace_a: np.ndarray, subspace_b: np.ndarray) -> np.ndarray:
    """Principal angles between two column spans (radians, ascending)."""
    qa, _ = np.linalg.qr(subspace_a)
    qb, _ = np.linalg.qr(subspace_b)
    sv = np.clip(np.linalg.svd(qa.T @ qb, compute_uv=False), -1.0, 1.0)
    return np.arccos(sv)[::-1]


@dataclass(frozen=True)
class CertificationThresholds:
    slope_threshold: float = 0.8
    insensitive_rel: float = 1e-6
    # log-log slopes are fitted over this trailing fraction of the schedule
    fit_fraction: float = 0.5


@dataclass
class CertificationReport:
    maxdepths: tuple[int, ...]
    growing: int
    plateaued: int
    spam_budget: int
    well_constructed: bool
    slopes: list[float]
    total_information: list[float]
    insensitive: list[int]
    gauge_null_count: int
    spectra: list[list[float]]  # non-gauge cumulative spectra per depth

    def to_json_dict(self) -> dict:
        return {
            "maxdepths": list(self.maxdepths),
            "growing": self.growing,
            "plateaued": self.plateaued,
            "spam_budget": self.spam_budget,
            "verdict": "well-constructed" if self.well_constructed else "not-amplificationally-complete",
            "slopes": self.slopes,
            "total_information": self.total_information,
            "insensitive_directions": self.insensitive,
            "gauge_null_count": self.gauge_null_count,
        }


def default_eval_model(target: GateSet, seed: int = 97, sigma: float = 1e-3) -> GateSet:
    """Seeded coherent perturbation of the target, the recommended
    evaluation point for certification."""
    return sample_noisy_gateset(target, NoiseSpec("coherent-only", sigma, 0.0, seed))


def certify_design(
    gs_eval: GateSet,
    design: ExperimentDesign,
    target: GateSet | None = None,
    shots: int = DEFAULT_SHOTS,
    thresholds: CertificationThresholds = CertificationThresholds(),
    threads: int | None = None,
) -> CertificationReport:
    """Classify every non-gauge direction of the cumulative series.

    Gauge directions are removed exactly by projecting each cumulative
    matrix onto the non-gauge subspace of the evaluation point.  The
    classified directions are the eigenvectors of the deepest cumulative
    matrix; each direction's trajectory is its Rayleigh quotient across
    depths (tracking fixed directions avoids the relabeling artifacts that
    sorted-eigenvalue trajectories suffer when curves cross).  A direction
    grows if the least-squares log-log slope over the trailing part of the
    schedule reaches the threshold.  The SPAM budget (expected plateau
    count) is the target's non-gauge minus amplifiable parameter count; the
    design is well constructed when no more than that many directions
    plateau.

    Insensitive directions are flagged from the deepest incremental
    matrix: eigenvalues below ``insensitive_rel`` times its median mark
    parameter directions about which the deepest circuit layer teaches
    essentially nothing (sparse fiducial-pair sampling produces exact
    rank deficits there).

    Certification clips probabilities at the shot-resolution scale (see
    :func:`certification_clip_floor`) rather than the hard floor.
    """
    target = target or gs_eval
    floor = certification_clip_floor(shots)
    series = cumulative_series(gs_eval, design, shots, threads, clip_floor=floor)
    q = nongauge_projector(gs_eval)
    mats = [q.T @ m @ q for m in series.matrices]
    spectra = np.array([np.sort(np.linalg.eigvalsh(m))[::-1] for m in mats])

    depths = np.asarray(design.maxdepths, float)
    n_fit = max(2, int(np.ceil(len(depths) * thresholds.fit_fraction)))
    sel = slice(len(depths) - n_fit, len(depths))
    logl = np.log(depths[sel])

    _, eigvecs = np.linalg.eigh(mats[-1])
    slopes = []
    final_info = []
    for k in range(eigvecs.shape[1]):
        vec = eigvecs[:, k]
        traj = np.array([float(vec @ m @ vec) for m in mats])
        final_info.append(traj[-1])
        slope = float(np.polyfit(logl, np.log(np.maximum(traj[sel], 1e-300)), 1)[0])
        slopes.append(slope)

    growing = sum(s >= thresholds.slope_threshold for s in slopes)
    plateaued = len(slopes) - growing
    spam_budget = non_gauge_count(target) - amplifiable_count(target)

    # information delivered by the deepest layer alone
    last_bucket = [c for c, b in zip(design.circuits, design.buckets) if b == design.maxdepths[-1]]
    inc_last = circuits_fim(gs_eval, last_bucket, shots, threads, floor)
    inc_evals = np.clip(np.sort(np.linalg.eigvalsh(q.T @ inc_last @ q))[::-1], 0.0, None)
    inc_median = float(np.median(inc_evals))
    insensitive = [
        int(k) for k in range(inc_evals.size) if inc_evals[k] <= thresholds.insensitive_rel * inc_median
    ]

    return CertificationReport(
        maxdepths=design.maxdepths,
        growing=int(growing),
        plateaued=int(plateaued),
        spam_budget=int(spam_budget),
        well_constructed=plateaued <= spam_budget,
        slopes=slopes,
        total_information=final_info,
        insensitive=insensitive,
        gauge_null_count=series.gauge_null_count,
        spectra=[[float(x) for x in row] for row in spectra],
    )


def series_to_csv(series: FisherSeries, path, classifications=None) -> None:
    """Columns: L, eigenvalue index, value, classification."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["L", "eigenvalue_index", "value", "classification"])
        for depth, spec in zip(series.maxdepths, series.spectra):
            for k, val in enumerate(spec):
                cls = "" if classifications is None or k >= len(classifications) else classifications[k]
                w.writerow([depth, k, repr(float(val)), cls])


def report_to_json(report: CertificationReport, path) -> None:
    with open(path, "w") as f:
        json.dump(report.to_json_dict(), f, indent=1, sort_keys=True)
