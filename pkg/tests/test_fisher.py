import numpy as np
import pytest

from gstdesign import design as D
from gstdesign import fisher as FI
from gstdesign.model import (
    Circuit,
    circuit_probabilities,
    from_vector,
    gauge_tangent,
    param_blocks,
    to_vector,
)
from gstdesign.noise import perturbed_models

GERMS = [Circuit(("Gx",)), Circuit(("Gy",)), Circuit(("Gx", "Gx", "Gy"))]


@pytest.fixture(scope="module")
def eval_model(xyi):
    return FI.default_eval_model(xyi, seed=41)


def test_zero_shots_zero_matrix(xyi):
    fim = FI.circuit_fim(xyi, Circuit(("Gx",)), shots=0)
    assert np.count_nonzero(fim) == 0


def draw_regular_circuit(gs, rng, max_depth=16, min_p=0.01):
    """Random circuit respecting the per-circuit FIM precondition that all
    outcome probabilities sit above the clip floor."""
    while True:
        depth = int(rng.integers(1, max_depth + 1))
        c = Circuit(tuple(rng.choice(["Gi", "Gx", "Gy"], size=depth)))
        if np.min(circuit_probabilities(gs, c)) >= min_p:
            return c


def test_fim_symmetric_psd(eval_model, rng):
    for _ in range(5):
        c = draw_regular_circuit(eval_model, rng)
        fim = FI.circuit_fim(eval_model, c)
        assert np.max(np.abs(fim - fim.T)) < 1e-9
        assert np.min(np.linalg.eigvalsh(fim)) >= -1e-8


def test_fim_clipping_never_blows_up(xyi):
    # the empty circuit has an exactly zero outcome at the ideal point; the
    # clip rule must keep the matrix finite
    fim = FI.circuit_fim(xyi, Circuit(()))
    assert np.all(np.isfinite(fim))


def test_outer_and_hessian_forms_agree(eval_model, rng):
    for _ in range(5):
        depth = int(rng.integers(1, 12))
        c = Circuit(tuple(rng.choice(["Gi", "Gx", "Gy"], size=depth)))
        a = FI.circuit_fim(eval_model, c)
        b = FI.circuit_fim_hessian_form(eval_model, c)
        assert np.max(np.abs(a - b)) < 1e-8


def test_fim_against_expected_loglikelihood_hessian(xyi, rng):
    """Oracle: numerically differentiate the expected log likelihood
    l(theta) = sum_i p_i(theta0) log p_i(theta); its negative Hessian at
    theta0 is the per-shot Fisher information."""
    c = Circuit(("Gx",))  # p = (1/2, 1/2): all probabilities well away from 0
    theta0 = to_vector(xyi)
    p0 = circuit_probabilities(xyi, c)
    assert np.allclose(p0, [0.5, 0.5], atol=1e-12)

    fim = FI.circuit_fim(xyi, c, shots=1)

    def expected_ll(theta):
        p = np.clip(circuit_probabilities(from_vector(xyi, theta), c), 1e-12, 1.0)
        return float(p0 @ np.log(p))

    idx = list(range(0, 43, 3)) + [42]
    h = 1e-3
    for a in idx:
        for b in idx:
            ea, eb = np.zeros(43), np.zeros(43)
            ea[a] = h
            eb[b] = h
            d2 = (
                expected_ll(theta0 + ea + eb)
                - expected_ll(theta0 + ea - eb)
                - expected_ll(theta0 - ea + eb)
                + expected_ll(theta0 - ea - eb)
            ) / (4 * h * h)
            assert abs(-d2 - fim[a, b]) < 1e-5


def test_additivity_exact(eval_model):
    circuits = [Circuit(("Gx",)), Circuit(("Gy", "Gx")), Circuit(("Gi",))]
    total = FI.circuits_fim(eval_model, circuits)
    summed = sum(FI.circuit_fim(eval_model, c) for c in circuits)
    assert np.array_equal(total, summed) or np.max(np.abs(total - summed)) < 1e-12


def test_thread_count_does_not_change_reduction(eval_model, xyi_fiducials):
    des = D.build_design(
        xyi_fiducials, xyi_fiducials, GERMS, D.default_schedule(16), gateset_labels=eval_model.labels
    )
    one = FI.circuits_fim(eval_model, des.circuits, threads=1)
    four = FI.circuits_fim(eval_model, des.circuits, threads=4)
    assert np.max(np.abs(one - four)) <= 1e-12


def test_gauge_annihilation(eval_model, xyi_fiducials):
    des = D.build_design(
        xyi_fiducials, xyi_fiducials, GERMS, D.default_schedule(16), gateset_labels=eval_model.labels
    )
    fim = FI.design_fim(eval_model, des)
    basis = gauge_tangent(eval_model).basis
    norm = np.linalg.norm(fim, 2)
    for col in range(basis.shape[1]):
        v = basis[:, col]
        assert np.linalg.norm(fim @ v) <= 1e-6 * norm * np.linalg.norm(v)


def test_single_circuit_series_coincide(eval_model, xyi_fiducials):
    des = D.build_design(
        [Circuit(())], [Circuit(())], [], (1,), gateset_labels=()
    )
    assert D.circuit_count(des) == 1
    cum = FI.cumulative_series(eval_model, des)
    inc = FI.incremental_series(eval_model, des)
    fim = FI.design_fim(eval_model, des)
    assert np.allclose(cum.matrices[0], inc.matrices[0], atol=0)
    assert np.allclose(cum.matrices[0], fim, atol=0)


def test_cumulative_equals_sum_of_incrementals(eval_model, xyi_fiducials):
    des = D.build_design(
        xyi_fiducials, xyi_fiducials, GERMS, D.default_schedule(32), gateset_labels=eval_model.labels
    )
    cum = FI.cumulative_series(eval_model, des)
    inc = FI.incremental_series(eval_model, des)
    for k in range(len(des.maxdepths)):
        acc = sum(inc.matrices[: k + 1])
        assert np.max(np.abs(cum.matrices[k] - acc)) < 1e-9
    # cumulative spectra are monotone nondecreasing eigenvalue by eigenvalue
    # (Loewner order; tolerance relative to the spectral scale because the
    # near-zero gauge eigenvalues carry eigensolver noise of eps * lam_max)
    spectra = np.array(cum.spectra)
    scale = spectra[:-1, 0][:, None]
    assert np.all(np.diff(spectra, axis=0) >= -1e-9 * scale)


def test_design_fim_nongauge_rank_and_null_alignment(xyi, xyi_fiducials):
    eval_gs = perturbed_models(xyi, 1, 1e-3, seed=8)[0]
    des = D.build_design(
        xyi_fiducials, xyi_fiducials, GERMS, D.default_schedule(64), gateset_labels=xyi.labels
    )
    floor = FI.certification_clip_floor(FI.DEFAULT_SHOTS)
    fim = FI.circuits_fim(eval_gs, des.circuits, clip_floor=floor)
    evals, evecs = np.linalg.eigh(fim)
    tol = 1e-8 * evals[-1]
    assert np.sum(evals > tol) == 31
    null_vecs = evecs[:, evals <= tol]
    gauge = gauge_tangent(eval_gs).basis
    angles = FI.principal_angles(null_vecs, gauge)
    assert np.max(angles) < 1e-4


def test_projected_blocks_recover_block_diagonal(eval_model):
    fim = FI.circuit_fim(eval_model, Circuit(("Gx", "Gy", "Gi")))
    blocks = param_blocks(eval_model)
    acc = sum(FI.projected_fim(fim, eval_model, lab) for lab in blocks)
    expected = np.zeros_like(fim)
    for sl in blocks.values():
        expected[sl, sl] = fim[sl, sl]
    assert np.array_equal(acc, expected)


def test_projection_idempotent(eval_model):
    fim = FI.circuit_fim(eval_model, Circuit(("Gx", "Gy")))
    once = FI.projected_fim(fim, eval_model, "Gx")
    twice = FI.projected_fim(once, eval_model, "Gx")
    assert np.array_equal(once, twice)


def test_projected_unknown_label(eval_model):
    with pytest.raises(KeyError):
        FI.projected_fim(np.zeros((43, 43)), eval_model, "Gz")


def test_spam_projected_series_flat(xyi, xyi_fiducials):
    eval_gs = FI.default_eval_model(xyi, seed=41)
    des = D.build_design(
        xyi_fiducials, xyi_fiducials, GERMS, D.default_schedule(256), gateset_labels=xyi.labels
    )
    inc = FI.incremental_series(
        eval_gs, des, clip_floor=FI.certification_clip_floor(FI.DEFAULT_SHOTS)
    )
    for label in ("rho", "meas"):
        proj = FI.projected_series(inc, eval_gs, label)
        tops = np.array([spec[0] for spec in proj.spectra])
        # flat within a factor of ~3 across depth buckets, no systematic growth
        later = tops[3:]
        assert np.max(later) <= 3.0 * np.min(later[later > 0])


def test_certification_csv_and_report(tmp_path, xyi, xyi_fiducials):
    eval_gs = FI.default_eval_model(xyi, seed=41)
    des = D.build_design(
        xyi_fiducials, xyi_fiducials, GERMS, D.default_schedule(32), gateset_labels=xyi.labels
    )
    report = FI.certify_design(eval_gs, des, target=xyi)
    assert report.growing + report.plateaued == 31
    assert report.spam_budget == 6
    path = tmp_path / "spec.csv"
    series = FI.cumulative_series(eval_gs, des)
    FI.series_to_csv(series, path, ["growing"] * 31)
    lines = path.read_text().splitlines()
    assert lines[0] == "L,eigenvalue_index,value,classification"
    assert len(lines) == 1 + len(des.maxdepths) * 43
    FI.report_to_json(report, tmp_path / "report.json")
    assert (tmp_path / "report.json").read_text().startswith("{")


def test_cramer_rao_on_one_parameter_family(xyi, rng):
    """Empirical variance of an unbiased-ish estimator along one parameter
    direction is bounded below by the inverse Fisher information."""
    from gstdesign.model import probability_jacobian

    c = Circuit(("Gx",))
    theta0 = to_vector(xyi)
    # one-parameter family along the gradient of the first outcome
    grad = probability_jacobian(xyi, c)[0]
    direction = grad / np.linalg.norm(grad)

    def p_of_t(t):
        return circuit_probabilities(from_vector(xyi, theta0 + t * direction), c)

    # dp0/dt by central difference, used to invert the estimator
    h = 1e-6
    slope = (p_of_t(h)[0] - p_of_t(-h)[0]) / (2 * h)
    assert abs(slope) > 0.1

    shots = 1000
    fim = FI.circuit_fim(xyi, c, shots=shots)
    info = direction @ fim @ direction

    estimates = []
    p_true = p_of_t(0.0)[0]
    for _ in range(1000):
        counts = rng.binomial(shots, p_true)
        estimates.append((counts / shots - p_true) / slope)
    var = np.var(estimates)
    assert var >= 0.9 / info
