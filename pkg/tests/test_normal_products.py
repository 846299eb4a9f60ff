import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from opelab import fields as F
from opelab import normal_products as NP
from opelab import products as Pr
from opelab.errors import CandidateNotClosed, KernelThresholdAmbiguous, RankAmbiguous
from opelab.norms import windowed_norm

PHIPHI = Pr.ProductExpression.simple("phi", "phi")
ONE = Pr.ProductExpression.simple("1", "1")
X0 = ((0.0, -0.003), (0.002, 0.007))


@pytest.fixture(scope="module")
def seq(default_config):
    return Pr.spacelike_sequence(X0, 0.6, 16, Pr.taylor_window(default_config))


def labels(*names):
    return F.FieldBasis.from_labels(list(names), 1)


# --- subspace helpers ---------------------------------------------------------


def test_principal_angles_basic():
    e = np.eye(4)
    assert NP.max_angle(e[:, :2], e[:, :2]) < 1e-15
    assert NP.max_angle(e[:, :1], e[:, 1:2]) == pytest.approx(np.pi / 2)


@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4))
@settings(max_examples=30, deadline=None)
def test_principal_angles_ignore_column_mixing(entries):
    M = np.array(entries).reshape(2, 2) + 3 * np.eye(2)
    A = np.random.default_rng(0).normal(size=(6, 2))
    w = np.linspace(0.5, 2.0, 6)
    assert NP.max_angle(A, A @ M, w) < 1e-6


def test_direction_slopes_synthetic():
    x = 0.01 * 0.6 ** np.arange(8)
    v = np.eye(3)
    rows = np.array([v[0] * 1.0 + v[1] * t + v[2] * t * t for t in x])
    slopes = NP.direction_slopes(rows, x)
    np.testing.assert_allclose(slopes, [0, 1, 2], atol=0.05)
    space = NP.extract_from_rows(rows, x, labels("1", "phi", ":phi^2:"), np.ones(3), beta=0.0)
    assert space.dimension == 1
    assert NP.max_angle(space.vectors, v[:, :1]) < 1e-8
    space1 = NP.extract_from_rows(rows, x, labels("1", "phi", ":phi^2:"), np.ones(3), beta=1.0)
    assert space1.dimension == 2


def test_rank_ambiguity_detected():
    x = 0.01 * 0.6 ** np.arange(8)
    rows = np.array([[1.0, t**0.25] for t in x])
    with pytest.raises(RankAmbiguous):
        NP.extract_from_rows(rows, x, labels("1", "phi"), np.ones(2), beta=0.0)


def test_kernel_threshold_guard():
    with pytest.raises(KernelThresholdAmbiguous):
        NP._null_space(np.diag([1.0, 1e-10]))
    K, C, _ = NP._null_space(np.diag([1.0, 0.0]))
    assert K.shape[1] == 1 and C.shape[1] == 1


# --- sp-app and extraction ---------------------------------------------------


def test_spapp_verdicts(default_basis, seq):
    assert NP.is_spacelike_approximating(labels("1", ":phi^2:"), PHIPHI, seq, default_basis).is_spapp
    assert not NP.is_spacelike_approximating(labels("1"), PHIPHI, seq, default_basis).is_spapp
    v = NP.is_spacelike_approximating(labels("1"), ONE, seq, default_basis)
    assert v.is_spapp and np.max(v.residuals) <= 1e-10


def test_target_span_is_minimal(default_basis, seq):
    fb = labels("1", ":phi^2:")
    space = NP.NormalProductSpace(fb, NP.span_of(fb, ["1", ":phi^2:"]), 0.0, np.ones(2), [], None, np.ones(2))
    assert NP.minimality_check(space, PHIPHI, seq, default_basis) == [False, False]


def test_identity_product_extraction(default_basis, seq):
    cand = F.field_basis(0, 2, 0, 1)
    space = NP.extract_normal_product(ONE, cand, seq, default_basis)
    assert space.dimension == 1
    assert NP.max_angle(space.vectors, NP.span_of(cand, ["1"])) < 1e-12


def test_extraction_report_is_jsonable(default_basis, seq):
    import json

    space = NP.extract_normal_product(PHIPHI, labels("1", ":phi^2:"), seq, default_basis)
    rep = space.as_report()
    json.dumps(rep)
    assert rep["dimension"] == space.dimension


def test_zimmermann(default_basis, seq):
    fb = labels("1", ":phi^2:")
    space = NP.NormalProductSpace(fb, np.eye(2, dtype=complex), 0.0, np.ones(2), [], None, np.ones(2))
    rows = NP.zimmermann_reconstruct(PHIPHI, 1, space, seq, default_basis)
    defects = [r[2] for r in rows]
    assert all(b < a for a, b in zip(defects, defects[1:]))
    assert defects[-1] < 0.05
    one = NP.NormalProductSpace(labels("1"), np.eye(1, dtype=complex), 0.0, np.ones(1), [], None, np.ones(1))
    rows = NP.zimmermann_reconstruct(ONE, 0, one, seq, default_basis)
    assert max(r[2] for r in rows) <= 1e-10
    # reconstructing the identity divides by the two-point coefficient: finite, reported
    rows = NP.zimmermann_reconstruct(PHIPHI, 0, space, seq, default_basis)
    assert all(np.isfinite(r[2]) for r in rows)


# --- transformations ----------------------------------------------------------


def test_derivative_action_matrices(default_basis):
    x = np.array([[0.0, -0.2], [0.03, 0.25]])
    win = Pr.safe_window(default_basis.config, PHIPHI)
    assert NP.derivative_action(0, ONE).terms == []
    A = Pr.evaluate_product(PHIPHI, x, default_basis)
    for axis in (0, 1):
        alpha = NP.Transformation("derivative", axis)
        lhs = alpha.on_matrix(default_basis, A)
        rhs = Pr.evaluate_product(NP.derivative_action(axis, PHIPHI), x, default_basis)
        assert windowed_norm(default_basis, lhs - rhs, *win) < 1e-10
    d0 = NP.Transformation("derivative", 0)
    twice = d0.on_matrix(default_basis, d0.on_matrix(default_basis, A))
    sym = Pr.evaluate_product(PHIPHI.derivative(0).derivative(0), x, default_basis)
    assert windowed_norm(default_basis, twice - sym, *win) < 1e-10


@pytest.mark.parametrize("kind", ["z2_parity", "spatial_reflection"])
def test_symmetry_compatibility(default_basis, kind):
    alpha = NP.Transformation(kind)
    x = np.array([[0.0, -0.2], [0.03, 0.25]])
    for P in (PHIPHI, Pr.ProductExpression.simple("phi", "d1 phi")):
        assert NP.compatibility_defect(alpha, P, x, default_basis) < 1e-12


def test_coefficient_map_closure():
    fb = labels("1", "phi")
    d0 = NP.Transformation("derivative", 0)
    with pytest.raises(CandidateNotClosed):
        d0.coefficient_map(fb, fb)
    A, target = d0.coefficient_map(fb)
    assert target.labels == ["d0 phi"] and A.tolist() == [[0.0, 1.0]]


def test_intertwined_projections(default_basis):
    probes = NP.probe_operators(default_basis, count=3)
    V = labels("1", "phi", ":phi^2:")
    ip = NP.intertwined_projections(NP.Transformation("derivative", 0), V, default_basis, probes=probes)
    assert ip.report["kernel_dim"] == 1
    assert NP.max_angle(ip.kernel, NP.span_of(V, ["1"])) < 1e-12
    assert ip.report["max_defect"] <= 1e-10
    ident = NP.intertwined_projections(NP.Transformation("identity"), V, default_basis, probes=probes)
    assert ident.report["max_defect"] < 1e-14
    z2 = NP.intertwined_projections(NP.Transformation("z2_parity"), labels("1", "phi"), default_basis,
                                    probes=probes)
    assert z2.report["max_defect"] <= 1e-12


@pytest.mark.parametrize("kind", ["z2_parity", "spatial_reflection"])
def test_symmetry_covariance(default_basis, seq, kind):
    rep = NP.covariance_check(NP.Transformation(kind), PHIPHI, labels("1", "phi", ":phi^2:", "d1 phi"),
                              seq, default_basis)
    assert rep.angle <= 1e-6 and rep.passed


# --- field equation -----------------------------------------------------------


def test_free_field_equation(default_basis):
    assert np.max(np.abs(NP.dispersion_residuals(default_basis.config))) < 1e-12
    assert NP.free_field_equation_check(default_basis) <= 1e-8
    assert NP.free_field_equation_check(default_basis, mono=F.parse_label(":phi^2:", 1)) > 1e-3


def test_extraction_matches_taylor_oracle(default_basis, seq):
    # Hand expansion of phi(x) phi(y) = Delta(x - y) 1 + :phi(x) phi(y): about 0:
    #   order 0: Delta(0) 1 + :phi^2:
    #   order 1: dDelta/dt(0) (x0 - y0) 1 + (x + y)^mu :phi d_mu phi:
    # with Delta(0) = sum 1/(2 L w) and dDelta/dt(0) = -i M / (2 L) for M modes.
    cfg = default_basis.config
    cand = F.field_basis(1, 3, 1, 1)
    n, k, omega = F.modes(cfg)
    delta0 = np.sum(1 / (2 * cfg.L * omega))
    ddelta = -1j * len(omega) / (2 * cfg.L)
    x, y = np.array(X0[0]), np.array(X0[1])
    a0 = delta0 * cand.unit("1") + cand.unit(":phi^2:")
    a1 = (ddelta * (x[0] - y[0]) * cand.unit("1") + (x + y)[0] * cand.unit(":phi d0 phi:")
          + (x + y)[1] * cand.unit(":phi d1 phi:"))
    n0 = NP.extract_normal_product(PHIPHI, cand, seq, default_basis, beta=0.0)
    n1 = NP.extract_normal_product(PHIPHI, cand, seq, default_basis, beta=1.0, check_spapp=False)
    assert n0.dimension == 1 and n1.dimension == 2
    assert NP.max_angle(n0.vectors, a0[:, None]) < 1e-6
    assert NP.max_angle(n1.vectors, np.stack([a0, a1], axis=1)) < 1e-6
