import math

import numpy as np
import pytest

from opelab import fock
from opelab import fields as F
from opelab import norms as Nm
from opelab import ope
from opelab import products as Pr

PHIPHI = Pr.ProductExpression.simple("phi", "phi")
ONE = Pr.ProductExpression.simple("1", "1")
X0 = ((0.0, -0.003), (0.002, 0.007))


@pytest.fixture(scope="module")
def seq(default_config):
    return Pr.spacelike_sequence(X0, 0.6, 16, Pr.taylor_window(default_config))


def proj(basis, labels):
    return Nm.GammaProjection(F.FieldBasis.from_labels(labels, 1), basis)


def test_coefficients_examples(default_basis):
    x = np.array([[0.0, -0.1], [0.01, 0.12]])
    c, _ = ope.ope_coefficients(PHIPHI, x, proj(default_basis, ["1"]))
    assert abs(c[0] - F.two_point(default_basis.config, *x)) < 1e-10
    c, _ = ope.ope_coefficients(ONE, x, proj(default_basis, ["1", "phi", ":phi^2:"]))
    np.testing.assert_allclose(c, [1, 0, 0], atol=1e-14)
    c, _ = ope.ope_coefficients(PHIPHI, x, proj(default_basis, ["1", "phi", ":phi^2:"]))
    assert abs(c[1]) < 1e-10
    assert abs(c[2] - 1) < 0.05


def test_residual_slopes(default_basis, seq):
    s1 = ope.ope_residual_scan(PHIPHI, seq, proj(default_basis, ["1"]))
    s2 = ope.ope_residual_scan(PHIPHI, seq, proj(default_basis, ["1", ":phi^2:"]))
    assert abs(s1.slope) <= 0.3
    assert s2.slope >= 0.8
    assert s2.beta_achieved == pytest.approx(s2.slope - 0.2)
    rows = ope.ope_rows(s2)
    assert len(rows) == len(seq) and rows[3][0] == 3


def test_identity_product_is_exact(default_basis, seq):
    fit = ope.ope_residual_scan(ONE, seq, proj(default_basis, ["1", ":phi^2:"]))
    assert fit.exact and np.max(fit.residuals) <= 1e-10
    assert fit.slope == math.inf


def test_singularity_check_matches_two_point(default_basis):
    cfg = default_basis.config
    seq = Pr.spacelike_sequence([[0, 0], [0, 0.78]], 0.8, 10, Pr.bound_window(cfg))
    check = ope.coefficient_singularity_check(seq, proj(default_basis, ["1", ":phi^2:"]))
    assert check.max_deviation <= 1e-8
    # slope of |c_1| is the slope of the truncated two-point function itself
    idx = seq.windowed()
    direct = [abs(F.two_point(cfg, *seq.tuples[i])) for i in idx]
    ref = Nm.fit_decay(seq.distances[idx], np.array(direct))
    assert check.fit.slope == pytest.approx(ref.slope, rel=1e-9)
    assert -1.5 <= check.fit.slope <= 0


def test_single_mode_identity_coefficient_constant():
    b = fock.build_basis(fock.ModelConfig(N=0, n_max=4))
    seq = Pr.spacelike_sequence([[0, 0], [0, 1.0]], 0.8, 8)
    check = ope.coefficient_singularity_check(seq, proj(b, ["1"]))
    for row in check.rows:
        assert row[3] == pytest.approx(1 / (4 * math.pi), abs=1e-14)


def test_singularity_check_needs_identity(default_basis, seq):
    with pytest.raises(ValueError):
        ope.coefficient_singularity_check(seq, proj(default_basis, [":phi^2:"]))
