import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from opelab import fock
from opelab.errors import ConfigError, DimensionCap


def dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A)


def test_single_mode_basis_energies(single_mode):
    assert single_mode.dim == 3
    np.testing.assert_allclose(single_mode.energies, [0.0, 1.0, 2.0])


def test_three_modes_one_particle():
    b = fock.build_basis(fock.ModelConfig(N=1, n_max=1))
    assert b.dim == 4
    np.testing.assert_allclose(np.sort(b.energies[1:]), [1.0, math.sqrt(2), math.sqrt(2)])


def test_default_dimension(default_basis):
    assert default_basis.dim == 5985 == 1 + 17 + 153 + 969 + 4845
    assert default_basis.n_modes == 17


@given(N=st.integers(0, 3), n_max=st.integers(1, 3), s=st.integers(1, 2))
@settings(max_examples=15, deadline=None)
def test_dimension_matches_brute_enumeration(N, n_max, s):
    cfg = fock.ModelConfig(s=s, N=N, n_max=n_max)
    M = cfg.mode_count
    brute = sum(1 for c in np.ndindex(*(n_max + 1,) * M) if sum(c) <= n_max) if M <= 9 else None
    assert cfg.projected_dim() == fock.build_basis(cfg).dim
    if brute is not None:
        assert brute == cfg.projected_dim()


def test_dimension_cap():
    with pytest.raises(DimensionCap):
        fock.build_basis(fock.ModelConfig(N=8, n_max=4, dim_cap=100))


def test_ladder_entries(single_mode):
    a = dense(fock.ladder(single_mode, 0, "annihilate"))
    ad = dense(fock.ladder(single_mode, 0, "create"))
    assert ad[2, 1] == pytest.approx(math.sqrt(2))
    assert np.allclose(a[:, 0], 0)
    comm = a @ ad - ad @ a
    np.testing.assert_allclose(comm[:2, :2], np.eye(2))


def test_ladder_rejects_bad_kind(single_mode):
    with pytest.raises(ValueError):
        fock.ladder(single_mode, 0, "sideways")


def test_vacuum_energy_and_momentum(default_basis):
    H = fock.hamiltonian(default_basis)
    assert abs(H[0, 0]) == 0
    cfg = fock.ModelConfig(N=1, n_max=1)
    b = fock.build_basis(cfg)
    i = b.lookup(np.eye(b.n_modes, dtype=int)[b.mode_index(1)])
    assert fock.momentum(b, 0)[i, i].real == pytest.approx(1.0)


def test_damping_two_particle_zero_mode(single_mode):
    R = fock.damping(single_mode, 1.0)
    assert R[2, 2].real == pytest.approx(1 / 3)


def test_op_norm_examples(single_mode, rng):
    assert fock.op_norm(fock.identity(single_mode)) == pytest.approx(1.0)
    ad = fock.ladder(single_mode, 0, "create")
    assert fock.op_norm(ad) == pytest.approx(math.sqrt(2))
    R = fock.damping(single_mode, 1.0)
    assert fock.op_norm(R @ ad @ R) == pytest.approx(0.5)


@pytest.mark.parametrize("method", ["power", "lanczos"])
def test_iterative_norm_matches_svd(method, rng):
    A = rng.normal(size=(60, 60)) + 1j * rng.normal(size=(60, 60))
    ref = np.linalg.norm(A, 2)
    assert fock.op_norm(sp.csr_matrix(A), dense_threshold=0, method=method) == pytest.approx(ref, rel=1e-8)


def test_algebra_helpers(single_mode, rng):
    a = fock.ladder(single_mode, 0, "annihilate")
    ad = fock.ladder(single_mode, 0, "create")
    I = fock.identity(single_mode)
    assert np.allclose(dense(fock.compose(I, ad)), dense(ad))
    assert np.allclose(dense(fock.adjoint(fock.adjoint(a))), dense(a))
    lhs = dense(fock.compose(a, ad))[:2, :2]
    rhs = dense(fock.add(ad @ a, I))[:2, :2]
    np.testing.assert_allclose(lhs, rhs)
    np.testing.assert_allclose(dense(fock.scale(a, 2j)), 2j * dense(a))


def test_window_projector(default_basis):
    Q = fock.window_projector(default_basis, 6.0, 2)
    idx = fock.window_indices(default_basis, 6.0, 2)
    assert int(round(Q.diagonal().real.sum())) == idx.size == 43
    assert idx[0] == 0


def test_config_parsing(tmp_path):
    cfg = fock.model_config_from_mapping({"L": "2pi", "N": "3"})
    assert cfg.L == pytest.approx(2 * math.pi) and cfg.N == 3
    assert fock.parse_number("pi") == pytest.approx(math.pi)
    with pytest.raises(ConfigError) as exc:
        fock.model_config_from_mapping({"bogus": "1"})
    assert exc.value.details["key"] == "bogus"
    path = tmp_path / "m.cfg"
    path.write_text("# comment\nm = 2\nn_max = 3\n")
    assert fock.load_config(path) == fock.ModelConfig(m=2.0, n_max=3)


def test_config_hash_stable():
    assert fock.ModelConfig().config_hash() == fock.ModelConfig().config_hash()
    assert fock.ModelConfig().config_hash() != fock.ModelConfig(m=2.0).config_hash()
