import numpy as np
import pytest

from ccx.cpmaps import conjugation_map, identity_map, random_invariant_ucp
from ccx.errors import NotInvariantError, NotMinimalError, NotSameMapError
from ccx.linalg import haar_unitary
from ccx.stinespring import (
    StinespringTriple,
    covariance_defects,
    covariant_unitaries,
    dilation_unitary,
    minimal_dilation,
    reconstruction_defect,
    verify_minimality,
)


def test_identity_map_dilation():
    t = minimal_dilation(identity_map(2))
    assert t.dilation_dim == 2
    assert t.multiplicities == (1,)
    assert t.minimal
    assert np.allclose(t.isometry, np.eye(2))
    assert np.allclose(t.rep(np.diag([1.0, 2.0]).astype(complex)), np.diag([1.0, 2.0]))


def test_unitary_conjugation_dilation():
    rng = np.random.default_rng(1)
    w = haar_unitary(rng, 2)
    t = minimal_dilation(conjugation_map(w))
    assert t.dilation_dim == 2
    # V equals W up to the global phase fixed by the eigenvector convention
    ratio = t.isometry @ np.linalg.inv(w)
    assert np.allclose(ratio, ratio[0, 0] * np.eye(2), atol=1e-10)
    assert abs(abs(ratio[0, 0]) - 1.0) < 1e-10


def test_dephasing_dilation_shape(z2_setup):
    _, act, _, deph = z2_setup
    t = minimal_dilation(deph)
    assert t.dilation_dim == 4
    assert t.multiplicities == (2,)
    assert reconstruction_defect(t, deph) < 1e-12
    assert verify_minimality(t)
    # each V column is e_s tensor (multiplicity unit vector)
    for s in range(2):
        col = t.isometry[:, s].reshape(2, 2)
        assert np.sum(np.abs(col) > 1e-12) == 1
        assert np.abs(col[s]).max() > 0.999


def test_isometry_and_minimality_rank(configs):
    for name, (alg, act, d) in configs.items():
        rng = np.random.default_rng(13 + len(name))
        m = random_invariant_ucp(rng, act, d)
        t = minimal_dilation(m)
        assert np.linalg.norm(t.isometry.conj().T @ t.isometry - np.eye(d)) < 1e-10, name
        assert t.minimal, name
        assert reconstruction_defect(t, m) < 1e-9, name


def test_padded_dilation_is_not_minimal(z2_setup):
    _, _, _, deph = z2_setup
    t = minimal_dilation(deph)
    padded = StinespringTriple(
        domain=t.domain,
        codomain_dim=t.codomain_dim,
        multiplicities=(3,),  # one unused multiplicity slot
        isometry=_pad_isometry(t),
        minimal=False,
    )
    assert not verify_minimality(padded)


def _pad_isometry(t):
    # interleave a zero multiplicity row per algebra row: (i, j) -> i * 3 + j
    v = np.zeros((6, 2), dtype=complex)
    old = t.isometry.reshape(2, 2, 2)  # (i, j, s)
    v.reshape(2, 3, 2)[:, :2, :] = old
    return v


def test_dilation_unitary_identity_case(z2_setup):
    _, _, _, deph = z2_setup
    t = minimal_dilation(deph)
    u = dilation_unitary(t, t)
    assert np.allclose(u, np.eye(4), atol=1e-9)


def test_dilation_unitary_for_permuted_multiplicities(z2_setup):
    _, _, _, deph = z2_setup
    t1 = minimal_dilation(deph)
    p = np.kron(np.eye(2), np.array([[0.0, 1.0], [1.0, 0.0]])).astype(complex)
    t2 = StinespringTriple(
        domain=t1.domain,
        codomain_dim=2,
        multiplicities=(2,),
        isometry=p @ t1.isometry,
        minimal=True,
    )
    u = dilation_unitary(t1, t2)
    assert np.allclose(u @ t1.isometry, t2.isometry, atol=1e-9)
    for a in t1.domain.units:
        assert np.allclose(u @ t1.rep(a) @ u.conj().T, t2.rep(a), atol=1e-8)
    # round trip composes to the identity
    u_back = dilation_unitary(t2, t1)
    assert np.allclose(u_back @ u, np.eye(4), atol=1e-8)


def test_dilation_unitary_rejects_different_maps(z2_setup):
    _, _, ident, deph = z2_setup
    with pytest.raises((NotSameMapError, NotMinimalError)):
        dilation_unitary(minimal_dilation(ident), minimal_dilation(deph))


def test_covariant_unitaries_dephasing(z2_setup):
    _, act, _, deph = z2_setup
    t = minimal_dilation(deph)
    cov = covariant_unitaries(deph, t, act)
    assert np.allclose(cov[0], np.eye(4), atol=1e-10)
    defects = covariance_defects(t, act, cov)
    assert max(defects.values()) < 1e-9
    # independent oracle: solve U S = S_g by least squares on the spanning set
    from ccx.groups import apply_action

    s = t.spanning_matrix()
    images = [t.rep(apply_action(act, 1, u)) for u in t.domain.units]
    s_g = np.hstack([m @ t.isometry for m in images])
    u_ls = (s_g @ s.conj().T) @ np.linalg.inv(s @ s.conj().T)
    assert np.allclose(cov[1], u_ls, atol=1e-9)


def test_covariant_unitaries_trivial_group(configs):
    alg, act, d = configs["m2_trivial"]
    rng = np.random.default_rng(21)
    m = random_invariant_ucp(rng, act, d)
    t = minimal_dilation(m)
    cov = covariant_unitaries(m, t, act)
    assert len(cov) == 1
    assert np.allclose(cov[0], np.eye(t.dilation_dim), atol=1e-10)


def test_covariant_unitaries_reject_non_invariant(z2_setup):
    _, act, ident, _ = z2_setup
    with pytest.raises(NotInvariantError):
        covariant_unitaries(ident, minimal_dilation(ident), act)


def test_covariance_identities_across_configs(configs):
    for name, (alg, act, d) in configs.items():
        rng = np.random.default_rng(31 + len(name))
        m = random_invariant_ucp(rng, act, d)
        t = minimal_dilation(m)
        cov = covariant_unitaries(m, t, act)
        defects = covariance_defects(t, act, cov)
        assert max(defects.values()) < 1e-8, (name, defects)


def test_minimal_dilation_requires_unital_cp(z2_setup):
    from ccx.cpmaps import CPMap
    from ccx.errors import NotCPError, NotUnitalError

    alg, _, _, deph = z2_setup
    half = CPMap.from_choi_blocks(alg, 2, [0.5 * c for c in deph.choi_blocks])
    with pytest.raises(NotUnitalError):
        minimal_dilation(half)
    bad = CPMap.from_choi_blocks(alg, 2, [np.diag([1.0, 0.0, 0.0, -1.0])])
    with pytest.raises(NotCPError):
        minimal_dilation(bad)
