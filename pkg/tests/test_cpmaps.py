import zlib

import numpy as np
import pytest

from ccx.cpmaps import (
    CPMap,
    choi_distance,
    conjugation_map,
    cp_leq,
    cstar_combination,
    cstar_combine,
    inflation_map,
    random_invariant_ucp,
    random_ucp,
    state_from_density,
    twirl,
    validate_map,
)
from ccx.errors import DimensionMismatchError, NotNormalizedError
from ccx.groups import inner_action, trivial_group


@pytest.fixture
def dephasing(z2_setup):
    return z2_setup[3]


def test_validate_map_examples(z2_setup):
    alg, act, ident, deph = z2_setup
    triv = inner_action(trivial_group(), alg, [np.eye(2, dtype=complex)])
    v = validate_map(ident, triv)
    assert v.cp and v.unital and v.invariant
    v = validate_map(ident, act)
    assert v.cp and v.unital and v.invariant is False
    assert validate_map(deph, act).all_true()


def test_apply_examples(z2_setup):
    alg, act, ident, deph = z2_setup
    assert np.allclose(ident.apply(np.eye(2)), np.eye(2))
    a = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=complex)
    assert np.allclose(deph.apply(a), np.diag([1.0, 4.0]))
    st = state_from_density(alg, np.diag([1.0, 0.0]))
    assert abs(st.apply(alg.units[0])[0, 0] - 1.0) < 1e-12
    with pytest.raises(DimensionMismatchError):
        ident.apply(np.eye(3))


def test_twirl_examples(z2_setup):
    alg, act, ident, deph = z2_setup
    triv = inner_action(trivial_group(), alg, [np.eye(2, dtype=complex)])
    assert choi_distance(twirl(ident, triv), ident) < 1e-12
    # twirling the identity yields the pinching; Choi eigenvalues {1, 1, 0, 0}
    assert np.allclose(deph.choi_blocks[0], np.diag([1.0, 0.0, 0.0, 1.0]), atol=1e-12)
    # idempotent on invariant maps
    assert choi_distance(twirl(deph, act), deph) < 1e-12


def test_twirl_outputs_invariant(configs):
    for name, (alg, act, d) in configs.items():
        rng = np.random.default_rng(zlib.crc32(name.encode()))
        m = random_ucp(rng, alg, d)
        out = twirl(m, act)
        val = validate_map(out, act)
        assert val.all_true(), name


def test_cstar_combine_examples(z2_setup):
    alg, act, ident, deph = z2_setup
    # single coefficient = identity
    comb = cstar_combination([(np.eye(2), ident)])
    assert choi_distance(cstar_combine(comb), ident) < 1e-12
    # balanced identity/sign-conjugation mixture reproduces the pinching
    z = np.diag([1.0, -1.0]).astype(complex)
    comb = cstar_combination(
        [(np.eye(2) / np.sqrt(2), ident), (np.eye(2) / np.sqrt(2), conjugation_map(z))]
    )
    assert comb.proper
    assert choi_distance(cstar_combine(comb), deph) < 1e-12
    # singular coefficients still combine but are flagged improper
    p1, p2 = np.diag([1.0, 0.0]).astype(complex), np.diag([0.0, 1.0]).astype(complex)
    comb = cstar_combination([(p1, ident), (p2, ident)])
    assert not comb.proper
    assert choi_distance(cstar_combine(comb), deph) < 1e-12  # projector pinching
    with pytest.raises(NotNormalizedError):
        cstar_combination([(np.eye(2), ident), (np.eye(2), ident)])


def test_combination_of_invariant_maps_is_invariant(z2_setup):
    alg, act, ident, deph = z2_setup
    rng = np.random.default_rng(11)
    m1 = random_invariant_ucp(rng, act, 2)
    m2 = random_invariant_ucp(rng, act, 2)
    g1 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    g2 = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    from ccx.linalg import herm_roots

    total = g1.conj().T @ g1 + g2.conj().T @ g2
    _, inv_root = herm_roots(total)
    comb = cstar_combination([(g1 @ inv_root, m1), (g2 @ inv_root, m2)])
    assert validate_map(cstar_combine(comb), act).all_true()


def test_cp_leq_examples(z2_setup):
    alg, act, ident, deph = z2_setup
    assert cp_leq(deph, deph)
    half = CPMap.from_choi_blocks(alg, 2, [0.5 * c for c in deph.choi_blocks])
    assert cp_leq(half, deph)
    corner = CPMap.from_values(
        alg, 2, lambda u: np.array([[u[0, 0], 0.0], [0.0, 0.0]], dtype=complex)
    )
    # frozen oracle: Choi(deph) - Choi(corner) = diag(0, 0, 0, 1), PSD
    diff = deph.choi_blocks[0] - corner.choi_blocks[0]
    assert np.allclose(diff, np.diag([0.0, 0.0, 0.0, 1.0]), atol=1e-12)
    assert cp_leq(corner, deph)
    assert not cp_leq(deph, corner)


def test_cp_order_antisymmetry(z2_setup):
    alg, act, ident, deph = z2_setup
    # perturb within the PSD floor: domination holds both ways, so the maps
    # must be close at a small multiple of the floor
    rng = np.random.default_rng(12)
    g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    h = 0.5 * (g + g.conj().T)
    h *= 0.4e-9 / np.abs(np.linalg.eigvalsh(h)).max()
    near = CPMap.from_choi_blocks(alg, 2, [deph.choi_blocks[0] + h])
    assert cp_leq(near, deph) and cp_leq(deph, near)
    assert choi_distance(near, deph) < 10 * 1e-9 * 4


def test_choi_kraus_round_trip(configs):
    for name, (alg, act, d) in configs.items():
        rng = np.random.default_rng(len(name))
        m = random_ucp(rng, alg, d)
        rebuilt = CPMap.from_kraus(alg, d, [list(ops) for ops in m.kraus])
        assert choi_distance(rebuilt, m) < 1e-10, name


def test_kraus_regeneration_is_deterministic(z2_setup):
    _, act, _, deph = z2_setup
    m1 = CPMap.from_choi_blocks(deph.domain, 2, deph.choi_blocks)
    m2 = CPMap.from_choi_blocks(deph.domain, 2, deph.choi_blocks)
    for a, b in zip(m1.kraus[0], m2.kraus[0]):
        assert np.array_equal(a, b)


def test_random_ucp_is_ucp(configs):
    for name, (alg, act, d) in configs.items():
        rng = np.random.default_rng(3 * len(name) + 1)
        m = random_ucp(rng, alg, d)
        v = validate_map(m)
        assert v.cp and v.unital, name


def test_states_and_inflations(z2_setup):
    alg, act, _, _ = z2_setup
    st = state_from_density(alg, np.diag([0.25, 0.75]))
    assert validate_map(st).cp and validate_map(st).unital
    infl = inflation_map(st, 3)
    assert validate_map(infl).all_true()
    a = np.array([[1.0, 5.0], [5.0, 3.0]], dtype=complex)
    assert np.allclose(infl.apply(a), (0.25 * 1 + 0.75 * 3) * np.eye(3))


def test_twirl_rejects_invalid_action(z2_setup):
    from ccx.errors import InvalidActionError
    from ccx.groups import coordinate_action, cyclic_group

    alg, _, ident, _ = z2_setup
    l = np.zeros((4, 4), dtype=complex)
    l[0, 0] = l[3, 3] = 1.0
    l[1, 2] = l[2, 1] = 1.0
    bad = coordinate_action(cyclic_group(2), alg, [np.eye(4, dtype=complex), l])
    with pytest.raises(InvalidActionError):
        twirl(ident, bad)
