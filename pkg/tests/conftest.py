"""Shared builders: standard algebras, actions, and bundled fixture paths."""

import importlib.resources

import numpy as np
import pytest

from ccx import (
    StarAlgebra,
    cyclic_group,
    direct_product,
    identity_map,
    inner_action,
    trivial_group,
    twirl,
    validate_action,
)

I2 = np.eye(2, dtype=complex)
Z2MAT = np.diag([1.0, -1.0]).astype(complex)
XMAT = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def _swap_blocks(n):
    """Permutation swapping two size-n blocks."""
    p = np.zeros((2 * n, 2 * n), dtype=complex)
    p[:n, n:] = np.eye(n)
    p[n:, :n] = np.eye(n)
    return p


def build_configs():
    """(algebra, action, codomain_dim) triples used across the suites."""
    omega = np.exp(2j * np.pi / 3)
    configs = {}

    alg = StarAlgebra((2,))
    configs["m2_z2_diag"] = (alg, inner_action(cyclic_group(2), alg, [I2, Z2MAT]), 2)
    configs["m2_trivial"] = (alg, inner_action(trivial_group(), alg, [I2]), 2)

    alg3 = StarAlgebra((3,))
    w3 = np.diag([1.0, omega, omega**2])
    configs["m3_z3_phase"] = (
        alg3,
        inner_action(cyclic_group(3), alg3, [np.eye(3, dtype=complex), w3, w3 @ w3]),
        3,
    )

    alg21 = StarAlgebra((2, 1))
    w21 = np.diag([1.0, -1.0, 1.0]).astype(complex)
    configs["m2m1_z2_sign"] = (
        alg21,
        inner_action(cyclic_group(2), alg21, [np.eye(3, dtype=complex), w21]),
        2,
    )

    alg11 = StarAlgebra((1, 1))
    configs["c2_swap"] = (
        alg11,
        inner_action(cyclic_group(2), alg11, [I2, _swap_blocks(1)]),
        2,
    )

    alg22 = StarAlgebra((2, 2))
    configs["m2m2_swap"] = (
        alg22,
        inner_action(cyclic_group(2), alg22, [np.eye(4, dtype=complex), _swap_blocks(2)]),
        3,
    )

    klein = direct_product(cyclic_group(2), cyclic_group(2))
    configs["m2_klein"] = (
        alg,
        inner_action(klein, alg, [I2, XMAT, Z2MAT, Z2MAT @ XMAT]),
        2,
    )

    w4 = np.diag([1.0, 1j])
    configs["m2_z4"] = (
        alg,
        inner_action(cyclic_group(4), alg, [I2, w4, w4 @ w4, w4 @ w4 @ w4]),
        2,
    )
    return configs


CONFIGS = build_configs()


@pytest.fixture(scope="session")
def configs():
    for name, (alg, act, d) in CONFIGS.items():
        assert validate_action(act).valid, f"config {name} has an invalid action"
    return CONFIGS


@pytest.fixture(scope="session")
def z2_setup():
    """The workhorse example: M_2, sign conjugation, identity and its twirl."""
    alg, act, _ = CONFIGS["m2_z2_diag"]
    ident = identity_map(2)
    deph = twirl(ident, act)
    return alg, act, ident, deph


def fixture_path(name):
    return str(importlib.resources.files("ccx") / "fixtures" / f"{name}.json")


FIXTURE_NAMES = [
    "z2_dephasing",
    "dephasing_trivial_group",
    "automorphism",
    "pure_state_inflation",
    "transpose_invalid",
    "block_swap",
]
