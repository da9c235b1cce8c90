"""Numerical toolkit for group-invariant unital completely positive maps.

Finite-dimensional throughout: algebras are direct sums of matrix blocks,
groups are given by multiplication tables, and every decomposition runs
through deterministic conventions so results are reproducible bit for bit.

Main layers:

* linalg         -- tolerance-aware dense complex kernel
* algebra        -- block C*-algebras, matrix units, commutants
* groups         -- finite groups, actions, averaging
* cpmaps         -- Choi/Kraus calculus, twirling, operator-convex combinations
* stinespring    -- minimal dilations and covariant unitaries
* radon_nikodym  -- interval correspondence over the dilation commutant
* extremality    -- certificates, splits, unitary equivalence, verdicts
* fixed_points   -- fixed-point algebra, restriction/extension, hull runs
* cli            -- JSON batch front end (schema ccx/1)
"""

from .algebra import StarAlgebra, SubAlgebraBasis, basis_units, commutant, verify_subalgebra
from .cpmaps import (
    CCombination,
    CPMap,
    choi_distance,
    conjugation_map,
    cp_leq,
    cstar_combination,
    cstar_combine,
    identity_map,
    inflation_map,
    invariance_defect,
    random_invariant_ucp,
    random_ucp,
    state_from_density,
    twirl,
    validate_map,
)
from .extremality import (
    ExtremalityReport,
    SplitResult,
    extremality_certificates,
    extremality_verdict,
    linear_extremality_check,
    midpoint_search,
    split_two_term,
    unitary_equivalence,
)
from .fixed_points import (
    FixedPointContext,
    extend_from_fixed_algebra,
    fixed_point_algebra,
    hull_experiment,
    restrict_to_fixed_algebra,
)
from .groups import (
    FiniteGroup,
    GroupAction,
    apply_action,
    conditional_expectation,
    coordinate_action,
    cyclic_group,
    dihedral_group,
    direct_product,
    inner_action,
    trivial_group,
    validate_action,
)
from .linalg import (
    DEFAULT_TOL,
    Tolerances,
    eigh_sorted,
    herm_roots,
    nullspace_basis,
    polar_unitary,
    psd_check,
)
from .radon_nikodym import (
    DilationContext,
    RNOperator,
    dilation_context,
    interval_sample,
    rn_forward,
    rn_inverse,
    rn_operator,
)
from .stinespring import (
    CovariantUnitaries,
    StinespringTriple,
    covariant_unitaries,
    dilation_unitary,
    minimal_dilation,
    verify_minimality,
)

__version__ = "0.1.0"
