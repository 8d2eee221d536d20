"""Periodic solutions, resonance tongues and shrinking points of
piecewise-affine continuous maps."""

from .cycles import (
    Admissibility,
    AdmissibilityReport,
    CycleSolution,
    NatureCell,
    SolutionNature,
    admissibility,
    bc_matrix,
    nth_iterate_map,
    orbit_under,
    solution_nature,
    solve_cycle,
    stability_matrix,
)
from .pwamap import (
    BorderCollisionClass,
    FixedPointReport,
    PwaMap,
    apply_branch,
    classify_border_collision,
    evaluate,
    fixed_point,
    is_homeomorphism,
    parse_map_config,
    rho,
)
from .scan import (
    FamilySpec,
    ScanOptions,
    TongueGrid,
    builtin_family,
    parse_family,
    scan_tongues,
    tongue_boundaries,
    width_profile,
)
from .shrink import (
    FailureReport,
    MapFamily,
    Polygon,
    ShrinkingPointCertificate,
    ShrinkKind,
    Unfolding,
    check_nonterminating,
    check_terminating,
    corollary_check,
    find_shrinking_point,
    polygon,
    rigid_rotation_check,
    unfold,
    virtual_curves,
)
from .symseq import (
    RotationalParams,
    SymbolSequence,
    count_primitive,
    count_rotational,
    cyclic,
    flip,
    is_primitive,
    mobius,
    mod_inverse,
    mult_perm,
    rotational,
    rotational_params,
    totient,
)

__version__ = "0.1.0"
