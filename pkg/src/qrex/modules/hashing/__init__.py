from .hashing import (
    FAMILY_KINDS,
    HashFamily,
    all_functions_family,
    linear_gf2_family,
    toeplitz_gf2_family,
    family_from_dict,
    make_family,
    chernoff_samples,
    CollisionEstimate,
    collision_prob,
    UniversalityReport,
    verify_two_universality,
    check_two_universality,
)

def register_hashing_tools(mcp):
    mcp.tool()(check_two_universality)
