from .extractor import (
    THEOREM1_SLACK,
    HashedEnsemble,
    apply_hash,
    delta_R,
    delta_d,
    distance_from_uniform,
    eta0,
    collision_delta,
    theorem1_rhs,
    classical_rhs,
    ExtractionReport,
    verify_theorem1_grid,
    verify_theorem1,
    LengthReport,
    length_epsilon,
    extractable_length,
    run_extraction,
    estimate_key_length,
)

def register_extractor_tools(mcp):
    mcp.tool()(run_extraction)
    mcp.tool()(estimate_key_length)
