from .extension_bound import (
    THEOREM2_TOL,
    clipped_state,
    ExtensionWitness,
    flag_extension,
    build_extension,
    Theorem2Bound,
    theorem2_lower_bound,
    Theorem2Report,
    verify_theorem2,
    SpoilingWitness,
    search_spoiling_witness,
    check_extension_bound,
    find_spoiling_witness,
)

def register_extension_bound_tools(mcp):
    mcp.tool()(check_extension_bound)
    mcp.tool()(find_spoiling_witness)
