from .cq_state import (
    CQState,
    BipartiteState,
    State,
    derive_seed,
    embed,
    marginal_B,
    marginal_X,
    random_cq,
    random_diagonal_cq,
    random_bipartite,
    cq_from_joint,
    maximally_mixed,
    maximally_entangled,
    product_state,
    random_isometry,
    apply_isometry_B,
    tensor_power,
    state_to_dict,
    state_from_dict,
    as_bipartite,
    generate_random_state,
    state_marginals,
)

def register_cq_state_tools(mcp):
    mcp.tool()(generate_random_state)
    mcp.tool()(state_marginals)
