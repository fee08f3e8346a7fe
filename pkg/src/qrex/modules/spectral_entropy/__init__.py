from .spectral_entropy import (
    MASS_SLACK,
    EntropyCertificate,
    EntropyResult,
    check_epsilon,
    rho_tilde,
    feasible_mass,
    collision_entropy_R,
    classical_collision_R,
    spectrum_threshold,
    h_sup,
    h_inf,
    cond_vn,
    compute_collision_entropy,
    compute_spectrum_entropies,
)

def register_spectral_entropy_tools(mcp):
    mcp.tool()(compute_collision_entropy)
    mcp.tool()(compute_spectrum_entropies)
