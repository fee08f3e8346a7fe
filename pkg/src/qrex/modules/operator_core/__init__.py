from .operator_core import (
    ZERO_CUTOFF_FACTOR,
    DEFAULT_HERMITIAN_TOL,
    DEFAULT_TRACE_TOL,
    HermitianOperator,
    Spectrum,
    DensityOperator,
    OperatorLike,
    as_matrix,
    as_hermitian,
    zero_cutoff,
    spectral_decompose,
    spectral_projection,
    proj_nonpos,
    rank,
    support_projection,
    matrix_function,
    matrix_log2,
    matrix_power,
    tensor,
    check_dim,
    partial_trace,
    trace_distance,
    rel_entropy,
    von_neumann,
    neg_log2,
    jensen_gap,
    encode_matrix,
    decode_matrix,
    operator_spectrum,
    operator_distances,
)

def register_operator_core_tools(mcp):
    mcp.tool()(operator_spectrum)
    mcp.tool()(operator_distances)
