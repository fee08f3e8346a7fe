from .asymptotics import (
    SCAN_COLUMNS,
    LogSpectrum,
    convolve_power,
    h_sup_power,
    h_inf_power,
    SanovExponents,
    tilted_exponent,
    sanov_exponents,
    grid_search_exponent,
    prop3_bound,
    prop3_epsilons,
    TailMasses,
    tail_masses,
    ScanRow,
    schedule_epsilons,
    corollary4_scan,
    scan_asymptotics,
    compute_sanov_exponents,
)

def register_asymptotics_tools(mcp):
    mcp.tool()(scan_asymptotics)
    mcp.tool()(compute_sanov_exponents)
