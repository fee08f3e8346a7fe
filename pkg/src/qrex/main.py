# server.py
from mcp.server.fastmcp import FastMCP
from qrex.modules.operator_core import register_operator_core_tools
from qrex.modules.cq_state import register_cq_state_tools
from qrex.modules.state_files import register_state_files_tools
from qrex.modules.spectral_entropy import register_spectral_entropy_tools
from qrex.modules.hashing import register_hashing_tools
from qrex.modules.extractor import register_extractor_tools
from qrex.modules.extension_bound import register_extension_bound_tools
from qrex.modules.asymptotics import SCAN_COLUMNS, register_asymptotics_tools
from qrex.modules.corpus import CORPUS_COLUMNS, register_corpus_tools

# Create an MCP server
mcp = FastMCP("qrex")

# CSV layouts of the tabular outputs
@mcp.resource("columns://{table}")
def get_columns(table: str) -> str:
    """Comma-separated column names of the 'corpus' or 'asymptotics' CSV"""
    tables = {"corpus": CORPUS_COLUMNS, "asymptotics": SCAN_COLUMNS}
    if table not in tables:
        raise ValueError(f"Unknown table '{table}', expected one of {sorted(tables)}")
    return ",".join(tables[table])

# Register operator algebra tools
register_operator_core_tools(mcp)

# Register state generation and state file tools
register_cq_state_tools(mcp)
register_state_files_tools(mcp)

# Register entropy tools
register_spectral_entropy_tools(mcp)

# Register hashing and extraction tools
register_hashing_tools(mcp)
register_extractor_tools(mcp)

# Register extension bound and asymptotic tools
register_extension_bound_tools(mcp)
register_asymptotics_tools(mcp)

# Register corpus tools (including background jobs)
register_corpus_tools(mcp)

def main():
    mcp.run()

if __name__ == "__main__":
    main()
