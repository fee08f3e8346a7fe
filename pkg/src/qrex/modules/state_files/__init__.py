from .state_files import (
    find_state_files,
    resolve_state_path,
    parse_state,
    load_state,
    dumps_json,
    write_text,
    save_state,
    format_csv,
    generate_state_file,
    describe_state_file,
)

def register_state_files_tools(mcp):
    mcp.tool()(find_state_files)
    mcp.tool()(generate_state_file)
    mcp.tool()(describe_state_file)
