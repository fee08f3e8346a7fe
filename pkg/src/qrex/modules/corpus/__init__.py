from .corpus import (
    CORPUS_COLUMNS,
    CORPUS_FAMILIES,
    parse_seed_range,
    normalize_families,
    corpus_family,
    run_corpus_seed,
    run_corpus,
    corpus_csv,
    run_corpus_to_csv,
    corpus_background,
    get_corpus_status,
    list_corpus_jobs,
    stop_corpus_job,
    cleanup_corpus_jobs,
)

def register_corpus_tools(mcp):
    mcp.tool()(run_corpus_to_csv)
    mcp.tool()(corpus_background)
    mcp.tool()(get_corpus_status)
    mcp.tool()(list_corpus_jobs)
    mcp.tool()(stop_corpus_job)
    mcp.tool()(cleanup_corpus_jobs)
