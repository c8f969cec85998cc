TRACE_FORMAT_VERSION = 1
FEATURE_VERSION = "1"
FOREST_FORMAT_VERSION = 1
FILTER_LIST_VERSION = 1
GRAPH_DUMP_VERSION = 1

__all__ = [
    "TRACE_FORMAT_VERSION",
    "FEATURE_VERSION",
    "FOREST_FORMAT_VERSION",
    "FILTER_LIST_VERSION",
    "GRAPH_DUMP_VERSION",
]
