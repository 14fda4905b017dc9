"""Sub-layout based document image retrieval."""

from .blocks import Block, LayoutGraph, build_adjacency, spatial_location
from .geometry import Rect
from .hypotheses import build_all_hypotheses, symmetry_maximize
from .index import ContextKey, CorpusStore, HashIndex, context_key, encode, hash_key
from .matching import MatchResult, evaluate_boolean, match_sublayout, rank_score, retrieve
from .query import BooleanQuery, QueryLayout, parse_query

__all__ = [
    "Block",
    "BooleanQuery",
    "ContextKey",
    "CorpusStore",
    "HashIndex",
    "LayoutGraph",
    "MatchResult",
    "QueryLayout",
    "Rect",
    "build_adjacency",
    "build_all_hypotheses",
    "context_key",
    "encode",
    "evaluate_boolean",
    "hash_key",
    "match_sublayout",
    "parse_query",
    "rank_score",
    "retrieve",
    "spatial_location",
    "symmetry_maximize",
]

__version__ = "0.1.0"
