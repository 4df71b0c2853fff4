from .agent import AgentConfig, MemoryAgent, estimate_tokens, format_options, parse_answer
from .vector_index import VectorIndex, retrieve_topk

__all__ = ["AgentConfig", "MemoryAgent", "VectorIndex", "estimate_tokens", "format_options", "parse_answer",
           "retrieve_topk"]
