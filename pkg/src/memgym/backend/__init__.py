from .base import (
    ChatBackend,
    ChatRequest,
    EmbeddingBackend,
    RetryPolicy,
    ask_json,
    complete_with_retry,
    extract_json,
    parse_choice_number,
)
from .scripted import ScriptedBackend, ScriptedEmbedding
from .world import scripted_embedding, scripted_world

__all__ = [
    "ChatBackend", "ChatRequest", "EmbeddingBackend", "RetryPolicy", "ScriptedBackend",
    "ScriptedEmbedding", "ask_json", "complete_with_retry", "extract_json", "parse_choice_number",
    "scripted_embedding", "scripted_world",
]
