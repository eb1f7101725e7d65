"""Three-layer screening gateway for text entering and leaving LLM tool hosts."""

__version__ = "0.1.0"
