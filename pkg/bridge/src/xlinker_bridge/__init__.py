"""Transformer encoder bridge: real multilingual embeddings written in the
binary store format the linking toolkit consumes."""

__version__ = "0.1.0"
