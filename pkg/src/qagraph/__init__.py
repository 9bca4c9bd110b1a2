"""Per-question QA graphs and a scalar graph convolutional network for answer reranking."""

__version__ = "0.1.0"
