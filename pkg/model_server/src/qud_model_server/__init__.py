"""HTTP service hosting the neural components behind the backend wire
contract: span-based anchor prediction, nucleus-sampled question
generation, pair reranking, and named-entity tagging."""

__version__ = "0.1.0"
