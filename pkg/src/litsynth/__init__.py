"""litsynth: retrieval-augmented literature synthesis with citation-backed answers."""

__version__ = "0.1.0"
