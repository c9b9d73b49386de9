"""Shape-bias probing laboratory for one-shot learners."""

__version__ = "0.1.0"
