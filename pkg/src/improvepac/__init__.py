"""Learning with improvements: proper, improper, noisy and online learners with exact loss oracles."""

__version__ = "0.1.0"
