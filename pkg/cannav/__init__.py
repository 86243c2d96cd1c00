# Causality-aware navigation on a desk-scale gridworld

__version__ = "1.0.0"
