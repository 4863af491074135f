"""Ground-truth generation, baseline learners and evaluation for learned physics simulation."""

__version__ = "0.1.0"
