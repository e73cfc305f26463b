"""Student-performance prediction toolkit: ingestion, features, balancing,
from-scratch learners, feature selection and experiment runners."""

__version__ = "0.1.0"
