"""pinnverse - Identify Hamiltonians and decay rates of open qubit systems."""

__version__ = "0.1.0"

__all__ = ["__version__"]
