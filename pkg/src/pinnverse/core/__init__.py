"""Domain models, Pauli algebra, configuration and metrics."""
