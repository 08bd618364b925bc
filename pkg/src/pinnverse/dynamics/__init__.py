"""Time evolution: RK4 integrator, density-matrix oracle and Pauli-basis generator."""
