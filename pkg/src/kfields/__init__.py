"""k-symplectic and k-contact Hamiltonian field theory in Darboux coordinates."""
