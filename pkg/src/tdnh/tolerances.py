"""Central registry of verification tolerances.

Every named check in the package resolves its tolerance here, so runs can
override any of them (config file section or --tol NAME=VALUE) without
touching code.
"""

from __future__ import annotations

DEFAULTS: dict[str, float] = {
    # scenario construction / mapped frame
    "dyson_residual": 1e-7,
    "h_hermitian": 1e-9,
    "metric_positive": 0.0,
    "quasi_hermiticity": 1e-7,
    "metric_ode_residual": 1e-7,
    "metric_orthonormality": 1e-9,
    # operator algebra
    "c_op_involution": 1e-9,
    "c_op_commutes_energy": 1e-9,
    "intertwiner_hermitian": 1e-9,
    "intertwiner_factorization": 1e-9,
    "intertwiner_not_positive": 0.0,
    "c_hamiltonian_involution": 1e-9,
    "c_hamiltonian_evolution": 1e-6,
    # reality conditions and their consequence
    "reality_intertwining": 1e-9,
    "reality_vector_map": 1e-9,
    "reality_alpha_imag": 1e-9,
    "energy_reality": 1e-10,
    # phases
    "berry_imag_rate": 1e-7,
    "berry_closed_form": 1e-6,
    "berry_hermitian_match": 1e-7,
    # static model
    "static_constraint": 1e-10,
    "parity_involution": 1e-10,
    "parity_pseudo_hermiticity": 1e-10,
    "static_energy_closed_form": 1e-10,
}


def resolve(overrides: dict[str, float] | None = None) -> dict[str, float]:
    """Defaults merged with overrides; unknown names are rejected."""
    merged = dict(DEFAULTS)
    if overrides:
        for name, value in overrides.items():
            if name not in merged:
                raise KeyError(f"unknown tolerance name {name!r}")
            merged[name] = float(value)
    return merged
