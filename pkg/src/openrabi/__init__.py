"""Open quantum Rabi model with two-photon relaxation."""

__version__ = "0.1.0"

from .model import (  # noqa: E402
    BareStateLabel,
    ModelParams,
    Parity,
    TruncationConfig,
    build_closed_parity_hamiltonian,
    build_jc_block,
    build_phenomenological_hamiltonian,
    parity_of_bare_state,
)
from .spectrum import (  # noqa: E402
    ComplexSpectrum,
    determinant_sequence,
    eigenmode_coefficients,
    find_closed_eigenfrequencies,
    find_open_eigenfrequencies,
    track_levels_over_sweep,
)
from .jc_analytic import jc_eigenfrequencies, jc_vs_rabi_comparison  # noqa: E402
from .lindblad import (  # noqa: E402
    build_lindblad_generator,
    evolve,
    observables,
    project_initial_state_onto_eigenmodes,
    steady_state,
)
from .vectorized import (  # noqa: E402
    build_full_effective_hamiltonian,
    full_spectrum_by_parity,
    tensor_decomposition_residual,
    tls_collapse_effect_demo,
    tls_oracle,
    unvectorize,
    vectorize,
)
