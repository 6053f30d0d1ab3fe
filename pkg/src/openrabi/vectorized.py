"""
Full effective Hamiltonian on the doubled (system x auxiliary) space.

A density matrix is flattened into the wavefunction

    |Psi_rho> = sum_{n_s, n_a} rho[n_s, n_a] |n_s>|n_a>,

i.e. row-major order with the system index outermost.  The master equation
then reads i d|Psi>/dt = H_u |Psi> with

    H_u = H_s,ef x 1 - 1 x H_a,ef + 2 i sum_l gamma_l C_s,l x C_a,l

where the auxiliary operators are fixed by the matrix-element relations
<n'|X_a|n> = <n|X_s^dag|n'>.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import ModelParams, Parity, annihilation_operator, as_truncation, full_space_hamiltonian

__all__ = [
    "FullEffectiveOperator",
    "vectorize",
    "unvectorize",
    "auxiliary_operator",
    "full_effective_from_parts",
    "build_full_effective_hamiltonian",
    "full_spectrum_by_parity",
    "full_vs_phenomenological",
    "match_spectra",
    "tls_full_effective_hamiltonian",
    "tls_propagator",
    "tls_oracle",
    "tls_collapse_effect_demo",
    "damped_oscillator_full_effective",
    "tensor_decomposition_residual",
    "fit_reduced_spectrum",
]


def vectorize(rho) -> np.ndarray:
    """Row-major flattening: entry (n_s, n_a) goes to n_s * D + n_a."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1).copy()


def unvectorize(psi, dim=None) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.ndim != 1:
        raise ValueError("expected a 1-D vector")
    if dim is None:
        dim = int(round(np.sqrt(psi.size)))
    if dim * dim != psi.size:
        raise ValueError(f"vector of length {psi.size} is not a {dim}x{dim} matrix")
    return psi.reshape(dim, dim).copy()


def auxiliary_operator(op_s) -> np.ndarray:
    """Auxiliary counterpart of a system operator, <n'|X_a|n> = <n|X_s^dag|n'>."""
    op_s = np.asarray(op_s)
    dag = op_s.conj().T
    d = op_s.shape[0]
    out = np.empty_like(op_s, dtype=complex)
    for n_prime in range(d):
        for n in range(d):
            out[n_prime, n] = dag[n, n_prime]
    return out


def full_effective_from_parts(h_ef, collapse_ops=(), rates=(), include_collapse=True) -> np.ndarray:
    """H_u for H_s,ef and channels 2*gamma*D[C]; used for the Rabi model and the test models."""
    h_ef = np.asarray(h_ef, dtype=complex)
    d = h_ef.shape[0]
    eye = np.eye(d)
    h_u = np.kron(h_ef, eye) - np.kron(eye, auxiliary_operator(h_ef))
    if include_collapse:
        for c, gamma in zip(collapse_ops, rates):
            h_u = h_u + 2j * gamma * np.kron(c, auxiliary_operator(c))
    return h_u


@dataclass
class FullEffectiveOperator:
    """H_u with the (p_s, p_a) parity label of every doubled-space basis element."""

    matrix: np.ndarray
    n_max: int
    p_s: np.ndarray
    p_a: np.ndarray
    include_collapse: bool = True

    @property
    def dim(self):
        return self.matrix.shape[0]

    def sector_indices(self, p_s, p_a):
        p_s, p_a = Parity.coerce(p_s), Parity.coerce(p_a)
        return np.nonzero((self.p_s == p_s) & (self.p_a == p_a))[0]

    def block(self, p_s, p_a):
        idx = self.sector_indices(p_s, p_a)
        return self.matrix[np.ix_(idx, idx)]

    def off_block_norm(self):
        """Largest entry coupling different (p_s, p_a) sectors."""
        key = self.p_s * 2 + self.p_a
        mask = key[:, None] != key[None, :]
        return float(np.max(np.abs(self.matrix[mask]))) if mask.any() else 0.0

    def generator(self):
        """Superoperator on vectorised rho: d vec(rho)/dt = -i H_u vec(rho)."""
        return -1j * self.matrix


def build_full_effective_hamiltonian(params: ModelParams, trunc, include_collapse=True) -> FullEffectiveOperator:
    """Full effective Hamiltonian of the open Rabi model.

    ``include_collapse=False`` drops 2i kappa_c2 b^2 B^2 and leaves the
    collapse-free H_s,ef - H_a,ef.
    """
    trunc = as_truncation(trunc)
    h_s = full_space_hamiltonian(params, trunc, phenomenological=True)
    b = annihilation_operator(trunc)
    h_u = full_effective_from_parts(h_s, [b @ b], [params.kappa_c2], include_collapse)
    d = trunc.full_dim
    parity = np.where(np.arange(d) < trunc.block_dim, 1, -1)
    p_s = np.repeat(parity, d)
    p_a = np.tile(parity, d)
    return FullEffectiveOperator(h_u, trunc.n_max, p_s, p_a, include_collapse)


def full_spectrum_by_parity(params: ModelParams, trunc, include_collapse=True) -> dict:
    """Eigenvalues of H_u in each of the four (p_s, p_a) sectors.

    Returns a dict (p_s, p_a) -> ComplexSpectrum-like record with labels
    (k, (p_s, p_a)) in order of ascending real part.
    """
    from .spectrum import ComplexSpectrum

    op = build_full_effective_hamiltonian(params, trunc, include_collapse)
    out = {}
    for ps in (Parity.EVEN, Parity.ODD):
        for pa in (Parity.EVEN, Parity.ODD):
            w = np.linalg.eigvals(op.block(ps, pa))
            w = w[np.lexsort((w.imag, w.real))]
            out[(ps, pa)] = ComplexSpectrum([(k, (ps, pa)) for k in range(len(w))], w, params.g, op.n_max)
    return out


def match_spectra(a, b):
    """Minimum-cost pairing of two equal-length eigenvalue sets; returns (a_idx, b_idx, |diff|)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError("spectra must have the same length")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return rows, cols, cost[rows, cols]


@dataclass
class SectorComparison:
    sector: tuple
    full: np.ndarray
    phenomenological: np.ndarray  # reordered to pair with ``full``
    mismatch: np.ndarray


def full_vs_phenomenological(params: ModelParams, trunc) -> list:
    """Pair the spectra of H_u with and without collapse in every sector."""
    with_c = full_spectrum_by_parity(params, trunc, include_collapse=True)
    without = full_spectrum_by_parity(params, trunc, include_collapse=False)
    out = []
    for sec in with_c:
        a, b = with_c[sec].omega, without[sec].omega
        rows, cols, diff = match_spectra(a, b)
        out.append(SectorComparison(sec, a[rows], b[cols], diff))
    return out


# ---------------------------------------------------------------------------
# two-level system with relaxation, basis order (e, g)


def tls_full_effective_hamiltonian(nu_q, gamma_q, include_collapse=True) -> np.ndarray:
    """4x4 H_u of a qubit with H = nu_q s+s- and channel 2 gamma_q D[s-].

    Basis order (e_s e_a, e_s g_a, g_s e_a, g_s g_a).
    """
    h_ef = np.array([[nu_q - 1j * gamma_q, 0], [0, 0]], dtype=complex)
    lower = np.array([[0, 0], [1, 0]], dtype=complex)
    return full_effective_from_parts(h_ef, [lower], [gamma_q], include_collapse)


def tls_propagator(nu_q, gamma_q, t) -> np.ndarray:
    """Closed-form exp(-i H_u t) of the dissipative qubit."""
    decay = np.exp(-2 * gamma_q * t)
    u = np.zeros((4, 4), dtype=complex)
    u[0, 0] = decay
    u[1, 1] = np.exp(-gamma_q * t - 1j * nu_q * t)
    u[2, 2] = np.exp(-gamma_q * t + 1j * nu_q * t)
    u[3, 0] = 1 - decay
    u[3, 3] = 1.0
    return u


def tls_oracle(nu_q, gamma_q, rho0, t) -> np.ndarray:
    """Analytic rho(t) of a decaying qubit; rho is ordered [[ee, eg], [ge, gg]]."""
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (2, 2):
        raise ValueError("tls_oracle expects a 2x2 density matrix")
    ee, eg, ge, gg = rho0[0, 0], rho0[0, 1], rho0[1, 0], rho0[1, 1]
    decay = np.exp(-2 * gamma_q * t)
    return np.array(
        [
            [ee * decay, eg * np.exp(-gamma_q * t - 1j * nu_q * t)],
            [ge * np.exp(-gamma_q * t + 1j * nu_q * t), ee * (1 - decay) + gg],
        ]
    )


@dataclass
class CollapseEffect:
    """Qubit H_u eigensystems with and without the collapse entry.

    Columns of the eigenvector arrays follow ``eigenvalues_*`` (ascending
    real part, then imaginary part).  ``stationary_*`` is the right
    eigenvector of eigenvalue 0 and ``population_mode_*`` that of -2i gamma,
    each normalised with its largest component real and positive.
    """

    eigenvalues_with: np.ndarray
    eigenvalues_without: np.ndarray
    eigenvectors_with: np.ndarray
    eigenvectors_without: np.ndarray
    stationary_with: np.ndarray
    stationary_without: np.ndarray
    population_mode_with: np.ndarray
    population_mode_without: np.ndarray


def _phase_fixed(v):
    v = v / np.linalg.norm(v)
    k = int(np.argmax(np.abs(v) - 1e-12 * np.arange(v.size)))
    return v * (abs(v[k]) / v[k])


def tls_collapse_effect_demo(nu_q, gamma_q) -> CollapseEffect:
    """Eigen-decomposition of the qubit H_u with and without the collapse entry.

    The spectrum {-2i gamma, nu - i gamma, -nu - i gamma, 0} is the same in
    both cases because H_u is triangular.  The collapse entry only alters
    the population mode at -2i gamma, from |e e> to (|e e> - |g g>)/sqrt(2);
    the zero mode stays |g g>, the steady state rho = |g><g|.
    """
    if not gamma_q > 0:
        raise ValueError("gamma_q must be positive")
    res = []
    for collapse in (True, False):
        w, v = np.linalg.eig(tls_full_effective_hamiltonian(nu_q, gamma_q, collapse))
        order = np.lexsort((w.imag, w.real))
        w, v = w[order], v[:, order]
        zero = _phase_fixed(v[:, int(np.argmin(np.abs(w)))])
        pop = _phase_fixed(v[:, int(np.argmin(np.abs(w + 2j * gamma_q)))])
        res.append((w, v, zero, pop))
    (w1, v1, z1, p1), (w0, v0, z0, p0) = res
    return CollapseEffect(w1, w0, v1, v0, z1, z0, p1, p0)


def damped_oscillator_full_effective(nu, gamma, n_levels) -> np.ndarray:
    """H_u of a truncated harmonic oscillator with single-photon loss 2 gamma D[a].

    Quadratic positive control: its full spectrum is {w_m - w_n^*} with
    w_m = m (nu - i gamma).
    """
    a = np.diag(np.sqrt(np.arange(1, n_levels)), 1).astype(complex)
    num = a.conj().T @ a
    h_ef = nu * num - 1j * gamma * num
    return full_effective_from_parts(h_ef, [a], [gamma])


# ---------------------------------------------------------------------------
# spectral (tensor rank) decomposition


@dataclass
class DecompositionResidual:
    max: float
    mean: float
    candidate: np.ndarray  # omega_m - omega_n^*, paired with ``full``
    full: np.ndarray


def _pair_differences(reduced):
    reduced = np.asarray(reduced, dtype=complex)
    return (reduced[:, None] - reduced[None, :].conj()).ravel()


def tensor_decomposition_residual(full_spectrum, candidate_reduced_spectrum) -> DecompositionResidual:
    """Mismatch between a full spectrum and {omega_m - omega_n^*} of a candidate.

    Both sets have their mean real part removed (the reduced spectrum is
    only defined up to a real translation) and are paired by minimum-cost
    assignment on |difference|.
    """
    full = np.asarray(full_spectrum, dtype=complex).ravel()
    cand = _pair_differences(candidate_reduced_spectrum)
    if full.size != cand.size:
        raise ValueError(f"full spectrum has {full.size} values, candidate implies {cand.size}")
    full_c = full - full.real.mean()
    cand_c = cand - cand.real.mean()
    rows, cols, diff = match_spectra(full_c, cand_c)
    return DecompositionResidual(float(diff.max()), float(diff.mean()), cand[cols], full[rows])


def fit_reduced_spectrum(full_spectrum, initial, *, max_iter=200, tol=1e-13):
    """Best reduced spectrum for a full spectrum, by alternating assignment and least squares.

    With omega_n = V_n - i K_n the decomposition is linear:
    Re(omega_u,mn) = V_m - V_n and -Im(omega_u,mn) = K_m + K_n.  Given a
    pairing, V (fixed by mean zero) and K are solved in least squares; the
    pairing is then recomputed.  Returns (reduced, DecompositionResidual).
    """
    full = np.asarray(full_spectrum, dtype=complex).ravel()
    reduced = np.asarray(initial, dtype=complex).copy()
    n = reduced.size
    m_idx, n_idx = np.divmod(np.arange(n * n), n)
    a_v = np.zeros((n * n + 1, n))
    a_v[np.arange(n * n), m_idx] += 1
    a_v[np.arange(n * n), n_idx] -= 1
    a_v[-1] = 1.0  # gauge: mean frequency zero
    a_k = np.zeros((n * n, n))
    a_k[np.arange(n * n), m_idx] += 1
    a_k[np.arange(n * n), n_idx] += 1
    prev = np.inf
    for _ in range(max_iter):
        res = tensor_decomposition_residual(full, reduced)
        target = full[_match_rows(full, _pair_differences(reduced))]
        v = np.linalg.lstsq(a_v, np.r_[target.real, 0.0], rcond=None)[0]
        k = np.linalg.lstsq(a_k, -target.imag, rcond=None)[0]
        reduced = v - 1j * k
        if prev - res.max < tol:
            break
        prev = res.max
    return reduced, tensor_decomposition_residual(full, reduced)


def _match_rows(full, cand):
    """For each candidate pair (m, n), the index of its assigned full eigenvalue."""
    rows, cols, _ = match_spectra(cand - cand.real.mean(), full - full.real.mean())
    out = np.empty(cand.size, dtype=int)
    out[rows] = cols
    return out
