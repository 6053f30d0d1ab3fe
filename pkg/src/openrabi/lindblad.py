"""
Lindblad dynamics of the Rabi model with two-photon relaxation.

The master equation is split into the norm-losing part generated by the
phenomenological Hamiltonian and the refilling collapse term,

    d rho / dt = -i (H_ef rho - rho H_ef^dag) + 2 kappa_c2 b^2 rho (b^dag)^2 ,

and is integrated directly on density matrices in the block-ordered
number-parity basis.  Both H_ef and b^2 are block diagonal in parity, so a
state supported on one parity sector never leaks into the other.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .model import (
    ModelParams,
    Parity,
    annihilation_operator,
    as_truncation,
    build_phenomenological_hamiltonian,
    full_space_hamiltonian,
    number_operator,
    sigma_z_operator,
)

__all__ = [
    "InvariantViolation",
    "IntegrationFailure",
    "LindbladGenerator",
    "ObservableSeries",
    "EvolutionResult",
    "SteadyState",
    "EigenmodeWeights",
    "build_lindblad_generator",
    "check_density_matrix",
    "evolve",
    "observables",
    "steady_state",
    "relax_to_steady_state",
    "project_initial_state_onto_eigenmodes",
    "ModeMap",
    "modemap_over_sweep",
    "propagate",
    "sector_slices",
    "HALF_ROUND_TRIP",
]

log = logging.getLogger(__name__)

# time unit of the dynamics output, T_c / 2 = pi / (2 nu_c) for nu_c = 1
HALF_ROUND_TRIP = np.pi / 2

TRACE_TOL = 1e-8
HERMITIAN_TOL = 1e-10
POSITIVITY_TOL = 1e-8
LEAKAGE_TOL = 1e-12


class InvariantViolation(RuntimeError):
    """A density-matrix invariant was broken beyond its abort threshold."""


class IntegrationFailure(RuntimeError):
    """The adaptive integrator could not complete the run."""


class LindbladGenerator:
    """The map rho -> -i(H_ef rho - rho H_ef^dag) + 2 kappa_c2 b^2 rho b^dag^2.

    Calling the object applies the map to a density matrix.  :meth:`matrix`
    assembles the superoperator acting on row-major vectorised rho.
    """

    def __init__(self, params: ModelParams, trunc):
        self.params = params
        self.trunc = as_truncation(trunc)
        self.h_ef = full_space_hamiltonian(params, self.trunc, phenomenological=True)
        b = annihilation_operator(self.trunc)
        self.b2 = b @ b
        self.rate = 2.0 * params.kappa_c2

    @property
    def dim(self):
        return self.trunc.full_dim

    def half(self, rho):
        # generator = A + A^dag with A = -i H_ef rho + kappa b^2 rho b^dag^2
        a = -1j * (self.h_ef @ rho)
        if self.rate:
            a += 0.5 * self.rate * (self.b2 @ rho @ self.b2.conj().T)
        return a

    def __call__(self, rho):
        a = self.half(rho)
        return a + a.conj().T

    def apply_unsymmetrised(self, rho):
        """Direct evaluation for non-Hermitian inputs (e.g. coherences)."""
        h = self.h_ef
        out = -1j * (h @ rho - rho @ h.conj().T)
        if self.rate:
            out += self.rate * (self.b2 @ rho @ self.b2.conj().T)
        return out

    def matrix(self) -> np.ndarray:
        d = self.dim
        eye = np.eye(d)
        h = self.h_ef
        b2 = self.b2
        return (
            -1j * (np.kron(h, eye) - np.kron(eye, h.conj()))
            + self.rate * np.kron(b2, b2.conj())
        )


def build_lindblad_generator(params: ModelParams, trunc) -> LindbladGenerator:
    return LindbladGenerator(params, trunc)


def sector_slices(trunc):
    d = as_truncation(trunc).block_dim
    return {Parity.EVEN: slice(0, d), Parity.ODD: slice(d, 2 * d)}


def observables(rho, trunc=None):
    """(photon number, qubit excitation, parity expectation) of ``rho``.

    The qubit excitation is (1 + <sigma^z>)/2 with sigma^z taken from the
    number-parity correspondence; parity is Tr(rho_+) - Tr(rho_-).
    """
    rho = np.asarray(rho)
    d = rho.shape[0] // 2
    if trunc is None:
        trunc = d - 1
    trunc = as_truncation(trunc)
    if rho.shape != (trunc.full_dim, trunc.full_dim):
        raise ValueError(f"rho has shape {rho.shape}, expected {(trunc.full_dim,) * 2}")
    diag = np.real(np.diag(rho))
    n = np.real(np.diag(number_operator(trunc)))
    sz = np.real(np.diag(sigma_z_operator(trunc)))
    photon = float(n @ diag)
    qubit = float(0.5 * (diag.sum() + sz @ diag))
    parity = float(diag[:d].sum() - diag[d:].sum())
    return photon, qubit, parity


@dataclass
class DensityDiagnostics:
    trace_error: float
    hermiticity: float
    min_eigenvalue: float
    leakage: float


def check_density_matrix(rho, home_sector=None, trunc=None):
    """Trace error, Hermiticity defect, smallest eigenvalue and sector leakage.

    ``leakage`` is the total population (plus coherence weight) outside
    ``home_sector``; it is zero when no home sector is given.
    """
    rho = np.asarray(rho)
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    trace_err = float(abs(np.trace(rho) - 1))
    leak = 0.0
    if home_sector is not None:
        sl = sector_slices(trunc if trunc is not None else rho.shape[0] // 2 - 1)
        mask = np.ones(rho.shape, dtype=bool)
        home = sl[Parity.coerce(home_sector)]
        mask[home, home] = False
        leak = float(np.sum(np.abs(rho[mask])))
    return DensityDiagnostics(trace_err, herm, min_eig, leak)


def _home_sector(rho, trunc):
    sl = sector_slices(trunc)
    for p, s in sl.items():
        mask = np.ones(rho.shape, dtype=bool)
        mask[s, s] = False
        if not np.any(rho[mask]):
            return p
    return None


@dataclass
class ObservableSeries:
    """Observables on the requested time grid.

    ``t`` is in units of 1/nu_c; ``t_half_round_trip`` in units of
    T_c/2 = pi/(2 nu_c).
    """

    t: np.ndarray
    photon: np.ndarray
    qubit: np.ndarray
    parity: np.ndarray
    trace: np.ndarray
    min_eigenvalue: np.ndarray
    hermiticity: np.ndarray
    leakage: np.ndarray
    nu_c: float = 1.0

    @property
    def t_half_round_trip(self):
        return self.t * self.nu_c / HALF_ROUND_TRIP


@dataclass
class EvolutionResult:
    series: ObservableSeries
    states: np.ndarray = None  # (n_t, D, D) when stored
    home_sector: Parity = None
    n_steps: int = 0
    violations: list = field(default_factory=list)


def evolve(
    rho0,
    params: ModelParams,
    trunc,
    t_grid,
    *,
    store=False,
    rtol=1e-10,
    atol=1e-12,
    method="DOP853",
    check_invariants=True,
) -> EvolutionResult:
    """Integrate the master equation with an explicit adaptive Runge-Kutta scheme.

    Invariants (trace, Hermiticity, positivity and, for single-sector
    initial states, parity leakage) are evaluated at every sample.  Values
    past their tolerance are logged and recorded; values past ten times the
    tolerance raise :class:`InvariantViolation`.
    """
    trunc = as_truncation(trunc)
    rho0 = np.array(rho0, dtype=complex)
    d = trunc.full_dim
    if rho0.shape != (d, d):
        raise ValueError(f"rho0 has shape {rho0.shape}, expected {(d, d)}")
    diag0 = check_density_matrix(rho0)
    if diag0.trace_error > TRACE_TOL or diag0.hermiticity > HERMITIAN_TOL or diag0.min_eigenvalue < -POSITIVITY_TOL:
        raise ValueError(f"rho0 is not a valid density matrix: {diag0}")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be a strictly increasing 1-D array")

    gen = build_lindblad_generator(params, trunc)
    home = _home_sector(rho0, trunc)

    def rhs(_t, y):
        return gen(y.reshape(d, d)).ravel()

    if len(t_grid) == 1 or t_grid[-1] == t_grid[0]:
        ys = rho0.reshape(1, -1)
        n_steps = 0
    else:
        sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), rho0.ravel(), method=method, t_eval=t_grid, rtol=rtol, atol=atol)
        if sol.status != 0:
            raise IntegrationFailure(
                f"integration stopped at t={sol.t[-1] if len(sol.t) else t_grid[0]:.6g}: {sol.message}. "
                "The problem may be stiff at these rates; loosen rtol or shorten the run."
            )
        ys = sol.y.T
        n_steps = int(sol.nfev)

    cols = {k: np.empty(len(ys)) for k in ("photon", "qubit", "parity", "trace", "min_eig", "herm", "leak")}
    states = np.empty((len(ys), d, d), dtype=complex) if store else None
    violations = []
    limits = dict(trace=TRACE_TOL, herm=HERMITIAN_TOL, min_eig=POSITIVITY_TOL, leak=LEAKAGE_TOL)
    for i, y in enumerate(ys):
        rho = y.reshape(d, d)
        if store:
            states[i] = rho
        cols["photon"][i], cols["qubit"][i], cols["parity"][i] = observables(rho, trunc)
        cols["trace"][i] = np.real(np.trace(rho))
        if not check_invariants:
            cols["min_eig"][i] = cols["herm"][i] = cols["leak"][i] = np.nan
            continue
        dg = check_density_matrix(rho, home, trunc)
        cols["min_eig"][i], cols["herm"][i], cols["leak"][i] = dg.min_eigenvalue, dg.hermiticity, dg.leakage
        defects = dict(trace=dg.trace_error, herm=dg.hermiticity, min_eig=-dg.min_eigenvalue, leak=dg.leakage)
        for name, value in defects.items():
            if value > limits[name]:
                violations.append((float(t_grid[i]), name, value))
                log.warning("invariant %s = %.3e at t = %.6g exceeds %.1e", name, value, t_grid[i], limits[name])
                if value > 10 * limits[name]:
                    raise InvariantViolation(f"{name} = {value:.3e} at t = {t_grid[i]:.6g} (limit {limits[name]:.1e})")

    series = ObservableSeries(
        t_grid.copy(),
        cols["photon"],
        cols["qubit"],
        cols["parity"],
        cols["trace"],
        cols["min_eig"],
        cols["herm"],
        cols["leak"],
        params.nu_c,
    )
    return EvolutionResult(series, states, home, n_steps, violations)


# ---------------------------------------------------------------------------
# steady states


@dataclass
class SteadyState:
    """Steady state reached from ``rho0`` (or the unique one of a sector).

    ``null_basis`` maps each parity sector (p, p') to density-matrix-shaped
    right null vectors of the generator restricted to that sector; more
    than one entry signals a degenerate steady-state manifold.
    """

    rho: np.ndarray
    null_basis: dict
    smallest_eigenvalue: dict
    residual: float = np.nan

    @property
    def observables(self):
        return observables(self.rho) if self.rho is not None else None

    def null_dimension(self, sector):
        return len(self.null_basis.get(sector, []))


def _sector_indices(trunc):
    trunc = as_truncation(trunc)
    d = trunc.full_dim
    idx = np.arange(d)
    parity = np.where(idx < trunc.block_dim, 1, -1)
    out = {}
    for ps in (1, -1):
        for pa in (1, -1):
            rows = np.nonzero(parity == ps)[0]
            cols = np.nonzero(parity == pa)[0]
            out[(Parity(ps), Parity(pa))] = (rows[:, None] * d + cols[None, :]).ravel()
    return out


def _null_vectors(mat, tol):
    u, s, vh = np.linalg.svd(mat)
    k = s < tol
    return vh[k].conj().T, s


def steady_state(params: ModelParams, trunc, rho0=None, sectors=None, *, null_tol=1e-10) -> SteadyState:
    """Steady state from the null space of the parity-resolved generator.

    The generator is restricted to each (p_s, p_a) block that ``rho0``
    populates (or to ``sectors``).  Right and left null vectors R, L are
    obtained by SVD with singular-value threshold ``null_tol``; the state
    reached from rho0 is R (L^H R)^-1 L^H vec(rho0), which reduces to the
    normalised null vector when the null space is one-dimensional.

    Without ``rho0`` a unique steady state is returned only if every
    requested sector has a one-dimensional null space; otherwise ``rho`` is
    None and the basis is reported in ``null_basis``.
    """
    trunc = as_truncation(trunc)
    d = trunc.full_dim
    L = build_lindblad_generator(params, trunc).matrix()
    blocks = _sector_indices(trunc)
    if rho0 is not None:
        rho0 = np.asarray(rho0, dtype=complex)
        v0 = rho0.ravel()
        sectors = [s for s, idx in blocks.items() if np.any(v0[idx])]
    elif sectors is None:
        sectors = [(Parity.EVEN, Parity.EVEN), (Parity.ODD, Parity.ODD)]
    else:
        sectors = [(Parity.coerce(a), Parity.coerce(b)) for a, b in sectors]

    null_basis, smallest = {}, {}
    out = np.zeros(d * d, dtype=complex)
    unique = True
    for sec in sectors:
        idx = blocks[sec]
        sub = L[np.ix_(idx, idx)]
        right, s = _null_vectors(sub, null_tol)
        left, _ = _null_vectors(sub.conj().T, null_tol)
        smallest[sec] = float(s.min())
        basis = []
        for k in range(right.shape[1]):
            v = np.zeros(d * d, dtype=complex)
            v[idx] = right[:, k]
            m = v.reshape(d, d)
            tr = np.trace(m)
            basis.append(m / tr if abs(tr) > 1e-12 else m)
        null_basis[sec] = basis
        if right.shape[1] == 0:
            continue
        if rho0 is not None:
            if left.shape[1] != right.shape[1]:
                raise RuntimeError(f"left/right null spaces differ in dimension in sector {sec}")
            proj = right @ np.linalg.solve(left.conj().T @ right, left.conj().T @ v0[idx])
            out[idx] += proj
        elif right.shape[1] == 1 and sec[0] == sec[1]:
            out += basis[0].ravel()
        else:
            unique = False

    rho = None
    if rho0 is not None or unique:
        rho = out.reshape(d, d)
        if rho0 is None:
            rho = rho / np.trace(rho)
        rho = 0.5 * (rho + rho.conj().T)
    residual = float(np.max(np.abs(build_lindblad_generator(params, trunc)(rho)))) if rho is not None else np.nan
    return SteadyState(rho, null_basis, smallest, residual)


def relax_to_steady_state(
    rho0, params: ModelParams, trunc, *, t_step=None, drift_tol=1e-8, max_doublings=60
):
    """Long-time propagation of rho0 until the observables stop moving.

    Uses the exact propagator exp(L T) with T doubled at every stage by
    squaring, so very slow modes are reached in a few dozen products.
    Stops when the observable change divided by the elapsed time drops
    below ``drift_tol``.  Returns (rho, t_final).
    """
    trunc = as_truncation(trunc)
    d = trunc.full_dim
    L = build_lindblad_generator(params, trunc).matrix()
    if t_step is None:
        t_step = 1.0 / params.kappa_c2 if params.kappa_c2 else 10.0
    prop = sla.expm(L * t_step)
    v = np.asarray(rho0, dtype=complex).ravel()
    t = 0.0
    step = t_step
    obs = np.array(observables(v.reshape(d, d), trunc))
    for _ in range(max_doublings):
        v_new = prop @ v
        t += step
        obs_new = np.array(observables(v_new.reshape(d, d), trunc))
        drift = np.max(np.abs(obs_new - obs)) / step
        v, obs = v_new, obs_new
        if drift < drift_tol:
            rho = v.reshape(d, d)
            return 0.5 * (rho + rho.conj().T), t
        # advance the clock: next stage covers 2x the elapsed interval
        prop = prop @ prop
        step *= 2
    raise RuntimeError(f"observables still drifting by {drift:.2e} per unit time after t = {t:.3g}")


# ---------------------------------------------------------------------------
# initial state -> open eigenmode weights


@dataclass
class EigenmodeWeights:
    """Biorthogonal weights of a pure state on the open eigenmodes of one sector."""

    p: Parity
    omega: np.ndarray
    weights: np.ndarray
    labels: list
    normalization: str = "biorthogonal-abs-sum"
    near_defective: list = field(default_factory=list)

    def by_label(self):
        return dict(zip(self.labels, self.weights))


def project_initial_state_onto_eigenmodes(psi0, params: ModelParams, p, trunc, *, defect_tol=1e-6) -> EigenmodeWeights:
    """Weights w_n = |<L_n|psi0><psi0|R_n>| / sum_m |<L_m|psi0><psi0|R_m>|.

    ``psi0`` is a vector on the parity block ``p`` (length n_max+1) or the
    integer m of the basis state |m, p>.  L_n and R_n are left and right
    eigenvectors of the phenomenological block normalised so that
    <L_n|R_m> = delta_nm.  Modes whose unit-normalised overlap |<L_n|R_n>|
    falls below ``defect_tol`` are listed in ``near_defective``.
    Labels are the rank of Re(omega) at this coupling.
    """
    p = Parity.coerce(p)
    n_max = as_truncation(trunc).n_max
    if np.isscalar(psi0):
        m = int(psi0)
        psi0 = np.zeros(n_max + 1, dtype=complex)
        psi0[m] = 1.0
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (n_max + 1,):
        raise ValueError(f"psi0 must live on one parity block of dimension {n_max + 1}")
    psi0 = psi0 / np.linalg.norm(psi0)

    h = build_phenomenological_hamiltonian(params, p, n_max)
    w, vl, vr = sla.eig(h, left=True, right=True)
    vr = vr / np.linalg.norm(vr, axis=0)
    vl = vl / np.linalg.norm(vl, axis=0)
    overlap = np.sum(vl.conj() * vr, axis=0)
    near = [int(k) for k in np.nonzero(np.abs(overlap) < defect_tol)[0]]
    vl = vl / overlap.conj()

    raw = np.abs((vl.conj().T @ psi0) * (psi0.conj() @ vr))
    order = np.lexsort((w.imag, np.round(w.real, 12)))
    w, raw = w[order], raw[order]
    near = [int(np.nonzero(order == k)[0][0]) for k in near]
    labels = [(n, p) for n in range(len(w))]
    return EigenmodeWeights(p, w, raw / raw.sum(), labels, near_defective=[labels[k] for k in near])


@dataclass
class ModeMap:
    """Weights of one bare initial state on tracked open eigenmodes over a g sweep."""

    p: Parity
    initial: tuple
    g: np.ndarray
    omega: np.ndarray  # (n_labels, n_g)
    weights: np.ndarray  # (n_labels, n_g)
    near_defective: list = field(default_factory=list)  # (g, label)
    ambiguities: list = field(default_factory=list)


def modemap_over_sweep(m0: int, p, params_template: ModelParams, g_grid, trunc, *, defect_tol=1e-6) -> ModeMap:
    """Biorthogonal weights of |m0, p> on the tracked branches |n_g, p>.

    Same weight definition as :func:`project_initial_state_onto_eigenmodes`
    but the modes carry branch labels continued from g = 0 rather than the
    rank at each coupling.  Left eigenvectors are the rows of V^-1, which
    enforces <L_n|R_m> = delta_nm directly.
    """
    from .spectrum import tracked_eigensystems

    p = Parity.coerce(p)
    n_max = as_truncation(trunc).n_max
    if not 0 <= m0 <= n_max:
        raise ValueError(f"initial index {m0} outside cutoff {n_max}")
    g_out, omegas, weights, near, amb = [], [], [], [], []
    for g, w, v, ambiguous in tracked_eigensystems(params_template, p, g_grid, trunc):
        vinv = np.linalg.inv(v)
        # unit-normalised <L_n|R_n> for the defect diagnostic
        left_norm = np.linalg.norm(vinv, axis=1)
        for k in np.nonzero(1.0 / left_norm < defect_tol)[0]:
            near.append((g, int(k)))
        raw = np.abs(vinv[:, m0] * v[m0, :])
        g_out.append(g)
        omegas.append(w)
        weights.append(raw / raw.sum())
        amb.extend((g, n, a, b) for n, a, b in ambiguous)
    return ModeMap(p, (m0, p), np.array(g_out), np.array(omegas).T, np.array(weights).T, near, amb)


def propagate(rho0, params: ModelParams, trunc, t: float) -> np.ndarray:
    """rho(t) = exp(L t) rho0 through the exact propagator of the generator."""
    trunc = as_truncation(trunc)
    d = trunc.full_dim
    L = build_lindblad_generator(params, trunc).matrix()
    rho = (sla.expm(L * t) @ np.asarray(rho0, dtype=complex).ravel()).reshape(d, d)
    return 0.5 * (rho + rho.conj().T)
