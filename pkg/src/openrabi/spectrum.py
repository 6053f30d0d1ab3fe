"""
Closed and phenomenological open Rabi spectra from the three-term recursion.

Within a parity sector the eigenvalue problem (omega - H_p) c = 0 is the
tridiagonal system

    alpha_m c_m + beta_m c_{m+1} + gamma_m c_{m-1} = 0,

    alpha_m = omega - m nu_c + (p/2)(-1)^m nu_q + i m(m-1) kappa_c2
    beta_m  = -sqrt(m+1) g
    gamma_m = -sqrt(m) g

and its leading principal minors G_m obey G_m = alpha_m G_{m-1} -
beta_{m-1} gamma_m G_{m-2}.  Roots of G_{n_max} are the eigenfrequencies of
the truncated block.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .model import (
    ModelParams,
    Parity,
    as_truncation,
    build_phenomenological_hamiltonian,
)

__all__ = [
    "ComplexSpectrum",
    "DeterminantSequence",
    "EigenmodeExpansion",
    "Branch",
    "LevelSweep",
    "WindowEdgeWarning",
    "AmbiguousAssignmentWarning",
    "recursion_coefficients",
    "determinant_sequence",
    "sturm_count_below",
    "find_closed_eigenfrequencies",
    "find_open_eigenfrequencies",
    "eigenmode_coefficients",
    "track_levels_over_sweep",
    "tracked_eigensystems",
]

RESCALE_THRESHOLD = 1e100


class WindowEdgeWarning(UserWarning):
    """A root was found close to the edge of the search window."""


class AmbiguousAssignmentWarning(UserWarning):
    """Two candidate branches had nearly equal eigenvector overlap."""


@dataclass
class ComplexSpectrum:
    """Labelled complex eigenfrequencies omega = nu - i kappa.

    ``labels[k]`` is ``(n_g, p)``; ``flagged`` holds labels whose
    determinant residual check failed, with the residual value.
    """

    labels: list
    omega: np.ndarray
    g: float
    n_max: int
    flagged: list = field(default_factory=list)

    def __len__(self):
        return len(self.labels)

    def __iter__(self):
        return iter(zip(self.labels, self.omega))

    @property
    def frequency(self):
        return self.omega.real

    @property
    def decay(self):
        return -self.omega.imag

    def by_label(self):
        return dict(zip(self.labels, self.omega))


@dataclass
class DeterminantSequence:
    """G_m = values[m] * exp(log_scale[m]); both arrays share omega's shape."""

    values: np.ndarray
    log_scale: np.ndarray

    def true_values(self):
        return self.values * np.exp(self.log_scale)

    @property
    def last(self):
        return self.values[-1] * np.exp(self.log_scale[-1])


@dataclass
class EigenmodeExpansion:
    omega: complex
    p: Parity
    coefficients: np.ndarray
    residual: float
    method: str
    normalization: str = "l2"
    fallback_reason: str = ""


def recursion_coefficients(params: ModelParams, p, omega, m_max: int):
    """alpha_0..m_max (complex), beta_0..m_max and gamma_0..m_max (real)."""
    p = int(Parity.coerce(p))
    m = np.arange(m_max + 1)
    omega = np.asarray(omega)
    shift = -m * params.nu_c + 0.5 * p * (-1.0) ** m * params.nu_q
    if params.kappa_c2:
        shift = shift + 1j * m * (m - 1) * params.kappa_c2
    alpha = omega[..., None] + shift
    beta = -np.sqrt(m + 1.0) * params.g
    gamma = -np.sqrt(m * 1.0) * params.g
    return np.moveaxis(alpha, -1, 0), beta, gamma


def determinant_sequence(params: ModelParams, p, omega, m_max: int, rescale=True) -> DeterminantSequence:
    """Leading minors G_0..G_{m_max} of omega - H_p.

    ``omega`` may be a scalar or an array; the recursion is vectorised over
    it.  When a running value exceeds 1e100 the pair (G_m, G_{m-1}) is
    divided by |G_m| and the logarithm is accumulated in ``log_scale``.
    Rescaling by a positive factor keeps every sign, so root brackets and
    Sturm counts can be read straight off ``values``.
    """
    if m_max < 1:
        raise ValueError("m_max must be >= 1")
    omega = np.asarray(omega)
    alpha, beta, gamma = recursion_coefficients(params, p, omega, m_max)
    dtype = np.result_type(alpha, float)
    values = np.empty((m_max + 1,) + omega.shape, dtype=dtype)
    logs = np.zeros((m_max + 1,) + omega.shape)
    log = np.zeros(omega.shape)

    prev = np.ones(omega.shape, dtype=dtype)  # G_{-1}
    cur = alpha[0].astype(dtype)
    values[0] = cur
    for m in range(1, m_max + 1):
        nxt = alpha[m] * cur - beta[m - 1] * gamma[m] * prev
        prev, cur = cur, nxt
        if rescale:
            mag = np.abs(cur)
            big = mag > RESCALE_THRESHOLD
            if np.any(big):
                s = np.where(big, mag, 1.0)
                cur = cur / s
                prev = prev / s
                log = log + np.log(s)
        values[m] = cur
        logs[m] = log
    return DeterminantSequence(values, logs)


def _det_and_derivative(params, p, omega, m_max):
    """G_{m_max}(omega) and dG/domega with a common scale factor."""
    alpha, beta, gamma = recursion_coefficients(params, p, np.asarray(omega, dtype=complex), m_max)
    g_prev, g_cur = 1.0 + 0j, complex(alpha[0])
    d_prev, d_cur = 0j, 1.0 + 0j
    for m in range(1, m_max + 1):
        bg = beta[m - 1] * gamma[m]
        g_next = alpha[m] * g_cur - bg * g_prev
        d_next = g_cur + alpha[m] * d_cur - bg * d_prev
        g_prev, g_cur, d_prev, d_cur = g_cur, complex(g_next), d_cur, complex(d_next)
        s = max(abs(g_cur), abs(d_cur))
        if s > RESCALE_THRESHOLD:
            g_prev, g_cur, d_prev, d_cur = g_prev / s, g_cur / s, d_prev / s, d_cur / s
    return g_cur, d_cur


def newton_residual(params, p, omega, n_max):
    """|G/G'| at omega: the size of a Newton step on the determinant."""
    G, dG = _det_and_derivative(params, p, omega, n_max)
    if dG == 0:
        return np.inf if G != 0 else 0.0
    return abs(G / dG)


def sturm_count_below(params: ModelParams, p, omega, n_max: int):
    """Number of eigenvalues of the closed truncated block below ``omega``.

    Sign changes in (1, G_0, ..., G_n) count eigenvalues above omega for a
    symmetric tridiagonal matrix with nonzero off-diagonal.
    """
    if params.kappa_c2:
        raise ValueError("Sturm counting requires the closed (Hermitian) block")
    omega = np.asarray(omega, dtype=float)
    seq = determinant_sequence(params, p, omega, n_max).values.real
    seq = np.concatenate([np.ones((1,) + omega.shape), seq])
    neg = np.signbit(seq)
    changes = np.sum(neg[1:] != neg[:-1], axis=0)
    return (n_max + 1) - changes


def _sign_of_det(params, p, omega, n_max):
    return np.sign(determinant_sequence(params, p, omega, n_max).values[-1].real)


def _bisect(params, p, lo, hi, n_max, xtol):
    """Vectorised bisection on sign(G_{n_max}) over many brackets at once."""
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    s_lo = _sign_of_det(params, p, lo, n_max)
    while np.any(hi - lo > xtol):
        mid = 0.5 * (lo + hi)
        s_mid = _sign_of_det(params, p, mid, n_max)
        left = s_mid == s_lo
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
        if np.all(mid == lo) and np.all(mid == hi):
            break
    return 0.5 * (lo + hi)


def _scan_roots(params, p, n_max, lo, hi, n_grid, xtol):
    expected = int(sturm_count_below(params, p, hi, n_max) - sturm_count_below(params, p, lo, n_max))
    if n_grid is None:
        n_grid = max(256, 32 * (expected + 1))
    for attempt in range(2):
        grid = np.linspace(lo, hi, n_grid)
        s = _sign_of_det(params, p, grid, n_max)
        idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
        exact = grid[s == 0]
        if len(idx) + len(exact) == expected:
            roots = np.sort(np.r_[_bisect(params, p, grid[idx], grid[idx + 1], n_max, xtol), exact])
            return roots, int(sturm_count_below(params, p, lo, n_max))
        n_grid *= 8
    raise RuntimeError(
        f"scan grid could not separate all {expected} roots in [{lo}, {hi}] "
        f"(found {len(idx) + len(exact)} after refinement to {n_grid // 8} points)"
    )


def _default_window(params, p, n_max):
    m = np.arange(n_max + 1)
    diag = m * params.nu_c - 0.5 * int(p) * params.nu_q * (-1.0) ** m
    radius = 2 * params.g * np.sqrt(n_max + 1.0)
    return diag.min() - radius - 1e-3, diag.max() + radius + 1e-3


def find_closed_eigenfrequencies(
    params: ModelParams,
    p,
    trunc,
    window=None,
    *,
    n_grid=None,
    xtol=1e-12,
    check_convergence=True,
    convergence_tol=1e-8,
    convergence_step=10,
) -> ComplexSpectrum:
    """Real roots of G_{n_max}(omega) inside ``window``.

    Roots are bracketed by a sign-change scan and refined by bisection to
    ``xtol``.  The number of brackets is checked against the Sturm count of
    the window; a mismatch triggers one 8x grid refinement before failing.
    With ``check_convergence`` only roots that move by less than
    ``convergence_tol`` when the cutoff is raised by ``convergence_step``
    are returned.  Labels n_g are the rank of the root in the block.
    """
    if params.kappa_c2 != 0:
        raise ValueError("find_closed_eigenfrequencies requires kappa_c2 = 0")
    p = Parity.coerce(p)
    n_max = as_truncation(trunc).n_max
    lo, hi = window if window is not None else _default_window(params, p, n_max)
    if not hi > lo:
        raise ValueError(f"empty window [{lo}, {hi}]")

    def roots_at(n):
        if params.g == 0:
            m = np.arange(n + 1)
            diag = m * params.nu_c - 0.5 * int(p) * params.nu_q * (-1.0) ** m
            order = np.argsort(diag, kind="stable")
            ranked = diag[order]
            inside = (ranked >= lo) & (ranked <= hi)
            return ranked[inside], np.nonzero(inside)[0]
        roots, below = _scan_roots(params, p, n, lo, hi, n_grid, xtol)
        return roots, below + np.arange(len(roots))

    roots, ranks = roots_at(n_max)
    if check_convergence and len(roots):
        ref, _ = roots_at(n_max + convergence_step)
        if len(ref):
            dist = np.min(np.abs(roots[:, None] - ref[None, :]), axis=1)
        else:
            dist = np.full(len(roots), np.inf)
        keep = dist < convergence_tol
        roots, ranks = roots[keep], ranks[keep]

    margin = 0.1 * (hi - lo)
    near = (roots - lo < margin) | (hi - roots < margin)
    if np.any(near):
        warnings.warn(
            f"roots {roots[near]} lie within 10% of the window edge [{lo}, {hi}]",
            WindowEdgeWarning,
            stacklevel=2,
        )
    labels = [(int(r), p) for r in ranks]
    return ComplexSpectrum(labels, roots.astype(complex), params.g, n_max)


def _rank_order(w):
    return np.lexsort((w.imag, np.round(w.real, 12)))


def find_open_eigenfrequencies(
    params: ModelParams,
    p,
    trunc,
    *,
    converged_only=True,
    convergence_tol=1e-8,
    convergence_step=10,
    residual_tol=1e-8,
) -> ComplexSpectrum:
    """Eigenvalues of the phenomenological block by dense eigensolve.

    Each eigenvalue is checked against the determinant recursion: the
    Newton step |G/G'| must be below ``residual_tol * max(1, |omega|)``.
    Failures are kept and listed in ``flagged``.
    """
    p = Parity.coerce(p)
    n_max = as_truncation(trunc).n_max

    def eigs(n):
        h = build_phenomenological_hamiltonian(params, p, n)
        if params.kappa_c2 == 0:
            return np.linalg.eigvalsh(h).astype(complex)
        w = np.linalg.eigvals(h)
        return w[_rank_order(w)]

    w = eigs(n_max)
    ranks = np.arange(len(w))
    if converged_only:
        ref = eigs(n_max + convergence_step)
        dist = np.min(np.abs(w[:, None] - ref[None, :]), axis=1)
        keep = dist < convergence_tol
        w, ranks = w[keep], ranks[keep]

    labels = [(int(r), p) for r in ranks]
    flagged = []
    for lab, om in zip(labels, w):
        res = newton_residual(params, p, om, n_max)
        if not res < residual_tol * max(1.0, abs(om)):
            flagged.append((lab, res))
    return ComplexSpectrum(labels, w, params.g, n_max, flagged)


def _row_residual(params, p, omega, c):
    h = build_phenomenological_hamiltonian(params, p, len(c) - 1)
    return float(np.max(np.abs(omega * c - h @ c)))


def _normalise(c):
    c = c / np.linalg.norm(c)
    k = np.flatnonzero(np.abs(c) > 1e-300)
    if len(k) and c[k[0]] != 0:
        c = c * (abs(c[k[0]]) / c[k[0]])
    return c


def eigenmode_coefficients(params: ModelParams, p, omega, trunc, *, residual_tol=1e-8) -> EigenmodeExpansion:
    """Amplitudes c_m of the eigenmode at ``omega``.

    The forward recursion starting from c_0 = 1 is tried first.  It is
    unstable once the decaying (physical) solution falls below rounding,
    which shows up as a growing tail; the same recursion is then solved as
    a backward continued fraction for the ratios c_m / c_{m-1}, and only if
    that also misses ``residual_tol`` is the dense eigenvector used.
    Coefficients are normalised to unit l2 norm with the first nonzero
    entry real and positive.
    """
    p = Parity.coerce(p)
    n_max = as_truncation(trunc).n_max
    omega = complex(omega)

    if params.g == 0:
        h = build_phenomenological_hamiltonian(params, p, n_max)
        k = int(np.argmin(np.abs(np.diag(h) - omega)))
        c = np.zeros(n_max + 1, dtype=complex)
        c[k] = 1.0
        return EigenmodeExpansion(omega, p, c, _row_residual(params, p, omega, c), "bare")

    alpha, beta, gamma = recursion_coefficients(params, p, omega, n_max)

    c = np.zeros(n_max + 1, dtype=complex)
    c[0] = 1.0
    c[1] = -alpha[0] * c[0] / beta[0]
    for m in range(1, n_max):
        c[m + 1] = -(alpha[m] * c[m] + gamma[m] * c[m - 1]) / beta[m]
    c = _normalise(c)
    res = _row_residual(params, p, omega, c)
    tail_grows = abs(c[-1]) > abs(c[-2]) and abs(c[-1]) > residual_tol
    if res < residual_tol and not tail_grows:
        return EigenmodeExpansion(omega, p, c, res, "forward")
    reason = "growing tail" if tail_grows else f"forward residual {res:.2e}"

    # backward ratios r_m = c_m / c_{m-1}, closing the truncated last row
    r = np.zeros(n_max + 1, dtype=complex)
    r[n_max] = -gamma[n_max] / alpha[n_max]
    for m in range(n_max - 1, 0, -1):
        r[m] = -gamma[m] / (alpha[m] + beta[m] * r[m + 1])
    c = np.ones(n_max + 1, dtype=complex)
    for m in range(1, n_max + 1):
        c[m] = r[m] * c[m - 1]
    if np.all(np.isfinite(c)):
        c = _normalise(c)
        res = _row_residual(params, p, omega, c)
        if res < residual_tol:
            return EigenmodeExpansion(omega, p, c, res, "backward", fallback_reason=reason)
        reason += f"; backward residual {res:.2e}"

    h = build_phenomenological_hamiltonian(params, p, n_max)
    w, v = np.linalg.eig(h)
    k = int(np.argmin(np.abs(w - omega)))
    c = _normalise(v[:, k])
    return EigenmodeExpansion(omega, p, c, _row_residual(params, p, omega, c), "dense", fallback_reason=reason)


@dataclass
class Branch:
    n_g: int
    p: Parity
    g: np.ndarray
    omega: np.ndarray
    ambiguous_g: list = field(default_factory=list)

    @property
    def decay(self):
        return -self.omega.imag


@dataclass
class LevelSweep:
    p: Parity
    g: np.ndarray
    omega: np.ndarray  # shape (n_labels, n_g)
    n_max: int
    ambiguities: list = field(default_factory=list)  # (g, n_g, top overlap, runner-up)

    @property
    def branches(self):
        out = []
        for n in range(self.omega.shape[0]):
            amb = [a[0] for a in self.ambiguities if a[1] == n]
            out.append(Branch(n, self.p, self.g, self.omega[n], amb))
        return out


def _eigensystem(params, p, n_max):
    h = build_phenomenological_hamiltonian(params, p, n_max)
    if params.kappa_c2 == 0:
        w, v = np.linalg.eigh(h)
        return w.astype(complex), v
    w, v = np.linalg.eig(h)
    return w, v / np.linalg.norm(v, axis=0)


def tracked_eigensystems(params_template: ModelParams, p, g_grid, trunc, *, ambiguity=0.05):
    """Yield (g, omega, vectors, ambiguous) with columns ordered by label.

    Labels are the rank of Re(omega) at the first grid point, which must be
    g = 0.  Each later step assigns eigenpairs to labels by maximising the
    total eigenvector overlap with the previous step (Hungarian assignment).
    ``ambiguous`` lists (n_g, best, runner_up) where the two largest
    overlaps differ by less than ``ambiguity`` relative.
    """
    p = Parity.coerce(p)
    n_max = as_truncation(trunc).n_max
    g_grid = np.asarray(g_grid, dtype=float)
    if g_grid.ndim != 1 or len(g_grid) == 0:
        raise ValueError("g_grid must be a non-empty 1-D sequence")
    if g_grid[0] != 0:
        raise ValueError("g_grid must start at g = 0, where labels are anchored")
    if np.any(np.diff(g_grid) <= 0):
        raise ValueError("g_grid must be strictly ascending")

    prev = None
    for g in g_grid:
        w, v = _eigensystem(params_template.replace(g=float(g)), p, n_max)
        ambiguous = []
        if prev is None:
            order = _rank_order(w)
        else:
            overlap = np.abs(prev.conj().T @ v)
            rows, cols = linear_sum_assignment(-overlap)
            order = cols[np.argsort(rows)]
            top2 = -np.sort(-overlap, axis=1)[:, :2]
            for n in np.nonzero(top2[:, 0] - top2[:, 1] < ambiguity * top2[:, 0])[0]:
                ambiguous.append((int(n), float(top2[n, 0]), float(top2[n, 1])))
        w, v = w[order], v[:, order]
        prev = v
        yield float(g), w, v, ambiguous


def track_levels_over_sweep(
    params_template: ModelParams, p, g_grid, trunc, *, n_levels=None, ambiguity=0.05, warn=True
) -> LevelSweep:
    """Follow labelled branches |n_g, p> across an ascending coupling grid."""
    p = Parity.coerce(p)
    n_max = as_truncation(trunc).n_max
    n_levels = n_max + 1 if n_levels is None else n_levels
    g_out, cols, amb = [], [], []
    for g, w, _, ambiguous in tracked_eigensystems(params_template, p, g_grid, trunc, ambiguity=ambiguity):
        g_out.append(g)
        cols.append(w[:n_levels])
        amb.extend((g, n, a, b) for n, a, b in ambiguous if n < n_levels)
    if amb and warn:
        warnings.warn(
            f"{len(amb)} near-degenerate branch assignments (first at g={amb[0][0]:.4g}, "
            f"label {amb[0][1]}); refine the g grid",
            AmbiguousAssignmentWarning,
            stacklevel=2,
        )
    return LevelSweep(p, np.array(g_out), np.array(cols).T, n_max, amb)

