"""
Closed-form Jaynes-Cummings spectrum with phenomenological two-photon decay.

Dropping the counter-rotating terms conserves the excitation number, so the
spectrum is the singlet |0, g> at -nu_q/2 plus 2x2 doublets
{|n-1, e>, |n, g>}.  Used as an analytic baseline for the Rabi recursion.
"""

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, Parity, as_truncation
from .spectrum import track_levels_over_sweep

__all__ = [
    "JcLevelPair",
    "JcComparison",
    "jc_eigenfrequencies",
    "jc_label_frequency",
    "jc_vs_rabi_comparison",
    "decay_slope",
]


@dataclass(frozen=True)
class JcLevelPair:
    """Doublet n >= 1.  ``omega_upper`` carries label (n, (-1)^n) and
    ``omega_lower`` label (n-1, (-1)^n)."""

    n: int
    omega_upper: complex
    omega_lower: complex

    @property
    def parity(self) -> Parity:
        return Parity((-1) ** self.n)

    @property
    def labels(self):
        return {(self.n, self.parity): self.omega_upper, (self.n - 1, self.parity): self.omega_lower}


def jc_eigenfrequencies(params: ModelParams, n: int):
    """Singlet frequency for n = 0, otherwise the doublet as a JcLevelPair.

    The square root is the principal branch.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if n == 0:
        return complex(-params.nu_q / 2)
    nu_c, nu_q, g, k = params.nu_c, params.nu_q, params.g, params.kappa_c2
    centre = (n - 0.5) * nu_c - 1j * (n - 1) ** 2 * k
    root = 0.5 * np.sqrt(complex((nu_c - nu_q - 2j * (n - 1) * k) ** 2 + 4 * g**2 * n))
    return JcLevelPair(n, complex(centre + root), complex(centre - root))


def jc_label_frequency(params: ModelParams, n_g: int, p) -> complex:
    """JC eigenfrequency carrying the Rabi-style label |n_g, p>."""
    p = Parity.coerce(p)
    if (-1) ** n_g == p:
        if n_g == 0:
            return jc_eigenfrequencies(params, 0)
        return jc_eigenfrequencies(params, n_g).omega_upper
    return jc_eigenfrequencies(params, n_g + 1).omega_lower


def decay_slope(g, kappa, window):
    """Least-squares slope d(kappa)/dg over g in ``window``."""
    g = np.asarray(g)
    sel = (g >= window[0] - 1e-12) & (g <= window[1] + 1e-12)
    if sel.sum() < 2:
        raise ValueError(f"need at least two grid points inside {window}")
    return float(np.polyfit(g[sel], np.asarray(kappa)[sel], 1)[0])


@dataclass
class JcComparison:
    g: np.ndarray
    labels: list
    omega_jc: np.ndarray  # (n_labels, n_g)
    omega_rabi: np.ndarray
    slope_window: tuple
    slope_jc: np.ndarray = field(default=None)
    slope_rabi: np.ndarray = field(default=None)
    ambiguities: list = field(default_factory=list)

    def plateaued(self, kappa_c2, rel=0.02):
        """Per label: |d kappa_JC / dg| < rel * kappa_c2 on the slope window."""
        return np.abs(self.slope_jc) < rel * kappa_c2


def jc_vs_rabi_comparison(
    params_template: ModelParams, g_grid, trunc, *, n_levels=4, parities=(1, -1), slope_window=None
) -> JcComparison:
    """JC closed forms next to tracked open-Rabi branches on one coupling grid.

    Slopes of the decay rate kappa = -Im(omega) are least-squares fits over
    ``slope_window`` (default: the upper half of the grid).
    """
    g_grid = np.asarray(g_grid, dtype=float)
    as_truncation(trunc)
    if slope_window is None:
        slope_window = (0.5 * (g_grid[0] + g_grid[-1]), g_grid[-1])
    labels, jc_rows, rabi_rows, amb = [], [], [], []
    for p in parities:
        p = Parity.coerce(p)
        sweep = track_levels_over_sweep(params_template, p, g_grid, trunc, n_levels=n_levels, warn=False)
        amb.extend((g, n, p) for g, n, *_ in sweep.ambiguities)
        for n in range(n_levels):
            labels.append((n, p))
            jc_rows.append([jc_label_frequency(params_template.replace(g=float(g)), n, p) for g in g_grid])
            rabi_rows.append(sweep.omega[n])
    omega_jc = np.array(jc_rows, dtype=complex)
    omega_rabi = np.array(rabi_rows, dtype=complex)
    slope_jc = np.array([decay_slope(g_grid, -row.imag, slope_window) for row in omega_jc])
    slope_rabi = np.array([decay_slope(g_grid, -row.imag, slope_window) for row in omega_rabi])
    return JcComparison(g_grid, labels, omega_jc, omega_rabi, tuple(slope_window), slope_jc, slope_rabi, amb)
