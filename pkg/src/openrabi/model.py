"""
Quantum Rabi model in the number-parity basis.

The bosonic mode b = sigma^x a commutes with the total parity P, so the
Hilbert space splits into two parity sectors, each spanned by number states
|m, p>, m = 0..n_max.  Every operator on the full space is stored with the
p = +1 block first and the p = -1 block second, ascending m inside a block.

Bare (cavity number, qubit) labels map onto (m, p) labels by

    |n, g>  <->  |n, (-1)^n>
    |n, e>  <->  |n, (-1)^(n+1)>

and all qubit observables are derived from that correspondence.
"""

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

__all__ = [
    "ModelParams",
    "Parity",
    "TruncationConfig",
    "BareStateLabel",
    "as_truncation",
    "parity_of_bare_state",
    "bare_to_number_parity",
    "number_parity_to_bare",
    "full_index",
    "sector_of_index",
    "build_closed_parity_hamiltonian",
    "build_phenomenological_hamiltonian",
    "build_jc_block",
    "full_space_hamiltonian",
    "annihilation_operator",
    "number_operator",
    "parity_operator",
    "sigma_z_operator",
    "basis_projector",
]


class Parity(IntEnum):
    """Overall Z2 parity sector; enters formulas only as a sign."""

    EVEN = 1
    ODD = -1

    @classmethod
    def coerce(cls, p):
        if isinstance(p, str):
            p = {"+": 1, "-": -1, "+1": 1, "-1": -1}.get(p.strip(), p)
        try:
            return cls(int(p))
        except (TypeError, ValueError):
            raise ValueError(f"parity must be +1 or -1, got {p!r}") from None

    @property
    def symbol(self):
        return "+" if self is Parity.EVEN else "-"


@dataclass(frozen=True)
class ModelParams:
    """Physical rates of the open Rabi model, all in units of nu_c.

    Attributes
    ----------
    nu_c : float
        Cavity frequency.
    nu_q : float
        Qubit frequency.
    g : float
        Light-matter coupling. Must be non-negative; the spectrum only
        depends on |g| because g -> -g is the unitary P_c.
    kappa_c2 : float
        Two-photon relaxation rate.
    """

    nu_c: float = 1.0
    nu_q: float = 0.8
    g: float = 0.0
    kappa_c2: float = 0.0

    def __post_init__(self):
        if not self.nu_c > 0:
            raise ValueError(f"nu_c must be positive, got {self.nu_c}")
        if self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g}")
        if self.kappa_c2 < 0:
            raise ValueError(f"kappa_c2 must be non-negative, got {self.kappa_c2}")
        for name in ("nu_c", "nu_q", "g", "kappa_c2"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def replace(self, **changes) -> "ModelParams":
        fields = dict(nu_c=self.nu_c, nu_q=self.nu_q, g=self.g, kappa_c2=self.kappa_c2)
        fields.update(changes)
        return ModelParams(**fields)

    def closed(self) -> "ModelParams":
        return self.replace(kappa_c2=0.0)


@dataclass(frozen=True)
class TruncationConfig:
    """Boson cutoff: number states m = 0..n_max are kept in each parity block."""

    n_max: int

    def __post_init__(self):
        if int(self.n_max) != self.n_max:
            raise ValueError(f"n_max must be an integer, got {self.n_max!r}")
        if self.n_max < 2:
            raise ValueError(f"n_max must be >= 2, got {self.n_max}")

    @property
    def block_dim(self) -> int:
        return self.n_max + 1

    @property
    def full_dim(self) -> int:
        return 2 * (self.n_max + 1)


def as_truncation(trunc) -> TruncationConfig:
    """Accept a TruncationConfig or a bare integer cutoff."""
    if isinstance(trunc, TruncationConfig):
        return trunc
    return TruncationConfig(int(trunc))


@dataclass(frozen=True)
class BareStateLabel:
    """Cavity photon number n and qubit state 'g' or 'e'."""

    n: int
    qubit: str

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"photon number must be >= 0, got {self.n}")
        if self.qubit not in ("g", "e"):
            raise ValueError(f"qubit must be 'g' or 'e', got {self.qubit!r}")

    @property
    def parity(self) -> Parity:
        return parity_of_bare_state(self)

    @classmethod
    def parse(cls, text: str) -> "BareStateLabel":
        """Parse strings like ``"2,g"`` or ``"3e"``."""
        s = text.replace(" ", "").replace(",", "")
        if len(s) < 2 or not s[:-1].isdigit():
            raise ValueError(f"cannot parse bare state {text!r}; expected 'n,g' or 'n,e'")
        return cls(int(s[:-1]), s[-1])


def parity_of_bare_state(label: BareStateLabel) -> Parity:
    sign = (-1) ** label.n if label.qubit == "g" else (-1) ** (label.n + 1)
    return Parity(sign)


def bare_to_number_parity(label: BareStateLabel):
    """Return the (m, p) label of a bare state."""
    return label.n, parity_of_bare_state(label)


def number_parity_to_bare(m: int, p) -> BareStateLabel:
    p = Parity.coerce(p)
    qubit = "g" if p == (-1) ** m else "e"
    return BareStateLabel(m, qubit)


def full_index(m: int, p, trunc) -> int:
    """Position of |m, p> in the block-ordered full space."""
    trunc = as_truncation(trunc)
    if not 0 <= m <= trunc.n_max:
        raise IndexError(f"m={m} outside cutoff n_max={trunc.n_max}")
    return m if Parity.coerce(p) == Parity.EVEN else trunc.block_dim + m


def sector_of_index(i: int, trunc):
    """Inverse of :func:`full_index`; returns (m, Parity)."""
    trunc = as_truncation(trunc)
    d = trunc.block_dim
    return (i, Parity.EVEN) if i < d else (i - d, Parity.ODD)


def _block_diagonal(params, p, n_max):
    m = np.arange(n_max + 1)
    return m * params.nu_c - 0.5 * int(p) * params.nu_q * (-1.0) ** m


def build_closed_parity_hamiltonian(params: ModelParams, p, trunc) -> np.ndarray:
    """Closed Rabi Hamiltonian restricted to parity sector ``p``.

    Diagonal m*nu_c - (p/2) nu_q (-1)^m, off-diagonal g*sqrt(m+1) coupling
    m and m+1.  Returned as a dense complex array (with zero imaginary part)
    of shape (n_max+1, n_max+1).
    """
    p = Parity.coerce(p)
    n_max = as_truncation(trunc).n_max
    off = params.g * np.sqrt(np.arange(1, n_max + 1))
    h = np.diag(_block_diagonal(params, p, n_max)).astype(complex)
    h += np.diag(off, 1) + np.diag(off, -1)
    return h


def build_phenomenological_hamiltonian(params: ModelParams, p, trunc) -> np.ndarray:
    """Closed block plus the two-photon decay term -i kappa_c2 m(m-1) on the diagonal."""
    h = build_closed_parity_hamiltonian(params, p, trunc)
    if params.kappa_c2 == 0:
        return h
    m = np.arange(h.shape[0])
    h[m, m] += -1j * params.kappa_c2 * m * (m - 1)
    return h


def build_jc_block(params: ModelParams, n: int) -> np.ndarray:
    """2x2 phenomenological JC block on the doublet {|n-1, e>, |n, g>}."""
    if n < 1:
        raise ValueError("JC doublets start at n=1; the n=0 singlet has no 2x2 block")
    nu_c, nu_q, g, k = params.nu_c, params.nu_q, params.g, params.kappa_c2
    c = g * np.sqrt(n)
    return np.array(
        [
            [(n - 1) * nu_c + nu_q / 2 - 1j * (n - 1) * (n - 2) * k, c],
            [c, n * nu_c - nu_q / 2 - 1j * (n - 1) * n * k],
        ],
        dtype=complex,
    )


# ---------------------------------------------------------------------------
# full-space operators (p=+1 block, then p=-1 block)


def _blockdiag(a, b):
    d = a.shape[0]
    out = np.zeros((2 * d, 2 * d), dtype=np.result_type(a, b))
    out[:d, :d] = a
    out[d:, d:] = b
    return out


def full_space_hamiltonian(params: ModelParams, trunc, phenomenological=True) -> np.ndarray:
    """H_s (or H_s,ef when ``phenomenological``) over both parity sectors."""
    build = build_phenomenological_hamiltonian if phenomenological else build_closed_parity_hamiltonian
    return _blockdiag(build(params, Parity.EVEN, trunc), build(params, Parity.ODD, trunc))


def annihilation_operator(trunc) -> np.ndarray:
    """b on the full space. b|m,p> = sqrt(m)|m-1,p>: it never changes parity."""
    d = as_truncation(trunc).block_dim
    b = np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex)
    return _blockdiag(b, b)


def number_operator(trunc) -> np.ndarray:
    d = as_truncation(trunc).block_dim
    n = np.diag(np.arange(d, dtype=float)).astype(complex)
    return _blockdiag(n, n)


def parity_operator(trunc) -> np.ndarray:
    d = as_truncation(trunc).block_dim
    return np.diag(np.r_[np.ones(d), -np.ones(d)]).astype(complex)


def sigma_z_operator(trunc) -> np.ndarray:
    """sigma^z = -(-1)^(b^dag b) P, diagonal in the number-parity basis."""
    d = as_truncation(trunc).block_dim
    m = np.arange(d)
    sz_plus = -((-1.0) ** m)
    return np.diag(np.r_[sz_plus, -sz_plus]).astype(complex)


def basis_projector(label, trunc) -> np.ndarray:
    """Density matrix |s><s| for a bare label or an (m, p) tuple."""
    trunc = as_truncation(trunc)
    if isinstance(label, str):
        label = BareStateLabel.parse(label)
    if isinstance(label, BareStateLabel):
        m, p = bare_to_number_parity(label)
    else:
        m, p = label
    rho = np.zeros((trunc.full_dim, trunc.full_dim), dtype=complex)
    i = full_index(m, p, trunc)
    rho[i, i] = 1.0
    return rho
