"""Truncated TLS ⊗ Fock Hilbert space and the elementary operators on it.

Ordering convention (fixed, used everywhere): the TLS index is slow and the
Fock index fast, i.e. composite index = s * n_fock + n with s = 0 the TLS
ground state and s = 1 the excited state.  The global index 0 is therefore
the bare ground state |g, 0>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

HERMITICITY_TOL = 1e-12


@dataclass(frozen=True)
class SpaceDescriptor:
    """Dimensions of the truncated composite space (TLS slow, Fock fast)."""

    n_fock: int

    def __post_init__(self):
        if self.n_fock < 2:
            raise ValueError(f"n_fock must be >= 2, got {self.n_fock}")

    @property
    def dim(self) -> int:
        return 2 * self.n_fock

    def index(self, tls: int, fock: int) -> int:
        """Composite index of the product state |tls, fock>."""
        if not (0 <= tls < 2 and 0 <= fock < self.n_fock):
            raise ValueError(f"state ({tls}, {fock}) outside the space")
        return tls * self.n_fock + fock


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense complex operator on a composite space, with an advisory hermitian flag."""

    space: SpaceDescriptor
    entries: np.ndarray = field(repr=False)
    hermitian: bool = False

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=complex)
        if m.shape != (self.space.dim, self.space.dim):
            raise ValueError(
                f"matrix shape {m.shape} does not match space dim {self.space.dim}"
            )
        object.__setattr__(self, "entries", m)

    def check_hermitian(self, tol: float = HERMITICITY_TOL) -> None:
        """Validate the hermitian flag against the entries."""
        if self.hermitian:
            defect = np.max(np.abs(self.entries - self.entries.conj().T))
            if defect >= tol:
                raise ValueError(f"hermitian flag set but max |M - M^dag| = {defect:.3e}")

    @property
    def dagger(self) -> np.ndarray:
        return self.entries.conj().T


def fock_space(n_fock: int) -> SpaceDescriptor:
    """Composite space with n_fock photon states (dim = 2 * n_fock)."""
    return SpaceDescriptor(n_fock=int(n_fock))


def annihilation(space: SpaceDescriptor) -> OperatorMatrix:
    """Photon annihilation operator a (identity on the TLS factor).

    <n-1|a|n> = sqrt(n); the commutator [a, a^dag] carries the usual
    truncation defect of magnitude n_fock in the top Fock level.
    """
    a_f = np.diag(np.sqrt(np.arange(1, space.n_fock, dtype=float)), k=1).astype(complex)
    return OperatorMatrix(space, np.kron(np.eye(2), a_f))


_PAULI = {
    # basis order (g, e): sigma_z|e> = +|e>, sigma_z|g> = -|g>
    "z": np.array([[-1, 0], [0, 1]], dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, 1j], [-1j, 0]], dtype=complex),
    "plus": np.array([[0, 0], [1, 0]], dtype=complex),   # |e><g|
    "minus": np.array([[0, 1], [0, 0]], dtype=complex),  # |g><e|
}


def pauli(space: SpaceDescriptor, which: str) -> OperatorMatrix:
    """TLS operator (x, y, z, plus, minus) tensored with the Fock identity."""
    try:
        m2 = _PAULI[which]
    except KeyError:
        raise ValueError(f"unknown Pauli label {which!r}; use x, y, z, plus, minus") from None
    herm = which in ("x", "y", "z")
    return OperatorMatrix(space, np.kron(m2, np.eye(space.n_fock)), hermitian=herm)


def number_operator(space: SpaceDescriptor) -> OperatorMatrix:
    """Photon number operator a^dag a."""
    n_f = np.diag(np.arange(space.n_fock, dtype=float)).astype(complex)
    return OperatorMatrix(space, np.kron(np.eye(2), n_f), hermitian=True)


def parity_operator(space: SpaceDescriptor) -> OperatorMatrix:
    """Excitation parity exp(i pi (a^dag a + sigma^+ sigma^-)); diagonal +-1."""
    n_exc = np.arange(space.n_fock)[None, :] + np.array([0, 1])[:, None]
    return OperatorMatrix(space, np.diag(np.where(n_exc.ravel() % 2, -1.0, 1.0)).astype(complex),
                          hermitian=True)


def embed_tls(space: SpaceDescriptor, op2: np.ndarray) -> np.ndarray:
    """Embed a 2x2 TLS operator into the composite space."""
    return np.kron(np.asarray(op2, dtype=complex), np.eye(space.n_fock))


def embed_fock(space: SpaceDescriptor, op_f: np.ndarray) -> np.ndarray:
    """Embed an n_fock x n_fock photonic operator into the composite space."""
    return np.kron(np.eye(2), np.asarray(op_f, dtype=complex))


def extract_tls(space: SpaceDescriptor, mat: np.ndarray) -> np.ndarray:
    """Inverse of embed_tls for operators of the form A ⊗ I (reads one Fock slice)."""
    nf = space.n_fock
    return np.array([[mat[i * nf, j * nf] for j in range(2)] for i in range(2)])


def extract_fock(space: SpaceDescriptor, mat: np.ndarray) -> np.ndarray:
    """Inverse of embed_fock for operators of the form I ⊗ B (reads the TLS-ground block)."""
    nf = space.n_fock
    return mat[:nf, :nf].copy()
