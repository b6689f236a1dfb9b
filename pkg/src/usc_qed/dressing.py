"""Dressed-state machinery: diagonalization with deterministic phases,
jump operators built from a quadrature, and transition strengths."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hilbert import OperatorMatrix

PARITY_CLEAN_TOL = 1e-12      # |C_jk| below this is zeroed (parity leakage)
FREQ_GROUP_TOL = 1e-9         # transitions within this (omega0 units) share a bin
DEGENERACY_TOL = 1e-10


class EigensolverError(RuntimeError):
    """Dense eigensolver failed to converge."""


@dataclass(frozen=True)
class DressedBasis:
    """Energy-sorted eigenpairs of a system Hamiltonian, ground energy shifted
    to zero, truncated to the n_keep lowest states."""

    energies: np.ndarray = field(repr=False)   # (n_keep,), ascending, E0 = 0
    states: np.ndarray = field(repr=False)     # (source_dim, n_keep) columns
    n_keep: int
    source_dim: int

    def transition_frequencies(self) -> np.ndarray:
        """Matrix of E_k - E_j."""
        e = self.energies
        return e[None, :] - e[:, None]


@dataclass(frozen=True)
class JumpOperator:
    """Dressed-basis jump operator; 'lowering' is strictly upper triangular in
    the energy-sorted basis (entries at k > j only)."""

    matrix: np.ndarray = field(repr=False)     # (n_keep, n_keep)
    direction: str = "lowering"

    def __post_init__(self):
        if self.direction not in ("lowering", "raising"):
            raise ValueError(f"direction must be lowering or raising, got {self.direction!r}")

    @property
    def raising_matrix(self) -> np.ndarray:
        """Conjugate-transpose partner of the stored matrix."""
        return self.matrix.conj().T

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Make each column's largest-magnitude component real positive (ties by
    lowest index). Deterministic for a given input matrix."""
    out = vecs.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        i = int(np.argmax(np.abs(col)))
        ph = col[i] / abs(col[i])
        out[:, c] = col * np.conj(ph)
    return out


def diagonalize(h: OperatorMatrix, n_keep: int,
                reference_states: np.ndarray | None = None) -> DressedBasis:
    """Diagonalize a Hermitian operator and keep the n_keep lowest states.

    Energies come out ascending with the ground state shifted to zero.  Within
    numerically degenerate groups the order is stabilized by overlap with
    ``reference_states`` (e.g. the previous step of a coupling sweep) when
    given, otherwise by the eigensolver's deterministic output order.
    """
    m = h.entries
    if np.max(np.abs(m - m.conj().T)) > 1e-10:
        raise ValueError("diagonalize requires a Hermitian operator")
    if not 1 <= n_keep <= h.space.dim:
        raise ValueError(f"n_keep={n_keep} outside 1..{h.space.dim}")
    try:
        energies, vecs = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(f"eigh failed: {exc}") from exc

    if reference_states is not None:
        # permute only inside degenerate groups, to follow the reference basis
        start = 0
        nref = reference_states.shape[1]
        while start < len(energies):
            stop = start + 1
            while stop < len(energies) and energies[stop] - energies[stop - 1] < DEGENERACY_TOL:
                stop += 1
            if stop - start > 1 and start < nref:
                cols = range(start, min(stop, nref))
                ref = reference_states[:, list(cols)]
                ov = np.abs(ref.conj().T @ vecs[:, start:stop])
                order = list(range(stop - start))
                taken = []
                for r in range(ov.shape[0]):
                    cand = int(np.argmax([ov[r, c] if c not in taken else -1.0
                                          for c in range(stop - start)]))
                    taken.append(cand)
                for c in range(stop - start):
                    if c not in taken:
                        taken.append(c)
                vecs[:, start:stop] = vecs[:, start:stop][:, taken]
                energies[start:stop] = energies[start:stop][taken]
            start = stop

    vecs = _fix_phases(vecs[:, :n_keep])
    energies = energies[:n_keep] - energies[0]
    return DressedBasis(energies=energies, states=vecs, n_keep=n_keep, source_dim=h.space.dim)


def dressed_matrix(basis: DressedBasis, op: OperatorMatrix) -> np.ndarray:
    """Operator expressed in the dressed basis: V^dag O V (n_keep x n_keep)."""
    if op.space.dim != basis.source_dim:
        raise ValueError(f"operator dim {op.space.dim} != basis source dim {basis.source_dim}")
    return basis.states.conj().T @ op.entries @ basis.states


def jump_operator(basis: DressedBasis, pi: OperatorMatrix) -> JumpOperator:
    """Lowering jump operator x+ = sum_{j, k>j} <j|Pi|k> |j><k|.

    Diagonal entries vanish by parity and are forced to zero; entries below
    the parity-cleanup threshold are zeroed to stop round-off leakage from
    accumulating over long evolutions.
    """
    c = dressed_matrix(basis, pi)
    x = np.triu(c, k=1)
    x[np.abs(x) < PARITY_CLEAN_TOL] = 0.0
    return JumpOperator(matrix=x, direction="lowering")


def frequency_resolved_jumps(basis: DressedBasis, pi: OperatorMatrix
                             ) -> list[tuple[float, np.ndarray]]:
    """Partition of x+ by transition frequency.

    Returns (Delta, component) pairs with Delta = E_k - E_j > 0 grouped within
    FREQ_GROUP_TOL; the components sum to the lumped jump operator exactly.
    """
    x = jump_operator(basis, pi).matrix
    n = basis.n_keep
    freqs = basis.transition_frequencies()
    entries = [(freqs[j, k], j, k) for j in range(n) for k in range(j + 1, n)
               if x[j, k] != 0.0]
    entries.sort(key=lambda t: (t[0], t[1], t[2]))
    out: list[tuple[float, np.ndarray]] = []
    i = 0
    while i < len(entries):
        j0 = i
        while i + 1 < len(entries) and entries[i + 1][0] - entries[j0][0] < FREQ_GROUP_TOL:
            i += 1
        group = entries[j0:i + 1]
        comp = np.zeros_like(x)
        for _, j, k in group:
            comp[j, k] = x[j, k]
        out.append((float(np.mean([d for d, _, _ in group])), comp))
        i += 1
    return out


def transition_strengths(basis: DressedBasis, pi: OperatorMatrix) -> np.ndarray:
    """Photodetection-rate weights |<j|Pi|k>/sqrt(2)|^2 as a symmetric table."""
    c = dressed_matrix(basis, pi)
    s = np.abs(c) ** 2 / 2.0
    s = np.triu(s, k=1)
    return s + s.T


def match_labels(reference_states: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Permutation aligning energy-sorted states to a reference basis by
    maximum overlap (greedy).  Used to keep figure labels (transition I/II/III)
    continuous across level crossings when sweeping eta; dynamics never uses it.
    """
    ov = np.abs(reference_states.conj().T @ states)
    n = ov.shape[0]
    perm = np.full(n, -1, dtype=int)
    used: set[int] = set()
    for r in np.argsort(-ov.max(axis=1)):
        order = np.argsort(-ov[r])
        for c in order:
            if int(c) not in used:
                perm[r] = int(c)
                used.add(int(c))
                break
    return perm
