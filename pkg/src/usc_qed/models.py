"""System Hamiltonians in the dipole and Coulomb gauges, the projected gauge
unitary, and the bath-coupling quadrature operators.

All frequencies are in units of the TLS transition frequency omega0 unless a
constructor says otherwise; rates quoted "in g units" in figure captions are
converted on entry (g = eta * omega0).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .hilbert import OperatorMatrix, SpaceDescriptor, annihilation, embed_fock, pauli

GAUGES = ("dipole", "coulomb", "coulomb_naive", "jc")


@dataclass(frozen=True)
class PumpSpec:
    """Excitation channel: none, incoherent (rate P_inc) or coherent laser drive."""

    kind: str = "none"
    P_inc: float = 0.0
    Omega_d: float = 0.0
    omega_L: float | None = None  # defaults to omega_c at use
    rwa_drive: bool = True

    def __post_init__(self):
        if self.kind not in ("none", "incoherent", "coherent"):
            raise ValueError(f"unknown pump kind {self.kind!r}")
        if self.P_inc < 0 or self.Omega_d < 0:
            raise ValueError("pump strengths must be nonnegative")
        if self.kind == "incoherent" and self.Omega_d != 0:
            raise ValueError("incoherent pump must not set Omega_d")
        if self.kind == "coherent" and self.P_inc != 0:
            raise ValueError("coherent pump must not set P_inc")


@dataclass(frozen=True)
class GaugeChoice:
    """Which gauge the system Hamiltonian is built in, and whether the
    bath-coupling/observable operators carry the gauge correction."""

    gauge: str = "dipole"
    corrected: bool = True

    def __post_init__(self):
        if self.gauge not in GAUGES:
            raise ValueError(f"unknown gauge {self.gauge!r}; choose from {GAUGES}")
        if self.gauge == "coulomb_naive" and self.corrected:
            raise ValueError("the naive Coulomb model has no corrected counterpart")

    @property
    def label(self) -> str:
        short = {"dipole": "DG", "coulomb": "CG", "coulomb_naive": "CG", "jc": "JC"}[self.gauge]
        if self.gauge in ("dipole", "coulomb") and self.corrected:
            return short + "C"
        return short


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters; single source for all derived couplings."""

    eta: float
    omega0: float = 1.0
    omega_c: float = 1.0
    kappa: float = 0.0          # cavity decay, omega0 units
    gamma: float = 0.0          # TLS decay, omega0 units
    pump: PumpSpec = field(default_factory=PumpSpec)

    def __post_init__(self):
        if self.omega0 <= 0 or self.omega_c <= 0:
            raise ValueError("omega0 and omega_c must be positive")
        if self.eta < 0 or self.kappa < 0 or self.gamma < 0:
            raise ValueError("eta, kappa and gamma must be nonnegative")
        if self.pump.kind == "coherent" and self.pump.Omega_d >= self.g > 0:
            warnings.warn(
                f"coherent drive Omega_d={self.pump.Omega_d:g} is not small against "
                f"g={self.g:g}; the dressed-state treatment assumes Omega_d << g",
                stacklevel=2,
            )

    @property
    def g(self) -> float:
        """Dipole-gauge coupling g = eta * omega0."""
        return self.eta * self.omega0

    @property
    def g_coulomb(self) -> float:
        """Coulomb-gauge coupling g_C = g * omega0 / omega_c."""
        return self.g * self.omega0 / self.omega_c

    @property
    def laser_frequency(self) -> float:
        return self.omega_c if self.pump.omega_L is None else self.pump.omega_L

    @classmethod
    def from_g_units(cls, eta: float, *, kappa_g: float = 0.0, gamma_g: float = 0.0,
                     P_inc_g: float = 0.0, Omega_d_g: float = 0.0, pump_kind: str = "none",
                     rwa_drive: bool = True, omega0: float = 1.0,
                     omega_c: float | None = None, omega_L: float | None = None) -> "ModelParams":
        """Build from rates quoted in units of g (the figure-caption convention)."""
        g = eta * omega0
        pump = PumpSpec(kind=pump_kind, P_inc=P_inc_g * g, Omega_d=Omega_d_g * g,
                        omega_L=omega_L, rwa_drive=rwa_drive)
        return cls(eta=eta, omega0=omega0, omega_c=omega0 if omega_c is None else omega_c,
                   kappa=kappa_g * g, gamma=gamma_g * g, pump=pump)

    def with_pump(self, pump: PumpSpec) -> "ModelParams":
        return replace(self, pump=pump)


def _fock_phase_functions(space: SpaceDescriptor, scale: float):
    """cos(scale*(a+a^dag)) and sin(scale*(a+a^dag)) on the Fock factor, by
    eigendecomposition (exact at machine precision for these dimensions)."""
    nf = space.n_fock
    q = np.diag(np.sqrt(np.arange(1, nf, dtype=float)), k=1)
    q = q + q.T
    evals, vecs = np.linalg.eigh(q)
    cos_f = (vecs * np.cos(scale * evals)) @ vecs.T
    sin_f = (vecs * np.sin(scale * evals)) @ vecs.T
    return cos_f.astype(complex), sin_f.astype(complex)


def build_dipole_qrm(params: ModelParams, space: SpaceDescriptor) -> OperatorMatrix:
    """Quantum Rabi Hamiltonian in the dipole gauge:
    omega_c a^dag a + (omega0/2) sigma_z + i g (a^dag - a) sigma_x."""
    a = annihilation(space).entries
    sz = pauli(space, "z").entries
    sx = pauli(space, "x").entries
    h = (params.omega_c * a.conj().T @ a
         + 0.5 * params.omega0 * sz
         + 1j * params.g * (a.conj().T - a) @ sx)
    return OperatorMatrix(space, h, hermitian=True)


def build_coulomb_qrm(params: ModelParams, space: SpaceDescriptor) -> OperatorMatrix:
    """Gauge-corrected Coulomb-gauge Hamiltonian, with field operators to all
    orders: omega_c a^dag a + (omega0/2){sigma_z cos(2 eta q) + sigma_y sin(2 eta q)},
    q = a + a^dag."""
    a = annihilation(space).entries
    sz = pauli(space, "z").entries
    sy = pauli(space, "y").entries
    cos_f, sin_f = _fock_phase_functions(space, 2.0 * params.eta)
    h = (params.omega_c * a.conj().T @ a
         + 0.5 * params.omega0 * (sz @ embed_fock(space, cos_f) + sy @ embed_fock(space, sin_f)))
    return OperatorMatrix(space, h, hermitian=True)


def build_coulomb_naive(params: ModelParams, space: SpaceDescriptor) -> OperatorMatrix:
    """Coulomb-gauge Hamiltonian truncated without regard for the gauge
    principle: omega_c a^dag a + (omega0/2) sigma_z + g_C (a + a^dag) sigma_y.

    At bare resonance a photon quadrature rotation maps this onto the dipole
    form, so the spectra coincide there; the model still breaks gauge
    invariance because that rotation turns the electric-field quadrature into
    the vector-potential one, so its dressed master equation (and, off
    resonance, its energies, since g_C = g omega0/omega_c) disagree with the
    gauge-corrected models."""
    a = annihilation(space).entries
    sz = pauli(space, "z").entries
    sy = pauli(space, "y").entries
    h = (params.omega_c * a.conj().T @ a
         + 0.5 * params.omega0 * sz
         + params.g_coulomb * (a + a.conj().T) @ sy)
    return OperatorMatrix(space, h, hermitian=True)


def build_jc(params: ModelParams, space: SpaceDescriptor) -> OperatorMatrix:
    """Jaynes-Cummings Hamiltonian (rotating-wave approximation on the dipole
    form; conserves excitation number)."""
    a = annihilation(space).entries
    sz = pauli(space, "z").entries
    sp = pauli(space, "plus").entries
    sm = pauli(space, "minus").entries
    h = (params.omega_c * a.conj().T @ a
         + 0.5 * params.omega0 * sz
         + 1j * params.g * (a.conj().T @ sm - a @ sp))
    return OperatorMatrix(space, h, hermitian=True)


def build_hamiltonian(choice: GaugeChoice, params: ModelParams,
                      space: SpaceDescriptor) -> OperatorMatrix:
    """System Hamiltonian for the requested gauge."""
    builder = {
        "dipole": build_dipole_qrm,
        "coulomb": build_coulomb_qrm,
        "coulomb_naive": build_coulomb_naive,
        "jc": build_jc,
    }[choice.gauge]
    return builder(params, space)


def gauge_unitary(params: ModelParams, space: SpaceDescriptor) -> OperatorMatrix:
    """Projected unitary U = exp(-i eta (a + a^dag) sigma_x) connecting the
    dipole- and Coulomb-gauge representations on the TLS subspace."""
    a = annihilation(space).entries
    sx = pauli(space, "x").entries
    m = params.eta * (a + a.conj().T) @ sx
    evals, vecs = np.linalg.eigh(m)
    u = (vecs * np.exp(-1j * evals)) @ vecs.conj().T
    return OperatorMatrix(space, u)


def quadrature_pi(choice: GaugeChoice, params: ModelParams,
                  space: SpaceDescriptor) -> OperatorMatrix:
    """Bath-coupling quadrature.

    Dipole gauge with the gauge correction uses i(a^dag - a) + 2 eta sigma_x
    (the displacement-field form); every other combination uses the electric
    field quadrature i(a^dag - a).
    """
    choice.__post_init__()  # re-validate (rejects naive+corrected)
    a = annihilation(space).entries
    pi = 1j * (a.conj().T - a)
    if choice.gauge == "dipole" and choice.corrected:
        pi = pi + 2.0 * params.eta * pauli(space, "x").entries
    return OperatorMatrix(space, pi, hermitian=True)
