"""Closed-form weak-excitation oracle from the Bloch-Siegert (BS) frame.

Everything here is perturbative in eta = g/omega0 (first order unless stated)
and serves as an independent cross-check on the full dressed-state numerics:
polariton states, quadrature matrix elements, decay rates, the two-Lorentzian
emission spectrum, and the polariton peak-area ratio.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .hilbert import OperatorMatrix, SpaceDescriptor, annihilation, pauli
from .correlations import SpectrumResult

WEA_PUMP_LIMIT = 0.05     # advisory: E_weak = P_inc/kappa below this
ETA_PERTURBATIVE = 0.15   # advisory validity of first-order expressions
STRONG_COUPLING_ALPHA = 2.0  # advisory g/kappa for the simplified spectrum


@dataclass(frozen=True)
class BsParams:
    """Inputs of the analytic model (rates in omega0 units)."""

    eta: float
    kappa: float
    omega0: float = 1.0
    corrected: bool = True
    E_weak: float = 0.0   # incoherent pump over kappa

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("eta must be nonnegative")
        if self.E_weak >= WEA_PUMP_LIMIT:
            warnings.warn(
                f"E_weak={self.E_weak:g} is not small; the weak-excitation "
                f"approximation assumes E_weak < {WEA_PUMP_LIMIT}", stacklevel=2)

    @property
    def g(self) -> float:
        return self.eta * self.omega0


def bs_hamiltonian(params: BsParams, space: SpaceDescriptor) -> OperatorMatrix:
    """Excitation-conserving Hamiltonian after eliminating counter-rotating
    terms: omega0(1+eta^2/2) sigma+ sigma- + omega0(1-eta^2/2) a^dag a
    + i g (a^dag sigma- - a sigma+)."""
    a = annihilation(space).entries
    sp = pauli(space, "plus").entries
    sm = pauli(space, "minus").entries
    w0, eta = params.omega0, params.eta
    h = (w0 * (1 + eta ** 2 / 2) * sp @ sm
         + w0 * (1 - eta ** 2 / 2) * a.conj().T @ a
         + 1j * params.g * (a.conj().T @ sm - a @ sp))
    return OperatorMatrix(space, h, hermitian=True)


def bs_polariton_states(eta: float) -> tuple[tuple[complex, complex], tuple[complex, complex]]:
    """First-order polariton coefficients ((c_e0, c_g1) for |+>, same for |->).

    |+> = [(1+eta/4)|e,0> + i(1-eta/4)|g,1>]/sqrt(2)
    |-> = [(1-eta/4)|e,0> - i(1+eta/4)|g,1>]/sqrt(2)
    Normalized to 1 + eta^2/16.
    """
    if eta >= ETA_PERTURBATIVE:
        warnings.warn(f"eta={eta:g} beyond the perturbative regime "
                      f"(< {ETA_PERTURBATIVE})", stacklevel=2)
    r = 1 / np.sqrt(2)
    plus = (r * (1 + eta / 4), 1j * r * (1 - eta / 4))
    minus = (r * (1 - eta / 4), -1j * r * (1 + eta / 4))
    return plus, minus


def bs_matrix_elements(eta: float, corrected: bool) -> tuple[float, float]:
    """(|P_{+G}|^2, |P_{-G}|^2) to first order in eta.

    Corrected: (1/4)(1 +- 5 eta/2); uncorrected: (1/4)(1 -+ 3 eta/2) — the
    asymmetry reverses with the gauge correction.
    """
    if corrected:
        return 0.25 * (1 + 2.5 * eta), 0.25 * (1 - 2.5 * eta)
    return 0.25 * (1 - 1.5 * eta), 0.25 * (1 + 1.5 * eta)


def bs_decay_rates(eta: float, kappa: float, corrected: bool) -> tuple[float, float]:
    """Polariton decay rates (Gamma_+, Gamma_-) = 2 kappa |P_{+-G}|^2.

    Raises when the first-order formula leaves its validity range (a rate
    would be nonpositive: eta >= 2/5 corrected, 2/3 uncorrected).
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    p_plus, p_minus = bs_matrix_elements(eta, corrected)
    g_plus, g_minus = 2 * kappa * p_plus, 2 * kappa * p_minus
    if g_plus <= 0 or g_minus <= 0:
        raise ValueError(
            f"first-order decay rates nonpositive at eta={eta:g} "
            f"(corrected={corrected}); outside the formula's validity")
    return g_plus, g_minus


def bs_peak_area_ratio(eta: float, corrected: bool) -> float:
    """Upper/lower polariton peak-area ratio to first order:
    1 + 5 eta (corrected), 1 - 3 eta (uncorrected)."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    return 1 + 5 * eta if corrected else 1 - 3 * eta


def bs_spectrum(params: BsParams, omega_grid_g: np.ndarray,
                form: str = "simplified") -> SpectrumResult:
    """Analytic weak-excitation cavity spectrum on a detuning grid (units g).

    'simplified' (strong coupling): two Lorentzians of width Gamma_+- at
    omega0 +- g, equal heights, area ratio Gamma_+/Gamma_-.  'exact' keeps the
    full susceptibility with the complex shifted splitting G.
    """
    if form not in ("simplified", "exact"):
        raise ValueError(f"unknown form {form!r}")
    eta, kappa, w0 = params.eta, params.kappa, params.omega0
    g = params.g
    if g > 0 and g / kappa <= STRONG_COUPLING_ALPHA and form == "simplified":
        warnings.warn(f"g/kappa={g / kappa:g} is not deep in strong coupling; "
                      "the simplified two-Lorentzian form degrades", stacklevel=2)
    gp, gm = bs_decay_rates(eta, kappa, params.corrected)
    omega_grid_g = np.asarray(omega_grid_g, dtype=float)
    w = w0 + omega_grid_g * g   # absolute frequency; laser reference at omega0

    if form == "simplified":
        s = (gp ** 2 / ((w - w0 - g) ** 2 + gp ** 2 / 4)
             + gm ** 2 / ((w - w0 + g) ** 2 + gm ** 2 / 4))
    else:
        e_weak = params.E_weak if params.E_weak > 0 else 1.0
        gc = kappa / 4
        big_g = np.sqrt(g ** 2 - (kappa / 4) ** 2 - 1j * g * (gp - gm) / 2 + 0j)

        def chi(sign):
            gs, go = (gp, gm) if sign > 0 else (gm, gp)
            num = -gc * np.sqrt(go) + np.sqrt(gs) * (1j * (w0 - sign * g - w) + go / 2)
            den = ((1j * (w0 + big_g - w) + kappa / 4)
                   * (1j * (w0 - big_g - w) + kappa / 4))
            return sign * e_weak * num / den

        s = np.real(np.sqrt(gp) * chi(+1) - np.sqrt(gm) * chi(-1))

    return SpectrumResult(detuning_grid=omega_grid_g, values=np.maximum(s, 0.0),
                          normalization="raw")
