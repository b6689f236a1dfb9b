"""Scenario assembly: wire a gauge/parameter choice into dressed jump
operators and a ready-to-run correlation context, plus the parameter bundles
that reproduce the reference figures.

Units at this boundary: configs and CSV columns quote rates in g and grids in
g (detuning) or 1/g (delay), matching the figure captions; everything
internal is in omega0 units.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict

import numpy as np

from . import correlations as corr
from .bloch_siegert import BsParams, bs_spectrum
from .dressing import (DressedBasis, JumpOperator, diagonalize, dressed_matrix,
                       frequency_resolved_jumps, jump_operator, match_labels,
                       transition_strengths)
from .dynamics import (BathModel, EvolutionSpec, compile_generator, evolve_until_periodic,
                       steady_state)
from .hilbert import SpaceDescriptor, fock_space, pauli
from .models import (GaugeChoice, ModelParams, PumpSpec, build_hamiltonian,
                     quadrature_pi)

TAU_STORE_STEP = 2 * np.pi / 32        # stored correlation step, omega0 units
SAMPLES_PER_PERIOD = 20
DEFAULT_OMEGA_GRID = (-2.5, 2.5, 1001)  # detuning window in g
PSEUDO_STEADY_TOL = 1e-6
DEFAULT_T_END_G = 550.0                # undriven/incoherent integration cap, units 1/g
COHERENT_T_END_G = 2200.0              # drive turn-on cap; 1e-6 periodicity needs ~760/g

# adiabatic transition labels of the reference figures: (upper, lower) state
TRANSITION_LABELS = {"I": (1, 0), "II": (3, 1), "III": (2, 0)}


@dataclass(frozen=True)
class Truncation:
    """Two-stage truncation: diagonalize at n_fock, evolve n_keep dressed states."""

    n_fock: int = 50
    n_keep: int = 24

    def __post_init__(self):
        if not 2 <= self.n_fock:
            raise ValueError("n_fock must be at least 2")
        if not 1 <= self.n_keep <= 2 * self.n_fock:
            raise ValueError("n_keep must lie in 1..2*n_fock")


@dataclass
class PreparedModel:
    """Gauge choice realized on a space: dressed basis plus jump machinery."""

    params: ModelParams
    choice: GaugeChoice
    truncation: Truncation
    space: SpaceDescriptor
    basis: DressedBasis
    x_plus: JumpOperator
    resolved_jumps: list
    tls_jump: JumpOperator | None


def prepare_model(choice: GaugeChoice, params: ModelParams,
                  truncation: Truncation = Truncation()) -> PreparedModel:
    """Diagonalize the chosen Hamiltonian and build its dressed jump operators."""
    space = fock_space(truncation.n_fock)
    h = build_hamiltonian(choice, params, space)
    basis = diagonalize(h, truncation.n_keep)
    pi = quadrature_pi(choice, params, space)
    xp = jump_operator(basis, pi)
    resolved = frequency_resolved_jumps(basis, pi)
    tls = None
    if params.gamma > 0:
        tls = jump_operator(basis, pauli(space, "x"))
    return PreparedModel(params=params, choice=choice, truncation=truncation,
                         space=space, basis=basis, x_plus=xp,
                         resolved_jumps=resolved, tls_jump=tls)


def evolution_spec(pm: PreparedModel, bath_kind: str = "flat", *,
                   t_end: float | None = None, resolved: bool | None = None,
                   store_stride: int = 1) -> EvolutionSpec:
    """EvolutionSpec for a prepared model; rates already in omega0 units."""
    p = pm.params
    bath = BathModel(kind=bath_kind, kappa=p.kappa, omega_ref=p.omega_c)
    use_resolved = bath_kind == "ohmic" if resolved is None else resolved
    pump = p.pump
    if pump.kind == "coherent" and pump.omega_L is None:
        pump = PumpSpec(kind="coherent", Omega_d=pump.Omega_d,
                        omega_L=p.laser_frequency, rwa_drive=pump.rwa_drive)
    if t_end is None:
        t_end = DEFAULT_T_END_G / p.g if p.g > 0 else 100.0
    return EvolutionSpec(
        hamiltonian=pm.basis.energies,
        jumps=pm.resolved_jumps if use_resolved else pm.x_plus,
        bath=bath, pump=pump, tls_jump=pm.tls_jump, tls_rate=p.gamma,
        t_end=t_end, store_stride=store_stride)


def prepare_scenario(pm: PreparedModel, bath_kind: str = "flat", *,
                     t_end: float | None = None,
                     pseudo_tol: float = PSEUDO_STEADY_TOL) -> corr.PreparedScenario:
    """Bring the model to its (pseudo-)steady state, ready for correlations."""
    p = pm.params
    if t_end is None and p.pump.kind == "coherent" and p.g > 0:
        t_end = COHERENT_T_END_G / p.g
    spec = evolution_spec(pm, bath_kind, t_end=t_end)
    gen = compile_generator(spec)
    sc = corr.PreparedScenario(
        generator=gen, x_plus=pm.x_plus.matrix, kind=p.pump.kind,
        omega_L=p.laser_frequency, coupling_g=p.g, kappa=p.kappa,
        tau_step=TAU_STORE_STEP)
    if p.pump.kind == "coherent":
        n = pm.truncation.n_keep
        rho0 = np.zeros((n, n), dtype=complex)
        rho0[0, 0] = 1.0
        period = 2 * np.pi / spec.pump.omega_L
        _, stimes, sstates = evolve_until_periodic(
            spec, rho0, period, samples_per_period=SAMPLES_PER_PERIOD,
            tol=pseudo_tol)
        sc.sample_times, sc.sample_states, sc.period = stimes, sstates, period
        # commensurate tau grid: the drive phase repeats over exactly
        # SAMPLES_PER_PERIOD stored steps, so two-time propagation can reuse
        # one period's worth of step propagators
        sc.tau_step = period / SAMPLES_PER_PERIOD
    else:
        sc.rho_ss = steady_state(gen)
        sc.kind = "incoherent" if p.pump.kind == "incoherent" else "none"
    return sc


def steady_n_cav(pm: PreparedModel, bath_kind: str = "flat") -> float:
    """Steady-state excitation number under the model's pump."""
    gen = compile_generator(evolution_spec(pm, bath_kind))
    return corr.n_cav(steady_state(gen), pm.x_plus)


def detuning_grid(start_g: float, stop_g: float, points: int) -> np.ndarray:
    if points < 2 or not stop_g > start_g:
        raise ValueError("detuning grid must be increasing with >= 2 points")
    return np.linspace(start_g, stop_g, points)


def tau_grid_for(pm_or_g, tau_max_g: float, tau_step: float = TAU_STORE_STEP) -> np.ndarray:
    """tau grid (omega0 units) on the stored step covering tau_max_g / g."""
    g = pm_or_g if isinstance(pm_or_g, float) else pm_or_g.params.g
    n = max(1, int(np.floor(tau_max_g / g / tau_step)))
    return np.arange(n + 1) * tau_step


def scenario_tau_grid(sc: corr.PreparedScenario, tau_max_g: float) -> np.ndarray:
    """tau grid aligned with a prepared scenario's stored step."""
    return tau_grid_for(sc.coupling_g, tau_max_g, sc.tau_step)


# ---------------------------------------------------------------------------
# sweeps (reference-figure panels a-c)


def eigenvalue_sweep(etas, n_levels: int = 6, *, gauge: str = "dipole",
                     n_fock: int = 200) -> np.ndarray:
    """Lowest n_levels eigenvalues (ground-shifted, omega0 units) vs eta."""
    out = np.empty((len(etas), n_levels))
    for i, eta in enumerate(etas):
        params = ModelParams.from_g_units(eta)
        pm_choice = GaugeChoice(gauge=gauge, corrected=gauge != "coulomb_naive")
        space = fock_space(n_fock)
        h = build_hamiltonian(pm_choice, params, space)
        basis = diagonalize(h, n_levels)
        out[i] = basis.energies
    return out


def ncav_sweep(etas, *, corrected: bool, kappa_g: float = 0.25,
               P_inc_g: float = 0.01, truncation: Truncation = Truncation(),
               gauge: str = "dipole") -> np.ndarray:
    """Steady-state N_cav vs eta under weak incoherent pumping."""
    out = np.empty(len(etas))
    for i, eta in enumerate(etas):
        params = ModelParams.from_g_units(eta, kappa_g=kappa_g, P_inc_g=P_inc_g,
                                          pump_kind="incoherent")
        pm = prepare_model(GaugeChoice(gauge=gauge, corrected=corrected), params, truncation)
        out[i] = steady_n_cav(pm)
    return out


def strengths_sweep(etas, *, corrected: bool,
                    labels: tuple[str, ...] = ("I", "II", "III"),
                    truncation: Truncation = Truncation()) -> dict[str, np.ndarray]:
    """|P'|^2 of the labeled transitions vs eta, with adiabatic label tracking
    so the curves stay continuous across the states-2/3 level crossing."""
    etas = np.asarray(etas, dtype=float)
    n_track = max(max(pair) for pair in TRANSITION_LABELS.values()) + 3
    out = {lab: np.empty(len(etas)) for lab in labels}
    prev_states = None  # columns in adiabatic order
    adiabatic = np.arange(n_track)
    for i, eta in enumerate(etas):
        params = ModelParams.from_g_units(eta)
        pm = prepare_model(GaugeChoice("dipole", corrected=corrected), params, truncation)
        states = pm.basis.states[:, :n_track]
        if prev_states is not None:
            perm = match_labels(prev_states, states)
            adiabatic = perm  # adiabatic label -> current sorted index
        prev_states = states[:, adiabatic]
        s = transition_strengths(pm.basis, quadrature_pi(pm.choice, params, pm.space))
        for lab in labels:
            hi, lo = TRANSITION_LABELS[lab]
            out[lab][i] = s[adiabatic[lo], adiabatic[hi]]
    return out


def find_level_crossing(eta_lo: float = 0.3, eta_hi: float = 0.5, *,
                        states: tuple[int, int] = (2, 3), n_fock: int = 50,
                        tol: float = 1e-4) -> float:
    """Locate the eta where the energy-sorted states swap parity character
    (an exact crossing; the gap never closes to zero off the true point)."""
    from .hilbert import parity_operator

    def parity_of_state(eta, idx):
        params = ModelParams.from_g_units(eta)
        space = fock_space(n_fock)
        basis = diagonalize(build_hamiltonian(GaugeChoice("dipole"), params, space),
                            max(states) + 1)
        v = basis.states[:, idx]
        return float((v.conj() @ parity_operator(space).entries @ v).real)

    lo, hi = eta_lo, eta_hi
    p_lo = parity_of_state(lo, states[0])
    p_hi = parity_of_state(hi, states[0])
    if p_lo * p_hi > 0:
        raise ValueError(f"no parity swap of state {states[0]} in [{eta_lo}, {eta_hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if parity_of_state(mid, states[0]) * p_lo > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# scenario configs (CLI `run`) and figure bundles (`reproduce`)


@dataclass
class Table:
    """One CSV in the making: independent column plus labeled series."""

    name: str
    independent: tuple[str, np.ndarray]
    series: list[tuple[str, np.ndarray]]


@dataclass
class Scenario:
    """Declarative scenario (the config-file unit of work)."""

    name: str
    gauge: str = "dipole"
    corrected: bool = True
    eta: float = 0.5
    kappa_g: float = 0.25
    gamma_g: float = 0.0
    bath: str = "flat"
    pump: str = "none"
    P_inc_g: float = 0.0
    Omega_d_g: float = 0.0
    rwa_drive: bool = True
    n_fock: int = 50
    n_keep: int = 24
    outputs: tuple[str, ...] = ("spectrum",)
    omega_min_g: float = DEFAULT_OMEGA_GRID[0]
    omega_max_g: float = DEFAULT_OMEGA_GRID[1]
    omega_points: int = DEFAULT_OMEGA_GRID[2]
    tau_max_g: float = 25.0
    eta_values: tuple[float, ...] = ()
    normalization: str = "raw"

    KNOWN_OUTPUTS = ("spectrum", "g2", "n_cav", "eigenvalues", "strengths")

    def validate(self) -> None:
        GaugeChoice(self.gauge, self.corrected)
        Truncation(self.n_fock, self.n_keep)
        if self.pump not in ("none", "incoherent", "coherent"):
            raise ValueError(f"scenario {self.name}: unknown pump {self.pump!r}")
        if self.bath not in ("flat", "ohmic"):
            raise ValueError(f"scenario {self.name}: unknown bath {self.bath!r}")
        for o in self.outputs:
            if o not in self.KNOWN_OUTPUTS:
                raise ValueError(f"scenario {self.name}: unknown output {o!r}")
        if not self.outputs:
            raise ValueError(f"scenario {self.name}: empty outputs")
        if {"spectrum"} & set(self.outputs):
            detuning_grid(self.omega_min_g, self.omega_max_g, self.omega_points)
        if {"g2"} & set(self.outputs) and self.tau_max_g <= 0:
            raise ValueError(f"scenario {self.name}: tau_max_g must be positive")
        if {"n_cav", "eigenvalues", "strengths"} & set(self.outputs):
            ev = self.eta_values or (self.eta,)
            if not all(b > a for a, b in zip(ev, ev[1:])):
                raise ValueError(f"scenario {self.name}: eta_values must increase")

    def params(self, eta: float | None = None) -> ModelParams:
        return ModelParams.from_g_units(
            self.eta if eta is None else eta, kappa_g=self.kappa_g,
            gamma_g=self.gamma_g, P_inc_g=self.P_inc_g if self.pump == "incoherent" else 0.0,
            Omega_d_g=self.Omega_d_g if self.pump == "coherent" else 0.0,
            pump_kind=self.pump, rwa_drive=self.rwa_drive)

    def scenario_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def run(self) -> list[Table]:
        self.validate()
        tables: list[Table] = []
        trunc = Truncation(self.n_fock, self.n_keep)
        choice = GaugeChoice(self.gauge, self.corrected)
        etas = np.array(self.eta_values or (self.eta,))

        if {"spectrum", "g2"} & set(self.outputs):
            pm = prepare_model(choice, self.params(), trunc)
            sc = prepare_scenario(pm, self.bath)
            if "spectrum" in self.outputs:
                grid = detuning_grid(self.omega_min_g, self.omega_max_g, self.omega_points)
                spec = corr.cavity_spectrum(sc, grid, normalization=self.normalization)
                tables.append(Table(
                    name=f"{self.name}_spectrum",
                    independent=("omega_minus_omegaL_over_g", spec.detuning_grid),
                    series=[(choice.label, spec.values)]))
            if "g2" in self.outputs:
                tg = scenario_tau_grid(sc, self.tau_max_g)
                g2 = corr.g2_averaged(sc, tg)
                tables.append(Table(
                    name=f"{self.name}_g2",
                    independent=("tau_g", g2.tau_grid),
                    series=[(choice.label, g2.values)]))

        if "eigenvalues" in self.outputs:
            ev = eigenvalue_sweep(etas, gauge=self.gauge, n_fock=self.n_fock)
            tables.append(Table(
                name=f"{self.name}_eigenvalues", independent=("eta", etas),
                series=[(f"E{j}", ev[:, j]) for j in range(ev.shape[1])]))

        if "n_cav" in self.outputs:
            nc = ncav_sweep(etas, corrected=self.corrected, kappa_g=self.kappa_g,
                            P_inc_g=self.P_inc_g or 0.01, truncation=trunc,
                            gauge=self.gauge)
            tables.append(Table(
                name=f"{self.name}_ncav", independent=("eta", etas),
                series=[(choice.label, nc)]))

        if "strengths" in self.outputs:
            st = strengths_sweep(etas, corrected=self.corrected, truncation=trunc)
            tables.append(Table(
                name=f"{self.name}_strengths", independent=("eta", etas),
                series=[(f"{lab}_{choice.label}", st[lab]) for lab in ("I", "II", "III")]))

        return tables


# ---------------------------------------------------------------------------
# built-in figure bundles


FIG_ETA_VALUES = (0.05, 0.1, 0.3, 0.5)
FIG_KAPPA_G = 0.25
FIG_P_INC_G = 0.01
FIG_OMEGA_D_G = 0.1

_GAUGE_SERIES = (  # figure series: (key, gauge, corrected)
    ("DGC", "dipole", True),
    ("DG", "dipole", False),
    ("CGC", "coulomb", True),
    ("CG", "coulomb_naive", False),
)


def _emission_scenarios(tag: str, pump: str, *, eta: float = 0.5,
                        omega_d_g: float = FIG_OMEGA_D_G, bath: str = "flat",
                        gauges=_GAUGE_SERIES, outputs=("spectrum", "g2"),
                        rwa: bool = True, p_inc_g: float = FIG_P_INC_G,
                        normalization: str = "unit-max") -> list[Scenario]:
    out = []
    for key, gauge, corrected in gauges:
        out.append(Scenario(
            name=f"{tag}_{key}", gauge=gauge, corrected=corrected, eta=eta,
            kappa_g=FIG_KAPPA_G, bath=bath, pump=pump, P_inc_g=p_inc_g,
            Omega_d_g=omega_d_g, rwa_drive=rwa, outputs=outputs,
            normalization=normalization))
    return out


def figure_scenarios(figure_id: str) -> list[Scenario]:
    """Scenario bundle reproducing one of the reference figures."""
    eta_fine = tuple(np.round(np.arange(0.01, 0.6001, 0.01), 4))
    bundles = {
        "fig1": (
            [Scenario(name="fig1_a_qrm", gauge="dipole", outputs=("eigenvalues",),
                      eta_values=eta_fine, n_fock=200),
             Scenario(name="fig1_a_jcm", gauge="jc", outputs=("eigenvalues",),
                      eta_values=eta_fine, n_fock=200)]
            + [Scenario(name=f"fig1_b_{k}", gauge="dipole", corrected=c,
                        pump="incoherent", P_inc_g=FIG_P_INC_G, kappa_g=FIG_KAPPA_G,
                        outputs=("n_cav",), eta_values=tuple(np.round(np.arange(0.05, 0.6001, 0.025), 4)))
               for k, c in (("DGC", True), ("DG", False))]
            + [Scenario(name=f"fig1_c_{k}", gauge="dipole", corrected=c,
                        outputs=("strengths",), eta_values=eta_fine)
               for k, c in (("DGC", True), ("DG", False))]),
        "fig2": [Scenario(name=f"fig2_eta{str(eta).replace('.', '')}_{k}",
                          gauge="dipole", corrected=c, eta=eta, kappa_g=FIG_KAPPA_G,
                          pump="incoherent", P_inc_g=FIG_P_INC_G,
                          outputs=("spectrum",), normalization="unit-max")
                 for eta in FIG_ETA_VALUES for k, c in (("DGC", True), ("DG", False))],
        "fig3": (_emission_scenarios("fig3_coh", "coherent")
                 + _emission_scenarios("fig3_inc", "incoherent")),
        "figS2": (_emission_scenarios("figS2_flat", "incoherent", bath="flat",
                                      outputs=("spectrum",))
                  + _emission_scenarios("figS2_ohmic", "incoherent", bath="ohmic",
                                        outputs=("spectrum",))),
        "figS3": sum((_emission_scenarios(f"figS3_Od{str(od).replace('.', '')}",
                                          "coherent", omega_d_g=od)
                      for od in (0.2, 0.3)), []),
        "figS4": (_emission_scenarios("figS4_cos", "coherent", rwa=False,
                                      gauges=_GAUGE_SERIES[:2])
                  + _emission_scenarios("figS4_rwa", "coherent", rwa=True,
                                        gauges=_GAUGE_SERIES[:2])),
        "figS6": [Scenario(name=f"figS6_eta{str(eta).replace('.', '')}_{k}",
                           gauge="dipole", corrected=c, eta=eta, kappa_g=FIG_KAPPA_G,
                           pump="incoherent", P_inc_g=0.00025,
                           outputs=("spectrum",), omega_min_g=-1.75, omega_max_g=1.75,
                           omega_points=701)
                  for eta in (0.05, 0.1) for k, c in (("DGC", True), ("DG", False))],
    }
    if figure_id not in bundles:
        raise KeyError(f"unknown figure id {figure_id!r}; "
                       f"available: {', '.join(sorted(bundles))}")
    return bundles[figure_id]


FIGURE_IDS = ("fig1", "fig2", "fig3", "figS2", "figS3", "figS4", "figS6")


def figS6_analytic_tables(figure_scenario_names=False) -> list[Table]:
    """Companion analytic curves for the weak-drive comparison figure."""
    out = []
    for eta in (0.05, 0.1):
        grid = detuning_grid(-1.75, 1.75, 701)
        for key, correctedness in (("bsGC", True), ("bs", False)):
            params = BsParams(eta=eta, kappa=FIG_KAPPA_G * eta, corrected=correctedness,
                              E_weak=0.00025 / FIG_KAPPA_G)
            s = bs_spectrum(params, grid)
            out.append(Table(
                name=f"figS6_eta{str(eta).replace('.', '')}_{key}",
                independent=("omega_minus_omegaL_over_g", grid),
                series=[(key, s.values)]))
    return out
