"""Master-equation assembly and integration in the dressed basis.

The generator is kept in a channel form that covers both the flat-bath
Lindblad dissipator and the frequency-resolved (generalized) dissipator:
each dissipation channel acts as

    rho -> (1/2) (A rho C^dag + C rho A^dag - C^dag A rho - rho A^dag C),

with C the bare jump operator and A its rate-weighted partner (A = rate * C
for a flat bath, A = sum_w Gamma(w) X+(w) for a structured one).  Evolution
uses classical fixed-step RK4; grids are kept commensurate so two-time
propagations align with the stored trajectory exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .dressing import JumpOperator
from .models import PumpSpec

TRACE_TOL = 1e-8
HERM_TOL = 1e-9
POSITIVITY_FLOOR = -1e-8
STEPS_PER_FASTEST_PERIOD = 20


class EvolveInvariantError(RuntimeError):
    """A density-matrix invariant was violated during integration."""

    def __init__(self, step: int, time: float, invariant: str, value: float):
        self.step, self.time, self.invariant, self.value = step, time, invariant, value
        super().__init__(
            f"invariant {invariant!r} violated at step {step} (t={time:g}): {value:.3e}")


class DegenerateSteadyStateError(RuntimeError):
    """The static generator has a (numerically) degenerate null space."""


class PseudoSteadyStateNotReached(RuntimeError):
    """Periodic convergence was not reached before the end of the trajectory."""


@dataclass(frozen=True)
class BathModel:
    """Cavity reservoir: flat rate kappa, or Ohmic Gamma(w) = kappa * w / omega_ref."""

    kind: str = "flat"
    kappa: float = 0.0
    omega_ref: float = 1.0

    def __post_init__(self):
        if self.kind not in ("flat", "ohmic"):
            raise ValueError(f"unknown bath kind {self.kind!r}")
        if self.kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if self.omega_ref <= 0:
            raise ValueError("omega_ref must be positive")

    def rate(self, omega):
        """Decay rate at transition frequency omega (vectorized)."""
        if self.kind == "flat":
            return self.kappa * np.ones_like(np.asarray(omega, dtype=float))
        return self.kappa * np.asarray(omega, dtype=float) / self.omega_ref


def _as_matrix(op) -> np.ndarray:
    if isinstance(op, JumpOperator):
        return op.matrix
    return np.asarray(op, dtype=complex)


def _lmul(mat: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """mat @ rho, matrix or (B, n, n) batch (np.matmul broadcasts)."""
    return np.matmul(mat, rho)


def _rmul(rho: np.ndarray, mat: np.ndarray) -> np.ndarray:
    """rho @ mat, matrix or (B, n, n) batch."""
    return np.matmul(rho, mat)


class DissipationChannel:
    """One dissipation channel in weighted-pair form; callable on rho."""

    def __init__(self, plain: np.ndarray, weighted: np.ndarray | None = None,
                 rate: float | None = None):
        self.plain = np.asarray(plain, dtype=complex)
        if (weighted is None) == (rate is None):
            raise ValueError("give exactly one of weighted or rate")
        self.rate = rate
        if rate is not None:
            if rate < 0:
                raise ValueError("rate must be nonnegative")
            self.weighted = rate * self.plain
        else:
            self.weighted = np.asarray(weighted, dtype=complex)
        if self.plain.shape != self.weighted.shape or self.plain.ndim != 2:
            raise ValueError("channel operators must be square matrices of equal shape")
        # cached sandwich-free products
        self._cd = self.plain.conj().T
        self._ca = self.plain.conj().T @ self.weighted
        self._ac = self.weighted.conj().T @ self.plain

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """Channel action on a (batch of) matrices; traceless and
        Hermiticity-preserving on Hermitian input."""
        if self.rate is not None:
            t = _lmul(self.plain, rho)
            return (self.rate * _rmul(t, self._cd)
                    - 0.5 * (_lmul(self._ca, rho) + _rmul(rho, self._ac)))
        return 0.5 * (_rmul(_lmul(self.weighted, rho), self._cd)
                      + _rmul(_lmul(self.plain, rho), self.weighted.conj().T)
                      - _lmul(self._ca, rho) - _rmul(rho, self._ac))

    __call__ = apply


def lindblad_dissipator(jump, rate: float) -> DissipationChannel:
    """(rate/2) D[L] rho with D[O] rho = 2 O rho O^dag - rho O^dag O - O^dag O rho."""
    return DissipationChannel(_as_matrix(jump), rate=rate)


def generalized_dissipator(jumps: list[tuple[float, np.ndarray]],
                           bath: BathModel) -> DissipationChannel:
    """Frequency-resolved dissipator over a partition {(w, X+(w))} of one
    quadrature; reduces entrywise to the flat-bath Lindblad form when
    Gamma(w) is constant."""
    if not jumps:
        raise ValueError("empty jump partition")
    shape = np.asarray(jumps[0][1]).shape
    plain = np.zeros(shape, dtype=complex)
    weighted = np.zeros(shape, dtype=complex)
    for freq, comp in jumps:
        comp = np.asarray(comp, dtype=complex)
        if comp.shape != shape:
            raise ValueError("jump components differ in shape")
        g = float(bath.rate(freq))
        if g < 0:
            raise ValueError(f"negative rate Gamma({freq:g}) = {g:g}")
        plain = plain + comp
        weighted = weighted + g * comp
    return DissipationChannel(plain, weighted=weighted)


def incoherent_pump(x_minus, p_inc: float) -> DissipationChannel:
    """(P_inc/2) D[x-] rho; x- may be a raising matrix or a lowering
    JumpOperator (its conjugate transpose is used)."""
    if isinstance(x_minus, JumpOperator) and x_minus.direction == "lowering":
        mat = x_minus.raising_matrix
    else:
        mat = _as_matrix(x_minus)
    return DissipationChannel(mat, rate=p_inc)


def coherent_drive(jump, pump: PumpSpec, t: float) -> np.ndarray:
    """Drive Hamiltonian at time t built from the dressed x+- pair.

    RWA form (Omega_d/2)(x- e^{-i w_L t} + x+ e^{+i w_L t}); full form
    Omega_d cos(w_L t) (x- + x+).  Hermitian at every t.
    """
    if pump.kind != "coherent":
        raise ValueError("coherent_drive requires pump.kind == 'coherent'")
    if pump.omega_L is None:
        raise ValueError("pump.omega_L must be resolved before building the drive")
    xp = _as_matrix(jump)
    xm = xp.conj().T
    if pump.rwa_drive:
        c = 0.5 * pump.Omega_d * np.exp(-1j * pump.omega_L * t)
        return c * xm + np.conj(c) * xp
    return pump.Omega_d * np.cos(pump.omega_L * t) * (xm + xp)


@dataclass(frozen=True)
class DriveTerm:
    """Compiled coherent-drive data for the integrator."""

    x_plus: np.ndarray
    amplitude: float
    omega_L: float
    rwa: bool

    def hamiltonian_batch(self, t) -> np.ndarray:
        """H_drive(t) for a scalar t or a (B,) array of absolute times."""
        xp = self.x_plus
        xm = xp.conj().T
        t = np.asarray(t, dtype=float)
        if self.rwa:
            c = 0.5 * self.amplitude * np.exp(-1j * self.omega_L * t)
            c = c.reshape(t.shape + (1, 1)) if t.ndim else c
            return c * xm + np.conj(c) * xp
        c = self.amplitude * np.cos(self.omega_L * t)
        c = c.reshape(t.shape + (1, 1)) if t.ndim else c
        return c * (xm + xp)

    def apply(self, rho: np.ndarray, t) -> np.ndarray:
        """-i [H_drive(t), rho]; t may be a scalar or (B,) array for batches."""
        h = self.hamiltonian_batch(t)
        return -1j * (np.matmul(h, rho) - np.matmul(rho, h))


class Generator:
    """Right-hand side of the master equation in the dressed basis.

    The coherent part and the channels' anticommutator halves are merged into
    one non-Hermitian 'drift' matrix K (rhs = -i K rho + i rho K^dag
    + sandwich terms), which keeps the per-step matmul count low.
    """

    def __init__(self, energies: np.ndarray, channels: list[DissipationChannel],
                 drive: DriveTerm | None = None):
        self.energies = np.asarray(energies, dtype=float)
        self.channels = list(channels)
        self.drive = drive
        # -i K = -i diag(E) - (1/2) sum C^dag A  (anticommutator halves merged)
        self._minus_ik = -1j * np.diag(self.energies).astype(complex)
        for ch in channels:
            self._minus_ik = self._minus_ik - 0.5 * ch._ca
        self._sandwiches = []
        for ch in channels:
            if ch.rate is not None:
                self._sandwiches.append(("scalar", ch.rate * ch.plain, ch._cd))
            else:
                self._sandwiches.append(
                    ("pair", 0.5 * ch.weighted, ch._cd, 0.5 * ch.plain,
                     ch.weighted.conj().T))

    @property
    def n(self) -> int:
        return len(self.energies)

    @property
    def is_static(self) -> bool:
        return self.drive is None

    @property
    def max_frequency(self) -> float:
        return float(self.energies[-1] - self.energies[0])

    def rhs(self, rho: np.ndarray, t) -> np.ndarray:
        """d rho / dt for a single matrix or a (B, n, n) batch; for batches t
        is a (B,) array of absolute times (drive phases differ per member)."""
        mk = self._minus_ik
        if self.drive is not None:
            mk = mk - 1j * self.drive.hamiltonian_batch(t)
        out = np.matmul(mk, rho)
        out += np.matmul(rho, mk.conj().swapaxes(-1, -2) if mk.ndim == 3
                         else mk.conj().T)
        for s in self._sandwiches:
            if s[0] == "scalar":
                out += np.matmul(np.matmul(s[1], rho), s[2])
            else:
                out += np.matmul(np.matmul(s[1], rho), s[2])
                out += np.matmul(np.matmul(s[3], rho), s[4])
        return out

    def liouvillian_matrix(self) -> np.ndarray:
        """Dense superoperator acting on row-major vec(rho); static part only."""
        if not self.is_static:
            raise ValueError("liouvillian_matrix requires a time-independent generator")
        n = self.n
        eye = np.eye(n, dtype=complex)
        h = np.diag(self.energies).astype(complex)
        liou = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
        for ch in self.channels:
            a, c = ch.weighted, ch.plain
            liou += 0.5 * (np.kron(a, c.conj()) + np.kron(c, a.conj())
                           - np.kron(c.conj().T @ a, eye)
                           - np.kron(eye, (a.conj().T @ c).T))
        return liou


@dataclass
class EvolutionSpec:
    """Everything evolve() needs; hamiltonian must be diagonal (dressed basis)."""

    hamiltonian: np.ndarray
    jumps: JumpOperator | list[tuple[float, np.ndarray]]
    bath: BathModel
    pump: PumpSpec = field(default_factory=PumpSpec)
    tls_jump: JumpOperator | None = None
    tls_rate: float = 0.0
    t_end: float = 1.0
    dt: float | None = None
    store_stride: int = 1

    def __post_init__(self):
        h = np.asarray(self.hamiltonian)
        if h.ndim == 2:
            off = h - np.diag(np.diag(h))
            if np.max(np.abs(off)) > 1e-12:
                raise ValueError("dressed-basis hamiltonian must be diagonal")
            h = np.real(np.diag(h))
        self.energies = np.asarray(h, dtype=float)
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.dt is not None:
            if self.dt <= 0:
                raise ValueError("dt must be positive")
            lim = max_timestep(self.energies)
            if self.dt > lim * (1 + 1e-12):
                raise ValueError(
                    f"dt={self.dt:g} too coarse: must resolve the fastest "
                    f"transition, dt <= {lim:g}")

    @property
    def lumped_jump(self) -> np.ndarray:
        if isinstance(self.jumps, JumpOperator):
            return self.jumps.matrix
        return sum(comp for _, comp in self.jumps)


def max_timestep(energies: np.ndarray) -> float:
    """Largest allowed RK4 step: 20 steps per period of the fastest transition."""
    wmax = float(np.max(energies) - np.min(energies))
    if wmax <= 0:
        return np.inf
    return (2 * np.pi / wmax) / STEPS_PER_FASTEST_PERIOD


def compile_generator(spec: EvolutionSpec) -> Generator:
    """Assemble the channel-form generator from an evolution spec."""
    channels: list[DissipationChannel] = []
    if spec.bath.kappa > 0:
        if spec.bath.kind == "flat":
            channels.append(lindblad_dissipator(spec.lumped_jump, spec.bath.kappa))
        else:
            if isinstance(spec.jumps, JumpOperator):
                raise ValueError("a structured (ohmic) bath needs frequency-resolved jumps")
            channels.append(generalized_dissipator(spec.jumps, spec.bath))
    if spec.pump.kind == "incoherent" and spec.pump.P_inc > 0:
        channels.append(incoherent_pump(JumpOperator(spec.lumped_jump), spec.pump.P_inc))
    if spec.tls_jump is not None and spec.tls_rate > 0:
        channels.append(lindblad_dissipator(spec.tls_jump, spec.tls_rate))
    drive = None
    if spec.pump.kind == "coherent" and spec.pump.Omega_d > 0:
        if spec.pump.omega_L is None:
            raise ValueError("coherent pump needs an explicit omega_L here")
        drive = DriveTerm(x_plus=spec.lumped_jump, amplitude=spec.pump.Omega_d,
                          omega_L=spec.pump.omega_L, rwa=spec.pump.rwa_drive)
    return Generator(spec.energies, channels, drive)


def rk4_step(gen: Generator, rho: np.ndarray, t, dt: float) -> np.ndarray:
    """One classical RK4 step (works on single matrices and batches)."""
    k1 = gen.rhs(rho, t)
    k2 = gen.rhs(rho + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = gen.rhs(rho + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = gen.rhs(rho + dt * k3, t + dt)
    return rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class Trajectory:
    """Stored density matrices on a uniform time grid."""

    times: np.ndarray
    states: np.ndarray  # (m, n, n)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def expectation(self, op: np.ndarray) -> np.ndarray:
        """<op>(t) = Tr(rho(t) op) on the stored grid."""
        return np.einsum("tij,ji->t", self.states, np.asarray(op, dtype=complex))

    def sample_step(self) -> float:
        return float(self.times[1] - self.times[0])


def check_state_invariants(rho: np.ndarray, step: int, t: float) -> None:
    """Trace, Hermiticity and positivity checks with the standard tolerances."""
    tr = np.trace(rho)
    if abs(tr - 1.0) > TRACE_TOL:
        raise EvolveInvariantError(step, t, "trace", abs(tr - 1.0))
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERM_TOL:
        raise EvolveInvariantError(step, t, "hermiticity", herm)
    wmin = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    if wmin < POSITIVITY_FLOOR:
        raise EvolveInvariantError(step, t, "positivity", wmin)


def evolve(spec: EvolutionSpec, rho0: np.ndarray, *, t0: float = 0.0,
           check_invariants: bool = True) -> Trajectory:
    """Integrate the master equation with fixed-step RK4.

    Stores every ``spec.store_stride`` steps (including t0); the invariants
    (trace, Hermiticity, positivity) are validated at stored points and any
    violation aborts with the offending step and invariant.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if check_invariants:
        check_state_invariants(rho0, 0, t0)
    gen = compile_generator(spec)
    dt = spec.dt if spec.dt is not None else max_timestep(spec.energies)
    if not np.isfinite(dt):
        dt = spec.t_end / 100.0
    stride = max(1, int(spec.store_stride))
    # whole strides only, so the stored grid stays uniform
    n_steps = stride * max(1, int(np.ceil(spec.t_end / dt / stride - 1e-12)))
    times = [t0]
    states = [rho0.copy()]
    rho, t = rho0.copy(), t0
    for k in range(n_steps):
        rho = rk4_step(gen, rho, t, dt)
        t = t0 + (k + 1) * dt
        if (k + 1) % stride == 0:
            if check_invariants:
                check_state_invariants(rho, k + 1, t)
            times.append(t)
            states.append(rho.copy())
    return Trajectory(times=np.array(times), states=np.array(states))


def steady_state(spec_or_gen) -> np.ndarray:
    """Null vector of the static Liouvillian, trace-normalized.

    Raises DegenerateSteadyStateError when the null space is not
    one-dimensional within numerical resolution.
    """
    gen = spec_or_gen if isinstance(spec_or_gen, Generator) else compile_generator(spec_or_gen)
    liou = gen.liouvillian_matrix()
    _, svals, vh = np.linalg.svd(liou)
    if svals[-2] < 1e-10 * svals[0]:
        raise DegenerateSteadyStateError(
            f"null space not unique: two smallest singular values "
            f"{svals[-1]:.3e}, {svals[-2]:.3e} against scale {svals[0]:.3e}")
    n = gen.n
    rho = vh[-1].conj().reshape(n, n)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise DegenerateSteadyStateError("null vector is traceless; no physical steady state")
    rho = rho / tr
    resid = np.max(np.abs(liou @ rho.reshape(-1)))
    if resid > 1e-12 * max(1.0, svals[0]):
        raise RuntimeError(f"steady-state residual too large: {resid:.3e}")
    return rho


def propagator(gen: Generator, step: float) -> np.ndarray:
    """exp(L * step) for a static generator (row-major vec convention)."""
    return sla.expm(gen.liouvillian_matrix() * step)


def detect_pseudo_steady_state(traj: Trajectory, period: float,
                               tol: float = 1e-6) -> float:
    """Earliest stored time t1 after which max|rho(t+T) - rho(t)| < tol holds
    for every stored t within one period of t1.

    The trajectory must span at least three periods and the period must be an
    integer multiple of the storage step.
    """
    dt_s = traj.sample_step()
    span = traj.times[-1] - traj.times[0]
    if span < 3 * period - 1e-9 * period:
        raise ValueError(f"trajectory spans {span:g}, needs >= 3 periods ({3 * period:g})")
    m = period / dt_s
    if abs(m - round(m)) > 1e-8 * max(1.0, m):
        raise ValueError(f"period {period:g} is not a multiple of the storage step {dt_s:g}")
    m = int(round(m))
    diffs = np.max(np.abs(traj.states[m:] - traj.states[:-m]), axis=(1, 2))
    ok = diffs < tol
    for i0 in range(len(ok) - m + 1):
        if ok[i0:i0 + m].all():
            return float(traj.times[i0])
    raise PseudoSteadyStateNotReached(
        f"no window of one period with |rho(t+T)-rho(t)| < {tol:g} before "
        f"t={traj.times[-1]:g}; increase t_end")


def evolve_until_periodic(spec: EvolutionSpec, rho0: np.ndarray, period: float,
                          *, samples_per_period: int = 20, tol: float = 1e-6,
                          t0: float = 0.0) -> tuple[float, np.ndarray, np.ndarray]:
    """Evolve under a periodic drive until consecutive periods agree to tol.

    Returns (t1, sample_times, sample_states): samples_per_period states
    spanning the first converged period, aligned so sample_times[0] = t1.
    Integration dt is an exact divisor of period / samples_per_period (and of
    spec.dt's bound).  Raises PseudoSteadyStateNotReached at spec.t_end.
    """
    gen = compile_generator(spec)
    sub = period / samples_per_period
    dt_lim = spec.dt if spec.dt is not None else max_timestep(spec.energies)
    n_sub = max(1, int(np.ceil(sub / dt_lim)))
    dt = sub / n_sub
    rho, t = np.asarray(rho0, dtype=complex).copy(), t0
    prev = None
    max_periods = int(np.ceil(spec.t_end / period))
    for _ in range(max_periods):
        samples = np.empty((samples_per_period, gen.n, gen.n), dtype=complex)
        stimes = np.empty(samples_per_period)
        for s in range(samples_per_period):
            for _ in range(n_sub):
                rho = rk4_step(gen, rho, t, dt)
                t += dt
            samples[s] = rho
            stimes[s] = t
        if prev is not None and np.max(np.abs(samples - prev)) < tol:
            check_state_invariants(rho, 0, t)
            return float(stimes[0] - sub), stimes, samples
        prev = samples
    raise PseudoSteadyStateNotReached(
        f"pseudo-steady state not reached within t_end={spec.t_end:g} "
        f"({max_periods} periods); increase t_end")
