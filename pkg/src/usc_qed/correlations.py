"""Observables: excitation number, two-time correlations via the quantum
regression recipe, emission spectra, and second-order photon correlations.

Two-time propagation runs under the same generator as the density matrix:
the initial effective matrix is propagated in tau and the recording operator
traced against it.  Correlations are stored demodulated (x e^{+i w_L tau}) on
a uniform tau grid; the spectrum is a direct quadrature of the tau integral
with oscillation-exact trapezoid weights, evaluated on an arbitrary
detuning grid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .dynamics import Generator, propagator, rk4_step, max_timestep

G2_NEGATIVE_FLOOR = -1e-8
DENOMINATOR_FLOOR = 1e-14
DEFAULT_TOL = 1e-6
DEFAULT_MAX_CHUNKS = 10


@dataclass
class SpectrumResult:
    """Emission spectrum on a detuning grid Omega = (omega - omega_L)/g."""

    detuning_grid: np.ndarray
    values: np.ndarray
    normalization: str = "raw"

    def __post_init__(self):
        if self.normalization not in ("raw", "unit-max"):
            raise ValueError(f"unknown normalization {self.normalization!r}")

    def normalized(self) -> "SpectrumResult":
        """Unit-max copy (figure convention: curves share the same maximum)."""
        m = float(np.max(self.values))
        vals = self.values / m if m > 0 else self.values.copy()
        return SpectrumResult(self.detuning_grid.copy(), vals, "unit-max")


@dataclass
class CorrelationResult:
    """Correlation vs delay; tau_grid in units of 1/g."""

    tau_grid: np.ndarray
    values: np.ndarray
    kind: str  # 'g1' | 'g2_t_tau' | 'g2_averaged'

    def __post_init__(self):
        if self.kind not in ("g1", "g2_t_tau", "g2_averaged"):
            raise ValueError(f"unknown correlation kind {self.kind!r}")


@dataclass
class PreparedScenario:
    """A model wired for correlation computations (built by scenarios.py)."""

    generator: Generator
    x_plus: np.ndarray
    kind: str                 # 'incoherent' | 'coherent' | 'none'
    omega_L: float
    coupling_g: float
    kappa: float
    tau_step: float
    dt: float | None = None   # integration step for driven tau-propagation
    rho_ss: np.ndarray | None = None
    sample_times: np.ndarray | None = None
    sample_states: np.ndarray | None = None
    period: float | None = None
    _prop_cache: dict = field(default_factory=dict, repr=False)

    @property
    def x_minus(self) -> np.ndarray:
        return self.x_plus.conj().T

    def states_for_qrt(self) -> tuple[np.ndarray, np.ndarray]:
        """(times, states) the regression recipe starts from."""
        if self.kind == "coherent":
            if self.sample_states is None:
                raise ValueError("coherent scenario lacks pseudo-steady samples")
            return self.sample_times, self.sample_states
        if self.rho_ss is None:
            raise ValueError("scenario lacks a steady state")
        return np.array([0.0]), self.rho_ss[None]


def n_cav(rho: np.ndarray, x_plus) -> float:
    """Excitation number <x- x+>; tiny negative round-off is clipped to 0."""
    xp = x_plus.matrix if hasattr(x_plus, "matrix") else np.asarray(x_plus)
    val = np.trace(rho @ xp.conj().T @ xp)
    if abs(val.imag) > 1e-8 * max(1.0, abs(val.real)):
        raise ValueError(f"<x- x+> came out complex: {val}")
    v = float(val.real)
    if v < -1e-10:
        raise ValueError(f"<x- x+> = {v:g} below the round-off floor")
    return max(v, 0.0)


def _trace_records(mats: np.ndarray, record: np.ndarray) -> np.ndarray:
    """Tr(record @ M_b) for a batch (B, n, n)."""
    return np.einsum("ij,bji->b", record, mats)


def _propagate_records(sc: PreparedScenario, mats: np.ndarray, t_start: np.ndarray,
                       record: np.ndarray, *, tol: float, max_chunks: int,
                       chunk_time: float | None, tau_max: float | None,
                       demodulate: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Propagate a batch of effective matrices in tau, recording
    Tr(record @ M) every tau_step, demodulated by e^{+i omega_L tau}.

    Static generators step with a precomputed exp(L * tau_step); driven ones
    integrate with RK4 at a step dividing tau_step.  The tau axis extends in
    chunks (default 20/kappa) until the batch-averaged record falls below
    tol * |initial|, up to max_chunks; an explicit tau_max overrides the
    adaptive rule.
    """
    gen = sc.generator
    n = gen.n
    h = sc.tau_step
    batch = mats.shape[0]
    if chunk_time is None:
        chunk_time = 20.0 / sc.kappa if sc.kappa > 0 else 200.0
    steps_per_chunk = max(1, int(np.ceil(chunk_time / h)))
    if tau_max is not None:
        total = max(1, int(np.ceil(tau_max / h)))
        steps_per_chunk, max_chunks = total, 1

    recs: list[np.ndarray] = [_trace_records(mats, record)]
    if gen.is_static:
        key = ("prop", h)
        if key not in self_cache(sc):
            self_cache(sc)[key] = propagator(gen, h)
        prop = self_cache(sc)[key]
        vecs = mats.reshape(batch, n * n).T.copy()  # (n^2, B) columns
        for _ in range(max_chunks):
            for _ in range(steps_per_chunk):
                vecs = prop @ vecs
                recs.append(_trace_records(vecs.T.reshape(batch, n, n), record))
            if _chunk_converged(recs, tol):
                break
    else:
        phased = _phase_offsets(sc, t_start)
        if phased is not None:
            offsets, n_phase = phased
            props = _driven_step_propagators(sc, n_phase)
            vecs = mats.reshape(batch, n * n).copy()
            rec_vec = record.T.reshape(-1)
            step = 0
            for _ in range(max_chunks):
                for _ in range(steps_per_chunk):
                    for i in range(batch):
                        vecs[i] = props[(offsets[i] + step) % n_phase] @ vecs[i]
                    step += 1
                    recs.append(vecs @ rec_vec)
                if _chunk_converged(recs, tol):
                    break
        else:
            dt_lim = sc.dt if sc.dt is not None else max_timestep(gen.energies)
            n_sub = max(1, int(np.ceil(h / dt_lim - 1e-12)))
            dt = h / n_sub
            cur = mats.astype(complex).copy()
            t = t_start.astype(float).copy()
            for _ in range(max_chunks):
                for _ in range(steps_per_chunk):
                    for _ in range(n_sub):
                        cur = rk4_step(gen, cur, t, dt)
                        t = t + dt
                    recs.append(_trace_records(cur, record))
                if _chunk_converged(recs, tol):
                    break

    raw = np.array(recs).T  # (B, K+1)
    taus = np.arange(raw.shape[1]) * h
    if demodulate:
        raw = raw * np.exp(1j * sc.omega_L * taus)[None, :]
    return taus, raw


def self_cache(sc: PreparedScenario) -> dict:
    return sc._prop_cache


def _chunk_converged(recs: list[np.ndarray], tol: float) -> bool:
    c0 = np.abs(np.mean(recs[0]))
    if c0 == 0.0:
        return True
    return abs(np.mean(recs[-1])) < tol * c0


def _phase_offsets(sc: PreparedScenario, t_start: np.ndarray
                   ) -> tuple[np.ndarray, int] | None:
    """Integer drive-phase offsets when the periodic fast path applies: the
    stored tau step must divide the drive period and all start times must sit
    on the same tau_step grid."""
    if sc.period is None or sc.sample_times is None:
        return None
    ratio = sc.period / sc.tau_step
    if abs(ratio - round(ratio)) > 1e-9:
        return None
    t_ref = sc.sample_times[0]
    steps = (t_start - t_ref) / sc.tau_step
    if np.max(np.abs(steps - np.round(steps))) > 1e-6:
        return None
    return np.round(steps).astype(int), int(round(ratio))


def _driven_step_propagators(sc: PreparedScenario, n_phase: int) -> list[np.ndarray]:
    """RK4 step maps over one tau_step at each drive phase of the grid
    anchored at the first sample time.  Linearity makes stepping with these
    matrices bit-equivalent to stepping the matrices themselves with RK4."""
    key = ("driven_props", sc.tau_step, n_phase)
    if key in self_cache(sc):
        return self_cache(sc)[key]
    gen = sc.generator
    n = gen.n
    dt_lim = sc.dt if sc.dt is not None else max_timestep(gen.energies)
    n_sub = max(1, int(np.ceil(sc.tau_step / dt_lim - 1e-12)))
    dt = sc.tau_step / n_sub
    t_ref = float(sc.sample_times[0])
    props = []
    for m in range(n_phase):
        basis = np.eye(n * n, dtype=complex).reshape(n * n, n, n)
        t = t_ref + m * sc.tau_step
        for k in range(n_sub):
            basis = rk4_step(gen, basis, t + k * dt, dt)
        props.append(basis.reshape(n * n, n * n).T.copy())
    self_cache(sc)[key] = props
    return props


def filon_trapezoid_weights(omega: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Quadrature weights W with  integral_0^taumax e^{i w t} f(t) dt
    = sum_k W[w, k] f(t_k)  exact for piecewise-linear f on a uniform grid."""
    h = taus[1] - taus[0]
    th = np.asarray(omega, dtype=float)[:, None] * h
    with np.errstate(divide="ignore", invalid="ignore"):
        eith = np.exp(1j * th)
        b = (eith * (1j * th - 1) + 1) / (1j * th) ** 2
        a = (eith - 1) / (1j * th) - b
    small = np.abs(th) < 1e-6
    a = np.where(small, 0.5 + 1j * th / 6 - th ** 2 / 24, a)
    b = np.where(small, 0.5 + 1j * th / 3 - th ** 2 / 8, b)
    phase = np.exp(1j * np.outer(omega, taus))
    w = phase * (a + b * np.exp(-1j * th))
    w[:, 0] = phase[:, 0] * a[:, 0]
    w[:, -1] = (phase * b * np.exp(-1j * th))[:, -1]
    return h * w


def _fourier_real(omega_abs: np.ndarray, taus: np.ndarray, corr: np.ndarray,
                  block: int = 4096) -> np.ndarray:
    """Re of the one-sided tau integral, streamed over tau blocks."""
    out = np.zeros(len(omega_abs))
    for lo in range(0, len(taus) - 1, block):
        hi = min(lo + block + 1, len(taus))
        w = filon_trapezoid_weights(omega_abs, taus[lo:hi] - taus[lo])
        out += np.real(np.exp(1j * omega_abs * taus[lo]) * (w @ corr[lo:hi]))
    return out


def g1_two_time(sc: PreparedScenario, t: float, tau_grid: np.ndarray,
                rho_t: np.ndarray | None = None) -> CorrelationResult:
    """Mean-subtracted first-order correlation <x_d-(t) x_d+(t+tau)>.

    The effective matrix rho(t) x_d- is propagated from t; the subtraction
    constant <x-(t)> is evaluated at t (it enters the initial matrix only).
    tau_grid must be uniform from 0 and commensurate with the stored step.
    """
    taus_req = _validate_tau_grid(tau_grid, sc)
    rho_t = _resolve_state(sc, t, rho_t)
    xm = sc.x_minus
    mean = np.trace(rho_t @ xm)
    m0 = rho_t @ (xm - mean * np.eye(sc.generator.n))
    taus, recs = _propagate_records(
        sc, m0[None], np.array([t]), sc.x_plus, tol=0.0,
        max_chunks=1, chunk_time=None, tau_max=taus_req[-1] if len(taus_req) > 1 else sc.tau_step,
        demodulate=False)
    idx = np.round(taus_req / sc.tau_step).astype(int)
    return CorrelationResult(tau_grid=taus_req * sc.coupling_g,
                             values=recs[0][idx], kind="g1")


def cavity_spectrum(sc: PreparedScenario, omega_grid_g: np.ndarray, *,
                    tol: float = DEFAULT_TOL, max_chunks: int = DEFAULT_MAX_CHUNKS,
                    tau_max: float | None = None,
                    normalization: str = "raw") -> SpectrumResult:
    """Cavity emission spectrum Re  integral e^{i Omega tau} <x_d-(t) x_d+(t+tau)>.

    Incoherent/undriven scenarios use the stationary correlation from the
    steady state; coherent ones average the regression recipe over the
    pseudo-steady samples spanning one drive period.  The tau integral
    extends adaptively until the correlation has decayed to tol of its
    initial value (hard cap max_chunks x 20/kappa), so no apodization window
    is needed.
    """
    times, states = sc.states_for_qrt()
    xm = sc.x_minus
    eye = np.eye(sc.generator.n)
    mats = np.stack([rho @ (xm - np.trace(rho @ xm) * eye) for rho in states])
    taus, recs = _propagate_records(sc, mats, times, sc.x_plus, tol=tol,
                                    max_chunks=max_chunks, chunk_time=None,
                                    tau_max=tau_max)
    cbar = recs.mean(axis=0)
    if abs(cbar[0].real) > 0 and abs(cbar[0].imag) > 1e-8 * abs(cbar[0].real):
        raise RuntimeError(
            f"equal-time correlation not real: {cbar[0]} (regression plumbing)")
    omega_grid_g = np.asarray(omega_grid_g, dtype=float)
    s = _fourier_real(omega_grid_g * sc.coupling_g, taus, cbar)
    smax = float(np.max(np.abs(s))) or 1.0
    if np.min(s) < -1e-2 * smax:
        raise RuntimeError(f"spectrum strongly negative (min {np.min(s):.3e}); "
                           "correlation window too short?")
    if np.min(s) < -1e-4 * smax:
        warnings.warn("clipping negative spectral values beyond 1e-4 of max "
                      "(tau window may be short)", stacklevel=2)
    res = SpectrumResult(omega_grid_g, np.maximum(s, 0.0), "raw")
    return res.normalized() if normalization == "unit-max" else res


def _g2_curves(sc: PreparedScenario, times: np.ndarray, states: np.ndarray,
               tau_max: float, *, tol: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """g2(t_i, tau) for each start state; returns (taus, curves (B, K))."""
    xp, xm = sc.x_plus, sc.x_minus
    record = xm @ xp
    numer0 = np.stack([xp @ rho @ xm for rho in states])
    batch = np.concatenate([numer0, states])
    t0 = np.concatenate([times, times])
    taus, recs = _propagate_records(sc, batch, t0, record, tol=tol,
                                    max_chunks=1, chunk_time=None,
                                    tau_max=tau_max, demodulate=False)
    m = len(states)
    numer = recs[:m].real
    n_tau = recs[m:].real          # <x- x+>(t_i + tau)
    n_t = n_tau[:, :1]             # <x- x+>(t_i)
    denom = n_t * n_tau
    with np.errstate(divide="ignore", invalid="ignore"):
        curves = np.where(denom > DENOMINATOR_FLOOR, numer / denom, np.nan)
    bad = curves[np.isfinite(curves)]
    if bad.size and bad.min() < G2_NEGATIVE_FLOOR:
        warnings.warn(f"g2 dipped to {bad.min():.3e}; clipping to 0", stacklevel=3)
    curves = np.where(np.isfinite(curves), np.clip(curves, 0.0, None), curves)
    return taus, curves


def g2_t_tau(sc: PreparedScenario, t: float, tau_grid: np.ndarray,
             rho_t: np.ndarray | None = None) -> CorrelationResult:
    """Normalized second-order correlation g2(t, tau) from one start time."""
    taus_req = _validate_tau_grid(tau_grid, sc)
    rho_t = _resolve_state(sc, t, rho_t)
    taus, curves = _g2_curves(sc, np.array([t]), rho_t[None],
                              taus_req[-1] if len(taus_req) > 1 else sc.tau_step)
    idx = np.round(taus_req / sc.tau_step).astype(int)
    return CorrelationResult(taus_req * sc.coupling_g, curves[0][idx], "g2_t_tau")


def g2_averaged(sc: PreparedScenario, tau_grid: np.ndarray) -> CorrelationResult:
    """g2(tau) averaged over one drive period (20 start times); for a
    stationary (incoherent) scenario this equals g2(t_ss, tau) exactly."""
    taus_req = _validate_tau_grid(tau_grid, sc)
    times, states = sc.states_for_qrt()
    taus, curves = _g2_curves(sc, times, states,
                              taus_req[-1] if len(taus_req) > 1 else sc.tau_step)
    idx = np.round(taus_req / sc.tau_step).astype(int)
    return CorrelationResult(taus_req * sc.coupling_g, curves.mean(axis=0)[idx],
                             "g2_averaged")


def _validate_tau_grid(tau_grid: np.ndarray, sc: PreparedScenario) -> np.ndarray:
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or len(tau) < 1 or tau[0] != 0.0:
        raise ValueError("tau grid must be 1-D and start at 0")
    steps = tau / sc.tau_step
    if np.max(np.abs(steps - np.round(steps))) > 1e-9:
        raise ValueError(
            f"tau grid not aligned with the stored step {sc.tau_step:g}")
    return tau


def _resolve_state(sc: PreparedScenario, t: float,
                   rho_t: np.ndarray | None) -> np.ndarray:
    if rho_t is not None:
        return np.asarray(rho_t, dtype=complex)
    times, states = sc.states_for_qrt()
    hit = np.where(np.abs(times - t) < 1e-9 * max(1.0, abs(t)))[0]
    if len(hit) != 1:
        raise ValueError(f"t={t:g} is not one of the scenario's sample times")
    return states[hit[0]]


# ---------------------------------------------------------------------------
# analysis helpers


@dataclass
class PolaritonFit:
    """Two-Lorentzian (plus constant background) fit of the polariton doublet."""

    area_low: float
    area_up: float
    center_low: float
    center_up: float
    fwhm_low: float
    fwhm_up: float
    background: float
    residual: float  # max |model - data| / max(data) over the fit windows

    @property
    def area_ratio(self) -> float:
        """Upper/lower polariton peak-area ratio."""
        return self.area_up / self.area_low


def _two_lorentzians(p: np.ndarray, x: np.ndarray) -> np.ndarray:
    # complex-pole pair: the symmetric parts are Lorentzians of area a_k and
    # width g_k; the b_k terms absorb the small dispersive (interference)
    # admixture, which integrates to zero and leaves areas/widths unbiased
    a1, b1, x1, g1, a2, b2, x2, g2, c0, c1 = p
    pole1 = (a1 + 1j * b1) / np.pi / (1j * (x - x1) + g1 / 2)
    pole2 = (a2 + 1j * b2) / np.pi / (1j * (x - x2) + g2 / 2)
    return np.real(pole1 + pole2) + c0 + c1 * x


def fit_polariton_doublet(omega_g: np.ndarray, values: np.ndarray,
                          kappa_g: float, *, window_halfwidth: float | None = None,
                          residual_gate: float = 0.02) -> PolaritonFit:
    """Nonlinear least-squares of a two-Lorentzian model on windows of width
    6 kappa around the polariton positions +-g.

    Raises when the fit residual exceeds residual_gate of the peak height
    (the fit would not be trustworthy for area ratios).
    """
    x = np.asarray(omega_g, dtype=float)
    y = np.asarray(values, dtype=float)
    hw = 3 * kappa_g if window_halfwidth is None else window_halfwidth
    win = np.abs(np.abs(x) - 1.0) < hw
    if win.sum() < 14:
        raise ValueError("fit windows contain too few points")
    xs, ys = x[win], y[win]
    ymax = ys.max()
    p0 = np.array([ymax * kappa_g, 0.0, -1.0, kappa_g / 2,
                   ymax * kappa_g, 0.0, +1.0, kappa_g / 2, 0.0, 0.0])
    sol = least_squares(lambda p: _two_lorentzians(p, xs) - ys, p0, method="lm",
                        max_nfev=20000)
    p = sol.x
    lo, up = (0, 4) if p[2] < p[6] else (4, 0)
    residual = float(np.max(np.abs(_two_lorentzians(p, xs) - ys)) / ymax)
    if residual > residual_gate:
        raise RuntimeError(f"doublet fit residual {residual:.2%} exceeds "
                           f"{residual_gate:.0%} of peak height")
    return PolaritonFit(area_low=abs(p[lo]), area_up=abs(p[up]),
                        center_low=p[lo + 2], center_up=p[up + 2],
                        fwhm_low=abs(p[lo + 3]), fwhm_up=abs(p[up + 3]),
                        background=p[8], residual=residual)


def local_maxima(values: np.ndarray, min_rel_height: float = 0.02) -> np.ndarray:
    """Indices of interior local maxima above min_rel_height of the global max."""
    y = np.asarray(values, dtype=float)
    idx = np.where((y[1:-1] > y[:-2]) & (y[1:-1] > y[2:])
                   & (y[1:-1] > min_rel_height * y.max()))[0] + 1
    return idx


def spectrum_weight_difference(omega: np.ndarray, s1: np.ndarray,
                               s2: np.ndarray) -> float:
    """Integrated |difference| of unit-max spectra over the weight of the first."""
    a = s1 / np.max(s1)
    b = s2 / np.max(s2)
    return float(np.trapezoid(np.abs(a - b), omega) / np.trapezoid(a, omega))


def moving_average(values: np.ndarray, window_points: int) -> np.ndarray:
    """Centered moving average (edge-truncated), e.g. to smooth a g2 curve
    over one optical period."""
    w = max(1, int(window_points))
    kernel = np.ones(w) / w
    pad = w // 2
    ext = np.concatenate([np.repeat(values[0], pad), values, np.repeat(values[-1], w - 1 - pad)])
    return np.convolve(ext, kernel, mode="valid")
