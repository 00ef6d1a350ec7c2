"""Semiclassical pair-correlation dynamics and closed-form steady states.

The mean-field state is (sz, spm, szz) with sz = <sigma_z^(1)>,
spm = <sigma_+^(1) sigma_-^(2)> (real in this model) and the pair cumulant
szz = <sigma_z^(1) sigma_z^(2)> - sz^2. Dropping third-order cumulants
closes the hierarchy:

    d sz/dt  = -(w+Gc) sz               - 2 Gc (N-1) spm            (+ S)
    d spm/dt = -(w+Gc) spm + (Gc/2)(szz + sz [+ sz^2]) + Gc (N-2) sz spm
    d szz/dt = -2(w+Gc) szz + 4 Gc spm (1 + sz)

Two variants of the first two equations are implemented, selected by
`mode`:

* "as_printed": no inhomogeneous source S and no sz^2 term. This form has
  a trivial fixed point at the origin at every pump strength and cannot
  reproduce the single-atom pump/decay balance; it is kept verbatim for
  fixture fidelity.
* "rate_balanced": S = (w - Gc) and the sz^2 term included, which is the
  exact second-order closure of the master equation (the repump and decay
  Lindblad terms source d<sigma_z>/dt with w(1-sz) - Gc(1+sz)). At N = 2
  the third-order terms carry a vanishing coefficient, so this variant
  reproduces the exact steady-state moments.

The emission rate follows as I = Gc N [(1+sz)/2 + (N-1) spm]. In the
collective regime the rescaled variables jz = <Jz>/N, jpjm = <J+J->/N^2
obey a closed two-variable system whose steady state is piecewise
algebraic; the peak emission N^2 Gc / 8 occurs at w = N Gc / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import solve_ivp

from .errors import NumericalError, ValidationError
from .model import ModelParams, validate

MODES = ("as_printed", "rate_balanced")
INVARIANT_TOL = 1e-6


@dataclass(frozen=True)
class CumulantState:
    """Single-atom inversion plus the two pair cumulants."""

    sz: float
    spm: float
    szz: float

    def as_array(self) -> np.ndarray:
        return np.array([self.sz, self.spm, self.szz])

    def invariant_violation(self) -> float:
        """Largest violation of the physical-bounds invariants (0 if none).

        |sz| <= 1, |szz + sz^2| <= 1, |spm| <= (1 - sz^2)/4.
        """
        v = max(0.0, abs(self.sz) - 1.0)
        v = max(v, abs(self.szz + self.sz**2) - 1.0)
        v = max(v, abs(self.spm) - 0.25 * (1.0 - min(self.sz**2, 1.0)))
        return max(v, 0.0)


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")


def _rhs_array(v: np.ndarray, params: ModelParams, mode: str) -> np.ndarray:
    N, gc, w = params.N, params.gamma_c, params.w
    sz, spm, szz = v
    if N == 1:
        # no pair variables for a single atom; keep them frozen at zero
        source = (w - gc) if mode == "rate_balanced" else 0.0
        return np.array([-(w + gc) * sz + source, 0.0, 0.0])
    dsz = -(w + gc) * sz - 2.0 * gc * (N - 1) * spm
    dspm = -(w + gc) * spm + 0.5 * gc * (szz + sz) + gc * (N - 2) * sz * spm
    if mode == "rate_balanced":
        dsz += w - gc
        dspm += 0.5 * gc * sz * sz
    dszz = -2.0 * (w + gc) * szz + 4.0 * gc * spm * (1.0 + sz)
    return np.array([dsz, dspm, dszz])


def _jacobian(v: np.ndarray, params: ModelParams, mode: str) -> np.ndarray:
    N, gc, w = params.N, params.gamma_c, params.w
    sz, spm, _ = v
    if N == 1:
        return np.diag([-(w + gc), -1.0, -1.0])
    d_spm_d_sz = 0.5 * gc + gc * (N - 2) * spm
    if mode == "rate_balanced":
        d_spm_d_sz += gc * sz
    return np.array([
        [-(w + gc), -2.0 * gc * (N - 1), 0.0],
        [d_spm_d_sz, -(w + gc) + gc * (N - 2) * sz, 0.5 * gc],
        [4.0 * gc * spm, 4.0 * gc * (1.0 + sz), -2.0 * (w + gc)],
    ])


def cumulant_rhs(state: CumulantState, params: ModelParams,
                 mode: str = "as_printed") -> CumulantState:
    """Time derivative of the truncated pair-correlation system."""
    validate(params)
    _check_mode(mode)
    d = _rhs_array(state.as_array(), params, mode)
    return CumulantState(sz=d[0], spm=d[1], szz=d[2])


@dataclass
class CumulantTrajectory:
    times: np.ndarray
    states: np.ndarray              # shape (n_times, 3): sz, spm, szz
    mode: str
    warnings: list[str]

    def final(self) -> CumulantState:
        sz, spm, szz = self.states[-1]
        return CumulantState(sz=sz, spm=spm, szz=szz)


def integrate_cumulant(state0: CumulantState, params: ModelParams,
                       t_end: float, mode: str = "as_printed",
                       n_out: int = 201) -> CumulantTrajectory:
    """Adaptive integration (local error <= 1e-9) of the truncated system.

    Transient invariant violations beyond the tolerance are reported as
    model-breakdown warnings on the trajectory, not raised: the truncation
    may wander slightly outside the physical region.
    """
    validate(params)
    _check_mode(mode)
    if t_end <= 0:
        raise ValidationError(f"t_end must be > 0, got {t_end}")
    v0 = state0.as_array()
    if state0.invariant_violation() > INVARIANT_TOL:
        raise ValidationError("initial state violates the cumulant invariants")
    times = np.linspace(0.0, float(t_end), n_out)
    sol = solve_ivp(lambda _t, v: _rhs_array(v, params, mode),
                    (0.0, float(t_end)), v0, method="DOP853",
                    t_eval=times, rtol=1e-10, atol=1e-12)
    if not sol.success:
        raise NumericalError(f"cumulant integration failed: {sol.message}")
    states = sol.y.T
    warns = []
    worst = max(CumulantState(*row).invariant_violation() for row in states)
    if worst > INVARIANT_TOL:
        warns.append(f"invariant violation up to {worst:.3e} along the "
                     "trajectory (cumulant truncation breakdown)")
    return CumulantTrajectory(times=times, states=states, mode=mode,
                              warnings=warns)


def emission_rate(state: CumulantState, params: ModelParams) -> float:
    """I = Gc <J+J-> = Gc N [(1+sz)/2 + (N-1) spm]."""
    N = params.N
    return params.gamma_c * N * (0.5 * (1.0 + state.sz) + (N - 1) * state.spm)


def _stationary_candidates(params: ModelParams, mode: str) -> list[np.ndarray]:
    """All real fixed points via polynomial elimination in spm.

    sz and szz are linear/quadratic in spm from their own stationarity
    conditions; substituting into the spm equation leaves one polynomial
    (degree <= 3) whose real roots enumerate the fixed points.
    """
    N, gc, w = params.N, params.gamma_c, params.w
    y = Polynomial([0.0, 1.0])
    a0 = (w - gc) / (w + gc) if mode == "rate_balanced" else 0.0
    x = Polynomial([a0, -2.0 * gc * (N - 1) / (w + gc)])
    z = (2.0 * gc / (w + gc)) * y * (1.0 + x)
    bracket = z + x
    if mode == "rate_balanced":
        bracket = bracket + x * x
    B = -(w + gc) * y + 0.5 * gc * bracket + gc * (N - 2) * x * y
    coeffs = B.coef
    # strip numerically-zero leading coefficients before root extraction
    scale = np.max(np.abs(coeffs)) or 1.0
    while len(coeffs) > 1 and abs(coeffs[-1]) < 1e-14 * scale:
        coeffs = coeffs[:-1]
    roots = Polynomial(coeffs).roots() if len(coeffs) > 1 else np.array([])
    out = []
    for r in roots:
        if abs(r.imag) > 1e-9 * max(1.0, abs(r)):
            continue
        yv = float(r.real)
        out.append(np.array([x(yv), yv, z(yv)]))
    return out


def _polish(v: np.ndarray, params: ModelParams, mode: str) -> np.ndarray:
    for _ in range(50):
        f = _rhs_array(v, params, mode)
        if np.max(np.abs(f)) < 1e-13 * max(1.0, params.w + params.gamma_c):
            break
        step = np.linalg.solve(_jacobian(v, params, mode), -f)
        v = v + step
    return v


def _is_stable(v: np.ndarray, params: ModelParams, mode: str) -> bool:
    eigvals = np.linalg.eigvals(_jacobian(v, params, mode))
    return bool(np.all(eigvals.real <= 1e-8))


def steady_state_cubic(params: ModelParams, mode: str = "rate_balanced") -> CumulantState:
    """Steady state of the truncated system via exact root extraction.

    Candidate roots come from the eliminated polynomial, are Newton-polished
    on the full system, filtered by the physical-bounds invariants and
    linear stability, and disambiguated (if still needed) by continuity
    from the strong-pumping limit. The default mode is rate_balanced: the
    as-printed equations keep the origin stationary at every pump strength
    and lose the pump/decay balance that fixes the emission scale.
    """
    validate(params)
    _check_mode(mode)
    if params.w <= 0:
        raise ValidationError("steady_state_cubic requires w > 0")
    if params.N == 1:
        sz = (params.w - params.gamma_c) / (params.w + params.gamma_c) \
            if mode == "rate_balanced" else 0.0
        return CumulantState(sz=sz, spm=0.0, szz=0.0)

    def survivors(p: ModelParams) -> list[np.ndarray]:
        cands = [_polish(v, p, mode) for v in _stationary_candidates(p, mode)]
        kept = []
        for v in cands:
            if not np.all(np.isfinite(v)):
                continue
            if CumulantState(*v).invariant_violation() > INVARIANT_TOL:
                continue
            if not _is_stable(v, p, mode):
                continue
            if any(np.linalg.norm(v - u) < 1e-9 for u in kept):
                continue
            kept.append(v)
        return kept

    kept = survivors(params)
    if not kept:
        cands = _stationary_candidates(params, mode)
        raise NumericalError(
            f"no stable physical fixed point for N={params.N}, w={params.w}, "
            f"mode={mode}; raw candidates: {[c.tolist() for c in cands]}")
    if len(kept) > 1:
        kept = [_track_from_strong_pumping(params, mode, kept)]
    sz, spm, szz = kept[0]
    return CumulantState(sz=float(sz), spm=float(spm), szz=float(szz))


def _track_from_strong_pumping(params: ModelParams, mode: str,
                               targets: list[np.ndarray]) -> np.ndarray:
    """Follow the strong-pumping branch down to the requested w and pick the
    surviving candidate it lands on."""
    w_hi = max(10.0 * params.N * params.gamma_c, 10.0 * params.w)
    p = ModelParams(N=params.N, gamma_c=params.gamma_c, w=w_hi)
    cands = [_polish(v, p, mode) for v in _stationary_candidates(p, mode)]
    cands = [v for v in cands
             if CumulantState(*v).invariant_violation() <= INVARIANT_TOL]
    if not cands:
        return targets[0]
    current = max(cands, key=lambda v: v[0])   # saturated inversion branch
    w_path = np.geomspace(w_hi, params.w, 60)[1:]
    for wv in w_path:
        p = ModelParams(N=params.N, gamma_c=params.gamma_c, w=float(wv))
        current = _polish(current, p, mode)
    return min(targets, key=lambda v: np.linalg.norm(v - current))


@dataclass(frozen=True)
class RescaledState:
    """Large-N collective variables jz = <Jz>/N and jpjm = <J+J->/N^2."""

    jz: float
    jpjm: float


def rescaled_rhs(state: RescaledState, params: ModelParams) -> RescaledState:
    """Leading-order-in-1/N equations of motion for the rescaled variables."""
    N, gc, w = params.N, params.gamma_c, params.w
    djz = -w * (state.jz - 0.5) - N * gc * state.jpjm
    djpjm = -w * state.jpjm + 2.0 * N * gc * state.jz * state.jpjm
    return RescaledState(jz=djz, jpjm=djpjm)


def rescaled_steady_state(params: ModelParams) -> RescaledState:
    """Piecewise closed-form steady state of the rescaled system.

    jz = w/(2 N Gc) and jpjm = (w / 2 N Gc)(1 - w / N Gc) below the
    saturation threshold w = N Gc; above it jz = 1/2 and jpjm = 0.
    """
    validate(params)
    N, gc, w = params.N, params.gamma_c, params.w
    ratio = w / (N * gc)
    if ratio < 1.0:
        return RescaledState(jz=0.5 * ratio, jpjm=0.5 * ratio * (1.0 - ratio))
    return RescaledState(jz=0.5, jpjm=0.0)


def closed_form_intensity(params: ModelParams, w: float | None = None) -> float:
    """I(w) = N^2 Gc jpjm(w) from the rescaled steady state."""
    p = params if w is None else ModelParams(params.N, params.gamma_c, float(w))
    return p.N**2 * p.gamma_c * rescaled_steady_state(p).jpjm


@dataclass(frozen=True)
class MaxIntensity:
    """Peak of the closed-form emission curve."""

    w_star: float
    I_max: float
    large_n_valid: bool


def max_intensity(params: ModelParams) -> MaxIntensity:
    """Peak emission N^2 Gc / 8 at w = N Gc / 2.

    The closed form assumes the collective regime Gc << w ~ N Gc; the
    validity flag is False when the peak sits within an order of magnitude
    of Gc itself (small N), where the large-N reduction is unreliable.
    """
    validate(params)
    w_star = 0.5 * params.N * params.gamma_c
    i_max = params.N**2 * params.gamma_c / 8.0
    return MaxIntensity(w_star=w_star, I_max=i_max,
                        large_n_valid=w_star >= 5.0 * params.gamma_c)


@dataclass(frozen=True)
class CoherenceTime:
    """Dipole coherence time and the regression decay rate behind it.

    t_coh = N / (N Gc + 2 w). The pair correlation decays at
    rate = (1/2)(w + Gc - (N-2) Gc sz_ss) with sz_ss = min(w/(N Gc), 1);
    its inverse is 2 t_coh (amplitude versus intensity convention), so both
    numbers are reported.
    """

    t_coh: float
    decay_rate: float
    amplitude_time: float
    sz_ss: float


def coherence_time(params: ModelParams) -> CoherenceTime:
    validate(params)
    if params.w <= 0:
        raise ValidationError("coherence_time requires w > 0")
    N, gc, w = params.N, params.gamma_c, params.w
    t_coh = N / (N * gc + 2.0 * w)
    sz_ss = min(w / (N * gc), 1.0)
    rate = 0.5 * (w + gc - (N - 2) * gc * sz_ss)
    return CoherenceTime(t_coh=t_coh, decay_rate=rate,
                         amplitude_time=1.0 / rate, sz_ss=sz_ss)


def sweep_rows(params: ModelParams, w_values,
               mode: str = "rate_balanced") -> list[dict]:
    """Mean-field sweep over pump rates; one mapping per w with the cubic
    steady state, the rescaled closed form, and the coherence time."""
    rows = []
    for w in w_values:
        p = ModelParams(N=params.N, gamma_c=params.gamma_c, w=float(w))
        state = steady_state_cubic(p, mode=mode)
        closed = rescaled_steady_state(p)
        rows.append({
            "w": float(w),
            "sz": state.sz, "spm": state.spm, "szz": state.szz,
            "I_cumulant": emission_rate(state, p),
            "jz_closed": closed.jz, "jpjm_closed": closed.jpjm,
            "I_closed": p.N**2 * p.gamma_c * closed.jpjm,
            "t_coh": coherence_time(p).t_coh,
        })
    return rows
