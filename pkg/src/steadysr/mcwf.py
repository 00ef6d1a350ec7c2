"""Monte Carlo wavefunction unraveling of the collective-decay master equation.

Between jumps a trajectory evolves under the non-Hermitian drift
H_eff = -(i/2) [gamma_c J+J- + w sum_j sigma-_j sigma+_j]; the norm loss
triggers quantum jumps through one of N+1 channels (one collective decay,
N single-atom repumps) selected in proportion to its instantaneous rate.
Jump times use the waiting-time construction: a uniform threshold u is drawn
and the deterministic segment is integrated until ||psi||^2 = u.

Two interchangeable propagation engines are provided:

* "spectral" (default for N <= 14): the drift generator is diagonal in the
  collective (J, M) basis with decay rate
  lambda = (1/2)[gamma_c (J+M)(J-M+1) + w (N/2 - M)], so deterministic
  segments are evaluated in closed form and collective jumps reduce to an
  index shift along each (J, xi) ladder. Segment propagation is exact to
  machine precision.
* "series": short-step truncated Taylor propagation of exp(-K dt) with the
  step chosen so the per-step jump probability stays below 1e-2, and
  bisection location of the norm-threshold crossing (relative time
  tolerance 1e-6). Needs no basis decomposition, so it also covers N > 14.

Ensembles draw per-trajectory counter-based RNG streams keyed by
(master_seed, trajectory index); results are bitwise reproducible and
independent of execution order and of the number of worker processes.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import hilbert
from .errors import NumericalError, ValidationError
from .model import ModelParams, validate

DEFAULT_OBSERVABLES = ("JpJm", "Jz", "sz0")
MAX_STEP_JUMP_PROB = 1e-2     # per-step jump probability cap (series engine)
BISECT_REL_TOL = 1e-6         # jump-time tolerance (series engine)
SPECTRAL_MAX_N = hilbert.DECOMPOSITION_CAP
HARD_MAX_N = 22               # 2^22 amplitudes; beyond this is out of reach

_M64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(x: int) -> int:
    x &= _M64
    x = (x + _GOLDEN) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return (z ^ (z >> 31)) & _M64


def derive_seed(master_seed: int, index: int) -> int:
    """Deterministic 64-bit stream seed for trajectory `index`."""
    return _splitmix64((master_seed & _M64) ^ _splitmix64((index + 1) * _GOLDEN))


def _rng_for(seed: int) -> np.random.Generator:
    # Philox is counter based: streams for different keys never overlap and
    # parallel / serial execution produce identical draws.
    return np.random.Generator(np.random.Philox(key=seed & _M64))


@dataclass(frozen=True)
class JumpChannel:
    """One Lindblad jump channel: operator scaled by sqrt(rate) and its L+L."""

    label: str
    operator: sp.csr_array
    weight_operator: sp.csr_array


def jump_channels(params: ModelParams) -> list[JumpChannel]:
    """The N+1 channels of the master equation (collective + N repumps)."""
    validate(params)
    N = params.N
    Jm = hilbert.build_collective("J_minus", N)
    chans = [JumpChannel("collective_decay",
                         sp.csr_array(math.sqrt(params.gamma_c) * Jm),
                         sp.csr_array(params.gamma_c * (Jm.T @ Jm)))]
    sqw = math.sqrt(params.w)
    for j in range(N):
        op = hilbert.build_single_atom("sigma_plus", j, N)
        chans.append(JumpChannel(f"repump({j})",
                                 sp.csr_array(sqw * op),
                                 sp.csr_array(params.w * (op.conj().T @ op))))
    return chans


def effective_hamiltonian(params: ModelParams) -> sp.csr_array:
    """H_eff = -(i/2)[gamma_c J+J- + w sum_j sigma-_j sigma+_j]."""
    return sp.csr_array(-1j * drift_generator(params))


def drift_generator(params: ModelParams) -> sp.csr_array:
    """K = i H_eff, the positive-semidefinite norm-decay generator."""
    validate(params)
    N = params.N
    JpJm = hilbert.build_collective("JpJm", N)
    ground_counts = (N - hilbert.excitation_numbers(N)).astype(float)
    pump = sp.diags_array(ground_counts.astype(complex))
    return sp.csr_array(0.5 * (params.gamma_c * JpJm + params.w * pump))


def default_burn_in(params: ModelParams) -> float:
    """t1 = 10 * max(1/w, 1/(N gamma_c), 1/gamma_c): covers the slowest
    relaxation scale in all three pumping regimes."""
    scales = [1.0 / (params.N * params.gamma_c), 1.0 / params.gamma_c]
    if params.w > 0:
        scales.append(1.0 / params.w)
    return 10.0 * max(scales)


def default_window(params: ModelParams) -> float:
    return 10.0 * default_burn_in(params)


def default_t_end(params: ModelParams) -> float:
    return default_burn_in(params) + default_window(params)


@dataclass
class TrajectoryRecord:
    """Sampled observables along one trajectory plus its jump log."""

    params: ModelParams
    seed: int
    engine: str
    times: np.ndarray
    observables: dict[str, np.ndarray]
    jump_times: np.ndarray
    jump_channels: np.ndarray          # 0 = collective decay, 1+j = repump(j)
    max_norm_restore_error: float = 0.0
    max_imag_residual: float = 0.0


@dataclass
class SteadyStateEstimate:
    """Time- and ensemble-averaged observables with statistical errors."""

    params: ModelParams
    t1: float
    T: float
    n_traj: int
    observables: dict[str, tuple[float, float]] = field(default_factory=dict)

    def mean(self, name: str) -> float:
        if name not in self.observables:
            raise ValidationError(f"observable {name!r} was not sampled")
        return self.observables[name][0]

    def stderr(self, name: str) -> float:
        if name not in self.observables:
            raise ValidationError(f"observable {name!r} was not sampled")
        return self.observables[name][1]


def projector_observable_names(N: int) -> list[str]:
    return [f"P_J{s.J:g}_M{s.M:g}" for s in hilbert.jm_decomposition(N)]


class _SpectralEngine:
    """Closed-form segment propagation in the collective (J, M) eigenbasis."""

    kind = "spectral"

    def __init__(self, params: ModelParams):
        self.params = params
        N = params.N
        subs = hilbert.jm_decomposition(N)
        self.subspaces = subs
        d = params.dim
        # The basis transform is block diagonal over excitation sectors
        # (subspaces are emitted sector by sector, so eigen indices are
        # sector-contiguous): store one dense block per sector and apply
        # them with BLAS instead of a global sparse matvec. Blocks are real
        # by construction but kept complex to avoid per-call upcasts.
        counts = hilbert.excitation_numbers(N)
        self.sector_idx = [np.flatnonzero(counts == k) for k in range(N, -1, -1)]
        self.sector_blocks: list[np.ndarray] = []
        self.sector_eig_slices: list[slice] = []
        start = 0
        sub_iter = iter(subs)
        for idx in self.sector_idx:
            width = idx.size
            cols = []
            got = 0
            while got < width:
                s = next(sub_iter)
                cols.append(s.basis)
                got += s.multiplicity
            if got != width:
                raise NumericalError("subspace ordering is not sector-contiguous")
            block = sp.hstack(cols).toarray()[idx, :]
            self.sector_blocks.append(np.ascontiguousarray(block, dtype=complex))
            self.sector_eig_slices.append(slice(start, start + width))
            start += width
        n_sub = len(subs)
        offsets = np.zeros(n_sub + 1, dtype=int)
        for i, s in enumerate(subs):
            offsets[i + 1] = offsets[i] + s.multiplicity
        self.offsets = offsets
        self.group_jpjm = np.array([(s.J + s.M) * (s.J - s.M + 1.0) for s in subs])
        self.group_m = np.array([s.M for s in subs])
        self.group_lambda = 0.5 * (params.gamma_c * self.group_jpjm
                                   + params.w * (N / 2.0 - self.group_m))
        lam = np.empty(d)
        group_of = np.empty(d, dtype=int)
        for i, s in enumerate(subs):
            lam[offsets[i]:offsets[i + 1]] = self.group_lambda[i]
            group_of[offsets[i]:offsets[i + 1]] = i
        self.lam = lam
        self.group_of = group_of
        # Aggregation matrix: W_group = S @ |phi|^2.
        self.S = sp.csr_array((np.ones(d), (group_of, np.arange(d))),
                              shape=(n_sub, d))
        # Ladder map for the collective jump: (J, M, xi) -> (J, M-1, xi).
        index_of = {(s.J, s.M): i for i, s in enumerate(subs)}
        tgt = np.full(d, -1, dtype=int)
        coeff = np.zeros(d)
        for i, s in enumerate(subs):
            if (s.J, s.M - 1.0) in index_of:
                t = index_of[(s.J, s.M - 1.0)]
                cols = np.arange(s.multiplicity)
                tgt[offsets[i] + cols] = offsets[t] + cols
                coeff[offsets[i] + cols] = math.sqrt(
                    (s.J + s.M) * (s.J - s.M + 1.0))
        self.ladder_tgt = tgt
        self.ladder_coeff = coeff
        self.ladder_src = np.flatnonzero(tgt >= 0)
        # Per-atom ground masks for repump channel selection.
        b = np.arange(d)
        self.ground_mask = np.stack(
            [((b >> j) & 1 == 0).astype(float) for j in range(N)], axis=1)
        self.sigma_plus = [hilbert.build_single_atom("sigma_plus", j, N)
                           for j in range(N)]
        self.proj_names = [f"P_J{s.J:g}_M{s.M:g}" for s in subs]

    def to_eigen(self, psi: np.ndarray) -> np.ndarray:
        out = np.empty(psi.shape, dtype=complex)
        for idx, sl, B in zip(self.sector_idx, self.sector_eig_slices,
                              self.sector_blocks):
            out[sl] = B.T @ psi[idx]     # blocks are real: B^H = B^T
        return out

    def from_eigen(self, phi: np.ndarray) -> np.ndarray:
        out = np.empty(phi.shape, dtype=complex)
        for idx, sl, B in zip(self.sector_idx, self.sector_eig_slices,
                              self.sector_blocks):
            out[idx] = B @ phi[sl]
        return out

    def group_weights(self, phi: np.ndarray) -> np.ndarray:
        return self.S @ np.abs(phi) ** 2

    def collective_jump(self, phi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(phi)
        src = self.ladder_src
        out[self.ladder_tgt[src]] = self.ladder_coeff[src] * phi[src]
        return out


class _SeriesEngine:
    """Short-step truncated-Taylor propagation of exp(-K dt)."""

    kind = "series"

    def __init__(self, params: ModelParams):
        self.params = params
        N = params.N
        self.K = sp.csr_array(drift_generator(params).real.astype(float))
        # crude spectral-radius bound for step capping
        self.rho = float(np.max(np.abs(self.K).sum(axis=1))) or 1.0
        b = np.arange(params.dim)
        self.ground_mask = np.stack(
            [((b >> j) & 1 == 0).astype(float) for j in range(N)], axis=1)
        self.Jm = hilbert.build_collective("J_minus", N)
        self.sigma_plus = [hilbert.build_single_atom("sigma_plus", j, N)
                           for j in range(N)]

    def expmv(self, psi: np.ndarray, dt: float) -> np.ndarray:
        """exp(-K dt) psi via scaled truncated Taylor series."""
        if dt == 0.0:
            return psi.copy()
        n_sub = max(1, int(math.ceil(dt * self.rho)))
        tau = dt / n_sub
        out = psi
        for _ in range(n_sub):
            term = out
            acc = out.copy()
            for k in range(1, 60):
                term = (self.K @ term) * (-tau / k)
                acc = acc + term
                if np.linalg.norm(term) <= 1e-16 * np.linalg.norm(acc):
                    break
            else:
                raise NumericalError("Taylor series for exp(-K dt) stalled")
            out = acc
        return out


@lru_cache(maxsize=8)
def _get_engine(params: ModelParams, kind: str):
    if kind == "spectral":
        return _SpectralEngine(params)
    if kind == "series":
        return _SeriesEngine(params)
    raise ValidationError(f"unknown engine {kind!r}")


def _pick_engine(params: ModelParams, engine: str) -> str:
    if engine == "auto":
        return "spectral" if params.N <= SPECTRAL_MAX_N else "series"
    if engine not in ("spectral", "series"):
        raise ValidationError(f"engine must be auto|spectral|series, got {engine!r}")
    if engine == "spectral" and params.N > SPECTRAL_MAX_N:
        raise ValidationError(
            f"spectral engine needs the (J,M) decomposition (N <= {SPECTRAL_MAX_N})")
    return engine


class _ObservableSet:
    """Resolved observables: eigenbasis-diagonal, computational-diagonal,
    or generic sparse quadratic forms."""

    def __init__(self, names, params: ModelParams, engine, extra_operators=None):
        extra_operators = extra_operators or {}
        self.names = list(names) + list(extra_operators)
        self.eig_items: list[tuple[str, np.ndarray]] = []
        self.diag_items: list[tuple[str, np.ndarray]] = []
        self.op_items: list[tuple[str, sp.csr_array]] = []
        N = params.N
        spectral = isinstance(engine, _SpectralEngine)
        for name in names:
            if name == "JpJm":
                if spectral:
                    self.eig_items.append((name, engine.group_jpjm))
                else:
                    self.op_items.append((name, hilbert.build_collective("JpJm", N)))
            elif name == "Jz":
                if spectral:
                    self.eig_items.append((name, engine.group_m))
                else:
                    self.op_items.append((name, hilbert.build_collective("J_z", N)))
            elif name.startswith("sz") and name[2:].isdigit():
                j = int(name[2:])
                if not 0 <= j < N:
                    raise ValidationError(f"observable {name!r}: atom out of range")
                b = np.arange(params.dim)
                self.diag_items.append(
                    (name, np.where((b >> j) & 1 == 1, 1.0, -1.0)))
            elif name.startswith("P_J"):
                if spectral:
                    try:
                        g = engine.proj_names.index(name)
                    except ValueError:
                        raise ValidationError(f"unknown projector observable {name!r}")
                    ind = np.zeros(len(engine.proj_names))
                    ind[g] = 1.0
                    self.eig_items.append((name, ind))
                else:
                    subs = hilbert.jm_decomposition(N)
                    match = [s for s in subs if f"P_J{s.J:g}_M{s.M:g}" == name]
                    if not match:
                        raise ValidationError(f"unknown projector observable {name!r}")
                    self.op_items.append((name, hilbert.projector(match[0])))
            else:
                raise ValidationError(f"unknown observable {name!r}")
        for name, op in extra_operators.items():
            self.op_items.append((name, sp.csr_array(op)))

    @property
    def needs_psi(self) -> bool:
        return bool(self.diag_items or self.op_items)


def _evaluate_columns(obs: _ObservableSet, engine, phi_cols, psi_cols,
                      norms_sq, out: dict, idx) -> float:
    """Fill observable samples for a batch of (unnormalized) state columns.

    Returns the largest imaginary residual seen in generic quadratic forms.
    """
    max_imag = 0.0
    if obs.eig_items:
        W = engine.S @ (np.abs(phi_cols) ** 2)
        for name, weights in obs.eig_items:
            out[name][idx] = (weights @ W) / norms_sq
    if obs.diag_items:
        dens = np.abs(psi_cols) ** 2
        for name, diag in obs.diag_items:
            out[name][idx] = (diag @ dens) / norms_sq
    for name, op in obs.op_items:
        vals = np.einsum("ik,ik->k", psi_cols.conj(), op @ psi_cols)
        max_imag = max(max_imag, float(np.max(np.abs(vals.imag), initial=0.0)))
        out[name][idx] = vals.real / norms_sq
    return max_imag


def _solve_norm_crossing(weights: np.ndarray, lam2: np.ndarray, u: float,
                         t_max: float) -> float | None:
    """Smallest t in (0, t_max] with sum_g weights_g exp(-lam2_g t) = u.

    The survival function is smooth, convex, and strictly decreasing
    wherever it exceeds its dark-state floor, so safeguarded Newton from a
    single-rate initial guess converges in a handful of iterations.
    Returns None when there is no crossing before t_max.
    """
    wl = weights * lam2
    if float(weights @ np.exp(-lam2 * t_max)) > u:
        return None
    s0 = float(weights.sum())
    rate = float(wl.sum()) / s0
    if rate <= 0.0:
        return None
    t = -math.log(u / s0) / rate
    t = min(max(t, 1e-16 * t_max), t_max)
    lo, hi = 0.0, t_max
    for _ in range(200):
        e = np.exp(-lam2 * t)
        ft = float(weights @ e) - u
        if ft > 0.0:
            lo = t
        else:
            hi = t
        if abs(ft) <= 1e-15:
            return t
        if hi - lo <= 1e-12 * max(hi, 1e-9):
            return 0.5 * (lo + hi)
        deriv = -float(wl @ e)
        t_new = t - ft / deriv if deriv != 0.0 else 0.5 * (lo + hi)
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        t = t_new
    return 0.5 * (lo + hi)


def _evolve_spectral(engine: _SpectralEngine, psi0, t_end, rng, obs,
                     times, record_jumps):
    params = engine.params
    out = {name: np.empty(len(times)) for name in obs.names}
    jump_times: list[float] = []
    jump_chans: list[int] = []
    max_norm_err = 0.0
    max_imag = 0.0

    phi = engine.to_eigen(psi0.astype(complex))
    lam = engine.lam
    lam2_g = 2.0 * engine.group_lambda
    t_cur = 0.0
    next_sample = 0
    # sample t = 0 from the initial state
    if times[0] == 0.0:
        psi_col = psi0[:, None] if obs.needs_psi else None
        max_imag = max(max_imag, _evaluate_columns(
            obs, engine, phi[:, None], psi_col, np.array([1.0]), out, [0]))
        next_sample = 1

    while True:
        u = rng.random()
        W = engine.group_weights(phi)
        dt_jump = _solve_norm_crossing(W, lam2_g, u, t_end - t_cur)
        t_next = t_end if dt_jump is None else t_cur + dt_jump
        # sample grid points inside (t_cur, t_next]
        hi = int(np.searchsorted(times, t_next, side="right"))
        if hi > next_sample:
            idx = np.arange(next_sample, hi)
            dts = times[idx] - t_cur
            phi_cols = phi[:, None] * np.exp(-lam[:, None] * dts[None, :])
            norms_sq = (np.abs(phi_cols) ** 2).sum(axis=0)
            psi_cols = engine.from_eigen(phi_cols) if obs.needs_psi else None
            max_imag = max(max_imag, _evaluate_columns(
                obs, engine, phi_cols, psi_cols, norms_sq, out, idx))
            next_sample = hi
        if dt_jump is None:
            break
        # jump at t_next: select channel by instantaneous rates; lambda is
        # constant within each group, so W evolves in closed form too
        phi_at = phi * np.exp(-lam * dt_jump)
        W_at = W * np.exp(-lam2_g * dt_jump)
        rate_coll = params.gamma_c * float(engine.group_jpjm @ W_at)
        rate_rep = params.w * float((params.N / 2.0 - engine.group_m) @ W_at)
        total = rate_coll + rate_rep
        if total <= 0.0:
            raise NumericalError(f"vanishing jump rate at t={t_next}")
        if rng.random() * total < rate_coll:
            chan = 0
            phi = engine.collective_jump(phi_at)
            nrm = np.linalg.norm(phi)
            phi /= nrm
        else:
            psi_at = engine.from_eigen(phi_at)
            g = (np.abs(psi_at) ** 2) @ engine.ground_mask
            gsum = g.sum()
            j = int(np.searchsorted(np.cumsum(g) / gsum, rng.random()))
            j = min(j, params.N - 1)
            chan = 1 + j
            psi = engine.sigma_plus[j] @ psi_at
            psi /= np.linalg.norm(psi)
            phi = engine.to_eigen(psi)
        max_norm_err = max(max_norm_err,
                           abs(float(np.linalg.norm(phi)) - 1.0))
        phi /= np.linalg.norm(phi)
        if record_jumps:
            jump_times.append(t_next)
            jump_chans.append(chan)
        t_cur = t_next
        if t_cur >= t_end:
            break

    return out, jump_times, jump_chans, max_norm_err, max_imag


def _evolve_series(engine: _SeriesEngine, psi0, t_end, rng, obs,
                   times, record_jumps):
    params = engine.params
    K = engine.K
    out = {name: np.empty(len(times)) for name in obs.names}
    jump_times: list[float] = []
    jump_chans: list[int] = []
    max_norm_err = 0.0
    max_imag = 0.0

    def sample(psi, k):
        nonlocal max_imag
        nsq = np.array([float(np.vdot(psi, psi).real)])
        max_imag = max(max_imag, _evaluate_columns(
            obs, engine, None, psi[:, None], nsq, out, [k]))

    psi = psi0.astype(complex)
    t_cur = 0.0
    next_sample = 0
    if times[0] == 0.0:
        sample(psi, 0)
        next_sample = 1

    u = rng.random()
    while True:
        remaining = t_end - t_cur
        if remaining <= 1e-12 * max(t_end, 1.0):
            break
        norm_sq = float(np.vdot(psi, psi).real)
        rate = 2.0 * float(np.vdot(psi, K @ psi).real) / norm_sq
        dt = MAX_STEP_JUMP_PROB / rate if rate > 0 else remaining
        dt = min(dt, 1.0 / engine.rho, remaining)
        if next_sample < len(times):
            dt = min(dt, max(times[next_sample] - t_cur, 1e-13 * t_end))
        if dt <= 1e-15 * max(t_cur, 1.0):
            raise NumericalError(f"step size underflow at t={t_cur}")
        psi_next = engine.expmv(psi, dt)
        if float(np.vdot(psi_next, psi_next).real) <= u:
            # locate the crossing by bisection within [0, dt]
            lo, hi = 0.0, dt
            while hi - lo > BISECT_REL_TOL * max(t_cur + hi, 1e-12):
                mid = 0.5 * (lo + hi)
                trial = engine.expmv(psi, mid)
                if float(np.vdot(trial, trial).real) <= u:
                    hi = mid
                else:
                    lo = mid
            t_jump = t_cur + hi
            psi_at = engine.expmv(psi, hi)
            # channel selection
            jm_psi = engine.Jm @ psi_at
            rate_coll = params.gamma_c * float(np.vdot(jm_psi, jm_psi).real)
            g = (np.abs(psi_at) ** 2) @ engine.ground_mask
            rate_rep = params.w * float(g.sum())
            total = rate_coll + rate_rep
            if total <= 0.0:
                raise NumericalError(f"vanishing jump rate at t={t_jump}")
            if rng.random() * total < rate_coll:
                chan = 0
                psi = jm_psi / np.linalg.norm(jm_psi)
            else:
                j = int(np.searchsorted(np.cumsum(g) / g.sum(), rng.random()))
                j = min(j, params.N - 1)
                chan = 1 + j
                psi = engine.sigma_plus[j] @ psi_at
                psi /= np.linalg.norm(psi)
            max_norm_err = max(max_norm_err,
                               abs(float(np.linalg.norm(psi)) - 1.0))
            if record_jumps:
                jump_times.append(t_jump)
                jump_chans.append(chan)
            t_cur = t_jump
            u = rng.random()
        else:
            psi = psi_next
            t_cur = t_cur + dt
        while next_sample < len(times) and times[next_sample] <= t_cur + 1e-15 * max(t_cur, 1.0):
            sample(psi, next_sample)
            next_sample += 1

    while next_sample < len(times):
        sample(psi, next_sample)
        next_sample += 1
    return out, jump_times, jump_chans, max_norm_err, max_imag


def evolve_trajectory(params: ModelParams, psi0: np.ndarray | None, t_end: float,
                      seed: int, observables=DEFAULT_OBSERVABLES,
                      n_out: int = 1001, engine: str = "auto",
                      extra_operators=None,
                      record_jumps: bool = True) -> TrajectoryRecord:
    """Evolve one quantum trajectory and sample observables on a uniform grid.

    psi0 defaults to the all-ground product state. The record is a pure
    function of (params, psi0, t_end, seed, grid, engine).
    """
    validate(params)
    if params.N > HARD_MAX_N:
        raise ValidationError(f"N={params.N} exceeds the solver limit {HARD_MAX_N}")
    if t_end <= 0:
        raise ValidationError(f"t_end must be > 0, got {t_end}")
    if n_out < 2:
        raise ValidationError("n_out must be at least 2")
    if psi0 is None:
        psi0 = hilbert.ground_state(params.N)
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (params.dim,):
        raise ValidationError(f"psi0 must have length {params.dim}")
    nrm = np.linalg.norm(psi0)
    if abs(nrm - 1.0) > 1e-10:
        raise ValidationError(f"psi0 must be normalized (norm {nrm!r})")

    kind = _pick_engine(params, engine)
    eng = _get_engine(params, kind)
    obs = _ObservableSet(observables, params, eng, extra_operators)
    rng = _rng_for(seed)
    times = np.linspace(0.0, float(t_end), n_out)

    if kind == "spectral":
        out, jt, jc, nerr, ierr = _evolve_spectral(
            eng, psi0, float(t_end), rng, obs, times, record_jumps)
    else:
        out, jt, jc, nerr, ierr = _evolve_series(
            eng, psi0, float(t_end), rng, obs, times, record_jumps)
    return TrajectoryRecord(
        params=params, seed=seed, engine=kind, times=times, observables=out,
        jump_times=np.array(jt, dtype=float),
        jump_channels=np.array(jc, dtype=np.int64),
        max_norm_restore_error=nerr, max_imag_residual=ierr,
    )


def _run_chunk(args):
    (params, psi0, t_end, seeds, observables, n_out, engine,
     record_jumps) = args
    return [evolve_trajectory(params, psi0, t_end, s, observables=observables,
                              n_out=n_out, engine=engine,
                              record_jumps=record_jumps) for s in seeds]


def run_ensemble(params: ModelParams, psi0: np.ndarray | None, t_end: float,
                 n_traj: int, master_seed: int,
                 observables=DEFAULT_OBSERVABLES, n_out: int = 1001,
                 engine: str = "auto", workers: int = 1,
                 record_jumps: bool = True) -> list[TrajectoryRecord]:
    """Run n_traj independent trajectories with derived per-trajectory seeds.

    Trajectory k uses the stream seed derive_seed(master_seed, k), so the
    result list is bitwise independent of `workers` and of scheduling order.
    """
    if n_traj < 1:
        raise ValidationError(f"n_traj must be >= 1, got {n_traj}")
    seeds = [derive_seed(master_seed, k) for k in range(n_traj)]
    if workers <= 1 or n_traj == 1:
        return _run_chunk((params, psi0, t_end, seeds, tuple(observables),
                           n_out, engine, record_jumps))
    chunks = max(workers * 4, 1)
    bounds = np.linspace(0, n_traj, chunks + 1).astype(int)
    tasks = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b > a:
            tasks.append((params, psi0, t_end, seeds[a:b], tuple(observables),
                          n_out, engine, record_jumps))
    results: list[list[TrajectoryRecord]] = [None] * len(tasks)
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(_run_chunk, t): i for i, t in enumerate(tasks)}
        for fut in concurrent.futures.as_completed(futures):
            results[futures[fut]] = fut.result()
    out: list[TrajectoryRecord] = []
    for chunk in results:
        out.extend(chunk)
    return out


def steady_state(records: list[TrajectoryRecord], t1: float | None = None,
                 T: float | None = None) -> SteadyStateEstimate:
    """Time average over [t1, t1 + T] per trajectory, then ensemble statistics.

    The standard error is the ensemble spread of per-trajectory time
    averages divided by sqrt(n_traj).
    """
    if not records:
        raise ValidationError("no trajectory records supplied")
    params = records[0].params
    if params.w == 0.0:
        raise ValidationError(
            "w = 0 has no unique steady state (collective dark states persist)")
    if t1 is None:
        t1 = default_burn_in(params)
    if T is None:
        T = default_window(params)
    if T <= 0:
        raise ValidationError(f"averaging window T must be > 0, got {T}")
    t_end = min(float(r.times[-1]) for r in records)
    if t1 + T > t_end * (1 + 1e-12):
        raise ValidationError(
            f"t1 + T = {t1 + T} exceeds the shortest trajectory end {t_end}")
    names = records[0].observables.keys()
    est = SteadyStateEstimate(params=params, t1=float(t1), T=float(T),
                              n_traj=len(records))
    selections = []
    for rec in records:
        sel = (rec.times >= t1) & (rec.times <= t1 + T)
        if not np.any(sel):
            raise ValidationError("averaging window contains no samples")
        selections.append(sel)
    for name in names:
        means = np.empty(len(records))
        for i, rec in enumerate(records):
            means[i] = rec.observables[name][selections[i]].mean()
        mean = float(means.mean())
        se = float(means.std(ddof=1) / math.sqrt(len(records))) \
            if len(records) > 1 else float("nan")
        est.observables[name] = (mean, se)
    return est


def dump_ensemble(records: list[TrajectoryRecord], stream) -> None:
    """Columnar dump: a '#'-prefixed JSON header, then one row per sample
    (trajectory index, time, observable columns)."""
    import json

    if not records:
        raise ValidationError("no trajectory records supplied")
    p = records[0].params
    names = list(records[0].observables.keys())
    header = {
        "params": {"N": p.N, "gamma_c": p.gamma_c, "w": p.w},
        "engine": records[0].engine,
        "seeds": [r.seed for r in records],
        "grid": {"t_end": float(records[0].times[-1]),
                 "n_out": int(len(records[0].times))},
        "columns": ["traj", "time"] + names,
    }
    stream.write("# " + json.dumps(header, sort_keys=True) + "\n")
    stream.write(",".join(header["columns"]) + "\n")
    for k, rec in enumerate(records):
        for i, t in enumerate(rec.times):
            vals = ",".join(repr(float(rec.observables[n][i])) for n in names)
            stream.write(f"{k},{float(t)!r},{vals}\n")
