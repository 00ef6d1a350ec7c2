"""Physics deliverables: emission rates, subspace populations, and the
inter-subspace transition-rate diagram.

The emission rate is I = gamma_c <J+J->; the uncorrelated baseline is
N_e gamma_c with N_e = N/2 + <Jz>. States with I above (below) the baseline
are classified superradiant (subradiant).

Transition rates between (J, M) subspaces are computed numerically from
projectors, averaging over the degenerate initial states and summing over
final states: collective decay connects (J, M) -> (J, M-1) with rate
gamma_c (J+M)(J-M+1) (the ladder coefficient, recovered here as a
projector norm), repumping connects (J, M) -> (J', M+1) for
J' in {J-1, J, J+1} with no simple closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import hilbert, liouville
from .errors import ValidationError
from .mcwf import SteadyStateEstimate
from .model import ModelParams, validate

CLASSIFY_RTOL = 1e-9


@dataclass(frozen=True)
class EmissionReport:
    """Emission rate, uncorrelated baseline, and their comparison."""

    I: float
    I_uncorr: float
    Ne: float
    regime: str
    classification: str            # superradiant | subradiant | neutral
    I_err: float = float("nan")
    Ne_err: float = float("nan")

    @property
    def enhancement(self) -> float:
        return self.I / self.I_uncorr if self.I_uncorr > 0 else float("inf")


def _classify(I: float, I_uncorr: float) -> str:
    tol = CLASSIFY_RTOL * max(abs(I), abs(I_uncorr), 1.0)
    if I > I_uncorr + tol:
        return "superradiant"
    if I < I_uncorr - tol:
        return "subradiant"
    return "neutral"


def emission_report(params: ModelParams, source) -> EmissionReport:
    """Emission rate report from either solver output.

    `source` is a SteadyStateEstimate carrying the JpJm and Jz observables,
    a density matrix, or a pure state vector.
    """
    validate(params)
    gc = params.gamma_c
    i_err = ne_err = float("nan")
    if isinstance(source, SteadyStateEstimate):
        jpjm, jpjm_se = source.observables.get("JpJm", (None, None))
        jz, jz_se = source.observables.get("Jz", (None, None))
        if jpjm is None or jz is None:
            raise ValidationError(
                "steady-state estimate must carry JpJm and Jz observables")
        i_err = gc * jpjm_se
        ne_err = jz_se
    elif isinstance(source, np.ndarray) and source.ndim == 2:
        jpjm = liouville.expect(hilbert.build_collective("JpJm", params.N), source)
        jz = liouville.expect(hilbert.build_collective("J_z", params.N), source)
    elif isinstance(source, np.ndarray) and source.ndim == 1:
        psi = source
        op = hilbert.build_collective("JpJm", params.N)
        jpjm = float(np.vdot(psi, op @ psi).real)
        jz = float(np.vdot(psi, hilbert.build_collective("J_z", params.N) @ psi).real)
    else:
        raise ValidationError(f"unsupported emission source {type(source)!r}")
    ne = params.N / 2.0 + jz
    I = gc * jpjm
    i_unc = ne * gc
    return EmissionReport(I=I, I_uncorr=i_unc, Ne=ne, regime=params.regime,
                          classification=_classify(I, i_unc),
                          I_err=i_err, Ne_err=ne_err)


@dataclass(frozen=True)
class SubspaceTable:
    """P_{M,J} populations with their provenance (oracle or mcwf)."""

    N: int
    source: str
    entries: tuple            # rows (J, M, P, err); err is nan for oracle

    def population(self, J: float, M: float) -> float:
        for row in self.entries:
            if row[0] == J and row[1] == M:
                return row[2]
        raise ValidationError(f"no subspace (J={J}, M={M}) in table")

    def total(self) -> float:
        return float(sum(row[2] for row in self.entries))

    def weight_at_or_below(self, J_max: float) -> float:
        return float(sum(row[2] for row in self.entries if row[0] <= J_max + 1e-9))


def subspace_populations(decomp, source, params: ModelParams | None = None) -> SubspaceTable:
    """P_{M,J} = <P_{M,J}> from a density matrix or an MCWF estimate."""
    subs = list(decomp)
    if not subs:
        raise ValidationError("empty decomposition")
    N = int(round(np.log2(subs[0].dimension)))
    rows = []
    if isinstance(source, np.ndarray) and source.ndim == 2:
        if source.shape != (2**N, 2**N):
            raise ValidationError(
                f"density matrix shape {source.shape} does not match N={N}")
        for s in subs:
            p = liouville.expect(hilbert.projector(s), source)
            rows.append((s.J, s.M, p, float("nan")))
        src = "oracle"
    elif isinstance(source, SteadyStateEstimate):
        for s in subs:
            name = f"P_J{s.J:g}_M{s.M:g}"
            if name not in source.observables:
                raise ValidationError(f"estimate lacks projector observable {name}")
            mean, se = source.observables[name]
            rows.append((s.J, s.M, mean, se))
        src = "mcwf"
    else:
        raise ValidationError(f"unsupported population source {type(source)!r}")
    return SubspaceTable(N=N, source=src, entries=tuple(rows))


@dataclass(frozen=True)
class TransitionEdge:
    J: float
    M: float
    J2: float
    M2: float
    mechanism: str            # decay | repump
    rate: float


@dataclass(frozen=True)
class NetEdge:
    """Population-weighted dominant direction between two subspaces."""

    J: float
    M: float
    J2: float
    M2: float
    mechanism: str            # mechanism of the dominant flow
    net_flow: float


@dataclass(frozen=True)
class TransitionDiagram:
    N: int
    gamma_c: float
    w: float
    edges: tuple
    net_edges: tuple = field(default=())


def transition_diagram(params: ModelParams, decomp,
                       populations: SubspaceTable | None = None) -> TransitionDiagram:
    """Directed inter-subspace rates; net arrows when populations are given.

    Decay rates are gamma_c * avg_xi || P_(J,M-1) J- |J,M,xi> ||^2 and equal
    the ladder coefficient gamma_c (J+M)(J-M+1); repump rates are
    w * avg_xi sum_j || P_(J',M+1) sigma+_j |J,M,xi> ||^2. Rates out of each
    subspace sum to gamma_c (J+M)(J-M+1) and w (N/2 - M) respectively.
    """
    validate(params)
    subs = list(decomp)
    N = params.N
    if subs and subs[0].dimension != params.dim:
        raise ValidationError("decomposition does not match params.N")
    index = {(s.J, s.M): s for s in subs}
    Jm = hilbert.build_collective("J_minus", N)
    sps = [hilbert.build_single_atom("sigma_plus", j, N) for j in range(N)]
    edges = []
    for s in subs:
        B = s.basis
        # collective decay: (J, M) -> (J, M-1)
        tgt = index.get((s.J, s.M - 1.0))
        if tgt is not None:
            Y = sp.csc_array(Jm @ B)
            overlap = (tgt.basis.conj().T @ Y).toarray()
            rate = params.gamma_c * float((np.abs(overlap) ** 2).sum()) / s.multiplicity
            edges.append(TransitionEdge(s.J, s.M, tgt.J, tgt.M, "decay", rate))
        # repump: (J, M) -> (J', M+1), J' in {J-1, J, J+1}
        if params.w > 0:
            for dj in (-1.0, 0.0, 1.0):
                tgt = index.get((s.J + dj, s.M + 1.0))
                if tgt is None:
                    continue
                acc = 0.0
                for op in sps:
                    Y = sp.csc_array(op @ B)
                    acc += float((np.abs((tgt.basis.conj().T @ Y).toarray()) ** 2).sum())
                rate = params.w * acc / s.multiplicity
                edges.append(TransitionEdge(s.J, s.M, tgt.J, tgt.M, "repump", rate))
    net_edges = []
    if populations is not None:
        pop = {(row[0], row[1]): row[2] for row in populations.entries}
        flows: dict[tuple, dict[str, float]] = {}
        for e in edges:
            pair = ((e.J, e.M), (e.J2, e.M2))
            key = (min(pair), max(pair))
            flows.setdefault(key, {})[e.mechanism] = \
                flows.setdefault(key, {}).get(e.mechanism, 0.0) \
                + e.rate * pop.get((e.J, e.M), 0.0)
        for (a, b), by_mech in flows.items():
            decay = by_mech.get("decay", 0.0)
            repump = by_mech.get("repump", 0.0)
            if decay >= repump:
                # decay flows a->b with a the higher-M end of the pair
                hi, lo = (a, b) if a[1] > b[1] else (b, a)
                net_edges.append(NetEdge(hi[0], hi[1], lo[0], lo[1],
                                         "decay", decay - repump))
            else:
                hi, lo = (a, b) if a[1] > b[1] else (b, a)
                net_edges.append(NetEdge(lo[0], lo[1], hi[0], hi[1],
                                         "repump", repump - decay))
    return TransitionDiagram(N=N, gamma_c=params.gamma_c, w=params.w,
                             edges=tuple(edges), net_edges=tuple(net_edges))


def decay_rate_closed_form(params: ModelParams, J: float, M: float) -> float:
    """Ladder algebra cross-check: gamma_c (J+M)(J-M+1)."""
    return params.gamma_c * (J + M) * (J - M + 1.0)
