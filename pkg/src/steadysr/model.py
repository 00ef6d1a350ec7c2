"""Physical parameters and cavity-QED relations.

All rates share one time unit; the conventional choice is gamma_c = 1 so that
the pump rate w is quoted in units of the collective decay rate. Parameter
objects are frozen dataclasses and safe to share across threads.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

from .errors import ValidationError

# Pumping regimes relative to the collective decay rate.
REGIME_WEAK = "weak"
REGIME_INTERMEDIATE = "intermediate"
REGIME_STRONG = "strong"


@dataclass(frozen=True)
class ModelParams:
    """Atom number, collective decay rate, and non-collective repump rate."""

    N: int
    gamma_c: float = 1.0
    w: float = 0.0

    @property
    def regime(self) -> str:
        """Pumping regime: weak (w < gamma_c), intermediate (gamma_c <= w < N*gamma_c),
        or strong (w >= N*gamma_c). The three intervals partition w >= 0."""
        if self.w < self.gamma_c:
            return REGIME_WEAK
        if self.w < self.N * self.gamma_c:
            return REGIME_INTERMEDIATE
        return REGIME_STRONG

    @property
    def dim(self) -> int:
        return 2**self.N


def validate(params: ModelParams) -> ModelParams:
    """Check invariants and return the params unchanged.

    Raises ValidationError naming the offending field.
    """
    if not isinstance(params.N, (int,)) or isinstance(params.N, bool):
        raise ValidationError(f"N must be an integer, got {params.N!r}")
    if params.N < 1:
        raise ValidationError(f"N must be >= 1, got {params.N}")
    if not math.isfinite(params.gamma_c) or params.gamma_c <= 0:
        raise ValidationError(f"gamma_c must be > 0, got {params.gamma_c}")
    if not math.isfinite(params.w) or params.w < 0:
        raise ValidationError(f"w must be >= 0, got {params.w}")
    return params


@dataclass(frozen=True)
class CQEDParams:
    """Single-atom cavity QED rates and the derived dimensionless numbers.

    cooperativity = g^2 / (Gamma * kappa)
    gamma_collective = cooperativity * Gamma = g^2 / kappa
    n0 (critical atom number)   = kappa * Gamma / g^2 = 1 / cooperativity
    m0 (critical photon number) = gamma_aux^2 / g^2
    """

    g: float
    kappa: float
    Gamma: float
    gamma_aux: float
    cooperativity: float
    gamma_collective: float
    n0: float
    m0: float


def derive_cqed(g: float, kappa: float, Gamma: float, gamma_aux: float) -> CQEDParams:
    """Derive cooperativity, collective decay rate, and critical numbers."""
    for name, value in (("g", g), ("kappa", kappa), ("Gamma", Gamma),
                        ("gamma_aux", gamma_aux)):
        if not math.isfinite(value) or value <= 0:
            raise ValidationError(f"{name} must be > 0, got {value}")
    coop = g * g / (Gamma * kappa)
    return CQEDParams(
        g=g,
        kappa=kappa,
        Gamma=Gamma,
        gamma_aux=gamma_aux,
        cooperativity=coop,
        gamma_collective=coop * Gamma,
        n0=kappa * Gamma / (g * g),
        m0=gamma_aux * gamma_aux / (g * g),
    )


@dataclass(frozen=True)
class CavityGeometry:
    """Geometric cavity description.

    A: mode cross-section area; F: finesse; lambda0: resonant wavelength;
    Q: atomic transition quality factor; V_eff: effective mode volume.
    """

    A: float
    F: float
    lambda0: float
    Q: float
    V_eff: float


def resonant_cross_section(lambda0: float) -> float:
    return 3.0 * lambda0**2 / (2.0 * math.pi)


def geometric_critical_numbers(geom: CavityGeometry) -> tuple[float, float]:
    """Critical atom and photon numbers from cavity geometry.

    n0 = 2*pi*A / (F * sigma_res) with sigma_res = 3*lambda0^2 / (2*pi),
    m0 = 4*pi^2 * V_eff / (Q * lambda0^3).
    """
    for name in ("A", "F", "lambda0", "Q", "V_eff"):
        value = getattr(geom, name)
        if not math.isfinite(value) or value <= 0:
            raise ValidationError(f"{name} must be > 0, got {value}")
    if geom.V_eff / geom.lambda0**3 < 1.0:
        # Mode volumes below lambda0^3 are unphysical for a resonant cavity.
        warnings.warn(
            f"V_eff/lambda0^3 = {geom.V_eff / geom.lambda0**3:.3g} < 1",
            stacklevel=2,
        )
    n0 = 2.0 * math.pi * geom.A / (geom.F * resonant_cross_section(geom.lambda0))
    m0 = 4.0 * math.pi**2 * geom.V_eff / (geom.Q * geom.lambda0**3)
    return n0, m0


_TOP_KEYS = {"N", "gamma_c", "w", "cqed", "geometry"}
_CQED_KEYS = {"g", "kappa", "Gamma", "gamma_aux"}
_GEOM_KEYS = {"A", "F", "lambda0", "Q", "V_eff"}


@dataclass(frozen=True)
class Config:
    """Resolved configuration: model params plus optional CQED blocks."""

    params: ModelParams
    cqed: CQEDParams | None = None
    geometry: CavityGeometry | None = None

    def as_dict(self) -> dict:
        out: dict = {"N": self.params.N, "gamma_c": self.params.gamma_c,
                     "w": self.params.w, "regime": self.params.regime}
        if self.cqed is not None:
            out["cqed"] = {
                "g": self.cqed.g, "kappa": self.cqed.kappa,
                "Gamma": self.cqed.Gamma, "gamma_aux": self.cqed.gamma_aux,
                "cooperativity": self.cqed.cooperativity,
                "gamma_collective": self.cqed.gamma_collective,
                "n0": self.cqed.n0, "m0": self.cqed.m0,
            }
        if self.geometry is not None:
            n0, m0 = geometric_critical_numbers(self.geometry)
            out["geometry"] = {
                "A": self.geometry.A, "F": self.geometry.F,
                "lambda0": self.geometry.lambda0, "Q": self.geometry.Q,
                "V_eff": self.geometry.V_eff, "n0": n0, "m0": m0,
            }
        return out


def _require_number(mapping: dict, key: str, context: str) -> float:
    if key not in mapping:
        raise ValidationError(f"missing key '{key}' in {context}")
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"key '{key}' in {context} must be a number, got {value!r}")
    return float(value)


def parse_config(doc: dict) -> Config:
    """Parse a configuration mapping; unknown keys are rejected."""
    if not isinstance(doc, dict):
        raise ValidationError("configuration root must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ValidationError(f"unknown configuration key(s): {sorted(unknown)}")
    if "N" not in doc:
        raise ValidationError("missing key 'N' in configuration")
    n_raw = doc["N"]
    if isinstance(n_raw, bool) or not isinstance(n_raw, int):
        raise ValidationError(f"key 'N' must be an integer, got {n_raw!r}")
    params = validate(ModelParams(
        N=n_raw,
        gamma_c=_require_number(doc, "gamma_c", "configuration") if "gamma_c" in doc else 1.0,
        w=_require_number(doc, "w", "configuration") if "w" in doc else 0.0,
    ))

    cqed = None
    if "cqed" in doc:
        block = doc["cqed"]
        if not isinstance(block, dict):
            raise ValidationError("'cqed' must be an object")
        unknown = set(block) - _CQED_KEYS
        if unknown:
            raise ValidationError(f"unknown 'cqed' key(s): {sorted(unknown)}")
        cqed = derive_cqed(*(_require_number(block, k, "'cqed'") for k in
                             ("g", "kappa", "Gamma", "gamma_aux")))

    geometry = None
    if "geometry" in doc:
        block = doc["geometry"]
        if not isinstance(block, dict):
            raise ValidationError("'geometry' must be an object")
        unknown = set(block) - _GEOM_KEYS
        if unknown:
            raise ValidationError(f"unknown 'geometry' key(s): {sorted(unknown)}")
        geometry = CavityGeometry(*(_require_number(block, k, "'geometry'") for k in
                                    ("A", "F", "lambda0", "Q", "V_eff")))
        geometric_critical_numbers(geometry)  # runs positivity checks

    return Config(params=params, cqed=cqed, geometry=geometry)


def load_config(path: str) -> Config:
    """Load and validate a JSON configuration file."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"invalid JSON in {path}: {exc}") from exc
    return parse_config(doc)
