import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from steadysr.errors import ValidationError
from steadysr.model import (CavityGeometry, ModelParams, derive_cqed,
                            geometric_critical_numbers, load_config,
                            parse_config, resonant_cross_section, validate)


def test_derive_cqed_direct_substitution():
    c = derive_cqed(g=1.0, kappa=10.0, Gamma=0.01, gamma_aux=1.0)
    assert c.cooperativity == pytest.approx(10.0, abs=0)
    assert c.gamma_collective == pytest.approx(0.1)
    assert c.n0 == pytest.approx(0.1)
    assert c.m0 == pytest.approx(1.0)


def test_derive_cqed_identity_case():
    c = derive_cqed(g=1.0, kappa=1.0, Gamma=1.0, gamma_aux=1.0)
    assert (c.cooperativity, c.gamma_collective, c.n0, c.m0) == (1, 1, 1, 1)


def test_tiny_critical_photon_number():
    # an ultra-narrow auxiliary linewidth six orders below the coupling
    # puts the critical photon number at 1e-12
    c = derive_cqed(g=1.0, kappa=1.0, Gamma=1.0, gamma_aux=1e-6)
    assert c.m0 == pytest.approx(1e-12, rel=1e-12)


def test_derive_cqed_rejects_nonpositive():
    with pytest.raises(ValidationError, match="kappa"):
        derive_cqed(g=1.0, kappa=0.0, Gamma=1.0, gamma_aux=1.0)
    with pytest.raises(ValidationError, match="Gamma"):
        derive_cqed(g=1.0, kappa=1.0, Gamma=-2.0, gamma_aux=1.0)


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100))
def test_cqed_identities(g, kappa, Gamma):
    c = derive_cqed(g=g, kappa=kappa, Gamma=Gamma, gamma_aux=1.0)
    assert c.n0 * c.cooperativity == pytest.approx(1.0, rel=1e-12)
    assert c.gamma_collective == pytest.approx(g * g / kappa, rel=1e-12)


def test_geometric_critical_numbers_unity_cases():
    lam = 0.7
    sigma = resonant_cross_section(lam)
    n0, _ = geometric_critical_numbers(
        CavityGeometry(A=sigma, F=2 * math.pi, lambda0=lam, Q=1.0, V_eff=lam**3))
    assert n0 == pytest.approx(1.0, rel=1e-12)
    _, m0 = geometric_critical_numbers(
        CavityGeometry(A=1.0, F=1.0, lambda0=lam, Q=4 * math.pi**2, V_eff=lam**3))
    assert m0 == pytest.approx(1.0, rel=1e-12)
    _, m0 = geometric_critical_numbers(
        CavityGeometry(A=1.0, F=1.0, lambda0=lam, Q=4 * math.pi**2 * 1e12,
                       V_eff=lam**3))
    assert m0 == pytest.approx(1e-12, rel=1e-12)


def test_geometry_warns_on_subwavelength_volume():
    geom = CavityGeometry(A=1.0, F=1.0, lambda0=1.0, Q=1.0, V_eff=0.5)
    with pytest.warns(UserWarning, match="V_eff"):
        geometric_critical_numbers(geom)


def test_regime_examples():
    assert ModelParams(N=10, gamma_c=1.0, w=0.1).regime == "weak"
    assert ModelParams(N=10, gamma_c=1.0, w=5.0).regime == "intermediate"
    assert ModelParams(N=10, gamma_c=1.0, w=20.0).regime == "strong"
    # boundaries belong to the upper regime
    assert ModelParams(N=10, gamma_c=1.0, w=1.0).regime == "intermediate"
    assert ModelParams(N=10, gamma_c=1.0, w=10.0).regime == "strong"


@given(st.integers(1, 50), st.floats(0.001, 100), st.floats(0, 1000))
def test_regimes_partition(N, gamma_c, w):
    regime = ModelParams(N=N, gamma_c=gamma_c, w=w).regime
    expected = "weak" if w < gamma_c else \
        "intermediate" if w < N * gamma_c else "strong"
    assert regime == expected


def test_validate_rejects_bad_params():
    with pytest.raises(ValidationError, match="N"):
        validate(ModelParams(N=0, gamma_c=1.0, w=1.0))
    with pytest.raises(ValidationError, match="gamma_c"):
        validate(ModelParams(N=2, gamma_c=-1.0, w=1.0))
    with pytest.raises(ValidationError, match="w"):
        validate(ModelParams(N=2, gamma_c=1.0, w=-0.5))
    p = ModelParams(N=2, gamma_c=1.0, w=0.0)
    assert validate(p) is p


def test_parse_config_happy_path():
    cfg = parse_config({"N": 3, "gamma_c": 2.0, "w": 0.5,
                        "cqed": {"g": 1.0, "kappa": 1.0, "Gamma": 1.0,
                                 "gamma_aux": 1.0}})
    assert cfg.params == ModelParams(N=3, gamma_c=2.0, w=0.5)
    assert cfg.cqed.cooperativity == 1.0
    as_dict = cfg.as_dict()
    assert as_dict["regime"] == "weak"
    assert as_dict["cqed"]["m0"] == 1.0


def test_parse_config_rejects_unknown_keys():
    with pytest.raises(ValidationError, match="bogus"):
        parse_config({"N": 2, "gamma_c": 1.0, "w": 1.0, "bogus": 1})
    with pytest.raises(ValidationError, match="extra"):
        parse_config({"N": 2, "cqed": {"g": 1, "kappa": 1, "Gamma": 1,
                                       "gamma_aux": 1, "extra": 2}})


def test_parse_config_type_errors():
    with pytest.raises(ValidationError, match="'N'"):
        parse_config({"N": 2.5})
    with pytest.raises(ValidationError, match="gamma_c"):
        parse_config({"N": 2, "gamma_c": -3.0})


def test_load_config_round_trip(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"N": 4, "gamma_c": 1.0, "w": 2.0}))
    cfg = load_config(str(path))
    assert cfg.params == ModelParams(N=4, gamma_c=1.0, w=2.0)
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValidationError, match="invalid JSON"):
        load_config(str(bad))
