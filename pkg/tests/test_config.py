import pytest

from cqnls import config, model
from cqnls.errors import ConfigError


def test_empty_document_gives_defaults():
    cfg = config.parse_config("")
    assert (cfg.sim.d, cfg.sim.m, cfg.sim.L, cfg.sim.beta) == (3, 64, 64.0, 2.0)
    assert cfg.audits.thresholds == "strict"
    assert cfg.output.plot is False


def test_full_document_round_trips_through_as_dict():
    text = """
[grid]
d = 1
m = 128
L = 50

[model]
beta = 0.5

[evolution]
dt = 0.005
t_end = 1.0
solver = "both"

[audits]
phases = ["conj2"]
dyads = [0.5, 1, 2]
thresholds = "desk"

[output]
dir = "runs/a"
plot = true
"""
    cfg = config.parse_config(text)
    assert cfg.sim.L == 50.0 and isinstance(cfg.sim.L, float)
    assert cfg.sim.solver == "both"
    assert cfg.audits.dyads == [0.5, 1.0, 2.0]
    d = cfg.as_dict()
    assert d["grid"] == {"d": 1, "m": 128, "L": 50.0}
    assert d["evolution"]["dt"] == 0.005
    assert config.thresholds_of(cfg.audits).sep == 1e-3


def test_raw_coefficients_are_normalized():
    cfg = config.parse_config("[model]\nalpha1 = 1.0\nalpha3 = 3.0\nalpha5 = 1.0\n")
    assert cfg.sim.beta == pytest.approx(model.normalize(model.RawParams(1.0, 3.0, 1.0)).beta)
    assert cfg.as_dict()["model"]["alpha3"] == 3.0


@pytest.mark.parametrize(
    "text, kind, line, column",
    [
        ("[grid]\nm = 48\n", "NonPowerOfTwo", 2, 1),
        ("[grid]\n  m = 48\n", "NonPowerOfTwo", 2, 3),
        ("[grid]\nm = 64\n\n[evolution]\ndt = \"fast\"\n", "TypeMismatch", 5, 1),
        ("[evolution]\nsolver = \"euler\"\n", "ConstraintViolation", 2, 1),
        ("[evolution]\ndt = 0.5\n", "ConstraintViolation", 2, 1),
        ("[grid]\nwidth = 3\n", "UnknownKey", 2, 1),
        ("[extras]\nx = 1\n", "UnknownKey", 1, 2),
        ("[audits]\ndyads = [3.0]\n", "DyadicOutOfRange", 2, 1),
        ("[model]\nbeta = 1.0\nalpha1 = 1.0\n", "ConstraintViolation", 2, 1),
        ("[model]\nalpha1 = 1.0\nalpha3 = 0.0\nalpha5 = 1.0\n", "NoStableEquilibrium", 2, 1),
        ("[grid\nm = 4\n", "ParseError", 1, None),
    ],
)
def test_errors_carry_kind_and_location(text, kind, line, column):
    with pytest.raises(ConfigError) as info:
        config.parse_config(text)
    err = info.value
    assert err.code == kind
    assert err.line == line
    if column is not None:
        assert err.column == column
    assert err.to_json()["error"] == kind


def test_load_config_rejects_non_utf8(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_bytes(b"\xff\xfe[grid]\n")
    with pytest.raises(ConfigError) as info:
        config.load_config(p)
    assert info.value.code == "ParseError"
