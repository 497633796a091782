import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anisoflow.config import RunConfig, format_initial, initial_fields, parse_initial
from anisoflow.errors import ConfigError
from anisoflow.scalar_laws import PressureLaw
from anisoflow.spectral import get_grid


def test_default_round_trip():
    cfg = RunConfig()
    assert RunConfig.from_ini(cfg.to_ini()) == cfg


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from([16, 32, 64]),
    st.floats(2.0, 4.0),
    st.floats(0.5, 3.0),
    st.sampled_from(["zero", "scaled_identity 0.01", "random_symmetric 3 0.05"]),
    st.sampled_from(["const", "sin 2.0 0.5", "sin 1.0 0.0; cos_profile 1 2.0"]),
    st.one_of(st.none(), st.floats(0.1, 10.0)),
    st.lists(st.floats(0.01, 0.4), min_size=0, max_size=4),
    st.booleans(),
)
def test_round_trip_is_identity(n, gamma, M, preset, mod, c0, deltas, dealias):
    cfg = RunConfig(n=n, gamma=gamma, M=M, tensor_preset=preset, modulation=mod, c0=c0,
                    deltas=tuple(sorted(deltas, reverse=True)), dealias=dealias, delta=0.05,
                    initial="random_bandlimited(seed=3, kmax=4, eps=0.01)")
    again = RunConfig.from_ini(cfg.to_ini())
    assert again == cfg
    assert again.to_ini() == cfg.to_ini()


def test_table_round_trip():
    cfg = RunConfig(tensor_table=tuple(float(i) / 100 for i in range(16)))
    assert RunConfig.from_ini(cfg.to_ini()) == cfg


def test_parse_initial_forms():
    expect = ("acoustic", {"k": 2, "eps": 0.05})
    assert parse_initial("acoustic(k=2, eps=0.05)") == expect
    assert parse_initial("acoustic(2, 0.05)") == expect
    assert parse_initial("acoustic 2 0.05") == expect
    assert parse_initial("acoustic(eps=0.05, k=2)") == expect
    assert parse_initial("equilibrium") == ("equilibrium", {})
    assert format_initial(*expect) == "acoustic(k=2, eps=0.05)"
    for bad in ("vortex()", "acoustic(1, 2, 3)", "acoustic(q=1)", "acoustic(x)", "acoustic(1) junk"):
        with pytest.raises(ConfigError):
            parse_initial(bad)


@pytest.mark.parametrize("name", ["equilibrium", "acoustic", "density_bump", "shear", "random_bandlimited"])
def test_initial_fields_have_mean_mass(name):
    g = get_grid(2, 16)
    law = PressureLaw(1.0, 2.0, 1.5)
    rho, u = initial_fields(g, law, *parse_initial(name))
    assert g.mean(rho) == pytest.approx(1.5, abs=1e-14)
    assert np.min(rho) > 0 and u.shape == (2,) + g.shape


def test_validation_messages():
    base = RunConfig().to_ini()
    cases = {
        "[bogus]\nx = 1\n": "unknown section",
        "[grid]\nwidth = 3\n": "unknown key",
        "[grid]\nn = 48\n": "power of two",
        "[law]\ngamma = 1.0\n": "gamma",
        "[viscosity]\nmu = 0\n": "mu",
        "[mollifier]\ndelta = 2.0\n": "delta",
        "[monitor]\neta = 0\n": "eta",
        "[solver]\ndealias = maybe\n": "boolean",
        "[tensor]\npreset = zero\ntable = 0 0\n": "either",
    }
    for text, fragment in cases.items():
        with pytest.raises(ConfigError, match=fragment):
            RunConfig.from_ini(text)
    assert RunConfig.from_ini(base).scenario == "default"


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        RunConfig.load(tmp_path / "nope.ini")
