import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from swpm.config import ExperimentConfig, load_config, parse_config, serialize_config
from swpm.errors import ConfigError
from swpm.particles import MixtureSpec
from swpm.reduction import ReductionScheme


def test_defaults():
    c = parse_config("")
    assert c == ExperimentConfig()
    assert c.scheme is ReductionScheme.PTHF and c.m0 == 1024 and c.N == 500
    assert c.t_end == 3.0 and c.ci_alpha == 1e-3
    np.testing.assert_allclose(c.time_grid, np.linspace(0, 3, 31))


def test_parse_example():
    c = parse_config(
        """
        # comment line
        scheme = energy_hf
        m0=256   # trailing comment
        N=40
        tEnd=1.5
        timeGridPoints=4
        V1=-1, 1, 0
        T2=2.5
        moments=s,T
        """
    )
    assert c.scheme is ReductionScheme.ENERGY_HF
    assert (c.m0, c.N, c.t_end) == (256, 40, 1.5)
    assert c.mixture == MixtureSpec(V1=(-1, 1, 0), T2=2.5)
    assert c.moments == ("s", "T")
    np.testing.assert_allclose(c.time_grid, [0, 0.5, 1.0, 1.5])


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        ("m0=10\nbogus=1", 2, "unknown key"),
        ("m0=10\nm0=12", 2, "duplicate"),
        ("\n\nm0=ten", 3, "m0"),
        ("N=0", 1, "N must"),
        ("scheme=stochastic", 1, "stochastic"),
        ("m0=3\nV1=1,2", 2, "3 components"),
        ("T1=-1", 1, "temperatures"),
        ("reductionTriggerFactor=0.5", 1, "reductionTriggerFactor"),
        ("ciAlpha=2", 1, "ciAlpha"),
        ("moments=s,zeta", 1, "unknown component"),
        ("just text", 1, "key=value"),
        ("tEnd=nan", 1, "tEnd"),
    ],
)
def test_errors_name_the_line(text, line, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.lineno == line
    assert fragment in str(info.value)
    assert str(info.value).startswith(f"line {line}:")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.cfg")
    p = tmp_path / "a.cfg"
    p.write_text("seed=42\n")
    assert load_config(p).seed == 42


def test_direct_construction_validates():
    with pytest.raises(ConfigError):
        ExperimentConfig(m0=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(reference="oracle")
    assert ExperimentConfig(t_end=2.0, time_grid_points=1).time_grid.tolist() == [2.0]


finite = st.floats(-50, 50, allow_nan=False)
configs = st.builds(
    ExperimentConfig,
    scheme=st.sampled_from(list(ReductionScheme)),
    m0=st.integers(1, 10**6),
    N=st.integers(1, 10**5),
    t_end=st.floats(0, 100),
    time_grid_points=st.integers(1, 1000),
    mixture=st.builds(
        MixtureSpec,
        alpha=st.floats(0, 1),
        V1=st.tuples(finite, finite, finite),
        V2=st.tuples(finite, finite, finite),
        T1=st.floats(1e-3, 100),
        T2=st.floats(1e-3, 100),
    ),
    seed=st.integers(0, 2**64 - 1),
    trigger_factor=st.floats(1.01, 10),
    target_factor=st.floats(0.01, 1.0),
    workers=st.integers(0, 64),
    ci_alpha=st.floats(1e-9, 0.5),
    reference=st.sampled_from(["hierarchy", "equilibrium"]),
    moments=st.lists(st.sampled_from(["s", "Pi11", "h2", "T", "E", "q3"]), min_size=1, max_size=4).map(tuple),
)


@pytest.mark.property
@given(configs)
def test_serialization_round_trip(c):
    assert parse_config(serialize_config(c)) == c
