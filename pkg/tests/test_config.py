import json
from pathlib import Path

import pytest

from smfg.config import ConfigError, load_config, parse_config
from smfg.hamiltonian import Variant
from smfg.integrators import Integrator

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

MINIMAL = {"variant": "standard", "n": 100, "V": "sin(2*pi*x)", "flow": "gradient", "flow_config": {"t_max": 1}}


def with_(**changes):
    doc = json.loads(json.dumps(MINIMAL))
    for key, value in changes.items():
        if value is None:
            doc.pop(key, None)
        else:
            doc[key] = value
    return doc


def pointer_of(doc):
    with pytest.raises(ConfigError) as info:
        parse_config(doc)
    return info.value.pointer


def test_minimal_config_defaults():
    spec = parse_config(MINIMAL)
    cfg = spec.flow_config
    assert spec.variant is Variant.STANDARD and spec.dimension == 1 and spec.n == 100
    assert (cfg.rtol, cfg.atol, cfg.residual_stop) == (1e-8, 1e-10, 1e-9)
    assert cfg.record_every == pytest.approx(0.01)
    assert cfg.integrator is Integrator.AUTO
    assert spec.u0 == "0"
    assert spec.oracle() is not None


def test_monotone_needs_m0():
    assert pointer_of(with_(flow="monotone")) == "/m0"


@pytest.mark.parametrize(
    "doc, pointer",
    [
        (with_(colour="red"), "/colour"),
        (with_(flow_config={"t_max": 1, "tolerance": 1}), "/flow_config/tolerance"),
        (with_(flow_config={}), "/flow_config/t_max"),
        (with_(flow_config=None), "/flow_config"),
        (with_(flow_config={"t_max": -1}), "/flow_config"),
        (with_(flow_config={"t_max": 1, "integrator": "euler"}), "/flow_config/integrator"),
        (with_(flow_config={"t_max": 1, "max_steps": 1.5}), "/flow_config/max_steps"),
        (with_(n=2), "/n"),
        (with_(n="100"), "/n"),
        (with_(dimension=3), "/dimension"),
        (with_(V=None), "/V"),
        (with_(V="sin(2*pi*x"), "/V"),
        (with_(V="sin(2*pi*y)"), "/V"),
        (with_(V="log(x-2)"), "/V"),
        (with_(variant="viscous"), "/variant"),
        (with_(variant="congestion"), "/flow"),
        (with_(flow="newton"), "/flow"),
        (with_(psi="x"), "/psi"),
        (with_(flow="monotone", m0="cos(2*pi*x)"), "/m0"),
        (with_(b="cos(2*pi*x)^2", compare_exact=True), "/compare_exact"),
        (with_(dimension=2), "/V"),
        (with_(dimension=2, V=None, W="x+y", b="1"), "/b"),
    ],
)
def test_schema_errors_name_the_field(doc, pointer):
    assert pointer_of(doc) == pointer


def test_congestion_rejects_drift():
    doc = with_(variant="congestion", flow="monotone", m0="1", b="1")
    assert pointer_of(doc) == "/b"


def test_numbers_are_accepted_as_expressions():
    spec = parse_config(with_(V=0, u0=0.5))
    assert spec.potential == "0.0" and spec.u0 == "0.5"


def test_two_d_config_matches_setup():
    spec = load_config(CONFIGS / "two_d.json")
    assert spec.dimension == 2 and spec.n == 20
    assert spec.flow == "monotone" and spec.flow_config.t_max == 50
    m0, u0 = spec.initial_state()
    assert m0.shape == u0.shape == (20, 20)
    X, Y = spec.grid().nodes
    assert u0[3, 5] == pytest.approx(0.4 * __import__("math").cos(X[3, 5] + 2 * Y[3, 5]))
    assert spec.separable_potential() is not None
    assert spec.oracle().hbar == pytest.approx(2 * 0.2359143585, abs=1e-9)


def test_non_separable_2d_has_no_oracle():
    spec = parse_config(with_(dimension=2, V=None, W="sin(2*pi*x)*sin(2*pi*y)", flow="monotone", m0="1"))
    assert spec.oracle() is None


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_bundled_configs_load(path):
    spec = load_config(path)
    assert spec.to_dict()["n"] == spec.n
    # the schema echo parses back to the same spec
    doc = spec.to_dict()
    assert parse_config(doc) == spec


def test_load_errors(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(bad)
