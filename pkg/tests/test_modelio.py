import numpy as np
import pytest

from mapexp.laws import BivariateAtoms, LogParetoLaw, PointMass, ProductLaw
from mapexp.model import DenseFiniteChain, JumpComponent, LevyTripletBiv, MapSpec
from mapexp.modelio import (
    ModelFileError,
    dump_model,
    dumps_model,
    load_model,
    loads_model,
)
from mapexp.scenarios import SCENARIO_IDS, build_scenario


@pytest.mark.parametrize("sid", SCENARIO_IDS)
def test_scenario_specs_round_trip(sid):
    spec = build_scenario(sid).spec
    text = dumps_model(spec)
    again = dumps_model(loads_model(text))
    assert text == again


def test_round_trip_preserves_values():
    spec = build_scenario("em_divergent").spec
    back = loads_model(dumps_model(spec))
    trip = back.triplet(0)
    assert trip.drift_xi == spec.triplet(0).drift_xi
    law = trip.jumps.law
    assert isinstance(law, ProductLaw)
    assert isinstance(law.y_law, LogParetoLaw)
    assert law.y_law.alpha == 1.0


def test_file_round_trip(tmp_path):
    spec = build_scenario("degenerate_curve").spec
    p = tmp_path / "m.json"
    dump_model(spec, p)
    again = load_model(p)
    assert dumps_model(again) == dumps_model(spec)


def test_malformed_json_reports_position():
    with pytest.raises(ModelFileError) as exc:
        loads_model('{"spec_version": 1, "chain": }')
    msg = str(exc.value)
    assert "line" in msg and "column" in msg


def test_missing_spec_version():
    with pytest.raises(ModelFileError):
        loads_model('{"chain": {"kind": "dense", "generator": [[0.0]]}}')


def test_wrong_spec_version():
    with pytest.raises(ModelFileError) as exc:
        loads_model('{"spec_version": 99, "chain": '
                    '{"kind": "dense", "generator": [[0.0]]}}')
    assert "spec_version" in str(exc.value)


def test_unknown_law_kind():
    doc = ('{"spec_version": 1,'
           ' "chain": {"kind": "dense", "generator": [[-1.0, 1.0], [1.0, -1.0]]},'
           ' "states": [{"id": 0, "drift": [1.0, 0.0],'
           '   "jumps": {"rate": 1.0, "law": {"mystery": 3}}},'
           '  {"id": 1, "drift": [1.0, 0.0]}],'
           ' "switch_laws": []}')
    with pytest.raises(ModelFileError) as exc:
        loads_model(doc)
    assert "mystery" in str(exc.value)


def test_unknown_chain_kind():
    with pytest.raises(ModelFileError):
        loads_model('{"spec_version": 1, "chain": {"kind": "hexagonal"}}')


def test_missing_file_raises_model_error(tmp_path):
    with pytest.raises(ModelFileError):
        load_model(tmp_path / "nope.json")


def test_asymmetric_sigma_rejected():
    doc = ('{"spec_version": 1,'
           ' "chain": {"kind": "dense", "generator": [[0.0]]},'
           ' "states": [{"id": 0, "drift": [1.0, 1.0],'
           '   "sigma": [[1.0, 0.3], [0.1, 1.0]]}],'
           ' "switch_laws": []}')
    with pytest.raises(ModelFileError) as exc:
        loads_model(doc)
    assert "symmetric" in str(exc.value)
