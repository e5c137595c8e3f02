import math

import pytest

from mapexp.extreal import ExtReal


def test_finite_value_roundtrip():
    x = ExtReal.of(2.5)
    assert x.is_finite
    assert not x.is_undefined
    assert x.value == 2.5
    assert x.as_json() == 2.5


def test_infinities():
    assert ExtReal.pos_inf().value == math.inf
    assert ExtReal.neg_inf().value == -math.inf
    assert ExtReal.pos_inf().as_json() == "+inf"
    assert ExtReal.neg_inf().as_json() == "-inf"
    assert not ExtReal.pos_inf().is_finite


def test_undefined():
    u = ExtReal.undefined()
    assert u.is_undefined
    assert not u.is_finite
    assert u.as_json() == "undefined"


def test_addition_rules():
    two = ExtReal.of(2.0)
    assert (two + ExtReal.of(3.0)).value == 5.0
    assert (two + ExtReal.pos_inf()).value == math.inf
    # opposite infinities have no sum
    assert (ExtReal.pos_inf() + ExtReal.neg_inf()).is_undefined
    assert (ExtReal.undefined() + two).is_undefined


def test_scale():
    assert ExtReal.of(3.0).scale(-2.0).value == -6.0
    assert ExtReal.pos_inf().scale(-1.0).value == -math.inf
    assert ExtReal.pos_inf().scale(2.0).value == math.inf
    assert ExtReal.undefined().scale(2.0).is_undefined
