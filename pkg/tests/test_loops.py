import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eploom import loops
from eploom.loops import Direction, LoopSpec, PerturbationSpec, apply_perturbation, param_at, preset

amp = st.floats(-0.4, 0.4, allow_nan=False)
angle = st.floats(-20.0, 20.0, allow_nan=False)


def test_presets():
    p1, p2, p3 = preset(1), preset(2), preset(3)
    assert (p1.Delta0, p1.g0, p1.G0, p1.Gamma0) == (0.0, 0.01, 0.2, 0.2)
    assert (p2.Delta0, p2.g0, p2.G0, p2.Gamma0) == (0.04, 0.1, 0.0, 0.1)
    assert (p3.Delta0, p3.g0, p3.G0, p3.gamma_const) == (0.2, 0.2, 0.2, 0.1)
    with pytest.raises(ValueError):
        preset(4)
    assert preset(3, omega=0.1).omega == 0.1


def test_param_at_examples():
    p = param_at(preset(1), 0.0)
    assert (p.delta, p.g, p.gamma) == (0.0, pytest.approx(0.21), 0.0)
    p = param_at(preset(2), math.pi)
    assert abs(p.delta) < 1e-16 and p.g == 0.1 and p.gamma == pytest.approx(0.1)
    p = param_at(preset(3), 1.3)
    assert p.gamma == 0.1


def test_full_turns_map_onto_start():
    for k in (1, 2, -1, -3):
        for i in (1, 2, 3):
            assert param_at(preset(i), 2 * math.pi * k) == param_at(preset(i), 0.0)


@given(amp, amp, amp, amp, angle)
def test_periodicity(d0, g0, G0, Gam0, th):
    loop = LoopSpec(d0, g0, G0, Gam0)
    a = np.array(loops.param_arrays(loop, th))
    b = np.array(loops.param_arrays(loop, th + 2 * math.pi))
    np.testing.assert_allclose(a, b, atol=1e-14)


@given(amp, amp, amp, amp, st.floats(0.0, 6.28))
def test_mirror_identity(d0, g0, G0, Gam0, s):
    cw = LoopSpec(d0, g0, G0, Gam0, direction="cw")
    ccw = LoopSpec(-d0, g0, G0, Gam0)
    a = np.array(loops.param_arrays(cw, cw.theta(s / cw.omega)))
    b = np.array(loops.param_arrays(ccw, ccw.theta(s / ccw.omega)))
    np.testing.assert_allclose(a, b, atol=1e-14)


def test_direction_and_theta():
    loop = LoopSpec(omega=0.2, direction=Direction.CW)
    assert loop.theta(5.0) == pytest.approx(-1.0)
    assert Direction.CCW.reversed() is Direction.CW
    assert LoopSpec(direction="CCW").direction is Direction.CCW
    assert loop.period == pytest.approx(10 * math.pi)
    assert LoopSpec(omega=0.5, cycles=3).duration == pytest.approx(12 * math.pi)


@pytest.mark.parametrize(
    "kwargs",
    [{"omega": 0.0}, {"omega": -1.0}, {"cycles": 0}, {"cycles": 1.5}, {"Delta0": math.inf}, {"g_const": math.nan}],
)
def test_validation(kwargs):
    with pytest.raises(ValueError):
        LoopSpec(**kwargs)


def test_constant_overrides_remove_amplitudes():
    p2, p3 = preset(2), preset(3)
    assert not p2.amplitude_enters("G0") and p2.amplitude_enters("Gamma0")
    assert not p3.amplitude_enters("Gamma0") and p3.amplitude_enters("G0")
    th = np.linspace(0, 2 * math.pi, 50)
    np.testing.assert_array_equal(loops.param_arrays(p2, th)[1], loops.param_arrays(p2.with_(G0=0.3), th)[1])
    np.testing.assert_array_equal(loops.param_arrays(p3, th)[2], loops.param_arrays(p3.with_(Gamma0=0.3), th)[2])


def test_dict_roundtrip():
    loop = preset(3, direction="cw", cycles=2)
    assert LoopSpec.from_dict(loop.to_dict()) == loop
    with pytest.raises(ValueError, match="unknown"):
        LoopSpec.from_dict({"Delta0": 0.1, "delta0": 0.1})


def test_perturbation_examples():
    assert apply_perturbation(preset(1), PerturbationSpec("G0", 0.0)) == preset(1)
    assert apply_perturbation(preset(1), PerturbationSpec("G0", 0.05, 0.11)).G0 == pytest.approx(0.16)
    assert apply_perturbation(preset(2), PerturbationSpec("Gamma0", 0.02, 0.0)).Gamma0 == pytest.approx(0.02)
    assert PerturbationSpec("Delta0", 0.1).at(preset(3), -0.1).Delta0 == pytest.approx(0.1)
    with pytest.raises(ValueError):
        PerturbationSpec("g0")


def test_continued_splitting_is_continuous():
    loop = preset(3)
    th = np.linspace(0, 2 * math.pi, 64)
    de, ties = loops.continued_splitting(loop, th)
    assert not ties.any()
    # continuation around an EP ends on the other branch
    assert de[-1] == pytest.approx(-de[0])
    assert np.max(np.abs(np.diff(de))) < 0.2 * np.max(np.abs(de))


def test_continued_splitting_reports_ep_crossings():
    th = np.linspace(0, 2 * math.pi, 101)
    _, ties = loops.continued_splitting(preset(1), th)
    # four crossings: cos(theta) = 0.16 and -0.4, each met twice
    assert ties.sum() == 4
