import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tweezer import constants as C
from tweezer.adiabatic import (ActionMapTable, AxisCut, NoRootError, RampProfile,
                               action_1d, action_integral, adiabatic_temperature,
                               build_action_map, check_adiabaticity, constant_margin_ramp,
                               cut_action, hold_time_check, linear_ramp, map_escape_energy,
                               match_action, smoothstep_ramp)
from tweezer.trap import TrapConfig

import oracles


def test_harmonic_action_quadrature():
    m, omega = C.m_Rb87, 2 * math.pi * 1e5
    v = lambda q: 0.5 * m * omega**2 * q * q
    for e in np.geomspace(1e-30, 1e-26, 9):
        s = action_integral(e, v, 0.0, -1.0, 1.0, m)
        assert s == pytest.approx(oracles.harmonic_action(e, omega, m), rel=1e-6)


def test_action_small_energy_and_monotone(cfg_nog):
    u0 = cfg_nog.u0
    cut = AxisCut.at_depth(cfg_nog, u0)
    e = np.geomspace(1e-10, 0.99, 40) * u0
    s = np.array([cut_action(x, cut) for x in e])
    assert np.all(np.diff(s) > 0)
    omega = math.sqrt(4 * u0 / (cfg_nog.atom_mass * cfg_nog.waist**2))
    assert s[0] == pytest.approx(oracles.harmonic_action(e[0], omega, cfg_nog.atom_mass),
                                 rel=1e-6)


def test_action_errors(cfg):
    with pytest.raises(ValueError):
        action_1d(0.0, cfg.u0, cfg)
    with pytest.raises(ValueError):
        action_1d(1.1 * cfg.u0, cfg.u0, cfg)


def test_map_identity_and_errors(cfg):
    u_i = cfg.u0
    deep = AxisCut.at_depth(cfg, u_i)
    assert map_escape_energy(u_i, u_i, cfg) == deep.barrier
    with pytest.raises(ValueError):
        map_escape_energy(2 * u_i, u_i, cfg)
    with pytest.raises(ValueError):
        map_escape_energy(0.0, u_i, cfg)
    with pytest.raises(NoRootError):
        match_action(0.99 * u_i, u_i, 1e-3 * u_i, cfg)


def test_harmonic_limit_small_ratios(cfg_nog):
    # deep below the barrier at both ends the map is e_f/e_i = sqrt(u_f/u_i)
    u_i = cfg_nog.u0
    e_i = 1e-7 * u_i
    for r in (0.5, 0.1, 0.01):
        assert match_action(e_i, u_i, r * u_i, cfg_nog) == pytest.approx(e_i * math.sqrt(r),
                                                                         rel=1e-5)


def test_map_examples(cfg):
    u_i = cfg.u0
    e = map_escape_energy(0.4e-6 * C.k_B, u_i, cfg)
    assert e / C.k_B == pytest.approx(27.3e-6, rel=0.01)


def test_action_map_table(cfg):
    one = build_action_map(cfg.u0, [1.0], cfg)
    assert one.rows == [(1.0, 1.0)]
    ratios = np.geomspace(1e-3, 1, 13)
    t = build_action_map(cfg.u0, ratios, cfg)
    assert t.rows[-1] == (1.0, 1.0)
    assert np.all(np.diff(t.e_ratio) > 0)
    assert np.array_equal(t.energy_ratio(t.u_ratio), t.e_ratio)
    # concave on log-spaced grid and above the harmonic law near 1
    assert np.all(t.e_ratio >= np.sqrt(t.u_ratio) - 1e-12)
    csv = t.to_csv().splitlines()
    assert csv[0] == "u_ratio,e_ratio"
    assert csv[1].startswith(repr(float(t.u_ratio[0])))
    assert csv[-1] == "1,1"


def test_action_map_roundtrip(cfg):
    t = build_action_map(cfg.u0, np.geomspace(1e-4, 1, 41), cfg)
    rng = np.random.default_rng(1)
    u = 10 ** rng.uniform(-4, 0, 100)
    back = np.array([t.escape_ratio(x) for x in t.energy_ratio(u)])
    assert np.allclose(back, u, rtol=1e-6, atol=0)


def test_table_validation():
    with pytest.raises(ValueError):
        ActionMapTable(np.array([0.1, 0.5]), np.array([0.3, 0.7]), 1.0)
    with pytest.raises(ValueError):
        ActionMapTable(np.array([0.5, 0.1, 1.0]), np.array([0.3, 0.2, 1.0]), 1.0)


def test_harmonic_bound_near_one(cfg):
    for r in np.linspace(0.5, 0.99, 8):
        e = map_escape_energy(r * cfg.u0, cfg.u0, cfg) / cfg.u0
        assert e >= math.sqrt(r)


def test_adiabatic_temperature():
    assert adiabatic_temperature(33e-6, 1.0, 1.0) == 33e-6
    t = adiabatic_temperature(33e-6, 2.8e-3, 12e-6)
    assert t == pytest.approx(2.16e-6, abs=0.005e-6)
    assert adiabatic_temperature(10.0, 4.0, 1.0) == 5.0
    u = np.geomspace(1e-6, 1e-3, 20)
    assert np.all(np.diff(adiabatic_temperature(33e-6, 2.8e-3, u)) > 0)


def test_ramp_validation():
    with pytest.raises(ValueError):
        RampProfile([0, 1, 1], [1, 1, 1])
    with pytest.raises(ValueError):
        RampProfile([0, 1, 2], [1, 0, 1])
    with pytest.raises(ValueError):
        check_adiabaticity(RampProfile([0, 1], [1, 1]), TrapConfig())


def test_adiabaticity_examples(cfg):
    flat = RampProfile(np.linspace(0, 1e-3, 11), np.full(11, cfg.u0))
    assert check_adiabaticity(flat, cfg)[0] == 0.0
    u_lo = 12e-6 * C.k_B
    slow = linear_ramp(cfg.u0, u_lo, 2.5e-3)
    fast = linear_ramp(cfg.u0, u_lo, 2.5e-6)
    m_slow, when = check_adiabaticity(slow, cfg)
    m_fast, _ = check_adiabaticity(fast, cfg)
    assert m_fast / m_slow == pytest.approx(1000.0, rel=1e-9)
    assert when == pytest.approx(2.5e-3)
    smooth = smoothstep_ramp(cfg.u0, u_lo, 2.5e-3)
    assert smooth.shape == "smoothstep"
    assert smooth.depth_at(0.0) == cfg.u0


def test_constant_margin_ramp(cfg):
    ramp = constant_margin_ramp(cfg.u0, 0.01 * cfg.u0, 5e-4, cfg)
    margin, _ = check_adiabaticity(ramp, cfg)
    assert margin == pytest.approx(5e-4, rel=1e-3)
    assert ramp.depths[-1] == pytest.approx(0.01 * cfg.u0, rel=1e-9)


def test_hold_time():
    cfg = TrapConfig()
    assert hold_time_check(cfg.u0, 20e-3, cfg)
    assert not hold_time_check(cfg.u0, 0.0, cfg)
    nu = math.sqrt(2 * cfg.u0 / (cfg.atom_mass * cfg.rayleigh_range**2)) / (2 * math.pi)
    assert hold_time_check(cfg.u0, 10 / nu, cfg)
    assert not hold_time_check(cfg.u0, 9.99 / nu, cfg)


@settings(max_examples=20, deadline=None)
@given(r=st.floats(1e-3, 0.999))
def test_map_monotone_property(cfg, r):
    a = map_escape_energy(r * cfg.u0, cfg.u0, cfg)
    b = map_escape_energy(min(1.0, r * 1.01) * cfg.u0, cfg.u0, cfg)
    assert b > a
