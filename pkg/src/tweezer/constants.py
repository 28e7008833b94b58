"""Physical constants and unit scales (SI throughout)."""

from scipy import constants as _c

k_B = _c.k
h = _c.h
hbar = _c.hbar

m_Rb87 = 1.44316e-25  # kg
g = 9.81  # m/s^2

# unit scales: value_in_SI = number * scale
mW = 1e-3
W = 1.0
um = 1e-6
nm = 1e-9
us = 1e-6
ms = 1e-3
kHz = 1e3
uK = 1e-6
mK = 1e-3
nK = 1e-9


def kelvin_to_joule(t):
    return t * k_B


def joule_to_kelvin(e):
    return e / k_B
