"""Shared fixtures: synthetic scenario presets with known ground truth."""

import numpy as np
import pytest

from stvs.oel import GeneratorSpec
from stvs.synth import ScenarioParams

# Oscillation family preset: a 4.8 Hz main mode whose envelope carries
# the damping under test, a faint persistent ambient mode and a
# fast-decaying fault remnant, mirroring the texture of real post-fault
# records.
OSC_PRESET = dict(
    freq_hz=4.8,
    osc_amp=0.05,
    ambient_amp=0.005,
    ambient_freq_hz=2.9,
    tr_amp=0.01,
    tr_freq_hz=7.7,
    tr_decay=3.0,
)

# Q-V line baked into scenario reactive power and the matching machine
# data that yields a 0.9 pu voltage cap.
QV_K1, QV_K2 = 0.4, 0.8
XD_PRIME, P_ACTIVE = 0.25, 0.85
V_CAP_TARGET = 0.9


def pickup_level(v_cap=V_CAP_TARGET, xd=XD_PRIME, p=P_ACTIVE, k1=QV_K1, k2=QV_K2):
    return float(
        np.sqrt((v_cap + (xd / k1) * (v_cap - k2) / v_cap) ** 2 + (xd * p / v_cap) ** 2)
    )


def osc_params(**overrides) -> ScenarioParams:
    merged = {**OSC_PRESET, "k1": QV_K1, "k2": QV_K2, **overrides}
    return ScenarioParams(**merged)


@pytest.fixture
def generator_specs():
    e_i = pickup_level()
    return {
        f"G{i}": GeneratorSpec(
            id=f"G{i}",
            xd_prime=XD_PRIME,
            p_active=P_ACTIVE,
            pickups=((e_i, 20.0),),
        )
        for i in (1, 2, 3)
    }
