"""Shipped hull profiles and bench scenarios.

The transport-aircraft profile is a parametric stand-in: a constant
radius cylinder with cubic nose and tail blends and a flat mid keel,
matched to published length, mass and centre of gravity.  The seaplane
model and the curved plate reproduce the classic validation setups at
model scale.
"""

from __future__ import annotations

import numpy as np

from .geometry import (HullMesh, Scenario, build_circular_section,
                       build_fuselage_mesh, build_prism_mesh)


def _smoothstep(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _blended_radius(x, length, r_max, tail_tip, tail_len, nose_tip, nose_len):
    r = np.full_like(x, r_max)
    tail = x < tail_len
    r[tail] = tail_tip + (r_max - tail_tip) * _smoothstep(x[tail] / tail_len)
    nose = x > length - nose_len
    r[nose] = nose_tip + (r_max - nose_tip) * _smoothstep(
        (length - x[nose]) / nose_len)
    return r


def d150_profile(n_samples: int = 81) -> dict:
    """Single-aisle transport fuselage stand-in: L=37.25 m, R=1.975 m.

    The keel follows the tapered body of revolution aft (rear upsweep)
    and at the nose, and is flat over the mid body.
    """
    length, r_max = 37.25, 1.975
    x = np.linspace(0.0, length, n_samples)
    radius = _blended_radius(x, length, r_max, tail_tip=0.15 * r_max,
                             tail_len=11.0, nose_tip=0.3 * r_max, nose_len=6.0)
    keel = r_max - radius
    return {"x": x, "radius": radius, "keel": keel, "length": length}


def d150_mesh(n_frames: int = 150, n_arc: int = 171) -> HullMesh:
    return build_fuselage_mesh(d150_profile(), n_frames, n_arc)


def d150_scenario(u0: float, w0: float, pitch0_deg: float = 6.0,
                  **overrides) -> Scenario:
    """Transport ditching case: zero thrust, zero aero forces."""
    base = dict(u0=u0, w0=w0, pitch0_deg=pitch0_deg, mass=68000.0,
                cog=(16.43, 1.72), inertia_yy=4.6e6, dt=5e-3, t_end=12.0,
                start_clearance=0.3)
    base.update(overrides)
    return Scenario(**base)


def d150_desk_mesh(n_frames: int = 96, n_arc: int = 48) -> HullMesh:
    """Coarse transport-hull mesh for quick runs and tests."""
    return build_fuselage_mesh(d150_profile(), n_frames, n_arc)


def d150_desk_scenario(u0: float, w0: float, pitch0_deg: float = 6.0,
                       **overrides) -> Scenario:
    # the cap tames singular jet-root point values on the coarse grid so
    # the dataset normalisation range stays representative
    overrides.setdefault("t_end", 8.0)
    overrides.setdefault("p_cap", 2.5e6)
    return d150_scenario(u0, w0, pitch0_deg, **overrides)


def tn2929_profile(n_samples: int = 61) -> dict:
    """Seaplane-fuselage model D stand-in: L=1.219 m, R=0.1016 m.

    Model D widens the rear hull, so the keel is kept flat from the tail
    up to the nose blend while the radius tapers at both tips.
    """
    length, r_max = 1.219, 0.1016
    x = np.linspace(0.0, length, n_samples)
    radius = _blended_radius(x, length, r_max, tail_tip=0.3 * r_max,
                             tail_len=0.45 * length, nose_tip=0.45 * r_max,
                             nose_len=0.2 * length)
    keel = np.where(x > length - 0.2 * length, r_max - radius, 0.0)
    return {"x": x, "radius": radius, "keel": keel, "length": length}


def tn2929_mesh(n_frames: int = 120, n_arc: int = 61) -> HullMesh:
    return build_fuselage_mesh(tn2929_profile(), n_frames, n_arc)


def tn2929_scenario(**overrides) -> Scenario:
    """Free landing of the seaplane model: 15.24 m/s at 10 deg trim."""
    base = dict(u0=15.24, w0=1.0, pitch0_deg=10.0, mass=5.4,
                cog=(0.55, 0.10), inertia_yy=0.5, dt=2.5e-4, t_end=2.0,
                start_clearance=0.05)
    base.update(overrides)
    return Scenario(**base)


def curved_plate_mesh(n_frames: int = 200, n_arc: int = 51) -> HullMesh:
    """1.0 m x 0.5 m plate with 2 m transverse radius."""
    section = build_circular_section(2.0, n_arc=n_arc, half_width=0.25)
    return build_prism_mesh(section, length=1.0, n_frames=n_frames)


def curved_plate_scenario(**overrides) -> Scenario:
    """Guided oblique impact of the curved plate (trolley test)."""
    base = dict(u0=40.0, w0=1.5, pitch0_deg=6.0, mass=20.0, cog=(0.5, 0.05),
                inertia_yy=2.0, dt=6e-5, t_end=0.12, guided=True,
                start_clearance=0.005)
    base.update(overrides)
    return Scenario(**base)
