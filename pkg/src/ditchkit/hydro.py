"""Per-section momentum-method hydrodynamics.

Sign conventions: the immersion velocity V is positive while the section
moves into the water.  The per-length vertical force fz shares that axis,
so slamming and buoyancy give fz < 0 (the water pushes the section back
out).  All quantities describe the y >= 0 half section; the dynamics
module doubles integrated loads.

The wetted correction follows the classic pile-up closure

    T - T0 = 0.6 * k * A(T) / c(T)

with T0 the undisturbed submergence and k the transverse flow correction.
Substantial derivatives D/Dt = d/dt + u d/dx are evaluated in
semi-Lagrangian form: the previous-step field is sampled at the foot of
the characteristic x + u*dt, which reduces to first-order upwinding for
u*dt <= dx and stays stable beyond.  Only previous-step fields enter, so
frames can be processed in any order.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericError
from .geometry import CrossSection, HullMesh, section_props

PILEUP_COEF = 0.6
PILEUP_TOL = 1e-8
PILEUP_MAX_ITER = 50


def pileup_solve(section: CrossSection, T0, k: float = 1.0):
    """Wetted submergence with pile-up for one section.

    Returns (T, c, A) at the corrected waterline.  The fixed point
    T = T0 + 0.6 k A(T)/c(T) is iterated to |dT| < 1e-8 (internally a bit
    tighter so a re-solve from the output is a no-op); if it fails to
    contract, bisection on the residual takes over.
    """
    scalar = np.isscalar(T0) or np.ndim(T0) == 0
    T0 = np.atleast_1d(np.asarray(T0, dtype=float))
    lookup = lambda T: section_props(section, T)
    T, c, a = _pileup_core(lookup, T0, k, float(section.t_max))
    if scalar:
        return float(T[0]), float(c[0]), float(a[0])
    return T, c, a


def pileup_solve_mesh(mesh: HullMesh, T0: np.ndarray, k: float = 1.0):
    """Vectorised pile-up solve, one depth per mesh frame."""
    return _pileup_core(mesh.props, np.asarray(T0, dtype=float), k,
                        float(np.max(mesh.t_max)) if mesh.n_frames else 0.0)


def _pileup_core(lookup, T0, k, t_table_max):
    wet = T0 > 0.0
    T = np.where(wet, T0, 0.0)
    if not np.any(wet):
        c, a = lookup(T)
        return T, np.zeros_like(T), np.zeros_like(T)

    for _ in range(PILEUP_MAX_ITER):
        c, a = lookup(T)
        corr = np.where(c > 0.0, PILEUP_COEF * k * a / np.maximum(c, 1e-300), 0.0)
        T_new = np.where(wet, T0 + corr, 0.0)
        delta = np.abs(T_new - T)
        T = T_new
        if np.all(delta < 1e-12 * np.maximum(T, 1.0)):
            break
    stuck = wet & (np.abs(_pileup_residual(lookup, T, T0, k)) > PILEUP_TOL)
    if np.any(stuck):
        T = _pileup_bisect(lookup, T0, k, t_table_max, T, stuck)
    c, a = lookup(T)
    return T, np.where(wet, c, 0.0), np.where(wet, a, 0.0)


def _pileup_residual(lookup, T, T0, k):
    c, a = lookup(T)
    corr = np.where(c > 0.0, PILEUP_COEF * k * a / np.maximum(c, 1e-300), 0.0)
    return T - T0 - corr


def _pileup_bisect(lookup, T0, k, t_table_max, T, mask):
    """Bracketed fallback for sections where the fixed point stalls."""
    lo = np.where(mask, T0, T)
    hi_cap = max(t_table_max, float(np.max(T0))) * 4.0 + 1.0
    hi = np.where(mask, np.maximum(T0 * 4.0 + 1e-6, t_table_max + T0), T)
    for _ in range(8):  # push the bracket out if the residual is still negative
        r_hi = _pileup_residual(lookup, hi, T0, k)
        bad = mask & (r_hi < 0.0) & (hi < hi_cap)
        if not np.any(bad):
            break
        hi = np.where(bad, hi * 2.0, hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        r = _pileup_residual(lookup, mid, T0, k)
        lo = np.where(mask & (r < 0.0), mid, lo)
        hi = np.where(mask & (r >= 0.0), mid, hi)
    out = np.where(mask, 0.5 * (lo + hi), T)
    if np.any(mask & (np.abs(_pileup_residual(lookup, out, T0, k)) > 1e-6)):
        raise NumericError("pile-up closure failed to converge")
    return out


def substantial_derivative(field_now, field_prev, x, u: float, dt: float):
    """D/Dt of a frame-indexed field seen by the space-fixed 2D planes.

    In body coordinates (x from the tail) a transverse water plane moves
    tailward at the forward speed u, so at the previous step it sat at
    x + u*dt.  The previous field is linearly interpolated there; beyond
    the nose the body was dry and the field is zero.
    """
    prev_at_foot = np.interp(x + u * dt, x, field_prev, left=0.0, right=0.0)
    return (field_now - prev_at_foot) / dt


def immersion_velocity(c, dA_dt, dpile_dt, fallback=None, c_eps: float = 1e-9):
    """V = (1/c) DA/Dt - D(T - T0)/Dt with a kinematic fallback.

    Sections whose waterline half-breadth is below ``c_eps`` (barely
    wetted) return ``fallback`` (the keel penetration rate) instead of an
    ill-conditioned division.
    """
    c = np.asarray(c, dtype=float)
    V = np.where(c > c_eps,
                 np.asarray(dA_dt) / np.maximum(c, c_eps) - np.asarray(dpile_dt),
                 0.0 if fallback is None else fallback)
    return V


def section_force(c, V, dV_dt, dcsq_dt, rho: float, k: float, g: float, A0):
    """Vertical force per unit length on a half section (positive down).

    fz = -k rho (pi/4) (c^2 DV/Dt + V Dc^2/Dt) - rho g A0.  The pi/4
    factor is the half-section share of the flat-cylinder added mass
    rho pi c^2 / 2; buoyancy uses the undisturbed submerged half-area A0.
    """
    c = np.asarray(c, dtype=float)
    dyn = -k * rho * (np.pi / 4.0) * (c ** 2 * np.asarray(dV_dt)
                                      + np.asarray(V) * np.asarray(dcsq_dt))
    return dyn - rho * g * np.asarray(A0)


def pressure_distribution(y, c, V, dV_dt, dc_dt, rho: float, k: float,
                          g: float, zeta0, p_cap: float | None = None):
    """Impact pressure at transverse offsets ``y`` of one section.

    p(y) = k rho DV/Dt sqrt(c^2 - y^2) + k rho V c (Dc/Dt) / sqrt(c^2 - y^2)
           + rho g zeta0

    Dynamic terms apply strictly inside |y| < c; the 1/sqrt endpoint
    singularity is integrable and never evaluated at |y| = c.  zeta0 is
    the undisturbed submergence of each point (hydrostatic head), clipped
    at zero for points above the calm waterline.
    """
    y = np.asarray(y, dtype=float)
    c = np.asarray(c, dtype=float)
    inside = np.abs(y) < c * (1.0 - 1e-12)
    root = np.sqrt(np.maximum(c ** 2 - y ** 2, 1e-300))
    dyn = np.where(inside,
                   k * rho * np.asarray(dV_dt) * root
                   + k * rho * np.asarray(V) * c * np.asarray(dc_dt) / root,
                   0.0)
    p = dyn + rho * g * np.maximum(np.asarray(zeta0, dtype=float), 0.0)
    if p_cap is not None:
        p = np.minimum(p, p_cap)
    return p
