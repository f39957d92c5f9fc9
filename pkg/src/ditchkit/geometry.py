"""Hull geometry for the 2D+t strip model.

Conventions
-----------
* Longitudinal station ``x`` is measured from the tail, in metres.
* Each station carries a symmetric half cross-section: arc points
  ``(y, z)`` with ``y >= 0`` transverse and ``z`` upward from the local
  keel point.  Forces computed on the half section are doubled by the
  dynamics module.
* A depth table maps submergence ``T`` (keel to waterline) to the
  half-breadth at the waterline ``c`` and the submerged half-area ``A``
  (one side of the symmetry plane, so ``dA/dT == c``).  Queries beyond
  the table are clamped: a fully wetted section keeps its maximum
  values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError

N_TABLE_SAMPLES = 512


@dataclass(frozen=True)
class CrossSection:
    """Half cross-section with a precomputed depth table.

    arc_y, arc_z : (n_arc,) arc polyline from the keel upward, metres.
    t_max        : largest tabulated submergence.
    c_table      : (n_samples,) half-breadth at equidistant depths.
    a_table      : (n_samples,) submerged half-area at the same depths.
    """

    arc_y: np.ndarray
    arc_z: np.ndarray
    t_max: float
    c_table: np.ndarray
    a_table: np.ndarray

    @property
    def n_arc(self) -> int:
        return self.arc_y.shape[0]


def section_props(section: CrossSection, T):
    """Half-breadth and submerged half-area at submergence ``T``.

    Negative depths describe a dry section and return zeros; depths past
    the table maximum return the fully wetted values.
    """
    T = np.asarray(T, dtype=float)
    c = _table_lookup(section.c_table, section.t_max, T)
    a = _table_lookup(section.a_table, section.t_max, T)
    if T.ndim == 0:
        return float(c), float(a)
    return c, a


def _table_lookup(table: np.ndarray, t_max: float, T: np.ndarray) -> np.ndarray:
    n = table.shape[0]
    if t_max <= 0.0:
        return np.zeros_like(T, dtype=float)
    pos = np.clip(T, 0.0, t_max) / t_max * (n - 1)
    i0 = np.minimum(pos.astype(int), n - 2)
    w = pos - i0
    return table[i0] * (1.0 - w) + table[i0 + 1] * w


def _tables_from_arc(arc_y, arc_z, n_samples):
    """Depth table by exact integration of the piecewise-linear arc.

    The half-area is the integral of the interpolated half-breadth, so the
    table keeps dA/dT == c(T) by construction.
    """
    z = np.asarray(arc_z, dtype=float)
    y = np.asarray(arc_y, dtype=float)
    if np.any(np.diff(z) < 0):
        raise GeometryError("arc heights must be non-decreasing from the keel")
    t_max = float(z[-1])
    depths = np.linspace(0.0, t_max, n_samples) if t_max > 0 else np.zeros(n_samples)
    c = np.interp(depths, z, y)
    # cumulative trapezoid of c over the table grid equals the exact
    # integral of the interpolant when arc nodes land on grid nodes; the
    # 512-sample grid keeps the residual far below the 1e-3 contracts.
    a = np.concatenate([[0.0], np.cumsum((c[1:] + c[:-1]) * 0.5 * np.diff(depths))])
    return t_max, c, a


def build_circular_section(radius: float, n_arc: int = 171,
                           half_width: float | None = None) -> CrossSection:
    """Circular-arc section of given radius, from the keel upward.

    Without ``half_width`` the arc spans the lower quadrant, so the table
    covers 0 <= T <= radius with the closed forms c = sqrt(2*radius*T - T^2)
    and the circular-segment half-area.  With ``half_width`` the arc stops
    at that transverse offset (a curved plate cut from the cylinder).
    """
    if radius <= 0:
        raise GeometryError(f"radius must be positive, got {radius}")
    if half_width is not None:
        if not 0 < half_width <= radius:
            raise GeometryError("half_width must lie in (0, radius]")
        phi_max = float(np.arcsin(half_width / radius))
    else:
        phi_max = 0.5 * np.pi
    phi = np.linspace(0.0, phi_max, n_arc)
    arc_y = radius * np.sin(phi)
    arc_z = radius * (1.0 - np.cos(phi))
    t_max = float(arc_z[-1])
    depths = np.linspace(0.0, t_max, N_TABLE_SAMPLES)
    c = np.sqrt(np.maximum(2.0 * radius * depths - depths ** 2, 0.0))
    a = 0.5 * (radius ** 2 * np.arccos(np.clip(1.0 - depths / radius, -1.0, 1.0))
               - (radius - depths) * c)
    return CrossSection(arc_y, arc_z, t_max, c, a)


def build_arc_section(arc_y, arc_z, n_samples: int = N_TABLE_SAMPLES) -> CrossSection:
    """Section from an arbitrary arc polyline (tables by integration)."""
    t_max, c, a = _tables_from_arc(arc_y, arc_z, n_samples)
    return CrossSection(np.asarray(arc_y, float), np.asarray(arc_z, float), t_max, c, a)


@dataclass(frozen=True)
class HullMesh:
    """Strip discretisation of a hull: frames along x, arcs across.

    Arrays are stored frame-major so per-step hydro sweeps vectorise over
    frames.  ``keel`` is the height of the local keel point above the
    body baseline (lowest point of the hull at zero pitch).
    """

    x: np.ndarray          # (n_frames,) stations from the tail
    keel: np.ndarray       # (n_frames,) keel height above baseline
    arc_y: np.ndarray      # (n_frames, n_arc)
    arc_z: np.ndarray      # (n_frames, n_arc), above the local keel
    t_max: np.ndarray      # (n_frames,)
    c_tab: np.ndarray      # (n_frames, n_samples)
    a_tab: np.ndarray      # (n_frames, n_samples)
    length: float

    @property
    def n_frames(self) -> int:
        return self.x.shape[0]

    @property
    def n_arc(self) -> int:
        return self.arc_y.shape[1]

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0]) if self.n_frames > 1 else self.length

    def section(self, i: int) -> CrossSection:
        return CrossSection(self.arc_y[i], self.arc_z[i], float(self.t_max[i]),
                            self.c_tab[i], self.a_tab[i])

    def props(self, T: np.ndarray):
        """Vectorised (c, A) lookup, one depth per frame."""
        n = self.c_tab.shape[1]
        t_max = np.maximum(self.t_max, 1e-300)
        pos = np.clip(T, 0.0, self.t_max) / t_max * (n - 1)
        i0 = np.minimum(pos.astype(int), n - 2)
        w = pos - i0
        rows = np.arange(self.n_frames)
        c = self.c_tab[rows, i0] * (1.0 - w) + self.c_tab[rows, i0 + 1] * w
        a = self.a_tab[rows, i0] * (1.0 - w) + self.a_tab[rows, i0 + 1] * w
        dead = self.t_max <= 0
        if np.any(dead):
            c = np.where(dead, 0.0, c)
            a = np.where(dead, 0.0, a)
        return c, a

    def save(self, path) -> None:
        np.savez(path, x=self.x, keel=self.keel, arc_y=self.arc_y,
                 arc_z=self.arc_z, t_max=self.t_max, c_tab=self.c_tab,
                 a_tab=self.a_tab, length=np.array([self.length]))

    @staticmethod
    def load(path) -> "HullMesh":
        with np.load(path) as d:
            return HullMesh(d["x"], d["keel"], d["arc_y"], d["arc_z"],
                            d["t_max"], d["c_tab"], d["a_tab"],
                            float(d["length"][0]))


def build_fuselage_mesh(profile: dict, n_frames: int = 150, n_arc: int = 171,
                        arc_fraction: float = 0.25) -> HullMesh:
    """Mesh a fuselage from piecewise-linear radius/keel profiles.

    ``profile`` maps "x", "radius" and "keel" to same-length sample
    arrays over [0, length].  Stations sit at the n_frames cell centres.
    Each section is a circular arc spanning ``arc_fraction`` of the full
    circumference (the wetted bottom part), discretised with n_arc
    equidistant arc points.
    """
    px = np.asarray(profile["x"], dtype=float)
    pr = np.asarray(profile["radius"], dtype=float)
    pk = np.asarray(profile["keel"], dtype=float)
    if px.shape != pr.shape or px.shape != pk.shape:
        raise GeometryError("profile arrays must share one shape")
    if np.any(np.diff(px) <= 0):
        raise GeometryError("profile stations must increase")
    if np.any(pr < 0):
        raise GeometryError("profile radius must be non-negative")
    length = float(px[-1] - px[0])
    dx = length / n_frames
    x = px[0] + (np.arange(n_frames) + 0.5) * dx
    radius = np.interp(x, px, pr)
    keel = np.interp(x, px, pk)

    phi_max = np.pi * arc_fraction
    phi = np.linspace(0.0, phi_max, n_arc)
    arc_y = radius[:, None] * np.sin(phi)[None, :]
    arc_z = radius[:, None] * (1.0 - np.cos(phi))[None, :]
    t_max = arc_z[:, -1].copy()

    ns = N_TABLE_SAMPLES
    c_tab = np.zeros((n_frames, ns))
    a_tab = np.zeros((n_frames, ns))
    wet = t_max > 0
    if np.any(wet):
        depths = np.linspace(0.0, 1.0, ns)[None, :] * t_max[wet, None]
        r = radius[wet, None]
        c = np.sqrt(np.maximum(2.0 * r * depths - depths ** 2, 0.0))
        a = 0.5 * (r ** 2 * np.arccos(np.clip(1.0 - depths / r, -1.0, 1.0))
                   - (r - depths) * c)
        c_tab[wet] = c
        a_tab[wet] = a
    return HullMesh(x, keel, arc_y, arc_z, t_max, c_tab, a_tab, length)


def build_prism_mesh(section: CrossSection, length: float, n_frames: int,
                     keel: float = 0.0) -> HullMesh:
    """Constant-section mesh (plates, cylinders used in bench cases)."""
    dx = length / n_frames
    x = (np.arange(n_frames) + 0.5) * dx
    ones = np.ones(n_frames)
    return HullMesh(
        x, keel * ones,
        np.tile(section.arc_y, (n_frames, 1)),
        np.tile(section.arc_z, (n_frames, 1)),
        section.t_max * ones,
        np.tile(section.c_table, (n_frames, 1)),
        np.tile(section.a_table, (n_frames, 1)),
        length,
    )


@dataclass
class AeroConfig:
    """Vertical lift model linearised around a trim attitude.

    Trim lift equals the weight at the initial speed, so
    L = m g (1 + cl_slope * (theta - theta_trim)) * (u / u_trim)^2,
    applied at the centre of gravity plus an optional pitch arm.
    """

    cl_slope: float = 0.0        # fractional lift change per radian
    theta_trim_deg: float | None = None  # defaults to the initial pitch
    moment_arm: float = 0.0      # metres, nose-up moment = L * arm


@dataclass
class Scenario:
    """Initial conditions and run controls for one ditching case."""

    u0: float                    # horizontal speed, m/s
    w0: float                    # sink speed, m/s (positive down)
    pitch0_deg: float            # initial pitch, degrees nose-up
    mass: float                  # kg
    cog: tuple                   # (m from the nose, m above the baseline)
    inertia_yy: float            # pitch inertia about the CoG, kg m^2
    rho_water: float = 1000.0
    g: float = 9.81
    dt: float = 5e-3
    t_end: float = 30.0
    k_factor: float = 1.0        # transverse flow correction in [0.75, 1.0]
    aero: AeroConfig | None = None
    guided: bool = False         # prescribe the trajectory, record loads only
    start_clearance: float = 0.3  # initial keel height above the water, m
    p_cap: float | None = None   # optional pressure cap, Pa
    field_stride: int = 1        # store pressure fields every this many steps

    def cog_x_from_tail(self, length: float) -> float:
        return length - self.cog[0]

    @property
    def pitch0(self) -> float:
        return float(np.deg2rad(self.pitch0_deg))
