"""Rigid-body ditching dynamics on top of the strip hydrodynamics.

Degrees of freedom are surge, heave and pitch in the vertical plane:
state (x, z, theta) with velocities (u, w, q).  z is the height of the
centre of gravity above the calm waterline (positive up), theta is
positive nose-up, and x grows along the flight direction.  Integrated
hull loads are reported for the full body (half-section values doubled).

Each time step solves (M + MA) acc = f by fixed-point iteration, where
MA is the wetted added-mass matrix and f collects gravity, aero lift and
the assembled hydrodynamic loads with the added-mass reaction of the
current iterate moved back to the right-hand side.  At the fixed point
this reduces exactly to M acc = total force, so MA only conditions the
iteration.  The update is semi-implicit Euler: velocities first, then
positions with the new velocities.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import StepError
from .geometry import HullMesh, Scenario
from .hydro import (immersion_velocity, pileup_solve_mesh, pressure_distribution,
                    section_force, substantial_derivative)

ACC_TOL = 1e-6
ACC_MAX_ITER = 25
SUBSTEP_DEPTH = 4  # halvings tried when a step iteration fails to close
IMPACT_FORCE_THRESHOLD = 1.0  # N of upward hydro force that marks impact
REST_SPEED = 1e-3
V_GATE_EPS = 0.01  # m/s taper width of the immersion force gate

_trapz = getattr(np, "trapezoid", np.trapz)  # numpy < 2 compatibility


@dataclass(frozen=True)
class BodyState:
    t: float
    x: float
    z: float
    theta: float
    u: float
    w: float
    q: float

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.x, self.z, self.theta,
                         self.u, self.w, self.q])


@dataclass
class WettedState:
    """Per-frame hydro fields of one committed step (inputs to the next)."""

    T0: np.ndarray
    T: np.ndarray
    c: np.ndarray
    csq: np.ndarray
    A: np.ndarray
    A0: np.ndarray
    pile: np.ndarray
    V: np.ndarray
    fz: np.ndarray
    pressure: np.ndarray   # (n_frames, n_arc)
    n_fallback: int = 0    # frames where V used the kinematic fallback

    @staticmethod
    def dry(n_frames: int, n_arc: int) -> "WettedState":
        z = lambda: np.zeros(n_frames)
        return WettedState(z(), z(), z(), z(), z(), z(), z(), z(), z(),
                           np.zeros((n_frames, n_arc)))


def aero_lift(state: BodyState, scen: Scenario):
    """Vertical lift and pitch moment from the linearised trim model."""
    aero = scen.aero
    if aero is None:
        return 0.0, 0.0
    theta_trim = (np.deg2rad(aero.theta_trim_deg)
                  if aero.theta_trim_deg is not None else scen.pitch0)
    lift = (scen.mass * scen.g
            * (1.0 + aero.cl_slope * (state.theta - theta_trim))
            * (state.u / scen.u0) ** 2)
    return lift, lift * aero.moment_arm


def assemble_loads(mesh: HullMesh, state: BodyState, prev: WettedState,
                   scen: Scenario, dt: float):
    """Hull loads at ``state`` given the previous committed hydro fields.

    Returns (force, wetted) with force = (Fx, Fz, My): horizontal force,
    upward force and nose-up moment about the CoG, full body.  The strip
    model carries no longitudinal hydro component, so Fx is zero here.
    """
    sin_t, cos_t = np.sin(state.theta), np.cos(state.theta)
    x_cg = scen.cog_x_from_tail(mesh.length)
    xi = mesh.x - x_cg
    zeta = mesh.keel - scen.cog[1]
    z_keel = state.z + xi * sin_t + zeta * cos_t
    T0 = np.maximum(0.0, -z_keel)

    T, c, A = pileup_solve_mesh(mesh, T0, scen.k_factor)
    _, A0 = mesh.props(T0)
    A0 = np.where(T0 > 0.0, A0, 0.0)
    pile = T - T0
    csq = c * c

    u = state.u
    dA_dt = substantial_derivative(A, prev.A, mesh.x, u, dt)
    dpile_dt = substantial_derivative(pile, prev.pile, mesh.x, u, dt)
    keel_rate = state.w + state.q * (xi * cos_t - zeta * sin_t)
    V = immersion_velocity(c, dA_dt, dpile_dt, fallback=-keel_rate)
    wet = T0 > 0.0
    V = np.where(wet, V, 0.0)
    n_fallback = int(np.count_nonzero(wet & (c <= 1e-9)))

    dV_dt = substantial_derivative(V, prev.V, mesh.x, u, dt)
    dcsq_dt = substantial_derivative(csq, prev.csq, mesh.x, u, dt)
    dc_dt = substantial_derivative(c, prev.c, mesh.x, u, dt)

    # momentum terms only while immersing; exiting sections shed the
    # wetted surface freely (no suction) and keep just their buoyancy.
    # This also contains the 1/c blow-up of V at the receding edge.  The
    # gate tapers over V_GATE_EPS so the step iteration sees a
    # continuous force.
    gate = np.clip(V / V_GATE_EPS, 0.0, 1.0)
    fz_full = section_force(c, V, dV_dt, dcsq_dt, scen.rho_water,
                            scen.k_factor, scen.g, A0)
    fz_static = -scen.rho_water * scen.g * A0
    fz = np.where(wet, gate * (fz_full - fz_static) + fz_static, 0.0)

    zeta0 = np.maximum(0.0, T0[:, None] - mesh.arc_z * cos_t)
    p_static = scen.rho_water * scen.g * zeta0
    pressure = np.where(wet[:, None], p_static, 0.0)
    imm = wet & (gate > 0.0)
    if np.any(imm):
        pw = pressure_distribution(mesh.arc_y[imm], c[imm, None], V[imm, None],
                                   dV_dt[imm, None], dc_dt[imm, None],
                                   scen.rho_water, scen.k_factor, scen.g,
                                   zeta0[imm], p_cap=None)
        pressure[imm] += gate[imm, None] * (pw - p_static[imm])
    if scen.p_cap is not None:
        np.minimum(pressure, scen.p_cap, out=pressure)

    dx = mesh.dx
    fz_up = -2.0 * _trapz(fz, dx=dx)
    my = -2.0 * _trapz(fz * xi, dx=dx)
    lift, lift_moment = aero_lift(state, scen)
    force = np.array([0.0, fz_up + lift, my + lift_moment])
    wetted = WettedState(T0, T, c, csq, A, A0, pile, V, fz, pressure, n_fallback)
    return force, wetted


def added_mass_matrix(mesh: HullMesh, c: np.ndarray, cog_x: float,
                      rho: float) -> np.ndarray:
    """Wetted added-mass matrix for (surge, heave, pitch).

    Per unit length m_A = rho pi c^2 (both half sections); surge entries
    vanish for the slender body.  Heave-pitch coupling is
    -integral(m_A (x - cog_x)) dx; the matrix is symmetric PSD and only
    conditions the step iteration (it cancels at the fixed point).
    """
    m_a = rho * np.pi * c * c
    xi = mesh.x - cog_x
    dx = mesh.dx
    # stations sit at cell centres, so the midpoint rule covers the full
    # length (a uniform section integrates to exactly m_a * L)
    ma_ww = np.sum(m_a) * dx
    ma_wq = -np.sum(m_a * xi) * dx
    ma_qq = np.sum(m_a * xi * xi) * dx
    return np.array([[0.0, 0.0, 0.0],
                     [0.0, ma_ww, ma_wq],
                     [0.0, ma_wq, ma_qq]])


def solve_accelerations(M: np.ndarray, loads_fn, acc0: np.ndarray,
                        tol: float = ACC_TOL, max_iter: int = ACC_MAX_ITER):
    """Fixed point of (M + MA(acc)) acc = f(acc).

    ``loads_fn(acc)`` returns the pair (f, MA) for a trial acceleration.
    The residual r = solve(M + MA, f) - acc is driven to zero with
    Broyden rank-1 updates (initial Jacobian -I reproduces the plain
    fixed-point step).  Slam onset makes the plain iteration map locally
    expanding, so scalar relaxation alone cannot close the loop there;
    one loads evaluation per iteration keeps the stated budget.
    """
    acc = np.asarray(acc0, dtype=float).copy()
    jac = -np.eye(len(acc))
    acc_prev = r_prev = None
    delta = np.inf
    step_cap = 200.0  # m/s^2; reins in early quasi-Newton steps
    for it in range(1, max_iter + 1):
        f, ma = loads_fn(acc)
        try:
            acc_new = np.linalg.solve(M + ma, f)
        except np.linalg.LinAlgError as exc:
            raise StepError(f"singular mass matrix in step iteration: {exc}")
        r = acc_new - acc
        if not np.all(np.isfinite(r)):
            raise StepError("non-finite acceleration update", residual=delta)
        delta = float(np.max(np.abs(r)))
        if delta < tol:
            return acc_new, it
        if r_prev is not None:
            dx = acc - acc_prev
            denom = float(dx @ dx)
            if denom > 0.0:
                jac = jac + np.outer(r - r_prev - jac @ dx, dx) / denom
        try:
            upd = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError:
            jac = -np.eye(len(acc))
            upd = r
        if not np.all(np.isfinite(upd)):
            jac = -np.eye(len(acc))
            upd = r
        n = float(np.max(np.abs(upd)))
        if n > step_cap:
            upd *= step_cap / n
        acc_prev, r_prev = acc, r
        acc = acc + upd
    raise StepError("acceleration fixed point did not converge "
                    f"({max_iter} iterations, residual {delta:.3e})",
                    residual=delta)


def step(mesh: HullMesh, scen: Scenario, state: BodyState, prev: WettedState,
         warm_acc: np.ndarray | None = None, _depth: int = 0):
    """Advance one time step; returns (state, wetted, force, acc, n_iter).

    Slam onset makes the load map discontinuous in the trial kinematics
    (strips switch between dry and wet), which can defeat the
    acceleration iteration at the nominal dt.  A step that fails to
    close is retried as two half steps, up to SUBSTEP_DEPTH halvings;
    steps that converge directly are unaffected.
    """
    dt = scen.dt
    M = np.diag([scen.mass, scen.mass, scen.inertia_yy])
    gravity = np.array([0.0, -scen.mass * scen.g, 0.0])
    cache = {}

    def loads_fn(acc):
        vel = np.array([state.u + dt * acc[0],
                        state.w + dt * acc[1],
                        state.q + dt * acc[2]])
        trial = BodyState(state.t + dt,
                          state.x + dt * vel[0],
                          state.z + dt * vel[1],
                          state.theta + dt * vel[2],
                          vel[0], vel[1], vel[2])
        f_hydro, wetted = assemble_loads(mesh, trial, prev, scen, dt)
        ma = added_mass_matrix(mesh, wetted.c,
                               scen.cog_x_from_tail(mesh.length), scen.rho_water)
        cache["wetted"] = wetted
        cache["force"] = f_hydro
        return f_hydro + gravity + ma @ acc, ma

    if warm_acc is None:
        warm_acc = np.array([0.0, -scen.g, 0.0])
    try:
        acc, n_iter = solve_accelerations(M, loads_fn, warm_acc)
    except StepError as exc:
        if _depth >= SUBSTEP_DEPTH:
            raise StepError(str(exc), t=state.t, residual=exc.residual)
        half = replace(scen, dt=0.5 * dt)
        mid, wet_mid, _, acc_mid, _ = step(mesh, half, state, prev,
                                           warm_acc, _depth + 1)
        return step(mesh, half, mid, wet_mid, acc_mid, _depth + 1)

    u = state.u + dt * acc[0]
    w = state.w + dt * acc[1]
    q = state.q + dt * acc[2]
    new = BodyState(state.t + dt, state.x + dt * u, state.z + dt * w,
                    state.theta + dt * q, u, w, q)
    # recompute the committed fields once so stored loads match the state
    force, wetted = assemble_loads(mesh, new, prev, scen, dt)
    return new, wetted, force, acc, n_iter


@dataclass
class LoadHistory:
    """Recorded trajectory and loads of one run.

    ``pressures`` holds the (n_frames, n_arc) field of every
    ``field_stride``-th step in float32; ``fz`` is the per-frame vertical
    force per length at every step.  ``forces`` columns are
    (Fx, Fz, My) for the full body, hydro plus aero.
    """

    t: np.ndarray
    states: np.ndarray       # (n_t, 7) rows of BodyState.as_array()
    forces: np.ndarray       # (n_t, 3)
    fz: np.ndarray           # (n_t, n_frames)
    pressures: np.ndarray    # (n_stored, n_frames, n_arc) float32
    field_steps: np.ndarray  # solver step index of each stored field
    impact_step: int         # -1 when the body never got wet
    dt: float
    n_frames: int
    n_arc: int

    @property
    def impact_time(self) -> float:
        return float(self.t[self.impact_step]) if self.impact_step >= 0 else np.nan

    def state(self, i: int) -> BodyState:
        r = self.states[i]
        return BodyState(*r)


def initial_state(mesh: HullMesh, scen: Scenario) -> BodyState:
    """Airborne start: lowest keel point ``start_clearance`` above water."""
    theta = scen.pitch0
    x_cg = scen.cog_x_from_tail(mesh.length)
    xi = mesh.x - x_cg
    zeta = mesh.keel - scen.cog[1]
    drop = np.min(xi * np.sin(theta) + zeta * np.cos(theta))
    z0 = scen.start_clearance - drop
    return BodyState(0.0, 0.0, z0, theta, scen.u0, -scen.w0, 0.0)


def _guided_state(state0: BodyState, scen: Scenario, t: float) -> BodyState:
    return BodyState(t, state0.x + scen.u0 * t, state0.z - scen.w0 * t,
                     state0.theta, scen.u0, -scen.w0, 0.0)


def simulate(mesh: HullMesh, scen: Scenario,
             state0: BodyState | None = None) -> LoadHistory:
    """March a scenario from its airborne start until t_end or rest.

    Guided scenarios follow the prescribed straight trajectory and only
    record loads; free scenarios integrate the 3DoF equations.
    """
    if state0 is None:
        state0 = initial_state(mesh, scen)
    n_steps = int(round(scen.t_end / scen.dt))
    stride = max(int(scen.field_stride), 1)

    t_rec = [state0.t]
    states = [state0.as_array()]
    forces = [np.zeros(3)]
    fz_rec = [np.zeros(mesh.n_frames)]
    pressures = [np.zeros((mesh.n_frames, mesh.n_arc), dtype=np.float32)]
    field_steps = [0]

    def collect() -> LoadHistory:
        return LoadHistory(np.array(t_rec), np.array(states), np.array(forces),
                           np.array(fz_rec), np.stack(pressures),
                           np.array(field_steps), impact_step, scen.dt,
                           mesh.n_frames, mesh.n_arc)

    prev = WettedState.dry(mesh.n_frames, mesh.n_arc)
    state = state0
    impact_step = -1
    warm = None
    for i in range(1, n_steps + 1):
        try:
            if scen.guided:
                state = _guided_state(state0, scen, state0.t + i * scen.dt)
                force, wetted = assemble_loads(mesh, state, prev, scen, scen.dt)
            else:
                state, wetted, force, acc, _ = step(mesh, scen, state, prev, warm)
                warm = acc
        except StepError as exc:
            exc.t = state.t
            exc.history = collect()
            raise
        prev = wetted

        t_rec.append(state.t)
        states.append(state.as_array())
        forces.append(force)
        fz_rec.append(wetted.fz.copy())
        if i % stride == 0:
            pressures.append(wetted.pressure.astype(np.float32))
            field_steps.append(i)
        lift = aero_lift(state, scen)[0]
        if impact_step < 0 and force[1] - lift > IMPACT_FORCE_THRESHOLD:
            impact_step = i
        if (not scen.guided and impact_step >= 0
                and abs(state.u) < REST_SPEED and abs(state.w) < REST_SPEED
                and abs(state.q) < REST_SPEED):
            break

    return collect()
