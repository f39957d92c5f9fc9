"""Shared fixtures: small meshes, synthetic histories, toy datasets."""

import numpy as np
import pytest

from ditchkit.dataset import CaseRecord, Dataset
from ditchkit.dynamics import LoadHistory, WettedState, assemble_loads
from ditchkit.geometry import Scenario, build_circular_section, build_prism_mesh


@pytest.fixture(scope="session")
def unit_circle():
    return build_circular_section(1.0)


@pytest.fixture(scope="session")
def prism_mesh():
    # 4 m cylinder of radius 0.5 m, bench-scale
    return build_prism_mesh(build_circular_section(0.5, n_arc=41),
                            length=4.0, n_frames=40)


def prism_scenario(**over):
    kw = dict(u0=20.0, w0=1.5, pitch0_deg=0.0, mass=400.0,
              cog=(2.0, 0.5), inertia_yy=300.0, dt=1e-3, t_end=0.2,
              start_clearance=0.05)
    kw.update(over)
    return Scenario(**kw)


def settled_loads(mesh, state, scen, dt=1e-3, passes=3):
    """Loads at a held state after the derivative transients wash out.

    Repeated calls feed each wetted result back as the previous fields,
    so all substantial derivatives settle to the steady values.
    """
    prev = WettedState.dry(mesh.n_frames, mesh.n_arc)
    for _ in range(passes):
        force, wetted = assemble_loads(mesh, state, prev, scen, dt)
        prev = wetted
    return force, wetted


def make_history(pressures, dt=1e-3, impact_step=0, forces=None):
    """LoadHistory around a prescribed pressure movie (stride 1)."""
    p = np.asarray(pressures, dtype=np.float32)
    n_t, n_frames, n_arc = p.shape
    t = np.arange(n_t) * dt
    states = np.zeros((n_t, 7))
    states[:, 0] = t
    if forces is None:
        forces = np.zeros((n_t, 3))
    return LoadHistory(t, states, np.asarray(forces, float),
                       np.zeros((n_t, n_frames)), p,
                       np.arange(n_t), impact_step, dt, n_frames, n_arc)


def blob_movie(n_t, h, w, x0, y0, speed, amp, decay=0.85):
    """Decaying Gaussian bump drifting across the grid, in pascals."""
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    frames = []
    for t in range(n_t):
        cx = x0 + speed * t
        cy = y0 + 0.6 * speed * t
        g = np.exp(-((ii - cx) ** 2 + (jj - cy) ** 2) / 6.0)
        frames.append((amp * decay ** t) * g)
    return np.stack(frames).astype(np.float32)


def make_blob_dataset(n_train=6, n_val=2, n_test=2, n_t=12, size=16):
    """Synthetic dataset of drifting load blobs (no simulation needed)."""
    def cases(n, salt):
        out = []
        for i in range(n):
            frames = blob_movie(n_t, size, size, x0=3.0 + 0.7 * i + salt,
                                y0=3.5 + 0.5 * i, speed=0.55 + 0.05 * i,
                                amp=4.0e4 * (1.0 + 0.1 * i))
            out.append(CaseRecord(60.0 + i + 10 * salt, 1.0 + 0.2 * i, 6.0,
                                  frames, (0, 0)))
        return out
    train = cases(n_train, 0.0)
    val = cases(n_val, 0.3)
    test = cases(n_test, 0.6)
    stack = np.concatenate([r.frames for r in train])
    return Dataset(train, val, test, float(stack.min()), float(stack.max()),
                   meta={"patch": [size, size], "origin": [0, 0],
                         "step_every": 20, "stop_threshold": 5000.0})


@pytest.fixture(scope="session")
def blob_dataset():
    return make_blob_dataset()
