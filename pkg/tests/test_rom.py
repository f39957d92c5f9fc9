"""Linear baselines: POD optimality, DMD spectra, model files."""

import numpy as np
import pytest

from ditchkit.errors import (ChecksumError, ConfigError, MagicError,
                             NumericError, TruncatedError, VersionError)
from ditchkit.rom import (dmd_fit, dmd_predict, load_drom,
                          multi_trajectory_pairs, pod_energy, pod_fit,
                          pod_reconstruct, save_drom, trajectory_pairs)
from ditchkit.rng import Rng


def planted_linear_system(n=12, n_steps=30, seed=0):
    """Trajectory of a linear map with spectrum {0.9, 0.5 e^{+-0.3i}}.

    The dynamics act on a 3-dimensional invariant subspace embedded in
    n dimensions by a random orthogonal frame; the start vector lies in
    that subspace so the snapshot matrix has rank exactly 3.
    """
    rng = Rng(seed)
    g = rng.normal(size=(n, n))
    q, _ = np.linalg.qr(g)
    c, s = 0.5 * np.cos(0.3), 0.5 * np.sin(0.3)
    block = np.array([[0.9, 0.0, 0.0],
                      [0.0, c, -s],
                      [0.0, s, c]])
    a = q[:, :3] @ block @ q[:, :3].T
    x0 = q[:, :3] @ np.array([1.0, 0.8, -0.6])
    traj = np.zeros((n, n_steps))
    traj[:, 0] = x0
    for t in range(1, n_steps):
        traj[:, t] = a @ traj[:, t - 1]
    eigs = np.array([0.9, 0.5 * np.exp(0.3j), 0.5 * np.exp(-0.3j)])
    return traj, eigs


def sort_complex(z):
    return z[np.lexsort((z.imag, z.real))]


class TestDmd:
    def test_recovers_planted_spectrum(self):
        traj, want = planted_linear_system()
        model = dmd_fit(traj[:, :-1], traj[:, 1:], rank=3)
        got = sort_complex(model.eigvals)
        np.testing.assert_allclose(got, sort_complex(want), atol=1e-8)

    def test_reconstructs_planted_trajectory(self):
        traj, _ = planted_linear_system()
        model = dmd_fit(traj[:, :-1], traj[:, 1:], rank=3)
        pred = dmd_predict(model, traj.shape[1])
        assert np.max(np.abs(pred - traj)) < 1e-6

    def test_initial_snapshot_reproduced(self):
        traj, _ = planted_linear_system(seed=3)
        model = dmd_fit(traj[:, :-1], traj[:, 1:], rank=3)
        np.testing.assert_allclose(dmd_predict(model, 1)[:, 0], traj[:, 0],
                                   atol=1e-8)

    def test_identity_dynamics_give_unit_eigenvalues(self):
        x = Rng(1).normal(size=(8, 10))
        model = dmd_fit(x, x, rank=4)
        np.testing.assert_allclose(np.abs(model.eigvals), 1.0, atol=1e-10)
        np.testing.assert_allclose(model.eigvals.imag, 0.0, atol=1e-10)

    def test_scalar_doubling_found_exactly(self):
        traj = 2.0 ** np.arange(8, dtype=np.float64)[None, :]
        model = dmd_fit(traj[:, :-1], traj[:, 1:], rank=1)
        assert model.eigvals[0] == pytest.approx(2.0, abs=1e-12)

    def test_shape_and_rank_validation(self):
        x = np.zeros((4, 5))
        with pytest.raises(ConfigError, match="equal-shape"):
            dmd_fit(x, np.zeros((4, 6)), rank=2)
        good = Rng(2).normal(size=(4, 5))
        with pytest.raises(ConfigError, match="rank"):
            dmd_fit(good, good, rank=0)
        with pytest.raises(ConfigError, match="rank"):
            dmd_fit(good, good, rank=5)

    def test_rank_deficient_snapshots_rejected_with_index(self):
        u = Rng(3).normal(size=(6, 2))
        v = Rng(4).normal(size=(2, 8))
        x = u @ v  # rank 2 by construction
        with pytest.raises(NumericError, match="singular value 2"):
            dmd_fit(x, x, rank=3)


class TestPod:
    def test_full_rank_basis_reconstructs_exactly(self):
        x = Rng(5).normal(size=(20, 6))
        basis = pod_fit(x, 6)
        assert np.max(np.abs(pod_reconstruct(basis, x) - x)) < 1e-8

    def test_two_mode_data_needs_two_modes(self):
        u = np.linalg.qr(Rng(6).normal(size=(15, 2)))[0]
        x = u @ Rng(7).normal(size=(2, 9))
        basis = pod_fit(x, 2)
        assert np.max(np.abs(pod_reconstruct(basis, x) - x)) < 1e-10

    def test_error_monotone_in_rank(self):
        x = Rng(8).normal(size=(20, 6))
        errs = [np.linalg.norm(pod_reconstruct(pod_fit(x, r), x) - x)
                for r in range(1, 7)]
        for a, b in zip(errs, errs[1:]):
            assert b <= a + 1e-12

    def test_projection_idempotent(self):
        x = Rng(9).normal(size=(12, 5))
        basis = pod_fit(x, 3)
        once = pod_reconstruct(basis, x)
        twice = pod_reconstruct(basis, once)
        assert np.max(np.abs(twice - once)) < 1e-12

    def test_beats_random_orthonormal_bases(self):
        x = Rng(10).normal(size=(20, 6))
        rng = Rng(11)
        for rank in range(1, 6):
            best = np.linalg.norm(pod_reconstruct(pod_fit(x, rank), x) - x)
            for _ in range(20):
                q, _ = np.linalg.qr(rng.normal(size=(20, rank)))
                rand_err = np.linalg.norm(pod_reconstruct(q, x) - x)
                assert best < rand_err

    def test_energy_fractions_cumulative(self):
        u = np.linalg.qr(Rng(12).normal(size=(10, 2)))[0]
        x = u @ np.diag([3.0, 1.0]) @ np.linalg.qr(
            Rng(13).normal(size=(7, 2)))[0].T
        e = pod_energy(x)
        assert np.all(np.diff(e) >= -1e-15)
        assert e[-1] == pytest.approx(1.0, abs=1e-12)
        assert e[1] == pytest.approx(1.0, abs=1e-12)
        assert e[0] == pytest.approx(9.0 / 10.0, abs=1e-12)

    def test_input_validation(self):
        with pytest.raises(ConfigError, match="2-D"):
            pod_fit(np.zeros((3, 3, 3)), 1)
        x = Rng(14).normal(size=(6, 4))
        with pytest.raises(ConfigError, match="rank"):
            pod_fit(x, 0)
        with pytest.raises(ConfigError, match="rank"):
            pod_fit(x, 5)

    def test_rank_deficiency_reported(self):
        col = Rng(15).normal(size=(8, 1))
        x = np.repeat(col, 5, axis=1)  # five copies of one column
        with pytest.raises(NumericError, match="singular value 1"):
            pod_fit(x, 2)
        with pytest.raises(NumericError, match="all singular values"):
            pod_fit(np.zeros((4, 4)), 1)


class TestDromFormat:
    def model(self):
        traj, _ = planted_linear_system()
        return dmd_fit(traj[:, :-1], traj[:, 1:], rank=3)

    def test_round_trip_exact(self, tmp_path):
        model = self.model()
        path = tmp_path / "m.drom"
        save_drom(model, path)
        loaded = load_drom(path)
        assert loaded.rank == model.rank
        np.testing.assert_array_equal(loaded.eigvals, model.eigvals)
        np.testing.assert_array_equal(loaded.modes, model.modes)
        np.testing.assert_array_equal(loaded.amplitudes, model.amplitudes)

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "m.drom"
        save_drom(self.model(), path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"JUNK"
        path.write_bytes(bytes(blob))
        with pytest.raises(MagicError):
            load_drom(path)

    def test_rejects_unknown_version(self, tmp_path):
        path = tmp_path / "m.drom"
        save_drom(self.model(), path)
        blob = bytearray(path.read_bytes())
        blob[4] = 9
        path.write_bytes(bytes(blob))
        with pytest.raises(VersionError):
            load_drom(path)

    def test_rejects_truncation(self, tmp_path):
        path = tmp_path / "m.drom"
        save_drom(self.model(), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) - 8])
        with pytest.raises(TruncatedError):
            load_drom(path)
        path.write_bytes(blob[:10])
        with pytest.raises(TruncatedError):
            load_drom(path)

    def test_rejects_corrupted_payload(self, tmp_path):
        path = tmp_path / "m.drom"
        save_drom(self.model(), path)
        blob = bytearray(path.read_bytes())
        blob[20] ^= 0x5A
        path.write_bytes(bytes(blob))
        with pytest.raises(ChecksumError):
            load_drom(path)


class TestTrajectoryPairs:
    def test_flattening_and_shift(self):
        frames = Rng(16).normal(size=(5, 3, 4))
        x, xp = trajectory_pairs(frames)
        assert x.shape == (12, 4) and xp.shape == (12, 4)
        np.testing.assert_array_equal(x[:, 0], frames[0].ravel())
        np.testing.assert_array_equal(xp[:, 0], frames[1].ravel())
        np.testing.assert_array_equal(x[:, 1:], xp[:, :-1])

    def test_too_short_rejected(self):
        with pytest.raises(ConfigError, match="two frames"):
            trajectory_pairs(np.zeros((1, 3, 3)))

    def test_multi_case_pairs_stay_within_cases(self):
        a = Rng(17).normal(size=(5, 2, 2))
        b = Rng(18).normal(size=(4, 2, 2))
        x, xp = multi_trajectory_pairs([a, b])
        assert x.shape == (4, 7)
        np.testing.assert_array_equal(x[:, 4], b[0].ravel())
        np.testing.assert_array_equal(xp[:, 4], b[1].ravel())
        np.testing.assert_array_equal(xp[:, 3], a[4].ravel())
