import numpy as np
import pytest

from fsavns import diagnostics as dg, fileio, model, spectral as sp, stepper
from fsavns.errors import ConfigError, CorruptCheckpoint, NonIntegralHorizon, ParseError

TWO_PI = 2.0 * np.pi

STABILITY_CONFIG = """
# Kolmogorov long-time stability run
nx = 256
ny = 256
lx = 6.283185307179586
ly = 6.283185307179586
k = 0.01
re = 100
T = 1000
forcing = kolmogorov
m = 2
initial = stability
"""


class TestParseConfig:
    def test_stability_config(self):
        cfg = fileio.parse_config(STABILITY_CONFIG)
        assert cfg.nx == cfg.ny == 256
        assert cfg.k == 0.01
        assert cfg.T == 1000
        assert cfg.gamma == 1000.0  # default
        assert cfg.dealias is False  # default
        assert cfg.blowup_threshold == 1e8  # default
        sc = cfg.scheme_config()
        assert sc.forcing.kind == "kolmogorov" and sc.forcing.m == 2

    def test_zero_k_rejected(self):
        with pytest.raises(ConfigError):
            fileio.parse_config("k = 0\nre = 10\nT = 1\nforcing = none\nlx = 1\nly = 1")

    def test_non_integral_horizon(self):
        text = "k = 0.1\nT = 1.05\nforcing = none"
        with pytest.raises(NonIntegralHorizon):
            fileio.parse_config(text)

    def test_unknown_key_with_line(self):
        with pytest.raises(ConfigError) as exc:
            fileio.parse_config("k = 0.1\nT = 1\nbogus = 3\n")
        assert exc.value.line == 3

    def test_type_mismatch(self):
        with pytest.raises(ConfigError):
            fileio.parse_config("nx = small\n")

    def test_domain_checked_for_kolmogorov(self):
        with pytest.raises(ConfigError):
            fileio.parse_config("forcing = kolmogorov\nlx = 1.0\nly = 1.0\nT = 1\nk = 0.1")


class TestInitialField:
    def test_basic_is_kolmogorov_steady_state(self):
        cfg = fileio.parse_config(STABILITY_CONFIG.replace("256", "32").replace("stability", "basic"))
        omega = fileio.initial_field(cfg)
        _, y = omega.grid.meshgrid()
        assert np.max(np.abs(sp.to_physical(omega) - 4.0 * np.sin(2 * y))) < 1e-12

    def test_stability_perturbation(self):
        cfg = fileio.parse_config(STABILITY_CONFIG.replace("256", "64"))
        omega = fileio.initial_field(cfg)
        # curl of sin(2y) + 0.001 sin(2x) sin(2y): amplitude 4 plus 8e-3 cross mode
        re_, im_ = dg.track_mode(omega, 2, 2)
        assert abs(im_) > 1e-4 or abs(re_) > 1e-4

    def test_random_is_seeded_and_mean_zero(self):
        text = "forcing = none\ninitial = random\nseed = 3\nnx = 32\nny = 32\nT = 1\nk = 0.1"
        a = fileio.initial_field(fileio.parse_config(text))
        b = fileio.initial_field(fileio.parse_config(text))
        assert np.array_equal(a.coeffs, b.coeffs)
        assert abs(a.coeffs[0, 0]) < 1e-14


def make_records(n):
    rng = np.random.default_rng(0)
    recs = []
    for i in range(n):
        vals = rng.standard_normal(8)
        recs.append(dg.TimeSeriesRecord(float(i) * 0.1, *vals.tolist()))
    return recs


class TestTimeseriesCsv:
    def test_empty_series(self, tmp_path):
        path = tmp_path / "series.csv"
        fileio.write_timeseries(path, [])
        assert path.read_text() == fileio.CSV_HEADER + "\n"
        assert fileio.read_timeseries(path) == []

    def test_round_trip_exact(self, tmp_path):
        path = tmp_path / "series.csv"
        recs = make_records(3)
        fileio.write_timeseries(path, recs)
        back = fileio.read_timeseries(path)
        assert back == recs  # bitwise float round trip via repr

    def test_malformed_row(self, tmp_path):
        path = tmp_path / "series.csv"
        path.write_text(fileio.CSV_HEADER + "\n1,2,3\n")
        with pytest.raises(ParseError) as exc:
            fileio.read_timeseries(path)
        assert exc.value.row == 1

    def test_bad_header(self, tmp_path):
        path = tmp_path / "series.csv"
        path.write_text("nope\n")
        with pytest.raises(ParseError):
            fileio.read_timeseries(path)


def small_run_cfg(**overrides):
    base = dict(
        nx=32, ny=32, lx=TWO_PI, ly=TWO_PI, k=0.01, re=100.0,
        T=0.1, forcing="kolmogorov", m=2, initial="stability",
    )
    base.update(overrides)
    return fileio.RunConfig(**base)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        rc = small_run_cfg()
        cfg = rc.scheme_config()
        state = stepper.run(fileio.initial_field(rc), cfg, T=0.1)
        path = tmp_path / "ckpt_10.fsav"
        fileio.write_checkpoint(path, state, rc)
        back = fileio.state_from_checkpoint(path, rc)
        assert np.array_equal(back.w_n_phys, state.w_n_phys)
        assert np.array_equal(back.w_nm1_phys, state.w_nm1_phys)
        assert np.array_equal(back.w_n.coeffs, state.w_n.coeffs)
        assert back.q_n == state.q_n and back.q_nm1 == state.q_nm1
        assert back.step == state.step and back.t == state.t

    def test_truncated_rejected(self, tmp_path):
        rc = small_run_cfg()
        state = stepper.run(fileio.initial_field(rc), rc.scheme_config(), T=0.1)
        path = tmp_path / "ckpt.fsav"
        fileio.write_checkpoint(path, state, rc)
        data = path.read_bytes()
        path.write_bytes(data[:-17])
        with pytest.raises(CorruptCheckpoint):
            fileio.read_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "ckpt.fsav"
        path.write_bytes(b"JUNKxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx")
        with pytest.raises(CorruptCheckpoint):
            fileio.read_checkpoint(path)

    def test_restart_continuation_bitwise(self, tmp_path):
        # run 20 steps straight vs 10 + checkpoint + 10: identical bits
        rc = small_run_cfg(T=0.2)
        cfg = rc.scheme_config()
        omega0 = fileio.initial_field(rc)

        full = stepper.run(omega0, cfg, T=0.2)

        half = stepper.run(omega0, cfg, T=0.1)
        path = tmp_path / "ckpt_10.fsav"
        fileio.write_checkpoint(path, half, rc)
        resumed = stepper.run(fileio.state_from_checkpoint(path, rc), cfg, T=0.2)

        assert resumed.step == full.step == 20
        assert np.array_equal(resumed.w_n_phys, full.w_n_phys)
        assert np.array_equal(resumed.w_n.coeffs, full.w_n.coeffs)
        assert resumed.q_n == full.q_n

    def test_primitive_restart_continuity(self, tmp_path):
        rc = small_run_cfg(scheme="fsav_bdf2_primitive", T=0.2)
        cfg = rc.scheme_config()
        u0 = fileio.initial_field(rc)
        full = stepper.run(u0, cfg, T=0.2)
        half = stepper.run(u0, cfg, T=0.1)
        path = tmp_path / "ckpt.fsav"
        fileio.write_checkpoint(path, half, rc)
        resumed = stepper.run(fileio.state_from_checkpoint(path, rc), cfg, T=0.2)
        # reconstruction via the streamfunction is exact in value, not bits
        scale = np.max(np.abs(full.w_n[0].coeffs))
        assert np.max(np.abs(resumed.w_n[0].coeffs - full.w_n[0].coeffs)) < 1e-11 * scale

    def test_grid_mismatch_rejected(self, tmp_path):
        rc = small_run_cfg()
        state = stepper.run(fileio.initial_field(rc), rc.scheme_config(), T=0.1)
        path = tmp_path / "ckpt.fsav"
        fileio.write_checkpoint(path, state, rc)
        with pytest.raises(CorruptCheckpoint):
            fileio.state_from_checkpoint(path, small_run_cfg(nx=64, ny=64))
