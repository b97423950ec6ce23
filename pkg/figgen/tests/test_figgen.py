import os
import struct

import numpy as np
import pytest

from figgen import cli, figures, flowfields, readers

HEADER = struct.Struct("<4sIIIdddQddI")
SERIES_HEADER = "t,l2_omega,h1_omega,max_omega,q,e_gnorm,energy_residual,mode_re,mode_im"


def write_series(path, n=200, seed=0):
    rng = np.random.default_rng(seed)
    with open(path, "w") as fh:
        fh.write(SERIES_HEADER + "\n")
        for i in range(n):
            t = 0.1 * i
            vals = [t, 2 + np.sin(t), 5 + np.cos(t), 4 + 0.1 * rng.standard_normal(),
                    1.0, 3.0, 1e-12, np.sin(0.3 * t), np.cos(0.3 * t)]
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")


def write_snapshot(path, t=12.5, nx=32, ny=32, m=2):
    lx = ly = 2 * np.pi
    y = ly * np.arange(ny) / ny
    omega = np.broadcast_to(m**2 * np.sin(m * y), (nx, ny)).copy()
    head = HEADER.pack(b"FSAV", 1, nx, ny, lx, ly, t, 125, 1.0, 1.0, 1)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(omega.T, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(omega.T, dtype="<f8").tobytes())
    return omega


def make_input_dir(tmp_path):
    d = tmp_path / "out"
    d.mkdir()
    write_series(d / "series.csv")
    with open(d / "intervals.csv", "w") as fh:
        fh.write("index,interval\n0,120.5\n1,89.25\n2,150.0\n")
    with open(d / "psd.csv", "w") as fh:
        fh.write("freq,power\n")
        for j in range(64):
            fh.write(f"{j * 0.01},{np.exp(-j / 8.0)}\n")
    snaps = d / "snapshots"
    snaps.mkdir()
    for t in (1220.0, 1236.0, 1250.0, 1260.0, 1275.0, 1400.0):
        write_snapshot(snaps / f"omega_{t:g}.fsav", t=t)
    return d


class TestReaders:
    def test_series_round_trip(self, tmp_path):
        write_series(tmp_path / "series.csv", n=7)
        data = readers.read_series(tmp_path / "series.csv")
        assert len(data["t"]) == 7
        assert data["q"][0] == 1.0

    def test_header_only(self, tmp_path):
        (tmp_path / "series.csv").write_text(SERIES_HEADER + "\n")
        data = readers.read_series(tmp_path / "series.csv")
        assert len(data["t"]) == 0

    def test_bad_header(self, tmp_path):
        (tmp_path / "series.csv").write_text("a,b,c\n")
        with pytest.raises(readers.InputError):
            readers.read_series(tmp_path / "series.csv")

    def test_snapshot_round_trip(self, tmp_path):
        omega = write_snapshot(tmp_path / "omega_12.5.fsav")
        meta, got = readers.read_snapshot(tmp_path / "omega_12.5.fsav")
        assert meta["t"] == 12.5
        assert np.array_equal(got, omega)

    def test_truncated_snapshot(self, tmp_path):
        write_snapshot(tmp_path / "snap.fsav")
        raw = (tmp_path / "snap.fsav").read_bytes()
        (tmp_path / "snap.fsav").write_bytes(raw[:-9])
        with pytest.raises(readers.InputError):
            readers.read_snapshot(tmp_path / "snap.fsav")


class TestFlowfields:
    def test_kolmogorov_velocity_reconstruction(self, tmp_path):
        # omega = m^2 sin(my) -> psi = sin(my) -> u = (m cos(my), 0)
        m, nx, ny = 2, 32, 32
        lx = ly = 2 * np.pi
        y = ly * np.arange(ny) / ny
        omega = np.broadcast_to(m**2 * np.sin(m * y), (nx, ny)).copy()
        u1, u2 = flowfields.velocity_from_vorticity(omega, lx, ly)
        assert np.max(np.abs(u1 - m * np.cos(m * y)[None, :])) < 1e-12
        assert np.max(np.abs(u2)) < 1e-12


ALL_FIGURES = sorted(figures.RENDERERS)


class TestRenderers:
    @pytest.mark.parametrize("figure", ALL_FIGURES)
    def test_renders_nonempty_file(self, tmp_path, figure):
        d = make_input_dir(tmp_path)
        out = tmp_path / f"{figure}.png"
        code = cli.main([figure, "--in", str(d), "--out", str(out)])
        assert code == 0
        assert out.stat().st_size > 1000

    @pytest.mark.parametrize("figure", ALL_FIGURES)
    def test_deterministic_bytes(self, tmp_path, figure):
        d = make_input_dir(tmp_path)
        out1 = tmp_path / "a.png"
        out2 = tmp_path / "b.png"
        assert cli.main([figure, "--in", str(d), "--out", str(out1)]) == 0
        assert cli.main([figure, "--in", str(d), "--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_header_only_series_renders_empty_axes(self, tmp_path):
        d = tmp_path / "out"
        d.mkdir()
        (d / "series.csv").write_text(SERIES_HEADER + "\n")
        out = tmp_path / "fig.png"
        assert cli.main(["stability_norms", "--in", str(d), "--out", str(out)]) == 0
        assert out.exists()

    def test_snapshot_times_selection(self, tmp_path):
        d = make_input_dir(tmp_path)
        out = tmp_path / "snaps.png"
        code = cli.main(
            ["burst_snapshots", "--in", str(d), "--out", str(out), "--times", "1220,1236,1250"]
        )
        assert code == 0
        assert out.exists()

    def test_missing_input_fails(self, tmp_path, capsys):
        out = tmp_path / "fig.png"
        code = cli.main(["psd", "--in", str(tmp_path), "--out", str(out)])
        assert code == 1
        assert "figgen:" in capsys.readouterr().err

    def test_missing_snapshot_time_fails(self, tmp_path):
        d = make_input_dir(tmp_path)
        code = cli.main(
            ["burst_snapshots", "--in", str(d), "--out", str(tmp_path / "x.png"), "--times", "7.25"]
        )
        assert code == 1
