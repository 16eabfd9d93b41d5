"""End-to-end command-line flows and exit-code contract."""

import os

import numpy as np
import pytest

from preim.cli import main


def read_bytes(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture(scope="module")
def offline_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "rom"
    code = main([
        "offline", "--case", "a", "--algo", "preim", "--refine", "2",
        "--out", str(out),
    ])
    assert code == 0
    return out


class TestOffline:
    def test_archive_written(self, offline_dir):
        for name in ("manifest.txt", "Mr.csv", "B.csv", "xpoints.csv",
                     "q.csv", "basis.csv", "theta_at_points.csv",
                     "selection.csv"):
            assert (offline_dir / name).is_file()

    def test_missing_out_is_usage_error(self):
        with pytest.raises(SystemExit) as err:
            main(["offline", "--case", "a"])
        assert err.value.code == 2

    def test_bad_case_is_usage_error(self):
        with pytest.raises(SystemExit) as err:
            main(["offline", "--case", "z", "--out", "x"])
        assert err.value.code == 2

    def test_huge_threshold_gives_rank_one(self, tmp_path):
        out = tmp_path / "rank1"
        code = main([
            "offline", "--case", "a", "--algo", "standard", "--refine", "1",
            "--eps-eim", "1e9", "--out", str(out),
        ])
        assert code == 0
        manifest = dict(
            line.strip().split("=", 1)
            for line in open(out / "manifest.txt") if "=" in line)
        assert manifest["eim_rank"] == "1"

    def test_deterministic_across_runs(self, offline_dir, tmp_path):
        out2 = tmp_path / "rom2"
        assert main([
            "offline", "--case", "a", "--algo", "preim", "--refine", "2",
            "--out", str(out2),
        ]) == 0
        for name in ("B.csv", "Mr.csv", "selection.csv", "basis.csv"):
            assert read_bytes(offline_dir / name) == read_bytes(out2 / name)

    def test_init_params_flag(self, tmp_path):
        out = tmp_path / "seeded"
        assert main([
            "offline", "--case", "a", "--algo", "preim", "--refine", "1",
            "--init-params", "1,20", "--out", str(out),
        ]) == 0


class TestOnline:
    def test_writes_reduced_trajectory(self, offline_dir):
        assert main(["online", "--rom", str(offline_dir),
                     "--mu", "7.25"]) == 0
        data = np.loadtxt(offline_dir / "trajectory_mu7.25.csv",
                          delimiter=",")
        assert data.shape[0] == 51

    def test_deterministic(self, offline_dir):
        main(["online", "--rom", str(offline_dir), "--mu", "3.5"])
        first = read_bytes(offline_dir / "trajectory_mu3.5.csv")
        main(["online", "--rom", str(offline_dir), "--mu", "3.5"])
        assert read_bytes(offline_dir / "trajectory_mu3.5.csv") == first

    def test_reconstruct_writes_nodal(self, offline_dir):
        assert main(["online", "--rom", str(offline_dir), "--mu", "2.0",
                     "--reconstruct"]) == 0
        nodal = np.loadtxt(offline_dir / "trajectory_mu2_nodal.csv",
                           delimiter=",")
        assert nodal.shape == (51, 72)  # refine-2 mesh

    def test_out_of_range_warns_and_proceeds(self, offline_dir, capsys):
        assert main(["online", "--rom", str(offline_dir),
                     "--mu", "0.5"]) == 0
        assert "outside the parameter interval" in capsys.readouterr().err

    def test_missing_archive_fails(self, tmp_path, capsys):
        assert main(["online", "--rom", str(tmp_path / "none"),
                     "--mu", "2.0"]) == 1
        assert "error:" in capsys.readouterr().err


class TestCaseB:
    def test_offline_online_flow(self, tmp_path):
        out = tmp_path / "rom_b"
        assert main([
            "offline", "--case", "b", "--algo", "preim", "--refine", "2",
            "--out", str(out),
        ]) == 0
        assert main(["online", "--rom", str(out), "--mu", "30.5"]) == 0
        data = np.loadtxt(out / "trajectory_mu30.5.csv", delimiter=",")
        assert data.shape[0] == 51
        assert np.all(np.isfinite(data))


class TestReport:
    def test_report_structure(self, tmp_path):
        out = tmp_path / "rep"
        assert main([
            "report", "--case", "a", "--algos", "standard,preim",
            "--refine", "1", "--out", str(out),
        ]) == 0
        for algo in ("standard", "preim"):
            assert (out / "a" / algo / "summary.csv").is_file()

    def test_rerun_overwrites(self, tmp_path):
        out = tmp_path / "rep2"
        args = ["report", "--case", "a", "--algos", "standard",
                "--refine", "1", "--out", str(out)]
        assert main(args) == 0
        first = read_bytes(out / "a" / "standard" / "eim_decay.csv")
        assert main(args) == 0
        assert read_bytes(out / "a" / "standard" / "eim_decay.csv") == first
