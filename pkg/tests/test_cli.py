import os

import pytest

from smw import experiments as ex
from smw.cli import EXIT_IO, EXIT_OK, EXIT_USAGE, main, parse_grid

TINY = ["--n", "20", "--k", "2", "--trials", "2", "--threads", "1"]


def test_parse_grid():
    assert parse_grid("1e-8, 1e-4,1") == (1e-8, 1e-4, 1.0)
    g = parse_grid("1e-8:1e2:41")
    assert len(g) == 41 and g[0] == pytest.approx(1e-8) and g[-1] == pytest.approx(1e2)


@pytest.mark.parametrize(
    "argv",
    [
        ["figure", "5"],
        ["verify", "everything"],
        [],
        ["sweep", "--n", "20"],  # no family
        ["sweep", "--family", "forward-eps", "--eps-grid", "a,b"],
        ["sweep", "--family", "forward-eps", "--update-scale", "huge"],
        ["sweep", "--family", "forward-eps", "--eps-grid", "1,0.1"],
        ["sweep", "--family", "forward-eps", "--threads", "0"],
    ],
)
def test_usage_errors(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)] if argv[:1] == ["sweep"] else argv) == EXIT_USAGE


def test_verify_lemma1_prints_ratios(capsys):
    assert main(["verify", "lemma1"]) == EXIT_OK
    err = capsys.readouterr().err
    assert "ratio=1" in err and "ratio=0.3333333333" in err
    assert "4/4 checks passed" in err


def test_sweep_writes_csv_and_cfg(tmp_path, capsys):
    out = tmp_path / "nested" / "dir"
    rc = main(["sweep", "--family", "backward-eps", "--eps-grid", "1e-6,1e-3", "--out", str(out)] + TINY)
    assert rc == EXIT_OK
    csv = out / "backward-eps_small_20x2.csv"
    assert capsys.readouterr().out.strip() == str(csv)
    rows, thresholds, _ = ex.read_csv(csv)
    assert len(rows) == 2 and "eps2_small.eps_max" in thresholds
    cfg = ex.parse_config_text((out / "backward-eps_small_20x2.cfg").read_text())
    assert cfg["n"] == 20 and cfg["sweep_grid"] == (1e-6, 1e-3)


def test_config_file_then_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("family = forward-eps\nn = 20\nk = 2\ntrials = 2\nsweep_grid = 1e-6, 1e-4\n")
    rc = main(["sweep", "--config", str(cfg), "--k", "3", "--out", str(tmp_path), "--threads", "1"])
    assert rc == EXIT_OK
    written = ex.parse_config_text((tmp_path / "forward-eps_small_20x3.cfg").read_text())
    assert written["k"] == 3 and written["n"] == 20 and written["trials"] == 2


def test_config_regenerates_bytes(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "--family", "forward-eps", "--eps-grid", "1e-7:1e-1:4", "--out", str(first)] + TINY) == 0
    stem = "forward-eps_small_20x2"
    assert main(["sweep", "--config", str(first / f"{stem}.cfg"), "--out", str(second), "--threads", "2"]) == 0
    assert (first / f"{stem}.csv").read_bytes() == (second / f"{stem}.csv").read_bytes()


def test_backward_beta_defaults(tmp_path):
    rc = main(["sweep", "--family", "backward-beta", "--out", str(tmp_path), "--n", "16", "--k", "2",
               "--trials", "1", "--threads", "1"])
    assert rc == EXIT_OK
    cfg = ex.parse_config_text((tmp_path / "backward-beta_small_16x2.cfg").read_text())
    assert cfg["eps_fixed"] == 1e-6 and cfg["update_scale"] == "hundred-sigma-min"


def test_missing_config_is_io_error(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == EXIT_IO


@pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
def test_unwritable_out_is_io_error(tmp_path):
    locked = tmp_path / "locked"
    locked.mkdir(mode=0o500)
    assert main(["sweep", "--family", "forward-eps", "--out", str(locked / "x")] + TINY) == EXIT_IO


def test_out_path_is_a_file_is_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["sweep", "--family", "forward-eps", "--out", str(blocker / "x")] + TINY) == EXIT_IO
