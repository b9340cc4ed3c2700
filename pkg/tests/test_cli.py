import csv
import io
from pathlib import Path

import pytest

from multirate_st import cli
from multirate_st.experiments import HEATWAVE1D_COLUMNS, QOI_COLUMNS, ConfigError, RunConfig
from multirate_st.slab import SlabError

GOLDEN = Path(__file__).parent / "golden" / "heatwave1d_dg1_c4_r1-2.csv"
GOLDEN_ARGS = ["heatwave1d", "--dg", "1", "--coarse", "4", "--ratio", "1:2", "--sweep", "1"]


def _rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_golden_heatwave1d(capsys):
    assert cli.main(GOLDEN_ARGS) == 0
    got, want = _rows(capsys.readouterr().out), _rows(GOLDEN.read_text())
    assert got[0] == want[0] == list(HEATWAVE1D_COLUMNS)
    for g, w in zip(got[1:], want[1:]):
        assert g[:4] == w[:4]
        for a, b in zip(g[4:], w[4:]):
            assert a == b or float(a) == pytest.approx(float(b), rel=1e-12)


def test_qoi_schema_and_output_file(tmp_path):
    out = tmp_path / "m.csv"
    assert cli.main(["mandel", "--coarse", "8", "--ratio", "1:2", "--output", str(out)]) == 0
    rows = _rows(out.read_text(encoding="utf-8"))
    assert rows[0] == list(QOI_COLUMNS)
    assert rows[1][:4] == ["8", "8", "16", "1:2"] and rows[1][-1] == "-"
    # 15 significant digits
    assert len(rows[1][4].replace(".", "").lstrip("0")) <= 15


def test_repeated_runs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert cli.main(GOLDEN_ARGS + ["--output", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sample\nexperiment = heatwave1d\ndg = 1\ncoarse = 4\nratio = 1:1\n")
    assert cli.main(["--config", str(cfg), "--ratio", "1:2", "--sweep", "1"]) == 0
    assert _rows(capsys.readouterr().out)[1][:4] == ["4", "4", "8", "1:2"]
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n")
    with pytest.raises(SystemExit) as info:
        cli.main(["--config", str(bad)])
    assert info.value.code == 2


@pytest.mark.parametrize("argv", [
    ["mandel", "--dg", "1"],
    ["heatwave2d_fluid", "--dg", "0"],
    ["heatwave1d", "--ratio", "1:3"],
    ["heatwave1d", "--ratio", "two"],
    ["heatwave1d", "--coarse", "0"],
    [],
])
def test_usage_errors(argv, capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(argv)
    assert info.value.code == 2
    assert "error" in capsys.readouterr().err


def test_solver_failure_exit_code(monkeypatch, capsys):
    def boom(cfg, refinements):
        raise SlabError(3, "singular matrix")

    monkeypatch.setattr(cli, "sweep", boom)
    assert cli.main(["heatwave1d"]) == 1
    assert "slab 3" in capsys.readouterr().err


def test_appendix_b_check(capsys):
    assert cli.main(["appendix_b_check"]) == 0
    assert capsys.readouterr().out.startswith("PASS appendix_b_check")


def test_run_config_defaults():
    assert RunConfig("mandel").resolved().coarse == 1250
    assert RunConfig("heatwave1d").resolved().coarse == 25
    assert RunConfig("heatwave1d", dg=1).resolved().coarse == 4
    assert RunConfig("heatwave2d_solid").resolved().dg == 1
    with pytest.raises(ConfigError):
        RunConfig("footing").resolved()
