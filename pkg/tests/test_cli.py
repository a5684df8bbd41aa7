import json

import numpy as np
import pytest

from bayespec.cli import main
from bayespec.config import ConfigError, parse_config
from bayespec.report import RunReport


def lines(path):
    return [ln for ln in path.read_text().splitlines() if ln and not ln.startswith("#")]


@pytest.fixture
def gm3(tmp_path):
    assert main(["generate", "--family", "gm3", "--seed", "1", "--out", str(tmp_path / "d")]) == 0
    return tmp_path / "d" / "spectrum.csv"


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_generate_gm3(gm3, tmp_path):
    assert len(lines(gm3)) == 300
    truth = json.loads((gm3.parent / "truth.json").read_text())
    assert truth["n"] == 300 and len(truth["theta"]) == 9
    main(["generate", "--family", "gm3", "--seed", "1", "--out", str(tmp_path / "again")])
    assert (tmp_path / "again" / "spectrum.csv").read_bytes() == gm3.read_bytes()


def test_generate_xrd_size(tmp_path):
    assert main(["generate", "--family", "xrd", "--n", "5000", "--out", str(tmp_path)]) == 0
    assert len(lines(tmp_path / "spectrum.csv")) == 5000


def test_generate_rejects_unknown_family(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["generate", "--family", "gm4", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_generate_unwritable(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["generate", "--family", "gm3", "--out", str(blocker / "sub")]) == 2


def test_fit_writes_report(gm3, tmp_path):
    cfg = write(tmp_path, "family = gm\nK = 3\nsmc.T = 200\nsmc.n = 10\nseed = 4\n")
    out = tmp_path / "rep.json"
    assert main(["fit", "--sampler", "smc", "--config", str(cfg), "--data", str(gm3),
                 "--out", str(out)]) == 0
    rep = RunReport.load(out)
    assert np.isfinite(rep.free_energy) and rep.samples.shape == (200, 9)
    assert rep.config["config_text"] == cfg.read_text()
    assert [r["name"] for r in rep.summary][:3] == ["A_1", "mu_1", "b_1"]


def test_fit_remc(gm3, tmp_path):
    cfg = write(tmp_path, "family = gm\nK = 3\nremc.L = 4\nremc.sweeps = 40\n")
    out = tmp_path / "rep.json"
    assert main(["fit", "--sampler", "remc", "--config", str(cfg), "--data", str(gm3),
                 "--out", str(out)]) == 0
    rep = RunReport.load(out)
    assert rep.sampler == "remc" and rep.config["burn_in_fraction"] == 0.5


def test_fit_missing_k(gm3, tmp_path, capsys):
    cfg = write(tmp_path, "family = gm\n")
    code = main(["fit", "--sampler", "smc", "--config", str(cfg), "--data", str(gm3),
                 "--out", str(tmp_path / "r.json")])
    assert code == 2
    assert "K" in capsys.readouterr().err


def test_fit_numeric_failure(gm3, tmp_path):
    cfg = write(tmp_path, "family = polynomial\nsmc.T = 100\nsmc.max_levels = 1\n"
                          "smc.ess_target = 0.9\n")
    code = main(["fit", "--sampler", "smc", "--config", str(cfg), "--data", str(gm3),
                 "--out", str(tmp_path / "r.json")])
    assert code == 3


def test_model_select_single_k(gm3, tmp_path, capsys):
    cfg = write(tmp_path, "family = gm\nsmc.T = 200\n")
    out = tmp_path / "sel.tsv"
    assert main(["model-select", "--k-range", "3..3", "--config", str(cfg), "--data", str(gm3),
                 "--out", str(out)]) == 0
    rows = lines(out)
    assert rows[0].startswith("K\t") and rows[1].startswith("3\t") and "selected" in rows[1]
    assert rows[-1] == "selected K = 3"
    assert "# family = gm" in out.read_text()
    assert main(["model-select", "--k-range", "4..2", "--config", str(cfg), "--data", str(gm3),
                 "--out", str(out)]) == 2


def test_benchmark_grid(gm3, tmp_path):
    cfg = write(tmp_path, "family = gm\nK = 3\nsmc.n = 10\nbench.smc.T = 100\n"
                          "bench.remc.sweeps = 40\nremc.L = 4\n")
    out = tmp_path / "bench"
    assert main(["benchmark", "--config", str(cfg), "--data", str(gm3), "--out", str(out),
                 "--trials", "3"]) == 0
    text = (out / "bench.tsv").read_text()
    body = lines(out / "bench.tsv")
    assert len(body) == 3  # header + two conditions
    assert "reference F" in text and "smc_T100" in text
    assert len(list((out / "reports").glob("*.json"))) == 6
    assert "speedup" in json.loads((out / "speedup.json").read_text())


def test_config_errors():
    with pytest.raises(ConfigError, match="smc.T"):
        parse_config("family = gm\nsmc.T = 105\nsmc.n = 10\n")
    with pytest.raises(ConfigError, match="bogus"):
        parse_config("family = gm\nbogus = 1\n")
    with pytest.raises(ConfigError, match="given twice"):
        parse_config("family = gm\nseed = 1\nseed = 2\n")
    with pytest.raises(ConfigError, match="line 1"):
        parse_config("family gm\n")
    with pytest.raises(ConfigError, match="family"):
        parse_config("family = nmr\n")
    with pytest.raises(ConfigError, match="prior.mu_1"):
        parse_config("family = gm\nprior.mu_1 = cauchy(0, 1)\n")


def test_config_defaults():
    cfg = parse_config("family = gm\nK = 3\n")
    assert cfg.smc().n == 10
    assert cfg.remc().burn_in_fraction == 0.5


def test_missing_config_file(gm3, tmp_path):
    assert main(["fit", "--sampler", "smc", "--config", str(tmp_path / "nope.cfg"),
                 "--data", str(gm3), "--out", str(tmp_path / "r.json")]) == 2
