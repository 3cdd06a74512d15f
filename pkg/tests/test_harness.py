import os
import subprocess
import sys

import numpy as np
import pytest

from cbwk.errors import ConfigurationError
from cbwk.harness import (
    CSV_HEADER,
    parse_config,
    read_csv,
    render_plot,
    run_sweep,
    write_csv,
)

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")

TINY_CONFIG = """
environment.family = fixed_linear
environment.m = 10
environment.K = 3
environment.d = 4
environment.T = 60
environment.B = T
environment.noise_variance = 0.2
environment.mode = bounded
algorithm.list = ogd, linucb
sweep.param = m
sweep.values = 10, 12
seeds.count = 2
seeds.base = 7
"""


def test_shipped_m_sweep_config_parses():
    with open(os.path.join(CONFIG_DIR, "sweep_m.conf")) as fh:
        config = parse_config(fh.read())
    assert config.sweep_param == "m"
    assert config.K == 3
    assert config.T == 2000
    assert config.sweep_values[0] == 10 and config.sweep_values[-1] == 101
    assert config.algorithms == ("glmtron", "ogd", "linucb")
    assert config.resolve_budget(2000) == 2000.0


def test_all_shipped_configs_parse():
    for name in os.listdir(CONFIG_DIR):
        with open(os.path.join(CONFIG_DIR, name)) as fh:
            parse_config(fh.read())


def test_k_equals_m_rejected_with_named_constraint():
    bad = TINY_CONFIG.replace("environment.K = 3", "environment.K = 10")
    with pytest.raises(ConfigurationError) as err:
        parse_config(bad)
    assert "K <= m-1" in str(err.value)


def test_empty_document_lists_required_keys():
    with pytest.raises(ConfigurationError) as err:
        parse_config("")
    message = str(err.value)
    for key in ("environment.family", "environment.m", "algorithm.list",
                "seeds.count", "seeds.base"):
        assert key in message


def test_unknown_keys_rejected():
    with pytest.raises(ConfigurationError) as err:
        parse_config(TINY_CONFIG + "\nenvironment.shape = round\n")
    assert "unknown key: environment.shape" in str(err.value)


def test_all_violations_reported_together():
    bad = TINY_CONFIG.replace("environment.K = 3", "environment.K = 40")
    bad = bad.replace("environment.noise_variance = 0.2",
                      "environment.noise_variance = -1")
    with pytest.raises(ConfigurationError) as err:
        parse_config(bad)
    assert len(err.value.violations) >= 3  # base K, both sweep values, noise


def test_sweep_values_respect_constraints():
    bad = TINY_CONFIG.replace("sweep.values = 10, 12", "sweep.values = 10, 5")
    with pytest.raises(ConfigurationError) as err:
        parse_config(bad)
    assert "sweep value 5" in str(err.value)


def test_budget_specs():
    config = parse_config(TINY_CONFIG)
    assert config.resolve_budget(60) == 60.0
    half = parse_config(TINY_CONFIG.replace("environment.B = T",
                                            "environment.B = T/2"))
    assert half.resolve_budget(60) == 30.0
    fixed = parse_config(TINY_CONFIG.replace("environment.B = T",
                                             "environment.B = 45"))
    assert fixed.resolve_budget(60) == 45.0


def test_run_sweep_row_count_and_order():
    config = parse_config(TINY_CONFIG)
    result = run_sweep(config)
    assert len(result.rows) == 2 * 2 * 2  # algorithms x values x seeds
    # canonical order: algorithm, value, seed; seeds are base + cell index
    assert [r.algorithm for r in result.rows] == ["ogd"] * 4 + ["linucb"] * 4
    assert [r.seed for r in result.rows] == list(range(7, 15))
    assert all(r.error is None for r in result.rows)


def test_determinism_and_parallelism_invariance(tmp_path):
    config = parse_config(TINY_CONFIG)
    paths = []
    for i, parallelism in enumerate((1, 1, 2)):
        result = run_sweep(config, parallelism=parallelism)
        path = tmp_path / f"out{i}.csv"
        write_csv(result, str(path))
        paths.append(path.read_bytes())
    assert paths[0] == paths[1] == paths[2]


def test_csv_format(tmp_path):
    config = parse_config(TINY_CONFIG)
    result = run_sweep(config)
    path = tmp_path / "r.csv"
    write_csv(result, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + len(result.rows)
    first = lines[1].split(",")
    assert first[0] == "ogd" and first[1] == "m" and first[2] == "10"
    assert first[7] == "0"  # runtime column is deterministic


def test_read_csv_roundtrip(tmp_path):
    config = parse_config(TINY_CONFIG)
    result = run_sweep(config)
    path = tmp_path / "r.csv"
    write_csv(result, str(path))
    back = read_csv(str(path))
    assert len(back.rows) == len(result.rows)
    assert back.rows[3].regret == result.rows[3].regret
    assert back.aggregates == result.aggregates


def test_aggregates_match_independent_recomputation():
    config = parse_config(TINY_CONFIG)
    result = run_sweep(config)
    for alg, value, mean, std in result.aggregates:
        regrets = np.array([r.regret for r in result.rows
                            if r.algorithm == alg and r.sweep_value == value])
        assert mean == pytest.approx(regrets.mean(), abs=1e-12)
        assert std == pytest.approx(regrets.std(), abs=1e-12)


def test_cell_failures_recorded_per_row():
    # twostage with an oversized exploration length fails inside its cells
    config = parse_config(
        TINY_CONFIG.replace("algorithm.list = ogd, linucb",
                            "algorithm.list = ogd, twostage")
        + "\nalgorithm.t0 = 50\n"
    )
    result = run_sweep(config)
    ogd_rows = [r for r in result.rows if r.algorithm == "ogd"]
    two_rows = [r for r in result.rows if r.algorithm == "twostage"]
    assert all(r.error is None for r in ogd_rows)
    assert all(r.error is not None for r in two_rows)
    assert all(np.isnan(r.regret) for r in two_rows)


def test_render_plot_single_cell(tmp_path):
    config = parse_config(TINY_CONFIG.replace("sweep.values = 10, 12",
                                              "sweep.values = 10")
                          .replace("seeds.count = 2", "seeds.count = 1")
                          .replace("algorithm.list = ogd, linucb",
                                   "algorithm.list = ogd"))
    result = run_sweep(config)
    path = tmp_path / "single.svg"
    render_plot(result, str(path))
    svg = path.read_text()
    assert svg.startswith("<svg")
    assert "circle" in svg


def test_render_plot_series(tmp_path):
    config = parse_config(TINY_CONFIG)
    result = run_sweep(config)
    path = tmp_path / "plot.svg"
    render_plot(result, str(path))
    svg = path.read_text()
    assert svg.count("polyline") == 2
    assert "ogd" in svg and "linucb" in svg
    # deterministic bytes
    path2 = tmp_path / "plot2.svg"
    render_plot(result, str(path2))
    assert path.read_bytes() == path2.read_bytes()


def _write_tiny(tmp_path):
    cfg = tmp_path / "tiny.conf"
    cfg.write_text(TINY_CONFIG)
    return str(cfg)


def test_cli_run_and_plot(tmp_path):
    from cbwk.cli import main

    cfg = _write_tiny(tmp_path)
    out = str(tmp_path / "out")
    assert main(["run", cfg, "--out", out, "--seeds", "1"]) == 0
    csv_path = os.path.join(out, "results.csv")
    assert os.path.exists(csv_path)
    assert os.path.exists(os.path.join(out, "plot.svg"))
    assert main(["plot", csv_path, "--out", str(tmp_path / "re.svg")]) == 0
    assert os.path.exists(str(tmp_path / "re.svg"))


def test_cli_sweep_override(tmp_path):
    from cbwk.cli import main

    cfg = _write_tiny(tmp_path)
    out = str(tmp_path / "out2")
    assert main(["sweep", cfg, "--param", "m", "--values", "10,11",
                 "--out", out, "--seeds", "1"]) == 0
    rows = read_csv(os.path.join(out, "results.csv")).rows
    assert sorted({r.sweep_value for r in rows}) == [10, 11]


def test_cli_opt_prints_value(tmp_path, capsys):
    from cbwk.cli import main

    cfg = _write_tiny(tmp_path)
    assert main(["opt", cfg]) == 0
    out = capsys.readouterr().out
    assert "OPT = " in out


def test_cli_exit_codes(tmp_path):
    from cbwk.cli import main

    bad = tmp_path / "bad.conf"
    bad.write_text("environment.family = fixed_linear\n")
    assert main(["run", str(bad)]) == 1
    missing_csv = str(tmp_path / "nope.csv")
    assert main(["plot", missing_csv, "--out", str(tmp_path / "x.svg")]) == 2


def test_cli_entrypoint_subprocess(tmp_path):
    cfg = _write_tiny(tmp_path)
    out = str(tmp_path / "sub")
    proc = subprocess.run(
        [sys.executable, "-m", "cbwk.cli", "run", cfg, "--out", out,
         "--seeds", "1", "--parallelism", "2"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert os.path.exists(os.path.join(out, "results.csv"))
