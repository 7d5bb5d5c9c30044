import json
import math
from pathlib import Path

import numpy as np
import pytest

from entbase.cli import main
from entbase.config import ConfigError, load_config, parse_config

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def base_config(**overrides):
    cfg = {
        "sky": {"sources": [{"theta": -0.01, "flux": 1.0}, {"theta": 0.01, "flux": 1.0}]},
        "wavelength": 1.0,
        "baselines": {"B_max": 40.0, "count": 12, "spacing": "linear"},
        "channel": {"kind": "ideal"},
        "N_per_setting": 2000,
        "seed": 3,
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


class TestConfigParsing:
    def test_defaults(self):
        cfg = parse_config(base_config())
        assert cfg.settings.w1 == 0.0 and abs(cfg.settings.w2 - math.pi / 2) <= 1e-15
        assert cfg.rates.R_E == 1.0 and cfg.rates.R_T == 1.0
        assert cfg.output_dir == "out"

    def test_baseline_list_form(self):
        cfg = parse_config(base_config(baselines=[1.0, 2.0, 5.0]))
        assert cfg.plan.baselines == (1.0, 2.0, 5.0)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError) as err:
            parse_config(base_config(bogus=1))
        assert "bogus" in str(err.value)

    def test_unknown_channel_key_rejected(self):
        with pytest.raises(ConfigError) as err:
            parse_config(base_config(channel={"kind": "ideal", "mu_L": 0.1}))
        assert "mu_L" in str(err.value)

    def test_out_of_range_named(self):
        with pytest.raises(ConfigError) as err:
            parse_config(base_config(
                channel={"kind": "depolarizing", "kappa_L": 1.5, "kappa_R": 0.1}))
        assert "kappa_L" in str(err.value)

    def test_channel_kinds(self):
        for channel in ({"kind": "amplitude_damping", "L0": 5.0},
                        {"kind": "amplitude_damping", "lambda_L": 0.1, "lambda_R": 0.2},
                        {"kind": "dephasing", "mu_L": 0.2, "mu_R": 0.0},
                        {"kind": "depolarizing", "beta": 0.3},
                        {"kind": "memory_swap", "t1": 0.1, "t2": 0.2, "tau_c": 1.0,
                         "sign": "-"},
                        {"kind": "custom_rate", "table": [[0.0, 0.5], [10.0, 0.3]]}):
            cfg = parse_config(base_config(channel=channel))
            x = cfg.channel.resource_factory()(10.0)
            assert 0.0 <= x.g + x.f <= 1.0 + 1e-12

    def test_custom_rate_table_validation(self):
        with pytest.raises(ConfigError) as err:
            parse_config(base_config(channel={"kind": "custom_rate",
                                              "table": [[0.0, 0.6], [1.0, 0.3]]}))
        assert "table" in str(err.value)

    def test_degenerate_phase_settings(self):
        with pytest.raises(ConfigError) as err:
            parse_config(base_config(phase_settings={"w1": 0.2, "w2": 0.2}))
        assert "phase_settings" in str(err.value)

    def test_load_missing_file(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/path.json")


class TestRunCommand:
    def test_bundled_example(self, tmp_path, monkeypatch):
        cfg = json.loads((CONFIG_DIR / "ideal_two_source.json").read_text())
        cfg["N_per_setting"] = 2000
        cfg["output_dir"] = str(tmp_path / "out")
        code = main(["run", write_config(tmp_path, cfg)])
        assert code == 0
        outdir = tmp_path / "out"
        for name in ("visibility.csv", "intensity.csv", "summary.json"):
            assert (outdir / name).exists()
        summary = json.loads((outdir / "summary.json").read_text())
        assert summary["channel"] == "ideal"
        assert summary["xi"] == 1.0 and summary["C"] == 1.0
        # matrices serialize as nested [re, im] pairs
        ent = summary["resource_state"]
        assert ent[1][2] == [0.5, 0.0]

    def test_invalid_config_exit_1(self, tmp_path, capsys):
        cfg = base_config(channel={"kind": "depolarizing", "kappa_L": 1.5, "kappa_R": 0.0})
        code = main(["run", write_config(tmp_path, cfg)])
        assert code == 1
        assert "kappa_L" in capsys.readouterr().err

    def test_dead_resource_exit_2(self, tmp_path, capsys):
        cfg = base_config(channel={"kind": "amplitude_damping",
                                   "lambda_L": 1.0, "lambda_R": 1.0},
                          output_dir=str(tmp_path / "out"))
        code = main(["run", write_config(tmp_path, cfg)])
        assert code == 2
        assert "DegenerateResource" in capsys.readouterr().err

    def test_gnuplot_artifact(self, tmp_path):
        cfg = base_config(output_dir=str(tmp_path / "out"))
        code = main(["run", write_config(tmp_path, cfg), "--gnuplot"])
        assert code == 0
        assert (tmp_path / "out" / "plot.gp").exists()

    def test_determinism_across_threads(self, tmp_path, monkeypatch):
        digests = {}
        for threads in ("1", "2", "8"):
            outdir = tmp_path / f"t{threads}"
            cfg = base_config(output_dir=str(outdir))
            monkeypatch.setenv("ENTBASE_THREADS", threads)
            assert main(["run", write_config(tmp_path, cfg)]) == 0
            digests[threads] = tuple((outdir / n).read_bytes()
                                     for n in ("visibility.csv", "intensity.csv",
                                               "summary.json"))
        assert digests["1"] == digests["2"] == digests["8"]


class TestSweepCommand:
    def test_fiber_rate_slope(self, tmp_path):
        l0 = 10.0
        cfg = base_config(channel={"kind": "amplitude_damping", "L0": l0},
                          rates={"R_E": 1.0, "R_T": 1e6},
                          output_dir=str(tmp_path / "out"))
        values = ",".join(str(v) for v in np.linspace(0.0, 6 * l0, 13))
        code = main(["sweep", write_config(tmp_path, cfg), "--param", "B",
                     "--values", values])
        assert code == 0
        rows = (tmp_path / "out" / "sweep.csv").read_text().strip().splitlines()
        header = rows[0].split(",")
        data = np.array([[float(v) if v else math.nan for v in r.split(",")]
                         for r in rows[1:]])
        b = data[:, header.index("value")]
        ln_r = data[:, header.index("ln_R_M")]
        coeffs = np.polyfit(b, ln_r, 1)
        residual = np.max(np.abs(np.polyval(coeffs, b) - ln_r))
        assert abs(coeffs[0] + 1.0 / (2 * l0)) <= 1e-9
        assert residual <= 1e-9

    def test_depolarizing_asymptote(self, tmp_path):
        cfg = base_config(channel={"kind": "depolarizing", "beta": 1.0},
                          output_dir=str(tmp_path / "out"))
        code = main(["sweep", write_config(tmp_path, cfg), "--param", "L",
                     "--values", "40,60,80"])
        assert code == 0
        rows = (tmp_path / "out" / "sweep.csv").read_text().strip().splitlines()
        for row in rows[1:]:
            r_norm = float(row.split(",")[3])
            assert abs(r_norm - 5.0 / 18.0) <= 1e-6

    def test_rmse_slope_over_trial_decades(self, tmp_path):
        cfg = base_config(baselines=[20.0], output_dir=str(tmp_path / "out"))
        code = main(["sweep", write_config(tmp_path, cfg), "--param", "N",
                     "--values", "1000,10000,100000", "--mc-replicates", "200"])
        assert code == 0
        rows = (tmp_path / "out" / "sweep.csv").read_text().strip().splitlines()
        ns, rmse = [], []
        for row in rows[1:]:
            fields = row.split(",")
            ns.append(float(fields[0]))
            rmse.append(float(fields[6]))
        slope = float(np.polyfit(np.log10(ns), np.log10(rmse), 1)[0])
        assert abs(slope + 0.5) <= 0.05

    def test_custom_rate_table(self, tmp_path):
        table = [[0.0, 0.5], [10.0, 0.4], [20.0, 0.35]]
        cfg = base_config(channel={"kind": "custom_rate", "table": table},
                          output_dir=str(tmp_path / "out"))
        code = main(["sweep", write_config(tmp_path, cfg), "--param", "B",
                     "--values", "0,5,10,20"])
        assert code == 0
        rows = (tmp_path / "out" / "sweep.csv").read_text().strip().splitlines()
        r_norm = [float(r.split(",")[3]) for r in rows[1:]]
        assert r_norm == [0.5, 0.45, 0.4, 0.35]

    def test_unknown_param_exit_1(self, tmp_path, capsys):
        cfg = base_config()
        code = main(["sweep", write_config(tmp_path, cfg), "--param", "nope",
                     "--values", "1,2"])
        assert code == 1
        assert "nope" in capsys.readouterr().err

    def test_sweep_value_validated(self, tmp_path, capsys):
        cfg = base_config(channel={"kind": "dephasing", "mu_L": 0.0, "mu_R": 0.0})
        code = main(["sweep", write_config(tmp_path, cfg), "--param", "mu_L",
                     "--values", "0.2,1.5"])
        assert code == 1
        assert "mu_L" in capsys.readouterr().err


class TestValidateCommand:
    def test_fast_suite_passes(self, capsys):
        assert main(["validate", "--fast"]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out
        assert "SKIP" in out  # Monte Carlo checks skipped in fast mode

    def test_full_suite_passes(self, capsys):
        assert main(["validate"]) == 0
        out = capsys.readouterr().out
        assert "FAIL" not in out and "SKIP" not in out
