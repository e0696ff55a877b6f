import csv
import json
from pathlib import Path

import pytest

from cvdistill import repeater
from cvdistill.cli import main
from cvdistill.gaussian import SymmetricTwoMode


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestVerify:
    def test_passes_with_named_lines(self, capsys):
        assert main(["verify", "--cutoff", "14"]) == 0
        out = capsys.readouterr().out
        for name in ("appendix_a_conjugation", "wick_double_factorial",
                     "pumping_equals_recursive", "compact_zero_persistence",
                     "schur_vs_fock_filter", "boundary_consistency"):
            assert f"PASS {name}" in out

    def test_swap_mutation_fails_named_check(self, capsys, monkeypatch):
        def bad_swap(state):
            # forgets to shrink the correlations: Delta can decrease
            shift = state.s * state.s / (2.0 * state.c)
            return SymmetricTwoMode(state.c - shift, state.s)

        monkeypatch.setattr(repeater, "swap", bad_swap)
        assert main(["verify", "--cutoff", "10"]) == 1
        out = capsys.readouterr().out
        assert "FAIL swap_never_entangles" in out

    def test_reduced_cutoff_still_passes_appendix_a(self, capsys):
        assert main(["verify", "--cutoff", "8"]) == 0
        assert "PASS appendix_a_conjugation" in capsys.readouterr().out


class TestGaussify:
    def test_default_scenario_reports(self, tmp_path):
        cfg = tmp_path / "scenario.cfg"
        cfg.write_text("cutoff = 14\nn_max = 8\noracle_n_max = 2\n")
        assert main(["gaussify", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "gaussify_report.json").read_text())
        devs = [row["value"] for row in report["sup_deviation"]]
        assert all(b < a for a, b in zip(devs, devs[1:]))
        series = read_csv(tmp_path / "gaussify_series.csv")
        assert series[0] == ["metric", "N", "value"]
        assert any(row[0] == "sup_deviation" for row in series[1:])

    def test_gaussian_input_has_vanishing_deviations(self, tmp_path):
        cfg = tmp_path / "scenario.cfg"
        cfg.write_text("input = gaussian\ncutoff = 16\nn_max = 8\noracle_n_max = 1\n")
        assert main(["gaussify", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        report = json.loads((tmp_path / "gaussify_report.json").read_text())
        assert max(row["value"] for row in report["sup_deviation"]) <= 1e-10

    def test_invalid_parameter_exits_two(self, tmp_path, capsys):
        cfg = tmp_path / "scenario.cfg"
        cfg.write_text("eta = 1.5\n")
        assert main(["gaussify", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "eta" in capsys.readouterr().err


class TestRepeaterScan:
    def _scan(self, tmp_path, name="a", extra=""):
        cfg = tmp_path / f"{name}.cfg"
        cfg.write_text("r_min = 0.2\nr_max = 0.6\nr_step = 0.2\nk_set = 0,1\n" + extra)
        out_dir = tmp_path / name
        assert main(["repeater-scan", "--config", str(cfg), "--out", str(out_dir)]) == 0
        return out_dir / "repeater_scan.csv"

    def test_schema_and_direct_column(self, tmp_path):
        rows = read_csv(self._scan(tmp_path))
        assert rows[0] == ["r", "m", "variant", "L_max_km", "delta_at_Lmax"]
        direct = {float(r[0]): float(r[3]) for r in rows[1:] if r[2] == "direct"}
        for r, lmax in direct.items():
            assert lmax == pytest.approx(repeater.direct_lmax(r), rel=1e-10)

    def test_deterministic_output(self, tmp_path):
        a = Path(self._scan(tmp_path, "a")).read_bytes()
        b = Path(self._scan(tmp_path, "b")).read_bytes()
        assert a == b

    def test_threads_do_not_change_bytes(self, tmp_path):
        cfg = tmp_path / "t.cfg"
        cfg.write_text("r_min = 0.2\nr_max = 0.6\nr_step = 0.2\nk_set = 0,1\n")
        main(["repeater-scan", "--config", str(cfg), "--out", str(tmp_path / "one")])
        main(["repeater-scan", "--config", str(cfg), "--out", str(tmp_path / "four"),
              "--threads", "4"])
        assert (tmp_path / "one" / "repeater_scan.csv").read_bytes() == \
            (tmp_path / "four" / "repeater_scan.csv").read_bytes()

    def test_twelve_significant_digits(self, tmp_path):
        rows = read_csv(self._scan(tmp_path))
        sample = [r[3] for r in rows[1:] if float(r[3]) > 100.0]
        assert sample and all(len(v.replace(".", "").replace("-", "").lstrip("0")) <= 12
                              for v in sample)

    def test_variant_flag_restricts(self, tmp_path):
        cfg = tmp_path / "v.cfg"
        cfg.write_text("r_min = 0.3\nr_max = 0.3\nr_step = 0.1\nk_set = 0\ninclude_direct = false\n")
        out_dir = tmp_path / "v"
        assert main(["repeater-scan", "--config", str(cfg), "--out", str(out_dir),
                     "--variant", "ii"]) == 0
        rows = read_csv(out_dir / "repeater_scan.csv")
        assert {r[2] for r in rows[1:]} == {"ii"}

    def test_bad_grid_exits_two(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("r_min = -1.0\n")
        assert main(["repeater-scan", "--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "r grid" in capsys.readouterr().err


class TestConfigParsing:
    def test_comments_and_blanks(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("# comment\n\nr = 0.5  # trailing\n")
        from cvdistill.cli import parse_config
        assert parse_config(cfg) == {"r": "0.5"}

    def test_malformed_line(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("not a key value line\n")
        from cvdistill.cli import parse_config
        with pytest.raises(ValueError):
            parse_config(cfg)
