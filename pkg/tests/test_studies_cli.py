import numpy as np
import pytest

from fdfsi.cli import main
from fdfsi.studies import (
    PAPER_SHIFTS,
    StudyConfig,
    level_for_grid,
    run_convergence_study,
    run_shift_study,
    run_time_study,
)


class TestHelpers:
    def test_level_for_grid(self):
        assert level_for_grid(8) == 1
        assert level_for_grid(32) == 3
        assert level_for_grid(64) == 4
        with pytest.raises(ValueError):
            level_for_grid(12)

    def test_paper_shift_list(self):
        assert 0.0 in PAPER_SHIFTS
        assert 1e-15 in PAPER_SHIFTS and -1e-15 in PAPER_SHIFTS
        assert len(PAPER_SHIFTS) == 27

    def test_config_validation(self):
        with pytest.raises(ValueError):
            StudyConfig(levels=0)
        with pytest.raises(ValueError):
            StudyConfig(kind="c2")


class TestShiftStudy:
    def test_csv_schema_and_determinism(self, tmp_path):
        cfg = lambda d: StudyConfig(nx=8, sigmas=(0.0, 1e-3), out_dir=d)
        p1 = run_shift_study(cfg(tmp_path / "a"))
        p2 = run_shift_study(cfg(tmp_path / "b"))
        text = p1.read_text()
        assert text.splitlines()[0] == "sigma,kind,mode,err_u,err_p,err_X,err_lambda,cond"
        assert len(text.splitlines()) == 1 + 2 * 4
        assert text == p2.read_text()

    def test_sigma_zero_rows_match_across_modes(self, tmp_path):
        path = run_shift_study(StudyConfig(nx=8, sigmas=(0.0,), out_dir=tmp_path))
        lines = path.read_text().splitlines()[1:]
        rows = {}
        for line in lines:
            parts = line.split(",")
            rows[(parts[1], parts[2])] = np.array([float(v) for v in parts[3:7]])
        for kind in ("c0", "c1"):
            a = rows[(kind, "exact")]
            b = rows[(kind, "inexact")]
            assert np.abs(a - b).max() <= 1e-10 * np.abs(a).max()


class TestConvergenceStudy:
    def test_csv_schema(self, tmp_path):
        cfg = StudyConfig(case="square", kind="c1", mode="exact", levels=2, out_dir=tmp_path)
        path = run_convergence_study(cfg)
        lines = path.read_text().splitlines()
        assert lines[0] == "level,h,err_u,err_p,err_X,err_lambda,cond"
        assert len(lines) == 3
        assert path.name == "converge_square_c1_exact.csv"
        level, h, *errs = lines[1].split(",")
        assert level == "1"
        assert errs[-1] == "nan"  # cond off by default

    def test_shifted_square_variant(self, tmp_path):
        cfg = StudyConfig(
            case="square", kind="c0", mode="inexact", levels=2,
            sigma=np.pi * 1e-3, out_dir=tmp_path,
        )
        path = run_convergence_study(cfg)
        rows = path.read_text().splitlines()[1:]
        errs = [float(r.split(",")[2]) for r in rows]
        assert errs[1] < errs[0]


class TestTimeStudy:
    def test_outputs_and_determinism(self, tmp_path):
        cfg = lambda d: StudyConfig(
            nx=8, dt=0.1, t_final=0.3, out_dir=d, seed=3, snapshot_times=(0.2,)
        )
        e1, c1 = run_time_study(cfg(tmp_path / "a"))
        e2, c2 = run_time_study(cfg(tmp_path / "b"))
        assert e1.read_text() == e2.read_text()
        assert c1.read_text() == c2.read_text()
        lines = e1.read_text().splitlines()
        assert lines[0] == "n,t,E,E_ratio"
        assert len(lines) == 1 + 1 + 3
        assert c1.read_text().splitlines()[0].startswith("# seed=3 element=")
        for field in ("u", "p", "X"):
            assert (tmp_path / "a" / f"snapshot_t0p2_{field}.txt").exists()

    def test_energy_monotone_on_small_run(self, tmp_path):
        cfg = StudyConfig(nx=8, dt=0.05, t_final=0.4, out_dir=tmp_path)
        e_path, _ = run_time_study(cfg)
        rows = e_path.read_text().splitlines()[1:]
        energies = [float(r.split(",")[2]) for r in rows]
        for a, b in zip(energies, energies[1:]):
            assert b <= a * (1 + 1e-10)


class TestCli:
    def test_case_list(self, capsys):
        assert main(["case-list"]) == 0
        out = capsys.readouterr().out
        assert "disk" in out and "annulus" in out

    def test_converge_roundtrip(self, tmp_path, capsys):
        rc = main([
            "converge", "--case", "square", "--levels", "1",
            "--kind", "c1", "--mode", "inexact", "--out", str(tmp_path),
        ])
        assert rc == 0
        printed = capsys.readouterr().out.strip()
        assert printed.endswith("converge_square_c1_inexact.csv")

    def test_dynamic_roundtrip(self, tmp_path):
        rc = main([
            "dynamic", "--nx", "8", "--dt", "0.1", "--tfinal", "0.2",
            "--out", str(tmp_path),
        ])
        assert rc == 0
        assert (tmp_path / "energy.csv").exists()
        assert (tmp_path / "cutcells.csv").exists()

    def test_error_exit_code(self, tmp_path, capsys):
        rc = main([
            "converge", "--case", "disk", "--sigma", "0.001", "--out", str(tmp_path),
        ])
        assert rc == 1
        assert "error" in capsys.readouterr().err

    def test_pin_flag(self, tmp_path):
        rc = main([
            "converge", "--case", "square", "--levels", "1",
            "--pressure-fix", "pin", "--out", str(tmp_path),
        ])
        assert rc == 0
