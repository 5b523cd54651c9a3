"""Command-line interface: subcommands, config merging, exit codes."""

from __future__ import annotations

import json
import subprocess
import sys

import numpy as np
import pytest

from linerank import (
    Algorithm,
    BACKEND,
    __version__,
    build_dc_model,
    load_case,
    read_scores_csv,
)
from linerank.cli import main
from linerank.experiments import (
    read_false_selection_csv,
    read_ground_truth_csv,
    read_rank_intervals_csv,
    write_ground_truth_csv,
)
from linerank.ranking import rank_by_gaussian
from linerank.stochastic import default_gaussian_model, read_samples_csv

from conftest import case_text

TRI_KW = dict(
    buses=[(1, 0.0), (2, 50.0), (3, 50.0)],
    gens=[(1, 100.0)],
    branches=[(1, 2, 1.0, 70.0), (2, 3, 1.0, 40.0), (1, 3, 1.0, 45.0)],
    name="tri3",
)
TWO_GEN_KW = dict(
    buses=[(1, 0.0), (2, 0.0), (3, 100.0)],
    gens=[(1, 60.0), (2, 40.0)],
    branches=[(1, 2, 1.0, 70.0), (2, 3, 1.0, 80.0), (1, 3, 1.0, 80.0)],
    name="twogen",
)


@pytest.fixture()
def tri_case(tmp_path):
    path = tmp_path / "tri3.m"
    path.write_text(case_text(**TRI_KW))
    return path


@pytest.fixture()
def two_gen_case(tmp_path):
    path = tmp_path / "twogen.m"
    path.write_text(case_text(**TWO_GEN_KW))
    return path


class TestParse:
    def test_summary_line(self, tri_case, capsys):
        assert main(["parse", "--case", str(tri_case)]) == 0
        out = capsys.readouterr().out
        assert out == "tri3: 3 buses (1 stochastic), 3 branches, base 100.0 MVA\n"

    def test_dump_to_stdout(self, tri_case, capsys):
        assert main(["parse", "--case", str(tri_case), "--dump", "nominal"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert "row,col,value" in lines
        data = [l for l in lines if l.startswith("0,")]
        assert len(data) == 3  # one row per line, in MW
        assert float(data[0].split(",")[2]) == pytest.approx(50.0)

    def test_dump_to_file(self, tri_case, tmp_path):
        out = tmp_path / "ptdf.csv"
        assert main(["parse", "--case", str(tri_case), "--dump", "ptdf",
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "row,col,value"
        assert len(lines) == 1 + 3 * 3

    def test_missing_case_exits_2_naming_path(self, tmp_path, capsys):
        missing = tmp_path / "nope.m"
        with pytest.raises(SystemExit) as exc:
            main(["parse", "--case", str(missing)])
        assert exc.value.code == 2
        assert str(missing) in capsys.readouterr().err

    def test_malformed_case_exits_3(self, tmp_path, capsys):
        bad = tmp_path / "bad.m"
        bad.write_text("function mpc = broken\nmpc.baseMVA = 100;\n")
        assert main(["parse", "--case", str(bad)]) == 3
        assert "error:" in capsys.readouterr().err


class TestRank:
    def test_default_run_writes_all_four_tables(self, tri_case, tmp_path, capsys):
        out = tmp_path / "scores.csv"
        assert main(["rank", "--case", str(tri_case), "--n", "40",
                     "--out", str(out)]) == 0
        tables = read_scores_csv(out)
        assert [t.algorithm for t in tables] == list(Algorithm)
        assert all(t.n == 40 and t.n_lines == 3 for t in tables)
        assert f"wrote {out}: 4 table(s), 3 lines, n=40" in capsys.readouterr().out

    def test_algorithm_subset(self, tri_case, tmp_path):
        out = tmp_path / "scores.csv"
        assert main(["rank", "--case", str(tri_case), "--algs", "3,1",
                     "--n", "25", "--out", str(out)]) == 0
        tables = read_scores_csv(out)
        assert {t.algorithm for t in tables} == {Algorithm.RATE, Algorithm.GAUSSIAN}

    def test_samples_round_trip(self, tri_case, tmp_path):
        saved = tmp_path / "samples.csv"
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert main(["rank", "--case", str(tri_case), "--n", "30", "--seed", "5",
                     "--save-samples", str(saved), "--out", str(out1)]) == 0
        assert read_samples_csv(saved).shape == (30, 1)
        assert main(["rank", "--case", str(tri_case), "--samples", str(saved),
                     "--out", str(out2)]) == 0
        first, second = read_scores_csv(out1), read_scores_csv(out2)
        for a, b in zip(first, second):
            assert a.n == b.n == 30
            np.testing.assert_array_equal(a.ranks, b.ranks)
            np.testing.assert_allclose(a.scores, b.scores, atol=1e-12)

    def test_laplace_simulation(self, tri_case, tmp_path):
        out = tmp_path / "scores.csv"
        assert main(["rank", "--case", str(tri_case), "--dist", "laplace",
                     "--n", "20", "--out", str(out)]) == 0
        assert len(read_scores_csv(out)) == 4

    def test_gamma_mult_matches_library_call(self, two_gen_case, tmp_path):
        out = tmp_path / "scores.csv"
        assert main(["rank", "--case", str(two_gen_case), "--algs", "3",
                     "--n", "12", "--seed", "0", "--gamma-mult", "2.0",
                     "--out", str(out)]) == 0
        model = build_dc_model(load_case(two_gen_case))
        injections, _ = default_gaussian_model(model, 0)
        expected = rank_by_gaussian(
            model, injections.sample(12, 0), gamma=2.0 * np.abs(model.nominal_flow)
        )
        table, = read_scores_csv(out)
        np.testing.assert_array_equal(table.scores, expected.scores)
        np.testing.assert_array_equal(table.ranks, expected.ranks)

    def test_deterministic_output_bytes(self, tri_case, tmp_path):
        args = ["rank", "--case", str(tri_case), "--n", "35", "--seed", "11"]
        out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
        assert main(args + ["--out", str(out1)]) == 0
        assert main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_manifest_contents(self, tri_case, tmp_path):
        out = tmp_path / "scores.csv"
        manifest_path = tmp_path / "manifest.json"
        assert main(["rank", "--case", str(tri_case), "--n", "15",
                     "--out", str(out), "--manifest", str(manifest_path)]) == 0
        manifest = json.loads(manifest_path.read_text())
        assert manifest["command"] == "rank"
        assert manifest["case"] == str(tri_case)
        assert manifest["backend"] == BACKEND
        assert manifest["versions"]["numpy"] == np.__version__
        assert manifest["versions"]["linerank"] == __version__
        assert manifest["config"]["resolved_n"] == 15
        assert manifest["config"]["ridge"] == 0.0
        assert manifest["config"]["algs"] == "1,2,3,4"
        # stable serialization: keys sorted, trailing newline
        text = manifest_path.read_text()
        assert text == json.dumps(manifest, indent=2, sort_keys=True) + "\n"


class TestConfigFile:
    def test_config_supplies_defaults(self, tri_case, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# comment line\n\nn = 25\nalgs = 2\n")
        out = tmp_path / "scores.csv"
        assert main(["rank", "--case", str(tri_case), "--config", str(cfg),
                     "--out", str(out)]) == 0
        table, = read_scores_csv(out)
        assert table.algorithm is Algorithm.COUNTING
        assert table.n == 25

    def test_flags_win_over_config(self, tri_case, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("n = 25\n")
        out = tmp_path / "scores.csv"
        assert main(["rank", "--case", str(tri_case), "--config", str(cfg),
                     "--n", "30", "--algs", "2", "--out", str(out)]) == 0
        table, = read_scores_csv(out)
        assert table.n == 30

    def test_dashed_keys_are_normalized(self, tri_case, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("gamma-mult = 2.0\nalgs = 2\nn = 10\n")
        out = tmp_path / "scores.csv"
        assert main(["rank", "--case", str(tri_case), "--config", str(cfg),
                     "--out", str(out)]) == 0

    def test_unknown_key_exits_2(self, tri_case, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("frobnicate = 9\n")
        assert main(["rank", "--case", str(tri_case), "--config", str(cfg)]) == 2
        assert "unknown config keys" in capsys.readouterr().err

    def test_missing_config_exits_2(self, tri_case, tmp_path, capsys):
        assert main(["rank", "--case", str(tri_case),
                     "--config", str(tmp_path / "none.cfg")]) == 2
        assert "file not found" in capsys.readouterr().err

    def test_malformed_line_exits_3(self, tri_case, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("just a bare line\n")
        assert main(["rank", "--case", str(tri_case), "--config", str(cfg)]) == 3
        assert "key=value" in capsys.readouterr().err


class TestRankExitCodes:
    @pytest.mark.parametrize(
        "extra",
        [
            ["--n", "0"],
            ["--n", "seven"],
            ["--seed", "1.5"],
            ["--epsilon", "0"],
            ["--confidence", "2.0"],
            ["--gamma-mult", "0"],
            ["--dist", "cauchy"],
            ["--algs", ","],
            ["--algs", "1,1"],
            ["--algs", "9"],
        ],
    )
    def test_bad_values_exit_2(self, tri_case, tmp_path, capsys, extra):
        code = main(["rank", "--case", str(tri_case),
                     "--out", str(tmp_path / "s.csv")] + extra)
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_missing_samples_file_exits_2(self, tri_case, tmp_path, capsys):
        assert main(["rank", "--case", str(tri_case),
                     "--samples", str(tmp_path / "none.csv")]) == 2
        assert "file not found" in capsys.readouterr().err

    def test_bad_samples_content_exits_3(self, tri_case, tmp_path, capsys):
        bad = tmp_path / "samples.csv"
        bad.write_text("t,p_1\n1,not-a-number\n")
        assert main(["rank", "--case", str(tri_case), "--samples", str(bad),
                     "--out", str(tmp_path / "s.csv")]) == 3

    def test_unrepairable_covariance_exits_4(self, two_gen_case, tmp_path, capsys):
        code = main(["rank", "--case", str(two_gen_case),
                     "--offdiag-variance=-1e12", "--n", "10",
                     "--out", str(tmp_path / "s.csv")])
        assert code == 4
        assert "ridge" in capsys.readouterr().err


class TestGroundTruth:
    def test_analytic_gaussian_default(self, tri_case, tmp_path, capsys):
        out = tmp_path / "truth.csv"
        assert main(["ground-truth", "--case", str(tri_case),
                     "--out", str(out)]) == 0
        truth = read_ground_truth_csv(out)
        assert truth.source == "analytic_gaussian"
        assert truth.lines.shape == (3,)
        assert "source=analytic_gaussian" in capsys.readouterr().out

    def test_laplace_ldp_source(self, tri_case, tmp_path):
        out = tmp_path / "truth.csv"
        assert main(["ground-truth", "--case", str(tri_case),
                     "--source", "laplace_ldp_perfect", "--out", str(out)]) == 0
        assert read_ground_truth_csv(out).source == "laplace_ldp_perfect"

    @pytest.mark.parametrize("dist", ["gaussian", "laplace"])
    def test_monte_carlo_source(self, tri_case, tmp_path, dist):
        out = tmp_path / "truth.csv"
        assert main(["ground-truth", "--case", str(tri_case),
                     "--source", "monte_carlo", "--dist", dist,
                     "--n-total", "400", "--out", str(out)]) == 0
        truth = read_ground_truth_csv(out)
        assert truth.source == "monte_carlo"
        assert np.all((truth.theta >= 0) & (truth.theta <= 1))

    def test_unknown_source_rejected_by_parser(self, tri_case):
        with pytest.raises(SystemExit) as exc:
            main(["ground-truth", "--case", str(tri_case), "--source", "psychic"])
        assert exc.value.code == 2

    def test_manifest_records_ridge_and_source(self, tri_case, tmp_path):
        out = tmp_path / "truth.csv"
        manifest_path = tmp_path / "m.json"
        assert main(["ground-truth", "--case", str(tri_case), "--out", str(out),
                     "--manifest", str(manifest_path)]) == 0
        manifest = json.loads(manifest_path.read_text())
        assert manifest["command"] == "ground-truth"
        assert manifest["config"]["source"] == "analytic_gaussian"
        assert manifest["config"]["ridge"] == 0.0

    def test_gamma_mult_flows_through(self, two_gen_case, tmp_path):
        out_a = tmp_path / "a.csv"
        out_b = tmp_path / "b.csv"
        base = ["ground-truth", "--case", str(two_gen_case)]
        assert main(base + ["--out", str(out_a)]) == 0
        assert main(base + ["--gamma-mult", "1.5", "--out", str(out_b)]) == 0
        a, b = read_ground_truth_csv(out_a), read_ground_truth_csv(out_b)
        assert not np.array_equal(a.theta, b.theta)


class TestExperiment:
    def test_false_selection_run(self, tri_case, tmp_path, capsys):
        out = tmp_path / "fs.csv"
        assert main(["experiment", "--case", str(tri_case), "--algs", "1,2",
                     "--n-grid", "5,20", "--replications", "4",
                     "--pairs", "1:1,1:3", "--workers", "2",
                     "--out", str(out)]) == 0
        rows = read_false_selection_csv(out)
        assert len(rows) == 2 * 2 * 2  # pairs x algorithms x grid
        assert all(0.0 <= r.f_hat <= 1.0 for r in rows)
        assert all(r.f_hat == 0.0 for r in rows if (r.k, r.j) == (1, 3))
        assert all(r.replications == 4 for r in rows)
        assert "false_selection, 4 reps" in capsys.readouterr().out

    def test_rank_intervals_run(self, tri_case, tmp_path):
        out = tmp_path / "ri.csv"
        assert main(["experiment", "--case", str(tri_case),
                     "--kind", "rank_intervals", "--algs", "2,3",
                     "--n-grid", "5,20", "--replications", "4",
                     "--coverage", "0.9", "--out", str(out)]) == 0
        rows = read_rank_intervals_csv(out)
        assert len(rows) == 2 * 2 * 3  # algorithms x grid x lines
        assert all(r.lo <= r.mean_rank <= r.hi for r in rows)

    def test_default_output_name(self, tri_case, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["experiment", "--case", str(tri_case), "--algs", "2",
                     "--n-grid", "5", "--replications", "2"]) == 0
        assert (tmp_path / "false_selection.csv").exists()

    def test_external_truth_file(self, tri_case, tmp_path):
        model = build_dc_model(load_case(tri_case))
        injections, _ = default_gaussian_model(model, 0)
        from linerank.experiments import analytic_gaussian_truth

        truth_path = tmp_path / "truth.csv"
        write_ground_truth_csv(truth_path, analytic_gaussian_truth(model, injections))
        out = tmp_path / "fs.csv"
        manifest_path = tmp_path / "m.json"
        assert main(["experiment", "--case", str(tri_case), "--algs", "3",
                     "--n-grid", "10", "--replications", "2",
                     "--truth", str(truth_path), "--out", str(out),
                     "--manifest", str(manifest_path)]) == 0
        manifest = json.loads(manifest_path.read_text())
        assert manifest["config"]["truth_source_used"] == "analytic_gaussian"

    def test_truth_line_count_mismatch_exits_3(self, tri_case, tmp_path, capsys):
        truth_path = tmp_path / "truth.csv"
        truth_path.write_text(
            "line,theta,rank,source\n1,0.5,1,monte_carlo\n2,0.4,2,monte_carlo\n"
        )
        assert main(["experiment", "--case", str(tri_case), "--algs", "2",
                     "--n-grid", "5", "--replications", "2",
                     "--truth", str(truth_path),
                     "--out", str(tmp_path / "fs.csv")]) == 3
        assert "lines" in capsys.readouterr().err

    def test_laplace_experiment(self, tri_case, tmp_path):
        out = tmp_path / "fs.csv"
        assert main(["experiment", "--case", str(tri_case), "--dist", "laplace",
                     "--algs", "4", "--n-grid", "10", "--replications", "2",
                     "--out", str(out)]) == 0
        rows = read_false_selection_csv(out)
        assert {r.algorithm for r in rows} == {Algorithm.LAPLACE}

    def test_truth_dist_mismatch_exits_2(self, tri_case, tmp_path, capsys):
        assert main(["experiment", "--case", str(tri_case), "--dist", "laplace",
                     "--truth-source", "analytic_gaussian", "--algs", "4",
                     "--n-grid", "5", "--replications", "2",
                     "--out", str(tmp_path / "fs.csv")]) == 2
        assert "gaussian" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "extra",
        [
            ["--pairs", "2:1"],
            ["--pairs", "1:9"],
            ["--pairs", "1-2"],
            ["--pairs", " , "],
            ["--coverage", "1.5", "--kind", "rank_intervals"],
            ["--replications", "0"],
            ["--workers", "0"],
            ["--n-grid", "0,5"],
            ["--n-grid", "a,b"],
        ],
    )
    def test_bad_values_exit_2(self, tri_case, tmp_path, capsys, extra):
        code = main(["experiment", "--case", str(tri_case), "--algs", "2",
                     "--n-grid", "5", "--replications", "2",
                     "--out", str(tmp_path / "x.csv")] + extra)
        assert code == 2
        assert "error:" in capsys.readouterr().err

    def test_unknown_kind_rejected_by_parser(self, tri_case):
        with pytest.raises(SystemExit) as exc:
            main(["experiment", "--case", str(tri_case), "--kind", "sorcery"])
        assert exc.value.code == 2


class TestTopLevel:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert capsys.readouterr().out.strip() == f"linerank {__version__}"

    def test_subcommand_required(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2

    def test_console_script_version(self):
        proc = subprocess.run(
            ["linerank", "--version"], capture_output=True, text=True
        )
        assert proc.returncode == 0
        assert proc.stdout.strip() == f"linerank {__version__}"

    def test_console_script_end_to_end(self, tri_case, tmp_path):
        out = tmp_path / "scores.csv"
        proc = subprocess.run(
            ["linerank", "rank", "--case", str(tri_case), "--algs", "1",
             "--n", "10", "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        table, = read_scores_csv(out)
        assert table.algorithm is Algorithm.RATE

    def test_module_entry_matches_script(self, tri_case, tmp_path):
        out = tmp_path / "scores.csv"
        proc = subprocess.run(
            [sys.executable, "-c",
             "import sys; from linerank.cli import main; sys.exit(main(sys.argv[1:]))",
             "rank", "--case", str(tri_case), "--algs", "2", "--n", "10",
             "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
