"""End-to-end tests of the command-line surface and file formats."""

import json

import numpy as np
import pytest

from ppmproj import io as pio
from ppmproj.bench import BENCH_HEADER, run_bench, make_instance
from ppmproj.cli import main
from ppmproj.oracle import oracle_project


@pytest.fixture
def chain_files(tmp_path):
    tree = tmp_path / "chain.tree"
    matrix = tmp_path / "chain.csv"
    tree.write_text("0 1\n")
    matrix.write_text("0.5\n0.7\n")
    return tree, matrix


class TestProjectCommand:
    def test_chain_hand_trace(self, chain_files, tmp_path, capsys):
        tree, matrix = chain_files
        out = tmp_path / "result.json"
        code = main(["project", str(tree), str(matrix), "-o", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["total_cost"] == pytest.approx(0.5, abs=1e-12)
        assert payload["cost_per_column"] == pytest.approx([0.5], abs=1e-12)
        assert payload["t_star"] == pytest.approx([-0.5], abs=1e-12)
        m = np.array(payload["m_star"])
        assert m[:, 0] == pytest.approx([0.3, 0.7], abs=1e-12)

    def test_single_node(self, tmp_path):
        tree = tmp_path / "one.tree"
        matrix = tmp_path / "one.csv"
        tree.write_text("0\n")
        matrix.write_text("0.4\n")
        out = tmp_path / "res.json"
        assert main(["project", str(tree), str(matrix), "-o", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["m_star"] == [[1.0]]
        assert payload["total_cost"] == pytest.approx(0.6, abs=1e-12)

    def test_malformed_parent_exits_2(self, tmp_path, capsys):
        tree = tmp_path / "bad.tree"
        matrix = tmp_path / "m.csv"
        tree.write_text("0 3\n")
        matrix.write_text("0.5\n0.7\n")
        assert main(["project", str(tree), str(matrix)]) == 2
        assert "outside" in capsys.readouterr().err

    def test_non_numeric_matrix_exits_2_with_position(self, tmp_path, capsys):
        tree = tmp_path / "t.tree"
        matrix = tmp_path / "m.csv"
        tree.write_text("0 1\n")
        matrix.write_text("0.5\nabc\n")
        assert main(["project", str(tree), str(matrix)]) == 2
        err = capsys.readouterr().err
        assert ":2" in err and "abc" in err

    def test_shape_mismatch_exits_2(self, tmp_path):
        tree = tmp_path / "t.tree"
        matrix = tmp_path / "m.csv"
        tree.write_text("0 1\n")
        matrix.write_text("0.5\n0.7\n0.1\n")
        assert main(["project", str(tree), str(matrix)]) == 2

    def test_out_of_range_warning(self, chain_files, tmp_path, capsys):
        tree, matrix = chain_files
        matrix.write_text("1.5\n0.7\n")
        out = tmp_path / "r.json"
        assert main(["project", str(tree), str(matrix), "-o", str(out)]) == 0
        assert "outside [0, 1]" in capsys.readouterr().err

    def test_degeneracy_maps_to_exit_3(self, chain_files, monkeypatch, capsys):
        from ppmproj.projection import DegeneracyError
        import ppmproj.cli as cli

        def boom(tree, col):
            raise DegeneracyError("forced")

        monkeypatch.setattr(cli, "project_incremental", boom)
        tree, matrix = chain_files
        assert main(["project", str(tree), str(matrix)]) == 3


class TestSearchCommand:
    def test_noiseless_q5(self, tmp_path):
        gen = main(["gen", "--q", "5", "--p", "2", "--seed", "3", "--feasible",
                    "--out-tree", str(tmp_path / "t.tree"),
                    "--out-matrix", str(tmp_path / "m.csv")])
        assert gen == 0
        out = tmp_path / "report.json"
        assert main(["search", str(tmp_path / "m.csv"), "-o", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert payload["trees_evaluated"] == 125
        assert payload["ranked"][0]["cost"] <= 1e-9

    def test_k_entries(self, tmp_path):
        matrix = tmp_path / "m.csv"
        rng = np.random.default_rng(0)
        pio.save_matrix(rng.standard_normal((5, 1)), matrix)
        out = tmp_path / "report.json"
        assert main(["search", str(matrix), "--k", "5", "-o", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert len(payload["ranked"]) == 5
        assert "m_star" not in payload["ranked"][0]

    def test_include_solutions_flag(self, tmp_path):
        matrix = tmp_path / "m.csv"
        pio.save_matrix(np.array([[0.9], [0.5], [0.2]]), matrix)
        out = tmp_path / "report.json"
        assert main(["search", str(matrix), "--include-solutions",
                     "-o", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert "m_star" in payload["ranked"][0]

    def test_q12_refused_without_force(self, tmp_path, capsys):
        matrix = tmp_path / "m.csv"
        pio.save_matrix(np.zeros((12, 1)), matrix)
        assert main(["search", str(matrix)]) == 2
        err = capsys.readouterr().err
        assert "12^10" in err
        assert str(12 ** 10) in err


class TestGenCommand:
    def test_q1(self, tmp_path):
        t, m = tmp_path / "t.tree", tmp_path / "m.csv"
        assert main(["gen", "--q", "1", "--out-tree", str(t),
                     "--out-matrix", str(m)]) == 0
        assert t.read_text().strip() == "0"
        assert pio.load_matrix(m).shape == (1, 1)

    def test_seeded_runs_identical(self, tmp_path):
        files = []
        for tag in ("a", "b"):
            t, m = tmp_path / f"t{tag}.tree", tmp_path / f"m{tag}.csv"
            assert main(["gen", "--q", "30", "--p", "2", "--seed", "7",
                         "--out-tree", str(t), "--out-matrix", str(m)]) == 0
            files.append((t.read_bytes(), m.read_bytes()))
        assert files[0] == files[1]

    def test_feasible_projects_to_zero_cost(self, tmp_path):
        t, m = tmp_path / "t.tree", tmp_path / "m.csv"
        assert main(["gen", "--q", "9", "--p", "2", "--seed", "1",
                     "--feasible", "--out-tree", str(t),
                     "--out-matrix", str(m)]) == 0
        from ppmproj import project_matrix
        tree = pio.load_tree(t)
        _, total = project_matrix(tree, pio.load_matrix(m))
        assert total <= 1e-9


class TestPruferCommand:
    def test_round_trip(self, tmp_path, capsys):
        assert main(["prufer", "decode", "1 1", "--q", "4"]) == 0
        text = capsys.readouterr().out.strip()
        assert text == "0 1 1 1"
        tree_file = tmp_path / "t.tree"
        tree_file.write_text(text + "\n")
        assert main(["prufer", "encode", str(tree_file)]) == 0
        assert capsys.readouterr().out.strip() == "1 1"

    def test_two_node_decode(self, capsys):
        assert main(["prufer", "decode", "-", "--q", "2"]) == 0
        assert capsys.readouterr().out.strip() == "0 1"

    def test_bad_code_exits_2(self, capsys):
        assert main(["prufer", "decode", "9 1", "--q", "4"]) == 2


class TestMatrixFormat:
    def test_seventeen_digit_round_trip(self, tmp_path):
        path = tmp_path / "m.csv"
        mat = np.array([[np.pi, 1.0 / 3.0], [1e-17, -2.5000000000000004]])
        pio.save_matrix(mat, path)
        back = pio.load_matrix(path)
        assert np.array_equal(back, mat)

    def test_tree_round_trip(self, tmp_path):
        path = tmp_path / "t.tree"
        from ppmproj import decode_prufer
        tree = decode_prufer((3, 1, 4, 4), 6)
        pio.save_tree(tree, path)
        assert pio.load_tree(path) == tree

    def test_ragged_rows_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("1,2\n3\n")
        with pytest.raises(pio.ParseError, match="expected 2"):
            pio.load_matrix(path)

    def test_comment_header_skipped(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("# samples s1,s2\n0.1,0.2\n0.3,0.4\n")
        assert pio.load_matrix(path).shape == (2, 2)


class TestBench:
    def test_exact_rows_match_oracle(self, tmp_path):
        rows, summary = run_bench([10], ["exact"], trials=3, seed=5)
        assert len(rows) == 3
        assert BENCH_HEADER == "size,solver,trial,seed,time_sec,error,converged"
        for row in rows:
            seed, tree, fhat = make_instance(5, 10, row.trial)
            assert seed == row.seed
            from ppmproj import project_incremental
            res = project_incremental(tree, fhat[:, 0])
            orc = oracle_project(tree, fhat[:, 0])
            assert res.cost == pytest.approx(orc.cost, abs=1e-9)

    def test_csv_deterministic_modulo_time(self, tmp_path):
        import io as _io
        outputs = []
        for _ in range(2):
            buf = _io.StringIO()
            run_bench([8], ["exact", "pgd-primal"], trials=2, seed=9, out=buf)
            lines = buf.getvalue().strip().splitlines()
            scrubbed = []
            for line in lines[1:]:
                parts = line.split(",")
                parts[4] = "T"
                scrubbed.append(",".join(parts))
            outputs.append((lines[0], scrubbed))
        assert outputs[0] == outputs[1]
        assert outputs[0][0] == BENCH_HEADER

    def test_cli_bench_subcommand(self, tmp_path):
        out = tmp_path / "bench.csv"
        assert main(["bench", "--sizes", "6", "--solvers", "exact",
                     "--trials", "2", "--seed", "1", "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == BENCH_HEADER
        assert len(lines) == 3

    def test_unknown_solver_exits_2(self, capsys):
        assert main(["bench", "--sizes", "6", "--solvers", "magic",
                     "--trials", "1"]) == 2

    def test_exact_mean_time_subquadratic(self):
        rows, summary = run_bench([100, 1000], ["exact"], trials=3, seed=2)
        t_small = summary[(100, "exact")]
        t_large = summary[(1000, "exact")]
        slope = np.log(t_large / t_small) / np.log(10.0)
        assert slope < 2.0
