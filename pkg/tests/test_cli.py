"""End-to-end tests for the command line front end.

Every test drives cli() in process with an argv list and asserts on the
exit code, the files written, and the rendered stdout. A couple of tests
shell out to confirm the installed entry points work.
"""

import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from detangle.cli import build_parser, cli


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Shared directory tree populated once by real CLI invocations.

    Layout:
      a/          table1_a, 400 rows
      b/          table1_b, 80 rows
      ideal/ rotated/ code/   4x4 two-factor sets, 160 rows each
      a_metrics.json          metrics report for a/
      <model>_metrics.json, <model>_cg.json   per 4x4 model
    """
    root = tmp_path_factory.mktemp("cli")
    assert cli(["synth", "--kind", "table1_a", "--copies", "50",
                "--seed", "3", "--out", str(root / "a")]) == 0
    assert cli(["synth", "--kind", "table1_b", "--copies", "1",
                "--seed", "3", "--out", str(root / "b")]) == 0
    grid = "size:4,shape:4"
    assert cli(["synth", "--kind", "ideal", "--factors", grid, "--copies", "10",
                "--sigma", "0.05", "--seed", "11", "--out", str(root / "ideal")]) == 0
    assert cli(["synth", "--kind", "rotated", "--factors", grid, "--copies", "10",
                "--sigma", "0.05", "--angle", "0.6", "--seed", "14",
                "--out", str(root / "rotated")]) == 0
    assert cli(["synth", "--kind", "joint_code", "--factors", grid, "--copies", "10",
                "--seed", "18", "--out", str(root / "code")]) == 0

    assert cli(["metrics", "--data", str(root / "a"), "--seed", "7",
                "--out", str(root / "a_metrics.json")]) == 0
    # 160-row grids need a bigger training budget than the 3200-row default
    budget = ["--epochs", "150", "--learning-rate", "0.005"]
    for model in ("ideal", "rotated", "code"):
        assert cli(["metrics", "--data", str(root / model), "--seed", "7",
                    "--subset", "size,shape", "--aggregate", "product",
                    "--out", str(root / f"{model}_metrics.json")] + budget) == 0
        assert cli(["cg", "--data", str(root / model), "--pairs", "size:2,shape:1",
                    "--probe", "mlp", "--seed", "17",
                    "--out", str(root / f"{model}_cg.json")] + budget) == 0
    return root


class TestSynth:
    def test_writes_csv_and_schema(self, workspace):
        assert (workspace / "a" / "data.csv").is_file()
        assert (workspace / "a" / "schema.json").is_file()
        header = (workspace / "a" / "data.csv").read_text().splitlines()[0]
        assert header == "z0,z1,g0,g1"
        schema = read_json(workspace / "a" / "schema.json")
        assert [f["name"] for f in schema["factors"]] == ["colour", "shape"]

    def test_row_count_and_summary_line(self, tmp_path, capsys):
        assert cli(["synth", "--kind", "table1_a", "--copies", "50",
                    "--seed", "3", "--out", str(tmp_path / "set")]) == 0
        out = capsys.readouterr().out
        assert "wrote 400 rows (2 neurons, 2 factors)" in out
        n_rows = len((tmp_path / "set" / "data.csv").read_text().splitlines()) - 1
        assert n_rows == 400

    def test_exact_mode_is_deterministic_across_seeds(self, tmp_path):
        for seed, name in (("1", "s1"), ("2", "s2")):
            assert cli(["synth", "--kind", "table1_a", "--copies", "2",
                        "--seed", seed, "--out", str(tmp_path / name)]) == 0
        a = (tmp_path / "s1" / "data.csv").read_text()
        b = (tmp_path / "s2" / "data.csv").read_text()
        assert a == b

    def test_sampled_mode_depends_on_seed(self, tmp_path):
        for seed, name in (("1", "s1"), ("1", "s1b"), ("2", "s2")):
            assert cli(["synth", "--kind", "table1_a", "--sampled", "--copies", "30",
                        "--seed", seed, "--out", str(tmp_path / name)]) == 0
        same = (tmp_path / "s1" / "data.csv").read_text()
        again = (tmp_path / "s1b" / "data.csv").read_text()
        other = (tmp_path / "s2" / "data.csv").read_text()
        assert same == again
        assert same != other

    def test_custom_factor_names_reach_schema(self, tmp_path):
        assert cli(["synth", "--kind", "ideal", "--factors", "hue:3,size:5",
                    "--copies", "1", "--out", str(tmp_path / "set")]) == 0
        schema = read_json(tmp_path / "set" / "schema.json")
        assert [(f["name"], f["cardinality"]) for f in schema["factors"]] == [
            ("hue", 3), ("size", 5)]

    def test_bad_factor_token_exits_1(self, tmp_path, capsys):
        assert cli(["synth", "--kind", "ideal", "--factors", "hue-3",
                    "--out", str(tmp_path / "set")]) == 1
        assert "name:cardinality" in capsys.readouterr().err

    def test_unknown_kind_exits_1(self, tmp_path):
        assert cli(["synth", "--kind", "nope", "--out", str(tmp_path / "set")]) == 1

    def test_missing_required_flag_exits_1(self):
        assert cli(["synth", "--kind", "table1_a"]) == 1


class TestMetrics:
    def test_worked_example_scores(self, workspace):
        payload = read_json(workspace / "a_metrics.json")
        assert payload["schema_version"] == 1
        assert payload["factor_names"] == ["colour", "shape"]
        assert payload["n_rows"] == 400
        assert payload["snc"]["per_factor"]["colour"] == pytest.approx(0.5, abs=1e-12)
        assert payload["snc"]["per_factor"]["shape"] == 0.0
        assert payload["snc"]["mean"] == pytest.approx(0.25, abs=1e-12)
        assert payload["nk"]["per_factor"]["shape"] == 0.0

    def test_stdout_table(self, workspace, capsys):
        assert cli(["metrics", "--data", str(workspace / "a"), "--seed", "7"]) == 0
        out = capsys.readouterr().out
        lines = out.splitlines()
        assert lines[0].split() == ["metric", "colour", "shape", "mean"]
        assert lines[1].startswith("SNC")
        assert any(line.startswith("NK") for line in lines)

    def test_subset_aggregate_lands_in_payload(self, workspace):
        payload = read_json(workspace / "ideal_metrics.json")
        agg = payload["aggregates"]
        assert agg["subset"] == ["size", "shape"]
        assert agg["mode"] == "product"
        expect = (payload["snc"]["per_factor"]["size"]
                  * payload["snc"]["per_factor"]["shape"])
        assert agg["values"]["snc"] == pytest.approx(expect, abs=1e-12)

    def test_same_seed_reproduces_payload(self, workspace, tmp_path):
        for name in ("r1.json", "r2.json"):
            assert cli(["metrics", "--data", str(workspace / "a"), "--seed", "7",
                        "--out", str(tmp_path / name)]) == 0
        assert read_json(tmp_path / "r1.json") == read_json(tmp_path / "r2.json")

    def test_csv_file_plus_sidecar_schema(self, workspace, tmp_path):
        assert cli(["metrics", "--data", str(workspace / "a" / "data.csv"),
                    "--schema", str(workspace / "a" / "schema.json"),
                    "--seed", "7", "--out", str(tmp_path / "r.json")]) == 0
        assert read_json(tmp_path / "r.json") == read_json(workspace / "a_metrics.json")

    def test_missing_data_exits_2(self, tmp_path, capsys):
        assert cli(["metrics", "--data", str(tmp_path / "nowhere")]) == 2
        assert "error:" in capsys.readouterr().err

    def test_malformed_csv_exits_1(self, tmp_path, workspace):
        shutil.copy(workspace / "a" / "schema.json", tmp_path / "schema.json")
        (tmp_path / "data.csv").write_text("z0,z1,g0,g1\n0.1,oops,0,1\n")
        assert cli(["metrics", "--data", str(tmp_path)]) == 1

    def test_empty_subset_exits_1(self, workspace):
        assert cli(["metrics", "--data", str(workspace / "a"), "--subset", ","]) == 1


class TestAlign:
    def test_greedy_doubles_up_on_strongest_neuron(self, workspace, tmp_path):
        out = tmp_path / "g.json"
        assert cli(["align", "--data", str(workspace / "b"), "--align", "greedy",
                    "--out", str(out)]) == 0
        payload = read_json(out)
        assert payload["alignment"]["mode"] == "greedy"
        assert payload["alignment"]["assignment"] == [0, 0]
        assert payload["alignment"]["degenerate"] is False
        bits = np.asarray(payload["importance"]["bits"])
        assert payload["alignment"]["objective_bits"] == pytest.approx(
            bits[0, 0] + bits[1, 0], abs=1e-12)

    def test_injective_forces_distinct_neurons(self, workspace, tmp_path):
        out = tmp_path / "i.json"
        assert cli(["align", "--data", str(workspace / "b"), "--out", str(out)]) == 0
        payload = read_json(out)
        assert payload["alignment"]["mode"] == "injective"
        assert payload["alignment"]["assignment"] == [0, 1]
        assert payload["alignment"]["degenerate"] is False
        bits = np.asarray(payload["importance"]["bits"])
        expect = bits[0, 0] + bits[1, 1]
        assert payload["alignment"]["objective_bits"] == pytest.approx(expect, abs=1e-12)

    def test_diagram_exports(self, workspace, tmp_path, capsys):
        svg = tmp_path / "h.svg"
        txt = tmp_path / "h.txt"
        assert cli(["align", "--data", str(workspace / "b"),
                    "--svg", str(svg), "--text", str(txt)]) == 0
        assert "<svg" in svg.read_text()
        stdout = capsys.readouterr().out
        assert txt.read_text() == stdout
        assert "colour" in stdout


class TestCg:
    def test_single_run_payload(self, workspace):
        payload = read_json(workspace / "ideal_cg.json")
        assert payload["pair"] == {"factor_a": "size", "value_a": 2,
                                   "factor_b": "shape", "value_b": 1}
        assert payload["probe_kind"] == "mlp"
        assert payload["n_test"] == 10
        assert payload["n_train"] == 150
        assert payload["audit"]["clean"] is True
        assert payload["audit"]["leaked_rows"] == 0
        assert payload["control"] is not None

    def test_ideal_beats_joint_code(self, workspace):
        ideal = read_json(workspace / "ideal_cg.json")
        code = read_json(workspace / "code_cg.json")
        assert ideal["joint_both"]["adjusted"] > 0.9
        assert code["joint_both"]["adjusted"] < 0.2

    def test_no_control_flag(self, workspace, tmp_path, capsys):
        out = tmp_path / "cg.json"
        assert cli(["cg", "--data", str(workspace / "ideal"),
                    "--pairs", "size:2,shape:1", "--probe", "linear",
                    "--seed", "17", "--no-control", "--out", str(out)]) == 0
        assert read_json(out)["control"] is None
        stdout = capsys.readouterr().out
        assert "excluded pair: size=2, shape=1" in stdout
        assert "cg (linear)" in stdout
        assert "random split" not in stdout

    def test_probe_both_builds_a_suite(self, workspace, tmp_path):
        out = tmp_path / "suite.json"
        assert cli(["cg", "--data", str(workspace / "ideal"),
                    "--pairs", "size:2,shape:1", "--probe", "both",
                    "--seed", "17", "--out", str(out)]) == 0
        payload = read_json(out)
        assert [run["probe_kind"] for run in payload["runs"]] == ["linear", "mlp"]
        assert set(payload["averages"]) == {"linear", "mlp"}

    def test_multiple_pairs_build_a_suite(self, workspace, tmp_path, capsys):
        out = tmp_path / "suite.json"
        assert cli(["cg", "--data", str(workspace / "ideal"),
                    "--pairs", "size:0,shape:1;size:1,shape:2", "--probe", "linear",
                    "--seed", "17", "--out", str(out)]) == 0
        payload = read_json(out)
        assert len(payload["runs"]) == 2
        stdout = capsys.readouterr().out
        assert stdout.splitlines()[0].startswith("setting")
        assert "cg (linear)" in stdout

    def test_presplit_matches_internal_split(self, workspace, tmp_path):
        from detangle.dataset import (
            SplitSpec,
            load_representation_set,
            split_indices,
            write_representation_set,
        )

        rep = load_representation_set(workspace / "ideal" / "data.csv",
                                      workspace / "ideal" / "schema.json")
        spec = SplitSpec(kind="cg_exclusion", factor_a="size", value_a=2,
                         factor_b="shape", value_b=1)
        train_idx, test_idx = split_indices(rep, spec)
        for name, idx in (("train", train_idx), ("test", test_idx)):
            d = tmp_path / name
            d.mkdir()
            write_representation_set(rep.subset(idx), d / "data.csv", d / "schema.json")
        out = tmp_path / "pre.json"
        assert cli(["cg", "--train-data", str(tmp_path / "train"),
                    "--test-data", str(tmp_path / "test"),
                    "--pairs", "size:2,shape:1", "--probe", "mlp",
                    "--seed", "17", "--epochs", "150", "--learning-rate", "0.005",
                    "--out", str(out)]) == 0
        pre = read_json(out)
        ref = read_json(workspace / "ideal_cg.json")
        assert pre["joint_both"] == ref["joint_both"]
        assert pre["per_factor"] == ref["per_factor"]
        assert pre["audit"]["leaked_rows"] is None
        assert pre["audit"]["clean"] is True

    @pytest.mark.parametrize("argv, fragment", [
        (["--train-data", "x", "--pairs", "a:0,b:0"],
         "both --train-data and --test-data"),
        (["--data", "x", "--train-data", "y", "--test-data", "z",
          "--pairs", "a:0,b:0"], "conflicts"),
        (["--train-data", "y", "--test-data", "z",
          "--pairs", "a:0,b:0;a:1,b:1"], "exactly one excluded pair"),
    ])
    def test_external_mode_misuse_exits_1(self, argv, fragment, capsys):
        assert cli(["cg"] + argv) == 1
        assert fragment in capsys.readouterr().err

    @pytest.mark.parametrize("pairs", ["size:2", "size:2,shape:x", "size,shape",
                                       "size:2,shape:1,extra:0", ";"])
    def test_bad_pair_syntax_exits_1(self, workspace, pairs):
        assert cli(["cg", "--data", str(workspace / "ideal"), "--pairs", pairs]) == 1

    def test_unknown_factor_exits_1(self, workspace, capsys):
        assert cli(["cg", "--data", str(workspace / "ideal"),
                    "--pairs", "hue:0,shape:1"]) == 1
        assert "hue" in capsys.readouterr().err

    def test_invalid_train_config_exits_1(self, workspace, capsys):
        assert cli(["cg", "--data", str(workspace / "ideal"),
                    "--pairs", "size:2,shape:1", "--epochs", "0"]) == 1
        assert "epochs" in capsys.readouterr().err


class TestCorrelate:
    def test_end_to_end_from_files(self, workspace, tmp_path, capsys):
        metric_paths = ",".join(
            str(workspace / f"{m}_metrics.json") for m in ("ideal", "rotated", "code"))
        cg_paths = ",".join(
            str(workspace / f"{m}_cg.json") for m in ("ideal", "rotated", "code"))
        out = tmp_path / "corr.json"
        assert cli(["correlate", "--metrics", metric_paths, "--cg", cg_paths,
                    "--subset", "size,shape", "--out", str(out)]) == 0
        payload = read_json(out)
        assert payload["n_models"] == 3
        assert payload["subset"] == ["size", "shape"]
        assert set(payload["per_metric"]) == {"snc", "nk", "mig", "sap"}
        for block in payload["per_metric"].values():
            assert len(block["values"]) == 3
            assert -1.0 <= block["correlation"]["r"] <= 1.0
        # joint_code tanks generalization and the product-of-SNC tracks it
        assert payload["per_metric"]["snc"]["correlation"]["r"] > 0.5
        stdout = capsys.readouterr().out
        assert "models: 3" in stdout
        assert "snc" in stdout

    def test_column_selection(self, workspace, capsys):
        models = ("ideal", "rotated", "code")
        assert cli(["correlate",
                    "--metrics", ",".join(
                        str(workspace / f"{m}_metrics.json") for m in models),
                    "--cg", ",".join(str(workspace / f"{m}_cg.json") for m in models),
                    "--subset", "size,shape", "--columns", "snc"]) == 0
        out = capsys.readouterr().out
        assert "snc" in out
        assert "mig" not in out

    def test_length_mismatch_exits_1(self, workspace, capsys):
        assert cli(["correlate",
                    "--metrics", str(workspace / "ideal_metrics.json"),
                    "--cg", str(workspace / "ideal_cg.json") + ","
                    + str(workspace / "code_cg.json"),
                    "--subset", "size,shape"]) == 1
        assert "1 metric payloads but 2" in capsys.readouterr().err

    def test_missing_file_exits_2(self, workspace, tmp_path):
        assert cli(["correlate", "--metrics", str(tmp_path / "gone.json"),
                    "--cg", str(workspace / "ideal_cg.json"),
                    "--subset", "size,shape"]) == 2

    def test_non_object_json_exits_2(self, workspace, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("[1, 2, 3]")
        assert cli(["correlate", "--metrics", str(bad),
                    "--cg", str(workspace / "ideal_cg.json"),
                    "--subset", "size,shape"]) == 2


class TestReport:
    def test_renders_metrics_payload(self, workspace, capsys):
        assert cli(["report", "--in", str(workspace / "a_metrics.json")]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0].split() == ["metric", "colour", "shape", "mean"]

    def test_renders_cg_payload(self, workspace, capsys):
        assert cli(["report", "--in", str(workspace / "ideal_cg.json")]) == 0
        assert "excluded pair: size=2, shape=1" in capsys.readouterr().out

    def test_renders_correlation_payload(self, workspace, tmp_path, capsys):
        models = ("ideal", "rotated", "code")
        out = tmp_path / "corr.json"
        assert cli(["correlate",
                    "--metrics", ",".join(
                        str(workspace / f"{m}_metrics.json") for m in models),
                    "--cg", ",".join(str(workspace / f"{m}_cg.json") for m in models),
                    "--subset", "size,shape", "--out", str(out)]) == 0
        capsys.readouterr()
        assert cli(["report", "--in", str(out)]) == 0
        assert "models: 3" in capsys.readouterr().out

    def test_renders_alignment_payload_and_writes_out(self, workspace, tmp_path, capsys):
        align_json = tmp_path / "align.json"
        assert cli(["align", "--data", str(workspace / "b"),
                    "--out", str(align_json)]) == 0
        capsys.readouterr()
        rendered = tmp_path / "align.txt"
        assert cli(["report", "--in", str(align_json), "--out", str(rendered)]) == 0
        stdout = capsys.readouterr().out
        assert rendered.read_text() == stdout
        assert "colour" in stdout

    def test_unrecognized_payload_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "odd.json"
        bad.write_text(json.dumps({"surprise": 1}))
        assert cli(["report", "--in", str(bad)]) == 1
        assert "unrecognized payload" in capsys.readouterr().err

    def test_invalid_json_exits_2(self, tmp_path):
        bad = tmp_path / "broken.json"
        bad.write_text("{not json")
        assert cli(["report", "--in", str(bad)]) == 2

    def test_missing_file_exits_2(self, tmp_path):
        assert cli(["report", "--in", str(tmp_path / "gone.json")]) == 2


class TestParserBasics:
    def test_no_command_exits_1(self, capsys):
        assert cli([]) == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_command_exits_1(self):
        assert cli(["frobnicate"]) == 1

    def test_unknown_flag_exits_1(self, capsys):
        assert cli(["synth", "--kind", "table1_a", "--out", "x", "--bogus"]) == 1
        assert "error:" in capsys.readouterr().err

    def test_help_exits_0(self, capsys):
        assert cli(["--help"]) == 0
        out = capsys.readouterr().out
        for name in ("synth", "metrics", "align", "cg", "correlate", "report"):
            assert name in out

    def test_subcommand_help_exits_0(self, capsys):
        assert cli(["cg", "--help"]) == 0
        assert "--pairs" in capsys.readouterr().out

    def test_parser_lists_all_subcommands(self):
        sub = build_parser()._subparsers._group_actions[0]
        assert set(sub.choices) == {"synth", "metrics", "align", "cg",
                                    "correlate", "report"}

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "detangle.cli", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "synth" in proc.stdout

    def test_console_script_installed(self):
        exe = shutil.which("detangle")
        assert exe is not None
        proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
        assert proc.returncode == 0
