"""Command-line interface: subcommands, exit codes, and output formats."""

import os
import re
import subprocess
import sys

import pytest

from ahpp import QueryParams, estimate_lambda, load_graph
from ahpp.cli import main

LINE_RE = re.compile(r"^\d+\tu\d+\t\d\.\d{12}e[+-]\d+$")


def run_cli(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# -- query -----------------------------------------------------------------------------


def test_query_ranks_and_formats(example_files, capsys):
    edges, attrs = example_files
    code, out, _ = run_cli(
        ["query", "--edges", edges, "--attrs", attrs, "--source", "u1"], capsys
    )
    assert code == 0
    lines = out.splitlines()
    assert len(lines) == 4  # k=20 capped at |U|
    assert all(LINE_RE.match(line) for line in lines)
    ids = [line.split("\t")[1] for line in lines]
    assert ids[0] == "u1"
    assert ids.index("u2") < ids.index("u3")


def test_query_beta_shifts_ranking(example_files, capsys):
    # u1 and u2 share an attribute, so the blend promotes u2 past u4
    edges, attrs = example_files
    _, blended, _ = run_cli(
        ["query", "--edges", edges, "--attrs", attrs, "--source", "u1"], capsys
    )
    _, structural, _ = run_cli(
        ["query", "--edges", edges, "--attrs", attrs, "--source", "u1", "--beta", "0"],
        capsys,
    )
    second = lambda out: out.splitlines()[1].split("\t")[1]
    assert second(blended) == "u2"
    assert second(structural) == "u4"


def test_query_solvers_agree_on_ranking(example_files, capsys):
    edges, attrs = example_files
    base = ["--edges", edges, "--attrs", attrs, "--source", "u1", "--epsilon", "1e-6"]
    _, out_asrp, _ = run_cli(["query", *base], capsys)
    _, out_pi, _ = run_cli(["query", *base, "--algo", "pi", "--T", "150"], capsys)
    ranks = lambda out: [line.split("\t")[:2] for line in out.splitlines()]
    assert ranks(out_asrp) == ranks(out_pi)


def test_query_mc_seed_determinism(example_files, capsys):
    edges, attrs = example_files
    argv = [
        "query", "--edges", edges, "--attrs", attrs, "--source", "u1",
        "--algo", "mc", "--omega", "20000", "--seed", "42",
    ]
    _, first, _ = run_cli(argv, capsys)
    _, second, _ = run_cli(argv, capsys)
    assert first == second
    _, other, _ = run_cli(argv[:-1] + ["43"], capsys)
    assert first != other


def test_query_out_file(example_files, tmp_path, capsys):
    edges, attrs = example_files
    out_path = tmp_path / "scores.tsv"
    code, out, _ = run_cli(
        ["query", "--edges", edges, "--attrs", attrs, "--source", "u1",
         "--out", str(out_path)],
        capsys,
    )
    assert code == 0 and out == ""
    lines = out_path.read_text().splitlines()
    assert len(lines) == 4 and LINE_RE.match(lines[0])


# -- exit codes ------------------------------------------------------------------------


def test_unknown_source_exits_2(example_files, capsys):
    edges, attrs = example_files
    code, _, err = run_cli(
        ["query", "--edges", edges, "--attrs", attrs, "--source", "zzz"], capsys
    )
    assert code == 2 and "error:" in err


def test_missing_file_exits_1(capsys):
    code, _, err = run_cli(
        ["query", "--edges", "/nonexistent/edges.tsv", "--source", "u1"], capsys
    )
    assert code == 1 and "error:" in err


def test_malformed_file_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("u1\tv1\tnot_a_number\n")
    code, _, err = run_cli(["query", "--edges", str(bad), "--source", "u1"], capsys)
    assert code == 1 and ":1:" in err


def test_bad_alpha_rejected_before_load(capsys):
    # parameter validation must not depend on the graph file existing
    code, _, err = run_cli(
        ["query", "--edges", "/nonexistent.tsv", "--source", "u1", "--alpha", "1.5"],
        capsys,
    )
    assert code == 2 and "alpha" in err


def test_f1_requires_clusters(example_files, capsys):
    edges, attrs = example_files
    code, _, err = run_cli(
        ["eval", "--edges", edges, "--attrs", attrs, "--mode", "f1"], capsys
    )
    assert code == 1 and "--clusters" in err


def test_argparse_rejections_exit_2(example_files, capsys):
    edges, _ = example_files
    with pytest.raises(SystemExit) as ei:
        main(["query", "--edges", edges, "--source", "u1", "--bogus"])
    assert ei.value.code == 2
    capsys.readouterr()
    with pytest.raises(SystemExit) as ei:
        main(["query", "--edges", edges, "--source", "u1", "--algo", "dijkstra"])
    assert ei.value.code == 2
    capsys.readouterr()


# -- bench -----------------------------------------------------------------------------


def test_bench_default_grid(example_files, capsys):
    edges, attrs = example_files
    argv = ["bench", "--edges", edges, "--attrs", attrs, "--queries", "2", "--seed", "3"]
    code, out, _ = run_cli(argv, capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("solver,epsilon,alpha")
    assert len(lines) == 1 + 3 * 3  # default algos x default epsilons

    stable = lambda text: [
        ",".join(line.split(",")[:4]) for line in text.splitlines()
    ]
    _, again, _ = run_cli(argv, capsys)
    assert stable(out) == stable(again)


def test_bench_unknown_solver_exits_2(example_files, capsys):
    edges, attrs = example_files
    code, _, err = run_cli(
        ["bench", "--edges", edges, "--attrs", attrs, "--algos", "app,nope",
         "--queries", "1"],
        capsys,
    )
    assert code == 2 and "nope" in err


def test_bench_plot_writes_png(example_files, tmp_path, capsys):
    edges, attrs = example_files
    png = tmp_path / "bench.png"
    csv_path = tmp_path / "bench.csv"
    code, _, _ = run_cli(
        ["bench", "--edges", edges, "--attrs", attrs, "--algos", "app",
         "--epsilons", "1e-2,1e-4", "--queries", "2",
         "--out", str(csv_path), "--plot", str(png)],
        capsys,
    )
    assert code == 0
    assert csv_path.read_text().startswith("solver,")
    assert png.read_bytes()[:4] == b"\x89PNG"


# -- eval ------------------------------------------------------------------------------


def test_eval_topk_report(example_files, capsys):
    edges, attrs = example_files
    code, out, _ = run_cli(
        ["eval", "--edges", edges, "--attrs", attrs, "--mode", "topk",
         "--epsilon", "1e-4", "--k", "3", "--queries", "4"],
        capsys,
    )
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "metric,query,value,wall_clock_ns"
    mean_line = [l for l in lines if l.split(",")[1] == "mean"]
    assert len(mean_line) == 1
    assert float(mean_line[0].split(",")[2]) >= 0.99


def test_eval_f1_with_cluster_file(example_files, tmp_path, capsys):
    edges, attrs = example_files
    clusters = tmp_path / "clusters.tsv"
    clusters.write_text("u1\tc1\nu2\tc1\nu3\tc2\nu4\tc2\n")
    argv = [
        "eval", "--edges", edges, "--attrs", attrs, "--mode", "f1",
        "--clusters", str(clusters),
    ]
    code, out, _ = run_cli(argv, capsys)
    assert code == 0
    mean = float([l for l in out.splitlines() if ",mean," in l][0].split(",")[2])
    assert 0.0 <= mean <= 1.0
    _, again, _ = run_cli(argv, capsys)
    strip_ns = lambda text: [l.rsplit(",", 1)[0] for l in text.splitlines()]
    assert strip_ns(out) == strip_ns(again)


def test_eval_linkpred_report(example_files, capsys):
    edges, attrs = example_files
    argv = [
        "eval", "--edges", edges, "--attrs", attrs, "--mode", "linkpred",
        "--remove-frac", "0.2", "--k", "3", "--seed", "1",
    ]
    code, out, _ = run_cli(argv, capsys)
    assert code == 0
    header, data = out.splitlines()
    assert header.startswith("metric,k,remove_frac")
    value = float(data.split(",")[4])
    assert 0.0 <= value <= 1.0
    _, again, _ = run_cli(argv, capsys)
    assert data.rsplit(",", 1)[0] == again.splitlines()[1].rsplit(",", 1)[0]


# -- gen and lambda ----------------------------------------------------------------------


def test_gen_round_trips(tmp_path, capsys):
    edges, attrs = tmp_path / "gen_e.tsv", tmp_path / "gen_a.tsv"
    code, _, _ = run_cli(
        ["gen", "--u-count", "30", "--v-count", "20", "--attr-count", "5",
         "--edge-count", "100", "--attr-edge-count", "50", "--seed", "9",
         "--out-edges", str(edges), "--out-attrs", str(attrs)],
        capsys,
    )
    assert code == 0
    g = load_graph(str(edges), str(attrs))
    assert g.edge_count == 100 and g.attr_edge_count == 50
    assert g.u_count == 30


def test_gen_infeasible_exits_2(tmp_path, capsys):
    code, _, err = run_cli(
        ["gen", "--u-count", "2", "--v-count", "2", "--edge-count", "100",
         "--out-edges", str(tmp_path / "x.tsv")],
        capsys,
    )
    assert code == 2 and "error:" in err


def test_lambda_subcommand(example_files, capsys):
    edges, attrs = example_files
    code, out, _ = run_cli(["lambda", "--edges", edges, "--attrs", attrs], capsys)
    assert code == 0
    lam_line, pre_line = out.splitlines()
    name, value = lam_line.split("\t")
    assert name == "lambda"
    expected = estimate_lambda(load_graph(edges, attrs), QueryParams(), 30)
    assert float(value) == pytest.approx(expected, abs=1e-12)
    assert pre_line.startswith("preprocess_s\t")
    assert float(pre_line.split("\t")[1]) >= 0.0


def test_logging_env_var_subprocess(example_files):
    edges, attrs = example_files
    env = dict(os.environ, AHPP_LOG="debug")
    proc = subprocess.run(
        [sys.executable, "-m", "ahpp.cli", "query", "--edges", edges,
         "--attrs", attrs, "--source", "u1", "--k", "2"],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 0
    assert len(proc.stdout.splitlines()) == 2
    assert proc.stderr.strip()  # diagnostics land on stderr, not stdout
