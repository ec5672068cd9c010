from __future__ import annotations

import math

import numpy as np
import pytest

from wish_ilp.gf2 import ParitySystem, format_system
from wish_ilp.harness import (
    ExperimentConfig,
    emit_anytime_trace,
    load_config,
    parse_config_text,
    read_query_csv,
    read_summary,
    read_sweep,
    read_trace,
    recompute_estimates,
    run_experiment,
    sparsification_sweep,
)
from wish_ilp.harness.cli import main
from wish_ilp.hashing import SeededRng, sample_toeplitz
from wish_ilp.map_solvers import Budget
from wish_ilp.model import FactorGraph, GridSpec, build_ising_grid, exact_log_partition, format_model


def small_config(tmp_path, **kw):
    base = dict(grid=3, T=3, repetitions=2, workers=1, out=str(tmp_path / "run"))
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_text_parsing():
    values = parse_config_text("# comment\ngrid = 5\nbudget-seconds = 2.5\nT = none\nfamily = sparse:4  # k\n")
    assert values == {"grid": 5, "budget_seconds": 2.5, "T": None, "family": "sparse:4"}
    with pytest.raises(KeyError):
        parse_config_text("nonsense = 1")
    with pytest.raises(ValueError):
        parse_config_text("grid 5")


def test_config_layering(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("grid = 5\nseed = 3\n")
    cfg = load_config(path, {"seed": 7, "delta": None})
    assert (cfg.grid, cfg.seed, cfg.delta) == (5, 7, 0.1)


def test_config_text_roundtrip():
    cfg = ExperimentConfig(grid=6, T=9, family="sparse:3", budget_seconds=1.5)
    assert load_config(None, parse_config_text(cfg.to_text())) == cfg


def test_run_experiment_outputs(tmp_path):
    cfg = small_config(tmp_path)
    record = run_experiment(cfg)
    out = tmp_path / "run"
    assert (out / "config.txt").read_text() == cfg.to_text()
    rows = read_query_csv(out / "queries.csv")
    assert rows == record.rows
    assert len(rows) == 2 * 10 * 3
    assert all(r.lower <= r.upper for r in rows)
    summary = read_summary(out / "summary.txt")
    assert float(summary["exact_log_z"]) == exact_log_partition(cfg.build_model())
    recomputed = recompute_estimates(rows, cfg.mode)
    for s in record.summaries:
        assert float(summary[f"run.{s.seed}.log_estimate"]) == s.log_estimate == recomputed[s.seed]
        assert float(summary[f"run.{s.seed}.abs_error"]) == abs(s.log_estimate - record.exact_log_z)


def test_replay_is_bit_identical(tmp_path):
    a = run_experiment(small_config(tmp_path, out=None, mode="upper", solver="lp"))
    b = run_experiment(small_config(tmp_path, out=None, mode="upper", solver="lp"))
    strip = lambda rows: [(r.level, r.trial, r.seed, r.lower, r.upper, r.status, r.nodes) for r in rows]
    assert strip(a.rows) == strip(b.rows)
    assert a.config_hash == b.config_hash


def test_upper_mode_summary_uses_upper_column(tmp_path):
    record = run_experiment(small_config(tmp_path, mode="upper", solver="lp", repetitions=1))
    assert recompute_estimates(record.rows, "upper")[0] == record.summaries[0].log_estimate


def test_zero_repetitions_warns(tmp_path):
    with pytest.warns(UserWarning):
        record = run_experiment(small_config(tmp_path, repetitions=0))
    assert record.rows == [] and record.summaries == []
    assert read_query_csv(tmp_path / "run" / "queries.csv") == []


def test_exact_unavailable(tmp_path):
    # a 30-node graph with every pair connected defeats both exact oracles
    n = 30
    edges = tuple((i, j) for i in range(n) for j in range(i + 1, n))
    model = FactorGraph(np.zeros((n, 2)), edges, np.zeros((len(edges), 2, 2)))
    path = tmp_path / "dense.model"
    path.write_text(format_model(model))
    cfg = ExperimentConfig(model_file=str(path), mode="lower", solver="mp", T=1, workers=1,
                           out=str(tmp_path / "run"))
    record = run_experiment(cfg)
    assert record.exact_log_z is None
    assert read_summary(tmp_path / "run" / "summary.txt")["exact_log_z"] == "unavailable"


def test_trace_file(tmp_path):
    model = build_ising_grid(GridSpec(4, 1.0, 3.0, 2))
    s = sample_toeplitz(16, 6, SeededRng(2))
    path = tmp_path / "trace.dat"
    trace = emit_anytime_trace(model, s, Budget(seconds=30), path)
    plot = read_trace(path)
    assert [u for _, u in plot] == [u for _, u, _ in trace]
    assert all(a >= b for (_, a), (_, b) in zip(plot, plot[1:]))


def test_trace_single_row_for_integral_root():
    model = FactorGraph([[0.0, 1.0], [0.2, 0.0]])
    trace = emit_anytime_trace(model, ParitySystem(2), Budget())
    assert len(trace) == 1
    assert trace[0][1] == trace[0][2] == pytest.approx(1.2)


def test_sweep_table(tmp_path):
    model = build_ising_grid(GridSpec(3, 1.0, 3.0, 0))
    path = tmp_path / "sweep.dat"
    table = sparsification_sweep(model, [0, 5], Budget(nodes=3), repetitions=2, path=path)
    assert read_sweep(path) == table
    zero = [r for r in table if r.m == 0]
    assert len({(r.median_lower, r.median_upper, r.feasible_rate) for r in zero}) == 1
    assert {r.preprocessor for r in table} == {"none", "rref", "rref+greedy"}


def test_cli_map(capsys):
    assert main(["map", "--grid", "3", "--m", "3", "--show-incumbent"]) == 0
    lines = capsys.readouterr().out.splitlines()
    lower, upper, status, nodes, runtime = lines[0].split()
    assert status == "Optimal" and float(lower) == pytest.approx(float(upper))
    assert len(lines[1]) == 9 and set(lines[1]) <= {"0", "1"}


def test_cli_map_solvers_agree(capsys):
    main(["map", "--grid", "3", "--m", "4", "--solver", "brute"])
    main(["map", "--grid", "3", "--m", "4", "--solver", "bnb", "--encoding", "yannakakis"])
    a, b = capsys.readouterr().out.splitlines()
    assert float(a.split()[0]) == pytest.approx(float(b.split()[0]), abs=1e-6)


def test_cli_sparsify(tmp_path, capsys):
    path = tmp_path / "sys.txt"
    path.write_text(format_system(ParitySystem.from_rows(4, [("1110", 0), ("0111", 0)])))
    main(["sparsify", str(path), "--method", "greedy", "--depth", "2"])
    captured = capsys.readouterr()
    assert captured.out.splitlines()[0] == "4 2"
    assert "6 -> 5" in captured.err


def test_cli_exact_and_audit(capsys):
    main(["exact", "--grid", "3", "--field", "0", "--coupling", "0"])
    main(["audit", "--family", "dense", "--n", "3", "--m", "2"])
    out = capsys.readouterr().out.splitlines()
    assert float(out[0]) == pytest.approx(9 * math.log(2))
    assert "256 members" in out[1] and "pairwise_independent=True" in out[1]


def test_cli_config_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("grid = 3\nT = 2\nworkers = 1\nseed = 4\n")
    out = tmp_path / "o"
    main(["estimate", "--config", str(cfg), "--seed", "6", "--out", str(out)])
    text = capsys.readouterr().out
    assert "explicit T=2" in text and "seed 6" in text
    summary = read_summary(out / "summary.txt")
    assert summary["config.grid"] == "3" and summary["config.seed"] == "6"


def test_cli_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        main(["estimate", "--help"])
    text = capsys.readouterr().out
    for flag in ("--mode", "--delta", "--alpha", "--T", "--family", "--solver", "--budget-seconds",
                 "--workers", "--seed", "--out"):
        assert flag in text
    assert "(default: 0.1)" in text


def test_cli_selftest(capsys):
    assert main(["selftest"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_sandwich_brackets_exact_mode():
    from wish_ilp.harness import run_sandwich
    from wish_ilp.wish import WishConfig, wish_run

    model = build_ising_grid(GridSpec(3, 1.0, 3.0, 4))
    cfg = WishConfig(T_override=3, seed=2)
    s = run_sandwich(model, cfg)
    exact = wish_run(model, cfg).log_estimate
    assert s.closed_fraction == 1.0
    assert s.lower_estimate == pytest.approx(exact, abs=1e-6)
    assert s.upper_estimate == pytest.approx(exact, abs=1e-6)
