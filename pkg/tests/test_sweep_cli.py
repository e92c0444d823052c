import json
import logging

import numpy as np
import pytest

from influence_percolation import cli
from influence_percolation import config as cfgmod
from influence_percolation import sweep as sweepmod
from influence_percolation.dynamics import ScenarioConfig
from influence_percolation.errors import ParameterError, UsageError
from influence_percolation.graph import BlockModelParams
from influence_percolation.meanfield import MeanFieldScenario, percolation_threshold
from influence_percolation.outputs import emit_outputs, read_csv_table, sweep_table, write_sweep_csv
from influence_percolation.sweep import Axis, SweepSpec, run_sweep

SMALL = BlockModelParams(120, 3, 0.8, 0.2, (0.5, 0.0, 0.5))


def small_spec(values=(0.05, 0.3), replicas=1, **kw):
    scen = ScenarioConfig(K=2, theta=20.0, T=1e6, beta=0.7, whole_block_seeds={0: 0}, block_seed_fractions={(2, 0): 0.0})
    base = dict(scenario=scen, axis1=Axis(2, 0, values), betas=(0.7,), replicas=replicas, master_seed=9, sbm=SMALL, workers=1)
    base.update(kw)
    return SweepSpec(**base)


def as_tuple(result):
    return [
        (p.index, p.skipped, None if p.fractions is None else p.fractions.tolist(), p.event_counts)
        for p in result.points
    ]


class TestConfig:
    def test_parse(self):
        conf = cfgmod.parse_config_text(
            "# comment\nsbm.n = 100  # trailing\nsbm.rho = [0.5, 0.5]\nscenario.engine = python\nflag = true\n"
        )
        assert conf == {"sbm.n": 100, "sbm.rho": [0.5, 0.5], "scenario.engine": "python", "flag": True}

    def test_bad_line(self):
        with pytest.raises(UsageError, match="expected"):
            cfgmod.parse_config_text("just words")

    def test_duplicate(self):
        with pytest.raises(UsageError, match="duplicate"):
            cfgmod.parse_config_text("a = 1\na = 2")

    def test_precedence(self):
        conf = cfgmod.resolve("one-eager", {"scenario.theta": 5}, {"scenario.beta": 0.9}, {"sbm.seed": 3})
        assert conf["scenario.theta"] == 5 and conf["scenario.beta"] == 0.9 and conf["sbm.seed"] == 3
        assert conf["sbm.n"] == 2000

    def test_conflict_names_key(self):
        with pytest.raises(UsageError, match="scenario.beta"):
            cfgmod.resolve("one-eager", {}, {"scenario.beta": 0.8}, {"scenario.beta": 0.9})

    def test_unknown_key(self):
        with pytest.raises(UsageError, match="scenario.tehta"):
            cfgmod.resolve(None, {"scenario.tehta": 1})

    def test_missing_key(self):
        conf = cfgmod.resolve(None, {"sbm.n": 10, "sbm.rho": [1.0]})
        with pytest.raises(UsageError, match="sbm.b"):
            cfgmod.build_sbm(conf)

    def test_infeasible_seeds_named(self):
        conf = cfgmod.resolve("one-eager", {"scenario.block_seed_fractions.3.1": 0.6})
        with pytest.raises(UsageError, match="block_seed_fractions"):
            cfgmod.build_scenario(conf)
        with pytest.raises(UsageError, match="block_seed_fractions"):
            cfgmod.build_meanfield(conf)

    def test_scenario_indices_shift(self):
        conf = cfgmod.resolve("two-competing", {}, {"scenario.block_seed_fractions.4.2": 0.1})
        sc = cfgmod.build_scenario(conf)
        assert sc.block_seed_fractions[(3, 1)] == 0.1
        assert sc.whole_block_seeds == {0: 0, 1: 1, 2: 2}
        assert sc.K == 3

    def test_range_axis(self):
        conf = cfgmod.resolve(
            "one-eager", {"sweep.axis1": "block_seed_fractions.3.1", "sweep.axis1_range": [0, 0.5, 0.02]}
        )
        spec = cfgmod.build_sweep(conf)
        assert len(spec.axis1.values) == 26 and spec.axis1.values[-1] == 0.5 and spec.axis1.values[9] == 0.18
        assert (spec.axis1.block, spec.axis1.candidate) == (2, 0)

    def test_axis_needs_one_grid(self):
        conf = cfgmod.resolve("one-eager", {"sweep.axis1": "block_seed_fractions.3.1"})
        with pytest.raises(UsageError, match="axis1_values"):
            cfgmod.build_sweep(conf)


class TestSweep:
    def test_spec_validation(self):
        with pytest.raises(ParameterError):
            small_spec(replicas=0)
        with pytest.raises(ParameterError):
            small_spec(values=())
        with pytest.raises(ParameterError):
            small_spec(betas=())

    def test_deterministic(self):
        spec = small_spec(values=(0.3,), replicas=2)
        assert as_tuple(run_sweep(spec)) == as_tuple(run_sweep(spec))

    def test_serial_equals_parallel(self):
        a = run_sweep(small_spec(replicas=2, workers=1))
        b = run_sweep(small_spec(replicas=2, workers=2))
        assert as_tuple(a) == as_tuple(b)

    def test_skips_do_not_shift_streams(self):
        a = run_sweep(small_spec(values=(0.6, 0.2)))
        b = run_sweep(small_spec(values=(0.7, 0.2)))
        assert a.points[0].skipped and b.points[0].skipped
        assert as_tuple(a)[1] == as_tuple(b)[1]

    def test_aggregates(self):
        res = run_sweep(small_spec(values=(0.05, 0.45, 0.5), replicas=2))
        done = [p for p in res.points if p.skipped is None]
        assert len(done) == 2 and res.points[2].skipped == "no undecided voters"
        for p in done:
            assert p.fractions.sum() == pytest.approx(1.0)
            assert np.all(p.fraction_min <= p.fractions) and np.all(p.fractions <= p.fraction_max)
            assert p.winner == int(np.argmax(p.fractions)) and p.replicas == 2
        assert res.points[0].winner == 1 and res.points[1].winner == 0
        assert res.theory[0.7] == pytest.approx(1 / 6, abs=1e-12)
        value, step = res.measured_threshold(0.7)
        assert value == 0.45 and step == 0.05

    def test_unwritable_before_simulating(self, tmp_path, monkeypatch):
        blocker = tmp_path / "file"
        blocker.write_text("")

        def boom(task):
            raise AssertionError("simulation started")

        monkeypatch.setattr(sweepmod, "_run_task", boom)
        with pytest.raises(OSError):
            run_sweep(small_spec(output=blocker / "out"))

    def test_two_axes(self):
        scen = ScenarioConfig(
            K=3, theta=100.0, T=3e6, beta=0.8, whole_block_seeds={0: 0, 1: 1},
            block_seed_fractions={(3, 0): 0.0, (3, 1): 0.0},
        )
        spec = SweepSpec(
            scenario=scen, axis1=Axis(3, 0, (0.0, 0.25)), axis2=Axis(3, 1, (0.0, 0.25)), betas=(0.8,),
            sbm=BlockModelParams(240, 4, 0.9, 0.1, (1 / 3, 1 / 3, 0, 1 / 3)), workers=1,
        )
        res = run_sweep(spec)
        winners = {(p.axis1, p.axis2): p.winner for p in res.points if p.skipped is None}
        assert winners == {(0.0, 0.0): 2, (0.25, 0.0): 0, (0.0, 0.25): 1}
        assert res.points[3].skipped.startswith("infeasible")
        header, rows = sweep_table(res)
        assert header == ["axis1", "axis2", "winner", "frac_1", "frac_2", "frac_3"]
        assert [r[2] for r in rows] == [3, 2, 1]


class TestOutputs:
    def test_csv_header_and_roundtrip(self, tmp_path):
        res = run_sweep(small_spec(values=(0.05, 0.2, 0.4)))
        path = tmp_path / "s.csv"
        emit_outputs(res, "csv", path)
        header, rows = read_csv_table(path)
        assert header == ["rho", "beta", "frac_1", "frac_2", "theory_threshold"]
        assert len(rows) == 3
        assert rows == sweep_table(res)[1]
        raw = path.read_bytes()
        assert b"\r" not in raw and raw.endswith(b"\n")

    def test_all_skipped(self, tmp_path, caplog):
        res = run_sweep(small_spec(values=(0.6, 0.7)))
        with caplog.at_level(logging.WARNING):
            write_sweep_csv(res, tmp_path / "s.csv")
        assert (tmp_path / "s.csv").read_text() == "rho,beta,frac_1,frac_2,theory_threshold\n"
        assert "skipped" in caplog.text

    def test_threshold_json(self, tmp_path):
        sc = MeanFieldScenario(BlockModelParams(2000, 3, 0.8, 0.2, (0.5, 0.0, 0.5)), 0.8)
        path = tmp_path / "t.json"
        emit_outputs(percolation_threshold(sc, 0), "json", path)
        data = json.loads(path.read_text())
        assert data["threshold"] == pytest.approx(0.25, abs=1e-12)
        assert '"threshold": 0.25' in path.read_text()

    def test_unknown_format(self, tmp_path):
        with pytest.raises(UsageError):
            emit_outputs(run_sweep(small_spec(values=(0.6,))), "xml", tmp_path / "x")

    def test_byte_stable(self, tmp_path):
        res = run_sweep(small_spec(values=(0.1, 0.3)))
        emit_outputs(res, "json", tmp_path / "a.json")
        emit_outputs(res, "json", tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()


class TestCli:
    def test_no_args(self, capsys):
        assert cli.main([]) == 2
        assert "usage" in capsys.readouterr().err

    @pytest.mark.parametrize("beta,printed", [(0.7, "0.166667"), (0.9, "0.357143")])
    def test_threshold(self, capsys, beta, printed):
        assert cli.main(["threshold", "--preset", "one-eager", "--beta", str(beta)]) == 0
        out, err = capsys.readouterr()
        assert f"threshold = {printed}" in out
        assert "scenario.beta = " + str(beta) in err

    def test_threshold_from_config(self, tmp_path, capsys):
        conf = tmp_path / "c.conf"
        conf.write_text(
            "sbm.n = 2000\nsbm.b = 3\nsbm.p_in = 0.8\nsbm.p_out = 0.2\nsbm.rho = [0.5, 0, 0.5]\n"
            "scenario.beta = 0.9\n"
        )
        assert cli.main(["threshold", "--config", str(conf)]) == 0
        assert "0.357" in capsys.readouterr().out

    def test_infeasible_config(self, tmp_path, capsys):
        conf = tmp_path / "c.conf"
        conf.write_text("scenario.block_seed_fractions.3.1 = 0.6\n")
        assert cli.main(["threshold", "--preset", "one-eager", "--config", str(conf)]) == 2
        assert "block_seed_fractions" in capsys.readouterr().err

    def test_conflict(self, capsys):
        code = cli.main(["threshold", "--preset", "one-eager", "--beta", "0.9", "--set", "scenario.beta=0.8"])
        assert code == 2
        assert "scenario.beta" in capsys.readouterr().err

    def test_runtime_error(self, tmp_path, capsys):
        assert cli.main(["estimate", str(tmp_path / "missing.json")]) == 1

    def test_generate_estimate(self, tmp_path, capsys):
        out = tmp_path / "g.json"
        assert cli.main(["generate", "--preset", "one-eager", "--set", "sbm.n=60", "--out", str(out)]) == 0
        assert cli.main(["estimate", str(out), "--method", "pair"]) == 0
        report = json.loads(capsys.readouterr().out.split("\n", 1)[1])
        assert set(report) == {"pair"}

    def test_ingest(self, tmp_path, capsys):
        (tmp_path / "e.txt").write_text("a b\nb c\nc a\nc d\n")
        (tmp_path / "l.txt").write_text("a 0\nb 0\nc 1\nd 1\n")
        code = cli.main(["ingest", "--edges", str(tmp_path / "e.txt"), "--labels", str(tmp_path / "l.txt"),
                         "--out", str(tmp_path / "g.json")])
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert report["n"] == 3 and report["m"] == 3 and report["pruned_nodes"] == 1

    def test_env_output_dir(self, tmp_path, monkeypatch):
        monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "envout"))
        assert cli.main(["trajectory", "--preset", "one-eager", "--beta", "0.7"]) == 0
        header, rows = read_csv_table(tmp_path / "envout" / "meanfield_trajectory.csv")
        assert header == ["time", "h_1", "h_2"] and rows[0] == [0.0, 0.5, 0.5]

    def test_simulate(self, tmp_path):
        code = cli.main(["simulate", "--preset", "one-eager", "--set", "sbm.n=100", "--seed", "4",
                         "--out-dir", str(tmp_path)])
        assert code == 0
        header, _ = read_csv_table(tmp_path / "trajectory.csv")
        assert header == ["time", "h_1", "h_2"]
        data = json.loads((tmp_path / "simulation.json").read_text())
        assert sum(data["votes"]) == data["n_undecided"]
