import csv
import json

import pytest

from rsma_egfp import bench
from rsma_egfp.bench import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    compare_variants,
    load_config,
    parse_config,
    realization_seed,
    run_experiment,
)
from rsma_egfp.extragradient import DivergenceError

SWEEP = """
# three antenna counts
experiment = sweep-antennas
K = 2
Nt = 2, 3, 4
snr_db = 10
num_realizations = 2
base_seed = 7
"""


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestParse:
    def test_lists_and_defaults(self):
        cfg = parse_config(SWEEP, "s")
        assert cfg.K == (2,) and cfg.Nt == (2, 3, 4) and cfg.snr_db == (10.0,)
        assert cfg.kappa == (0.0,) and cfg.channel_model == "iid"
        assert cfg.variants == ("full",) and cfg.schemes == ("rsma",)
        assert cfg.name == "s"

    def test_aliases(self):
        cfg = parse_config("experiment=sweep-users\nnum_users=2,4\nN_t=8\nepsilon1=1e-4")
        assert cfg.K == (2, 4) and cfg.Nt == (8,) and cfg.outer_tol == 1e-4

    def test_imperfect_auto(self):
        cfg = parse_config("experiment=sweep-kappa\nK=2\nNt=2\nkappa=0,0.2")
        assert cfg.channel_model == "imperfect"
        cfg = parse_config("experiment=sdma-compare\nK=2\nNt=2")
        assert cfg.schemes == ("rsma", "sdma")

    @pytest.mark.parametrize("text", [
        "experiment=sweep-users\nK=2\nNt=",
        "experiment=sweep-users\nK=2",
        "experiment=nope\nK=2\nNt=2",
        "experiment=sweep-users\nK=2\nNt=2\ncolour=red",
        "experiment=sweep-users\nK=two\nNt=2",
        "experiment=sweep-users\nK=2\nNt=2,,3",
        "experiment=sweep-users\nK=2\nNt=2\nkappa=1.0",
        "experiment=sweep-users\nK=0\nNt=2",
        "experiment=sweep-users\nK=2\nNt=2\nvariant=half",
        "experiment=sweep-users\nK=2\nNt=2\nchannel_model=iid\nkappa=0.1",
        "experiment=sweep-users\nK=2\nNt=2\nouter_tol=0",
        "experiment=sweep-users\nK 2",
    ])
    def test_rejects(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.cfg")

    def test_solver_config(self):
        cfg = parse_config("experiment=sweep-users\nK=2\nNt=2\ninner_tol=1e-4\nresidual_tol=none")
        scfg = cfg.solver_config("lowdim")
        assert scfg.variant == "lowdim" and scfg.eg.inner_tol == 1e-4
        assert scfg.eg.residual_tol is None


class TestSeeds:
    def test_distinct(self):
        cfg = parse_config("experiment=sweep-users\nK=2,3,4\nNt=4,8\nsnr_db=0,10\n"
                           "num_realizations=50")
        tasks = bench._tasks(cfg, 0)
        assert len({t[3] for t in tasks}) == len(tasks) == 3 * 2 * 2 * 50

    def test_stable(self):
        assert realization_seed(3, (2, 4, 10.0, 0.0), 1) == realization_seed(3, (2, 4, 10, 0), 1)
        assert realization_seed(3, (2, 4, 10.0, 0.0), 1) != realization_seed(4, (2, 4, 10.0, 0.0), 1)
        assert 0 <= realization_seed(0, (2, 4, 10.0, 0.0), 0) < 2 ** 63

    def test_shared_across_variants(self):
        cfg = parse_config("experiment=sdma-compare\nK=2\nNt=2\nvariant=both\nnum_realizations=2")
        tasks = bench._tasks(cfg, 0)
        assert len(tasks) == 2 * 2 * 2
        assert len({t[3] for t in tasks}) == 2


class TestRun:
    def test_sweep(self, tmp_path):
        path = tmp_path / "sweep.cfg"
        path.write_text(SWEEP)
        res = run_experiment(path, tmp_path / "out")
        rows = read_csv(res.paths["csv"])
        assert list(rows[0]) == CSV_COLUMNS
        assert [int(r["Nt"]) for r in rows] == [2, 3, 4]
        assert all(int(r["n_realizations"]) == 2 for r in rows)
        assert all(float(r["mmf_nats_mean"]) > 0 for r in rows)
        manifest = json.loads(res.paths["manifest"].read_text())
        assert manifest["base_seed"] == 7 and len(manifest["runs"]) == 6
        assert res.ok

    def test_deterministic(self, tmp_path):
        cfg = parse_config(SWEEP, "s")
        a = run_experiment(cfg, tmp_path / "a")
        b = run_experiment(cfg, tmp_path / "b")
        assert a.paths["manifest"].read_text() == b.paths["manifest"].read_text()
        for ra, rb in zip(read_csv(a.paths["csv"]), read_csv(b.paths["csv"])):
            ra.pop("secs_mean")
            rb.pop("secs_mean")
            assert ra == rb

    def test_seed_override(self, tmp_path):
        cfg = parse_config(SWEEP, "s")
        a = run_experiment(cfg, tmp_path / "a")
        b = run_experiment(cfg, tmp_path / "b", base_seed=8)
        assert a.runs[0]["seed"] != b.runs[0]["seed"]

    def test_trace_and_pairs(self, tmp_path):
        cfg = parse_config("experiment=convergence-trace\nK=2\nNt=3\nnum_realizations=1\n"
                           "variant=both", "t")
        res = run_experiment(cfg, tmp_path)
        trace = read_csv(res.paths["trace"])
        assert {r["variant"] for r in trace} == {"full", "lowdim"}
        assert trace[0]["iteration"] == "0"
        paired = read_csv(res.paths["paired"])
        assert len(paired) == 1 and float(paired[0]["rel_diff_max"]) < 0.01

    def test_sdma_compare(self, tmp_path):
        cfg = parse_config("experiment=sdma-compare\nK=2\nNt=2\nkappa=0.2\nnum_realizations=1")
        res = run_experiment(cfg, tmp_path)
        assert [r.variant for r in res.rows] == ["full", "sdma-full"]

    def test_divergence_recorded(self, tmp_path, monkeypatch):
        def boom(*args, **kwargs):
            raise DivergenceError(5)

        monkeypatch.setattr(bench, "solve", boom)
        res = run_experiment(parse_config(SWEEP, "s"), tmp_path)
        assert not res.ok and len(res.failures) == 6
        assert res.rows == []
        assert "diverged" in res.failures[0]["error"]

    def test_compare_variants_from_config(self):
        cfg = ExperimentConfig("sweep-antennas", (2,), (3,), num_realizations=2)
        paired = compare_variants(cfg)
        assert len(paired) == 1 and paired[0]["n_pairs"] == 2
        assert paired[0]["rel_diff_max"] < 0.01
