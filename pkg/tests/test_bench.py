import numpy as np
import pytest

from myriadkit.bench import (
    BenchConfig,
    BenchRow,
    CSV_HEADER,
    emit_csv,
    plot_rows,
    run_table1,
    _trial_seed,
)


def quick_cfg(**kw):
    base = dict(d=2, n=100, trials=60, nus=[1.0, 100.0], seed=7)
    base.update(kw)
    return BenchConfig(**base)


class TestRunTable1:
    def test_gmmf_beats_em_on_iterations(self):
        rows = run_table1(quick_cfg())
        assert len(rows) == 2
        for r in rows:
            assert r.mean_iter_gmmf < r.mean_iter_em
            assert r.failures == 0
            assert r.std_iter_gmmf >= 0

    def test_means_in_expected_ballpark(self):
        rows = {r.nu: r for r in run_table1(quick_cfg(trials=150))}
        assert rows[1.0].mean_iter_gmmf == pytest.approx(20.35, abs=2.0)
        assert rows[1.0].mean_iter_em == pytest.approx(60.88, abs=3.0)
        assert rows[100.0].mean_iter_gmmf == pytest.approx(4.07, abs=0.5)
        assert rows[100.0].mean_iter_em == pytest.approx(4.90, abs=0.5)

    def test_scale_invariance_of_iteration_counts(self):
        sigmas = [("I", np.eye(2)), ("0.1I", 0.1 * np.eye(2)), ("10I", 10 * np.eye(2))]
        rows = run_table1(quick_cfg(nus=[2.0], trials=150, sigmas=sigmas))
        base = next(r for r in rows if r.sigma_label == "I")
        for r in rows:
            assert abs(r.mean_iter_gmmf - base.mean_iter_gmmf) <= 1.0
            assert abs(r.mean_iter_em - base.mean_iter_em) <= 1.0

    def test_row_ordering(self):
        sigmas = [("b", np.eye(2)), ("a", 2 * np.eye(2))]
        rows = run_table1(quick_cfg(nus=[5.0, 1.0], trials=5, sigmas=sigmas))
        keys = [(r.nu, r.sigma_label) for r in rows]
        assert keys == sorted(keys)

    def test_trial_seeds_independent_of_trial_count(self):
        a = _trial_seed(42, 0, 3).generate_state(2)
        b = _trial_seed(42, 0, 3).generate_state(2)
        c = _trial_seed(42, 0, 4).generate_state(2)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)


class TestEmitCsv:
    def test_empty_rows_header_only(self, tmp_path):
        path = tmp_path / "empty.csv"
        emit_csv([], path)
        assert path.read_text() == CSV_HEADER + "\n"

    def test_two_row_golden(self, tmp_path):
        rows = [
            BenchRow(5.0, "I", 10.25, 0.5, 17.75, 1.25, 0),
            BenchRow(1.0, "0.1I", 20.5, 1.5, 60.125, 4.0, 2),
        ]
        path = tmp_path / "golden.csv"
        emit_csv(rows, path)
        expect = (
            "nu,sigma,mean_gmmf,std_gmmf,mean_em,std_em,failures\n"
            "1,0.1I,20.500000,1.500000,60.125000,4.000000,2\n"
            "5,I,10.250000,0.500000,17.750000,1.250000,0\n"
        )
        assert path.read_bytes() == expect.encode("ascii")

    def test_rerun_byte_identical(self, tmp_path):
        cfg = quick_cfg(trials=20)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        emit_csv(run_table1(cfg), p1)
        emit_csv(run_table1(quick_cfg(trials=20)), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestPlot:
    def test_writes_png(self, tmp_path):
        rows = run_table1(quick_cfg(trials=10))
        path = tmp_path / "bench.png"
        plot_rows(rows, path)
        assert path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
