"""Tests for the benchmark harness: samplers, norms, replication, outputs."""

import csv
import dataclasses
import json
import math

import numpy as np

from warpdens import BENCHMARKS, error_norms, run_benchmark
from warpdens.bench import Trapezoid, _run_replicate, normal_mixture, write_outputs


def small_spec(**overrides):
    base = dataclasses.replace(
        BENCHMARKS["symmetric-unimodal"], replicates=2, restarts=2, j_max=4
    )
    return dataclasses.replace(base, **overrides)


class TestSamplers:
    def test_single_component_is_pure(self):
        mix = normal_mixture((1.0, 2.0, 0.25))
        x = mix.sample(20000, np.random.default_rng(0))
        assert abs(x.mean() - 2.0) < 0.02
        assert abs(x.std() - 0.5) < 0.02

    def test_mixture_mean(self):
        # 1/3 N(-1,1) + 2/3 N(1,0.3): analytic mean 1/3 (variance reading)
        mix = normal_mixture((1 / 3, -1.0, 1.0), (2 / 3, 1.0, 0.3))
        x = mix.sample(100000, np.random.default_rng(1))
        var = (1 / 3) * (1.0 + 1.0) + (2 / 3) * (0.3 + 1.0) - (1 / 3) ** 2
        se = math.sqrt(var / x.size)
        assert abs(x.mean() - 1 / 3) < 3 * se

    def test_beta_support(self):
        spec = BENCHMARKS["skewed-unimodal"]
        x = spec.true_density.sample(5000, np.random.default_rng(2))
        assert x.min() > 0.0 and x.max() < 1.0

    def test_trapezoid_density_normalized(self):
        trap = Trapezoid()
        t = np.linspace(0, 1, 4001)
        assert abs(np.trapezoid(trap.pdf(t), t) - 1.0) < 1e-6
        x = trap.sample(20000, np.random.default_rng(3))
        assert np.all((x >= 0) & (x <= 1))


class TestErrorNorms:
    class _Flat:
        def pdf(self, x):
            return np.ones_like(np.asarray(x, float))

    class _Triangle:
        def pdf(self, x):
            return 2.0 - 4.0 * np.abs(np.asarray(x, float) - 0.5)

    class _Estimate:
        """Duck-typed stand-in for DensityEstimate."""

        def __init__(self, fn, support=(0.0, 1.0)):
            self._fn = fn
            self.support = support

        def pdf(self, x):
            return self._fn(x)

    def test_zero_error_for_identical(self):
        flat = self._Flat()
        est = self._Estimate(flat.pdf)
        l1, l2, linf = error_norms(est, flat)
        assert l1 < 1e-10 and l2 < 1e-10 and linf < 1e-10

    def test_constant_offset(self):
        flat = self._Flat()
        est = self._Estimate(lambda x: flat.pdf(x) + 0.1)
        l1, l2, linf = error_norms(est, flat)
        assert abs(l1 - 0.1) < 1e-8
        assert abs(l2 - 0.1) < 1e-8
        assert abs(linf - 0.1) < 1e-12

    def test_triangle_vs_uniform(self):
        # closed form: L1 = 0.5, Linf = 1.0
        est = self._Estimate(self._Triangle().pdf)
        l1, _, linf = error_norms(est, self._Flat())
        assert abs(l1 - 0.5) < 1e-3
        assert abs(linf - 1.0) < 1e-9


def strip_wall(records):
    """Replicate records without the timing field (never deterministic)."""
    return [dataclasses.replace(r, wall_ms=0.0) for r in records]


class TestRunBenchmark:
    def test_deterministic_summary(self):
        spec = small_spec()
        a = run_benchmark(spec, 60)
        b = run_benchmark(spec, 60)
        assert strip_wall(a.records) == strip_wall(b.records)
        assert a.mean == b.mean

    def test_parallel_matches_single(self):
        spec = small_spec()
        a = run_benchmark(spec, 60, workers=1)
        b = run_benchmark(spec, 60, workers=3)
        assert strip_wall(a.records) == strip_wall(b.records)

    def test_single_replicate_zero_sd(self):
        summary = run_benchmark(small_spec(replicates=1), 60)
        assert summary.sd["L2"] == 0.0

    def test_summary_mean_matches_records(self):
        out = run_benchmark(small_spec(), 60)
        assert out.mean["L2"] == np.mean([r.l2 for r in out.records])

    def test_records_finite_nonnegative(self):
        out = run_benchmark(small_spec(), 60)
        for r in out.records:
            assert r.l1 >= 0 and r.l2 >= 0 and r.linf >= 0
            assert math.isfinite(r.aic)

    def test_replicate_rng_independent_of_order(self):
        spec = small_spec()
        r1 = _run_replicate(spec, 60, 1)
        r0 = _run_replicate(spec, 60, 0)
        r1_again = _run_replicate(spec, 60, 1)
        assert r1.l2 == r1_again.l2
        assert r1.l2 != r0.l2


class TestOutputs:
    def test_csv_and_json_written(self, tmp_path):
        summary = run_benchmark(small_spec(), 60)
        csv_path, json_path = write_outputs(summary, str(tmp_path))

        with open(csv_path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "replicate", "n", "L1", "L2", "Linf", "J", "loglik", "aic", "wall_ms",
        ]
        assert len(rows) == 1 + 2

        with open(json_path) as fh:
            payload = json.load(fh)
        assert payload["schema"] == 1
        assert payload["name"] == summary.name
        assert payload["mean"]["L2"] == summary.mean["L2"]

    def test_registry_names(self):
        for name in (
            "symmetric-unimodal",
            "bimodal",
            "trimodal",
            "cond-bimodal",
            "flat-mode",
        ):
            assert name in BENCHMARKS
