import numpy as np
import pytest

from saabkit.errors import InsufficientDataError, RejectedInputError
from saabkit.residuals import synth_ar1
from saabkit.training import (
    ConvergenceParams,
    convergence_monitor,
    fit_pipeline,
    iter_chunks,
    traces_to_csv,
)
from saabkit.transforms import bias_select, dct_kernel, orthonormality_error


class TestConvergenceMonitor:
    def test_constant_stream(self):
        stream = np.tile(np.arange(4.0), (100, 1))
        acc, trace = convergence_monitor(stream, delta_m=10, epsilon=1e-9, max_samples=1000)
        assert trace.converged_at == 20
        assert trace.checkpoints == ((20, 0.0),)
        assert acc.count == 20

    def test_generator_source(self):
        gen = (np.ones(4) for _ in range(50))
        _, trace = convergence_monitor(gen, delta_m=10, epsilon=1e-9, max_samples=1000)
        assert trace.converged_at == 20

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError):
            convergence_monitor(np.zeros((19, 4)), delta_m=10, epsilon=1e-3, max_samples=1000)
        with pytest.raises(InsufficientDataError):
            convergence_monitor(np.zeros((100, 4)), delta_m=10, epsilon=1e-3, max_samples=15)

    def test_bad_params(self):
        with pytest.raises(RejectedInputError):
            convergence_monitor(np.zeros((100, 4)), delta_m=0)
        with pytest.raises(RejectedInputError):
            convergence_monitor(np.zeros((100, 4)), epsilon=0.0)

    def test_checkpoint_spacing_and_snapshot_diff(self, rng):
        x = rng.standard_normal((700, 3))
        _, trace = convergence_monitor(x, delta_m=100, epsilon=1e-12, max_samples=10_000)
        ms = [m for m, _ in trace.checkpoints]
        assert ms == list(range(200, 701, 100))
        assert trace.converged_at is None
        # oracle: covariance of the full prefix vs the prefix one chunk shorter
        for m, d in trace.checkpoints:
            ref = np.linalg.norm(np.cov(x[:m].T, bias=True) - np.cov(x[: m - 100].T, bias=True))
            assert d == pytest.approx(ref, rel=1e-9)

    def test_max_samples_cap(self, rng):
        x = rng.standard_normal((10_000, 2))
        acc, trace = convergence_monitor(x, delta_m=100, epsilon=1e-12, max_samples=550)
        assert acc.count == 500 and trace.final_m == 500

    def test_scale(self, rng):
        x = rng.standard_normal((400, 2))
        a, t1 = convergence_monitor(x, 100, 1e-12, 10_000, scale=1.0)
        b, t2 = convergence_monitor(x, 100, 1e-12, 10_000, scale=10.0)
        np.testing.assert_allclose(t1.diffs / 100.0, t2.diffs, rtol=1e-10)
        np.testing.assert_allclose(a.covariance() / 100.0, b.covariance(), rtol=1e-10)

    def test_ar1_trend(self):
        x = synth_ar1(0.9, 10.0, 8, 200_000, seed=21).blocks
        _, trace = convergence_monitor(x, 5000, 1.5e-4, 500_000, scale=255.0)
        assert trace.converged_at is not None
        d = trace.diffs
        for i in range(3, len(d)):
            assert d[i] <= 3 * np.median(d[i - 3 : i])

    def test_monotone_sufficiency(self):
        x = synth_ar1(0.95, 10.0, 4, 120_000, seed=22).blocks
        _, t1 = convergence_monitor(x, 2000, 5e-5, 60_000, scale=255.0)
        _, t2 = convergence_monitor(x, 2000, 5e-5, 120_000, scale=255.0)
        assert t1.converged_at is not None
        assert t2.converged_at == t1.converged_at
        assert t2.checkpoints == t1.checkpoints

    def test_diffs_shrink_in_probability(self):
        wins = 0
        for seed in range(20):
            x = synth_ar1(0.5, 10.0, 4, 60_000, seed=100 + seed).blocks
            _, trace = convergence_monitor(x, 2000, 1e-12, 60_000, scale=255.0)
            wins += trace.diffs[-1] < trace.diffs[0]
        assert wins >= 19


class TestIterChunks:
    def test_mixed_iterable(self):
        items = [np.ones(3), np.ones((4, 3)), np.ones(3)]
        sizes = [c.shape[0] for c in iter_chunks(items, 4)]
        assert sizes == [4, 2]


class TestBiasSelect:
    def test_examples(self):
        assert bias_select([1.0, 4.0, 2.0], 1.25) == 5.0
        assert bias_select(np.zeros(10)) == 0.0
        assert bias_select(iter([3.0, 1.0]), 1.0) == 3.0

    def test_errors(self):
        with pytest.raises(InsufficientDataError):
            bias_select([])
        with pytest.raises(RejectedInputError):
            bias_select([1.0], margin=0.5)

    def test_cauchy_schwarz(self, rng):
        x = rng.normal(0, 7, size=(500, 16))
        b = bias_select(np.linalg.norm(x, axis=1))
        a = rng.standard_normal((200, 16))
        a /= np.linalg.norm(a, axis=1, keepdims=True)
        assert np.all(x @ a.T + b >= 0)


class TestFitPipeline:
    def test_dct(self):
        rep = fit_pipeline(None, "dct", n=8)
        np.testing.assert_array_equal(rep.kernel.matrix, dct_kernel(8).matrix)
        assert rep.trace.checkpoints == () and rep.sample_count == 0

    def test_saab_two_stage(self, ar1_4x4):
        rep = fit_pipeline(ar1_4x4, "saab", (2, 2))
        k = rep.kernel
        assert k.matrix.shape == (16, 16)
        assert orthonormality_error(k.matrix) < 1e-9
        assert len(rep.stage_traces) == 2
        assert rep.sample_count == rep.trace.final_m == k.sample_count
        assert all(margin == 1.25 for _, margin in rep.bias_basis)
        x = ar1_4x4.blocks
        y = x @ k.matrix.T + k.bias
        assert np.abs(y @ k.matrix - k.bias @ k.matrix - x).max() < 1e-9

    def test_klt(self, ar1_4x4):
        rep = fit_pipeline(ar1_4x4, "klt")
        assert rep.kernel.basis.shape == (15, 16)
        assert rep.sample_count == rep.trace.final_m

    def test_deterministic(self):
        src = synth_ar1(0.9, 10.0, 4, 30_000, seed=3)
        a = fit_pipeline(src, "saab", (2, 2))
        b = fit_pipeline(synth_ar1(0.9, 10.0, 4, 30_000, seed=3), "saab", (2, 2))
        np.testing.assert_array_equal(a.kernel.matrix, b.kernel.matrix)
        np.testing.assert_array_equal(a.kernel.bias, b.kernel.bias)
        assert a.stage_traces == b.stage_traces

    def test_stream_source_matches_array(self):
        src = synth_ar1(0.9, 10.0, 4, 30_000, seed=4)
        params = ConvergenceParams(delta_m=2000)
        a = fit_pipeline(src, "saab", (2, 2), params)
        b = fit_pipeline(iter(src.blocks), "saab", (2, 2), params, n=4)
        np.testing.assert_array_equal(a.kernel.matrix, b.kernel.matrix)

    def test_mismatched_block_size(self, ar1_4x4):
        with pytest.raises(RejectedInputError):
            fit_pipeline(ar1_4x4, "saab", (2, 4))
        with pytest.raises(RejectedInputError):
            fit_pipeline(ar1_4x4, "saab", n=8)

    def test_unknown_kind(self, ar1_4x4):
        with pytest.raises(RejectedInputError):
            fit_pipeline(ar1_4x4, "wavelet")

    def test_trace_csv(self, ar1_4x4):
        rep = fit_pipeline(ar1_4x4, "saab", (2, 2))
        lines = traces_to_csv(rep.stage_traces).splitlines()
        assert lines[0] == "stage,M,frobenius_diff"
        assert lines[1].startswith("1,10000,")
        assert len(lines) == 1 + sum(len(t.checkpoints) for t in rep.stage_traces)
