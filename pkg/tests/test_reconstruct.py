import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfcycle.lightfield import LightField, dense_angular_size, subsample
from lfcycle.metrics import evaluate
from lfcycle.reconstruct import ReconstructionPlan, multistep_reconstruct, reconstruct, upsample_axis
from lfcycle.synth import SceneSpec, gen_planar_lf, oracle_pair


class Blend:
    """Plain average of the two frames."""

    def interpolate(self, a, b):
        return 0.5 * (np.asarray(a) + np.asarray(b))


def rand_lf(rows, cols, seed=0, h=6, w=6):
    return LightField(np.random.default_rng(seed).uniform(size=(rows, cols, h, w, 3)))


@pytest.mark.parametrize("n,expect", [(5, 9), (2, 3)])
def test_upsample_axis_counts(n, expect):
    lf = rand_lf(2, n)
    out = upsample_axis(lf, "h", Blend())
    assert out.grid == (2, expect)
    assert np.array_equal(out.views[:, 0::2], lf.views)


def test_upsample_axis_vertical():
    lf = rand_lf(3, 2)
    out = upsample_axis(lf, "v", Blend())
    assert out.grid == (5, 2)
    np.testing.assert_allclose(out.view(1, 1), 0.5 * (lf.view(0, 1) + lf.view(1, 1)), atol=1e-7)


def test_plan_validation():
    with pytest.raises(ValueError):
        ReconstructionPlan(3, Blend(), Blend())
    with pytest.raises(ValueError):
        ReconstructionPlan(2, Blend(), Blend(), order="hh")
    assert ReconstructionPlan(4, Blend(), Blend()).steps == 2


def test_reconstruct_5x5_to_9x9():
    lf = rand_lf(5, 5)
    out = reconstruct(lf, ReconstructionPlan(2, Blend(), Blend()))
    assert out.grid == (9, 9)
    assert np.array_equal(out.views[::2, ::2], lf.views)
    assert out.rows * out.cols - lf.rows * lf.cols == 56


def test_reconstruct_3x3_to_5x5():
    assert reconstruct(rand_lf(3, 3), ReconstructionPlan(2, Blend(), Blend())).grid == (5, 5)


def test_multistep_alpha4():
    lf = rand_lf(3, 3)
    out = multistep_reconstruct(lf, ReconstructionPlan(4, Blend(), Blend()))
    assert out.grid == (9, 9)
    assert out.rows * out.cols - 9 == 72
    assert np.array_equal(out.views[::4, ::4], lf.views)
    assert multistep_reconstruct(rand_lf(2, 2), ReconstructionPlan(4, Blend(), Blend())).grid == (5, 5)


def test_multistep_alpha2_equals_reconstruct():
    lf = rand_lf(3, 4)
    plan = ReconstructionPlan(2, Blend(), Blend(), "vh")
    assert np.array_equal(multistep_reconstruct(lf, plan).views, reconstruct(lf, plan).views)


def test_reconstruct_rejects_1xN():
    with pytest.raises(ValueError):
        reconstruct(rand_lf(1, 3), ReconstructionPlan(2, Blend(), Blend()))


@settings(max_examples=24, deadline=None)
@given(n=st.sampled_from([2, 3, 5]), alpha=st.sampled_from([2, 4]), order=st.sampled_from(["hv", "vh"]),
       seed=st.integers(0, 1000))
def test_structure_law(n, alpha, order, seed):
    lf = rand_lf(n, n, seed, 4, 4)
    out = multistep_reconstruct(lf, ReconstructionPlan(alpha, Blend(), Blend(), order))
    N = dense_angular_size(n, alpha)
    assert out.grid == (N, N)
    assert np.array_equal(out.views[::alpha, ::alpha], lf.views)


@pytest.mark.parametrize("order", ["hv", "vh"])
def test_oracle_reconstruction_exact_interior(order):
    gt = gen_planar_lf(SceneSpec(disparity=2, grid=(9, 9), size=(64, 64), seed=3))
    sparse = subsample(gt, 2)
    oh, ov = oracle_pair(2, 2)
    out = reconstruct(sparse, ReconstructionPlan(2, oh, ov, order))
    m = 2
    assert np.array_equal(out.views[..., m:-m, m:-m, :], gt.views[..., m:-m, m:-m, :])
    rep = evaluate(out, gt, 2, margin=m)
    assert rep.mean_psnr == 99.0 and len(rep.records) == 56


def test_oracle_multistep_alpha4():
    gt = gen_planar_lf(SceneSpec(disparity=1, grid=(9, 9), size=(64, 64), seed=4))
    sparse = subsample(gt, 4)
    stages = [oracle_pair(1, 4), oracle_pair(1, 2)]
    out = multistep_reconstruct(sparse, ReconstructionPlan(4, None, None, stage_models=stages))
    m = 3  # edge bands add up over the stages: 2 px then 1 px more
    assert np.array_equal(out.views[..., m:-m, m:-m, :], gt.views[..., m:-m, m:-m, :])
