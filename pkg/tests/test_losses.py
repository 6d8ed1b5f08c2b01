import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lfcycle import autodiff as ad
from lfcycle.autodiff import Tensor
from lfcycle.interp import ArchConfig, InterpolatorModel, to_nchw
from lfcycle.lightfield import ViewTriplet, extract_triplets, subsample
from lfcycle.losses import (FeatureExtractor, LossWeights, TripletBatch, cycle_loss,
                            cycle_reconstruct, l1, perceptual_loss, reconstruction_loss,
                            self_supervised_terms, supervised_loss, total_objective)
from lfcycle.synth import SceneSpec, TranslationOracle, gen_planar_lf

from gradcheck import max_rel_error, numeric_grad

TINY = ArchConfig(widths=(4,), kernel_size=3)


def identity_model(a, b):
    """Behaves as identity when both frames are equal."""
    return ad.mul(ad.add(a, b), 0.5)


def flat_triplet(img, **kw):
    return ViewTriplet(img, img, img, "h", (0, 1), **kw)


def rand_triplet(rng, h=8, w=8, gt=False):
    imgs = rng.uniform(size=(5, h, w, 3))
    return ViewTriplet(imgs[0], imgs[1], imgs[2], "h", (0, 1),
                       imgs[3] if gt else None, imgs[4] if gt else None)


def const_offset_model(offset):
    """Returns the first frame plus a constant."""
    return lambda a, b: ad.add(a, offset)


# ---------------------------------------------------------------- cycle


def test_cycle_reconstruct_identity_fixed_point():
    img = np.random.default_rng(0).uniform(size=(8, 8, 3))
    out = cycle_reconstruct(flat_triplet(img), identity_model)
    assert out.shape == (1, 3, 8, 8)
    np.testing.assert_allclose(out.data[0], to_nchw(img), atol=1e-12)


def test_cycle_loss_zero_and_offset():
    img = np.random.default_rng(1).uniform(0.2, 0.7, size=(8, 8, 3))
    assert cycle_loss(flat_triplet(img), identity_model).item() == 0.0
    # two stages of +0.05 make the cycle estimate centre + 0.1
    assert cycle_loss(flat_triplet(img), const_offset_model(0.05)).item() == pytest.approx(0.1, abs=1e-6)


def test_cycle_loss_brute_force():
    rng = np.random.default_rng(2)
    tr = rand_triplet(rng)
    m = lambda a, b: ad.add(ad.mul(a, 0.3), ad.mul(b, 0.7))  # noqa: E731
    lc = cycle_loss(tr, m).item()
    ml = 0.3 * tr.left + 0.7 * tr.center
    mr = 0.3 * tr.center + 0.7 * tr.right
    ref = np.mean(np.abs(0.3 * ml + 0.7 * mr - tr.center))
    assert abs(lc - ref) < 1e-6


def test_reconstruction_loss_examples():
    img = np.random.default_rng(3).uniform(0.2, 0.7, size=(8, 8, 3))
    assert reconstruction_loss(flat_triplet(img), identity_model).item() == 0.0
    assert reconstruction_loss(flat_triplet(img), const_offset_model(0.05)).item() == pytest.approx(0.05, abs=1e-6)


def _planar_triplet(d):
    lf = subsample(gen_planar_lf(SceneSpec(disparity=d, grid=(1, 9), size=(48, 48), seed=11)), 2)
    return extract_triplets(lf, "h")[1]


@pytest.mark.parametrize("d", [1, 2, -1])
def test_oracle_losses_vanish_on_interior(d):
    tr = _planar_triplet(d)
    # sparse neighbours are 2d apart, the outer pair of a triplet 4d apart
    m = 2 * 2 * abs(d) + 1
    assert cycle_loss(tr, TranslationOracle(2 * d), margin=m).item() <= 1e-6
    assert reconstruction_loss(tr, TranslationOracle(4 * d), margin=m).item() <= 1e-6
    # without the margin the edge-replicated band is visible
    assert cycle_loss(tr, TranslationOracle(2 * d)).item() > 1e-6


# ---------------------------------------------------------------- perceptual


def test_perceptual_identical_is_zero():
    x = np.random.default_rng(4).uniform(size=(16, 16, 3))
    assert perceptual_loss(x, x, FeatureExtractor.seeded()).item() == 0.0


def test_perceptual_identity_extractor_is_mse():
    x = np.random.default_rng(5).uniform(0.2, 0.7, size=(8, 8, 3))
    lp = perceptual_loss(x + 0.1, x, FeatureExtractor.identity()).item()
    assert lp == pytest.approx(0.01, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_perceptual_symmetric(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.uniform(size=(2, 16, 16, 3))
    ext = FeatureExtractor.seeded(dtype=np.float64)
    assert perceptual_loss(x, y, ext).item() == pytest.approx(perceptual_loss(y, x, ext).item(), rel=1e-12)


def test_perceptual_shape_mismatch():
    with pytest.raises(ValueError, match="shapes"):
        perceptual_loss(np.zeros((8, 8, 3)), np.zeros((8, 6, 3)), FeatureExtractor.identity())


def test_seeded_extractor_reproducible():
    a, b = FeatureExtractor.seeded(seed=3), FeatureExtractor.seeded(seed=3)
    for (wa, _), (wb, _) in zip(a.stages, b.stages):
        assert np.array_equal(wa, wb)
    with pytest.raises(ValueError):
        a.stages[0][0][0, 0, 0, 0] = 1.0


# ---------------------------------------------------------------- supervised


def test_supervised_examples():
    rng = np.random.default_rng(6)
    left, center, right = rng.uniform(0.2, 0.7, size=(3, 8, 8, 3))
    # a midpoint model that is exactly the blend, and gt equal to that blend
    gl, gr = 0.5 * (left + center), 0.5 * (center + right)
    tr = ViewTriplet(left, center, right, "h", (0, 1), gl, gr)
    assert supervised_loss(tr, identity_model).item() == pytest.approx(0.0, abs=1e-6)
    off = ViewTriplet(left, center, right, "h", (0, 1), gl + 0.2, gr - 0.2)
    assert supervised_loss(off, identity_model).item() == pytest.approx(0.2, abs=1e-6)


def test_supervised_brute_force():
    rng = np.random.default_rng(7)
    tr = rand_triplet(rng, gt=True)
    ref = 0.5 * (np.abs(0.5 * (tr.left + tr.center) - tr.gt_left_mid).mean()
                 + np.abs(0.5 * (tr.center + tr.right) - tr.gt_right_mid).mean())
    assert abs(supervised_loss(tr, identity_model).item() - ref) < 1e-6


def test_supervised_requires_gt():
    with pytest.raises(ValueError, match="ground-truth"):
        supervised_loss(rand_triplet(np.random.default_rng(0)), identity_model)


# ---------------------------------------------------------------- objective


def test_total_objective_examples():
    w = LossWeights()
    assert total_objective(0.0, 0.0, 0.0, w).item() == 0.0
    assert total_objective(1.0, 1.0, 1.0, w).item() == pytest.approx(2.06, abs=1e-6)
    assert total_objective(0.3, 0.7, 0.9, LossWeights(0, 1, 0)).item() == pytest.approx(0.7)


def test_default_loss_weights():
    w = LossWeights()
    assert (w.cycle, w.recon, w.perceptual) == (1.0, 1.0, 0.06)
    with pytest.raises(ValueError):
        LossWeights(cycle=-1)


def test_self_supervised_terms_match_separate_losses():
    rng = np.random.default_rng(8)
    model = InterpolatorModel.init(TINY, seed=0, dtype=np.float64)
    trips = [rand_triplet(rng) for _ in range(2)]
    batch = TripletBatch.from_triplets(trips, np.float64)
    ext = FeatureExtractor.seeded(dtype=np.float64)
    total, lc, lr, lp = self_supervised_terms(batch, model, ext, LossWeights())
    assert lc.item() == pytest.approx(cycle_loss(batch, model).item(), rel=1e-12)
    assert lr.item() == pytest.approx(reconstruction_loss(batch, model).item(), rel=1e-12)
    cyc = cycle_reconstruct(batch, model)
    assert lp.item() == pytest.approx(perceptual_loss(cyc, batch.center, ext).item(), rel=1e-12)
    assert total.item() == pytest.approx(lc.item() + lr.item() + 0.06 * lp.item(), rel=1e-12)
    _, lc0, lr0, _ = self_supervised_terms(batch, model, ext, LossWeights(), use_cycle=False)
    assert lc0.item() == 0.0 and lr0.item() == pytest.approx(lr.item(), rel=1e-12)


# ---------------------------------------------------------------- gradients of the four losses


def _perturbed_tiny(seed):
    rng = np.random.default_rng(seed)
    model = InterpolatorModel.init(TINY, seed=seed, dtype=np.float64)
    for p in model.parameters():
        p.data += 0.05 * rng.standard_normal(p.shape)
    return model


def _loss_fns():
    ext = FeatureExtractor.seeded(widths=(4, 4), dtype=np.float64)
    return {
        "cycle": cycle_loss,
        "recon": reconstruction_loss,
        "perceptual": lambda b, m: perceptual_loss(cycle_reconstruct(b, m), b.center, ext),
        "supervised": supervised_loss,
    }


@pytest.mark.parametrize("name", ["cycle", "recon", "perceptual", "supervised"])
def test_loss_gradients_finite_difference(name):
    model = _perturbed_tiny(9)
    tr = rand_triplet(np.random.default_rng(10), gt=True)
    batch = TripletBatch.from_triplets([tr], np.float64)
    fn = _loss_fns()[name]

    def loss():
        return fn(batch, model)

    ad.backward(loss())
    rng = np.random.default_rng(11)
    for pname, p in model.params.items():
        # the larger tensors are sampled to keep the suite fast
        idx = None if p.data.size <= 64 else rng.choice(p.data.size, 48, replace=False)
        num = numeric_grad(lambda: loss().item(), p.data, indices=idx)
        assert max_rel_error(p.grad, num, idx) < 1e-4, pname


# ---------------------------------------------------------------- properties


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), same=st.booleans())
def test_losses_nonnegative_and_zero_iff_identical(seed, same):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(1, 3, 8, 8)).astype(np.float32)
    y = x.copy() if same else np.clip(x + rng.uniform(0.01, 0.1, size=x.shape).astype(np.float32), 0, 1)
    for fn in (l1, lambda a, b: perceptual_loss(a, b, FeatureExtractor.identity())):
        v = fn(Tensor(x), Tensor(y)).item()
        assert v >= 0
        assert (v <= 1e-7) == same


# factors stay clear of the subnormal range, where a product loses the exactness of doubling
@given(lc=st.one_of(st.just(0.0), st.floats(1e-6, 10)), wc=st.one_of(st.just(0.0), st.floats(1e-6, 5)),
       lr=st.floats(0, 10), lp=st.floats(0, 10))
def test_total_objective_linear_in_cycle(lc, wc, lr, lp):
    w = LossWeights(cycle=wc)
    f64 = lambda v: Tensor(np.float64(v))  # noqa: E731
    contribution = total_objective(f64(lc), f64(0), f64(0), w).item()
    assert total_objective(f64(2 * lc), f64(0), f64(0), w).item() == 2 * contribution
    full = total_objective(f64(lc), f64(lr), f64(lp), w).item()
    assert full == pytest.approx(wc * lc + lr + 0.06 * lp, rel=1e-12, abs=1e-12)
