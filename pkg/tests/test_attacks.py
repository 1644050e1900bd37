import numpy as np
import pytest

from anml import attacks, datagen, signals
from anml.attacks import AttackSpec


@pytest.fixture(scope="module")
def marked():
    ds = datagen.load_dataset("wine", seed=0)
    return datagen.designate_attackers(ds, 0.3, seed=1)


def test_designation_leaves_labels(marked):
    ds = datagen.load_dataset("wine", seed=0)
    np.testing.assert_array_equal(marked.labels, ds.labels)
    assert marked.corrupt_mask.sum() == round(0.3 * 178)


def test_fake_fraction_is_exact(marked):
    m = marked.corrupt_mask
    v = np.full(marked.n, 0.1)
    r = np.full(marked.n, 0.2)
    v2, r2 = attacks.fake_credentials(v, r, m, AttackSpec("credential_faking", fake_fraction=0.6), seed=0)
    faked = v2 != v
    assert faked.sum() == round(0.6 * m.sum())
    assert not faked[~m].any()
    assert np.all((v2[faked] >= 0.7) & (v2[faked] <= 0.9))
    assert np.all((r2[faked] >= 0.65) & (r2[faked] <= 0.85))


def test_gradient_alignment_geometry(marked):
    m = marked.corrupt_mask
    out = attacks.gradient_align(marked, m, gamma=0.5)
    cents = datagen.class_centroids(marked.features[~m], marked.labels[~m], 3)
    idx = np.flatnonzero(m)
    target = out.labels[idx]
    assert np.all(target != marked.labels[idx])
    np.testing.assert_allclose(out.features[idx], 0.5 * (marked.features[idx] + cents[target]))
    np.testing.assert_array_equal(out.features[~m], marked.features[~m])


def test_gamma_zero_only_relabels(marked):
    out = attacks.gradient_align(marked, marked.corrupt_mask, gamma=0.0)
    np.testing.assert_array_equal(out.features, marked.features)


@pytest.mark.parametrize("strategy", attacks.STRATEGIES)
def test_every_attacker_label_changes(marked, strategy):
    v, r = signals.simulate_signals(marked.corrupt_mask, "moderate", seed=0)
    out, v2, r2 = attacks.apply_attack(marked, v, r, AttackSpec(strategy), seed=3)
    m = marked.corrupt_mask
    assert np.all(out.labels[m] != marked.labels[m])
    np.testing.assert_array_equal(out.labels[~m], marked.labels[~m])
    faked = strategy in ("credential_faking", "joint")
    assert (not np.array_equal(v2, v)) == faked


def test_spec_validation():
    with pytest.raises(ValueError):
        AttackSpec("bribery")
    with pytest.raises(ValueError):
        AttackSpec(gamma=1.5)
    with pytest.raises(ValueError):
        AttackSpec(fake_v_range=(0.9, 0.7))
