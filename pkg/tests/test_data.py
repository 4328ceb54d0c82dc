import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowres.data import (
    DataError,
    Dataset,
    SplitPlan,
    largest_remainder,
    load_csv,
    low_resource_protocol,
    save_csv,
    stratified_holdout_indices,
    stratified_kfold,
    synth_gaussian,
)
from lowres.numerics import Rng


def labelled(counts):
    labels = np.repeat(np.arange(len(counts)), counts)
    return Dataset(np.arange(labels.size, dtype=float)[:, None], labels, len(counts))


def per_class(ds, idx):
    return np.bincount(ds.labels[idx], minlength=ds.num_classes)


# -- csv ----------------------------------------------------------------------

def write(tmp_path, text):
    p = tmp_path / "d.csv"
    p.write_text(text, encoding="utf-8")
    return p


def test_csv_first_appearance_mapping(tmp_path):
    ds = load_csv(write(tmp_path, "x,label,y\n1,a,2\n3,b,4\n5,a,6\n"))
    assert ds.num_classes == 2
    assert ds.labels.tolist() == [0, 1, 0]
    assert ds.features.tolist() == [[1, 2], [3, 4], [5, 6]]
    assert "a=0" in ds.name and "b=1" in ds.name


def test_csv_header_only(tmp_path):
    with pytest.raises(DataError, match="empty dataset"):
        load_csv(write(tmp_path, "x,label\n"))


def test_csv_empty_file(tmp_path):
    with pytest.raises(DataError, match="empty file"):
        load_csv(write(tmp_path, ""))


def test_csv_missing_label(tmp_path):
    with pytest.raises(DataError, match="label"):
        load_csv(write(tmp_path, "x,y\n1,2\n"))


def test_csv_bad_cell_position(tmp_path):
    with pytest.raises(DataError, match="row 2, column 3"):
        load_csv(write(tmp_path, "a,b,c,label\n1,2,3,p\n4,5,x,q\n"))


def test_csv_roundtrip(tmp_path):
    ds = synth_gaussian(3, 4, (3, 2, 4), 1.0, 0.5, Rng(1))
    path = tmp_path / "r.csv"
    save_csv(ds, path)
    back = load_csv(path)
    assert np.array_equal(back.features, ds.features)
    # labels are renumbered by first appearance; the partition must survive
    mapping = {}
    for a, b in zip(ds.labels, back.labels):
        assert mapping.setdefault(a, b) == b


# -- synthetic ------------------------------------------------------------------

def test_synth_deterministic():
    a = synth_gaussian(2, 5, (10, 20), 1.5, 1.0, Rng(3))
    b = synth_gaussian(2, 5, (10, 20), 1.5, 1.0, Rng(3))
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)


def test_synth_counts():
    ds = synth_gaussian(2, 5, (10, 20), 1.5, 1.0, Rng(3))
    assert len(ds) == 30 and int(np.sum(ds.labels == 0)) == 10


def test_synth_zero_separation_is_indistinguishable():
    ds = synth_gaussian(2, 3, (4000, 4000), 0.0, 1.0, Rng(5))
    means = [ds.features[ds.labels == c].mean(axis=0) for c in range(2)]
    assert np.max(np.abs(means[0] - means[1])) < 0.1


def test_synth_class_means_at_separation():
    ds = synth_gaussian(3, 6, (3000, 3000, 3000), 2.0, 1.0, Rng(5))
    for c in range(3):
        assert np.linalg.norm(ds.features[ds.labels == c].mean(axis=0)) == pytest.approx(2.0, abs=0.1)


def test_synth_rejects_bad_args():
    with pytest.raises(ValueError):
        synth_gaussian(1, 3, (5,), 1.0, 1.0, Rng(0))
    with pytest.raises(ValueError):
        synth_gaussian(2, 3, (5, 5), 1.0, 0.0, Rng(0))


# -- allocation --------------------------------------------------------------

def test_largest_remainder_examples():
    assert largest_remainder([50, 50], 0.75).tolist() == [38, 37]
    assert largest_remainder([4, 4], 0.5).tolist() == [2, 2]
    assert largest_remainder([5, 4], 0.5).tolist() == [3, 2]


# -- holdout ------------------------------------------------------------------

def test_holdout_examples():
    ds = labelled([50, 50])
    a, b = stratified_holdout_indices(ds, 0.75, Rng(0))
    assert a.size == 75 and sorted(per_class(ds, a).tolist()) == [37, 38]
    ds = labelled([4, 4])
    a, b = stratified_holdout_indices(ds, 0.5, Rng(0))
    assert per_class(ds, a).tolist() == [2, 2] == per_class(ds, b).tolist()


def test_holdout_deterministic():
    ds = labelled([7, 9, 3])
    a1, _ = stratified_holdout_indices(ds, 0.4, Rng(11))
    a2, _ = stratified_holdout_indices(ds, 0.4, Rng(11))
    assert np.array_equal(a1, a2)


def test_holdout_empty_part():
    with pytest.raises(DataError):
        stratified_holdout_indices(labelled([1, 1]), 0.1, Rng(0))


def test_holdout_bad_fraction():
    with pytest.raises(ValueError):
        stratified_holdout_indices(labelled([4, 4]), 1.0, Rng(0))


# -- k-fold --------------------------------------------------------------------

def test_kfold_one_per_class_per_fold():
    ds = labelled([4, 4])
    folds = stratified_kfold(ds, 4, Rng(0))
    for f in folds.indices:
        assert per_class(ds, f).tolist() == [1, 1]


def test_kfold_six_four():
    ds = labelled([6, 4])
    folds = stratified_kfold(ds, 2, Rng(0))
    for f in folds.indices:
        assert per_class(ds, f).tolist() == [3, 2]


def test_kfold_singleton_class_warns():
    ds = labelled([8, 1])
    folds = stratified_kfold(ds, 4, Rng(0))
    assert sum(per_class(ds, f)[1] for f in folds.indices) == 1
    assert folds.warnings and "class 1" in folds.warnings[0]


def test_kfold_too_many_folds():
    with pytest.raises(DataError):
        stratified_kfold(labelled([2, 2]), 5, Rng(0))


def test_kfold_train_val():
    ds = labelled([5, 5])
    folds = stratified_kfold(ds, 5, Rng(2))
    tr, va = folds.train_val(0)
    assert set(tr).isdisjoint(va) and len(tr) + len(va) == 10


# -- property: every split partitions and stratifies (500 cases) ----------------

def random_split_case(i):
    rng = Rng(i).split("case")
    C = int(rng.integers(2, 6))
    counts = rng.integers(1, 30, size=C)
    ds = labelled(counts.tolist())
    kind = ("holdout", "kfold", "low_resource")[i % 3]
    return ds, kind, rng


@pytest.mark.parametrize("i", range(500))
def test_split_partitions_and_stratifies(i):
    ds, kind, rng = random_split_case(i)
    n = len(ds)
    counts = ds.class_counts()
    if kind == "kfold":
        k = int(rng.integers(2, min(n, 10) + 1))
        parts = stratified_kfold(ds, k, rng.split("split")).indices
        pc = np.array([per_class(ds, p) for p in parts])
        assert np.all(pc.max(axis=0) - pc.min(axis=0) <= 1)
    else:
        frac = float(rng.uniform(0.05, 0.95))
        try:
            parts = list(stratified_holdout_indices(ds, frac, rng.split("split")))
        except DataError:
            return  # legitimately empty part for tiny sets
        first = per_class(ds, parts[0])
        assert np.all(np.abs(first - frac * counts) < 1)
        assert np.all(np.abs(per_class(ds, parts[1]) - (1 - frac) * counts) < 1)
    joined = np.sort(np.concatenate(parts))
    assert np.array_equal(joined, np.arange(n))


# -- low-resource protocol --------------------------------------------------

@pytest.mark.parametrize("total,pool", [(3771, 75), (10662, 213)])
def test_low_resource_pool_sizes(total, pool):
    # smallest and largest corpus sizes: 2% of the samples form the labeled pool
    ds = labelled([total // 2, total - total // 2])
    (p, t), = low_resource_protocol(ds, 0.02, 1, Rng(0))
    assert len(p) == pool and len(t) == total - pool


def test_low_resource_repetitions_differ():
    ds = labelled([200, 200])
    (p0, _), (p1, _) = low_resource_protocol(ds, 0.05, 2, Rng(0))
    assert not np.array_equal(p0.features, p1.features)


def test_low_resource_fixed_test_set():
    ds, test = labelled([100, 100]), labelled([5, 5])
    for _, t in low_resource_protocol(ds, 0.1, 3, Rng(0), test_set=test):
        assert t is test


def test_low_resource_pool_too_small():
    with pytest.raises(DataError):
        low_resource_protocol(labelled([1, 1, 1, 50]), 0.03, 1, Rng(0))


def test_split_plan_validation():
    SplitPlan("kfold", k=4)
    with pytest.raises(ValueError):
        SplitPlan("kfold", k=1)
    with pytest.raises(ValueError):
        SplitPlan("holdout", train_frac=1.5)
    with pytest.raises(ValueError):
        SplitPlan("bootstrap")


@settings(max_examples=40)
@given(st.lists(st.integers(1, 40), min_size=2, max_size=5), st.integers(0, 10**6))
def test_holdout_half_property(counts, seed):
    ds = labelled(counts)
    try:
        a, b = stratified_holdout_indices(ds, 0.5, Rng(seed))
    except DataError:
        return
    assert np.all(np.abs(per_class(ds, a) - per_class(ds, b)) <= 1)
