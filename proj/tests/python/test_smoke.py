import numpy as np
import pytest

import modfnn


def test_catalog_and_counts():
    cat = modfnn.feature_catalog()
    assert len(cat) == 17
    assert cat[15].name == "Y"
    arch = modfnn.FnnArch([900, 256, 25])
    assert modfnn.count_params(17, 40, 2, arch) == 322430160
    assert modfnn.count_neurons(6, 40, 2, arch) == 566880


def test_transform_image_shape_and_range():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, size=(64, 64, 3), dtype=np.uint8)
    x = modfnn.transform_image(modfnn.feature_by_name("BW"), img)
    assert x.shape == (900,)
    assert np.all(np.abs(x) <= 1.0)
    with pytest.raises(modfnn.Error):
        modfnn.transform_image(modfnn.feature_by_name("R"), np.zeros((5, 4, 3), dtype=np.uint8))


def test_forward_is_a_distribution():
    p = modfnn.init_params(modfnn.FnnArch([6, 5, 3]), 4)
    probs = modfnn.forward(p, np.linspace(-1, 1, 6))
    assert probs.shape == (3,)
    assert abs(probs.sum() - 1.0) < 1e-12
    top = modfnn.predict_top(p, np.linspace(-1, 1, 6), 3)
    assert [c.loss for c in top] == sorted(c.loss for c in top)


def test_train_and_classify(tmp_path):
    ds = modfnn.make_synthetic_dataset(label_count=4, count=32, size=16, seed=3)
    assert len(ds) == 32
    batches = modfnn.build_featured_batches(ds, ["R", "G", "B"], 2, 1)
    plan = modfnn.TrainingPlan()
    plan.hidden = [16]
    plan.sgd.max_epochs = 60
    model = modfnn.train_proto_model(batches, plan)
    assert model.complete()
    assert all(c.status == modfnn.CellStatus.ErrorFree for c in model.cells)

    modfnn.save_proto_model(model, tmp_path / "model")
    loaded = modfnn.load_proto_model(tmp_path / "model")
    assert loaded.tag() == model.tag()

    out = modfnn.classify(loaded, ds.image(0), 3)
    assert 0 <= out.label < 4
    ev = modfnn.model_evaluation(loaded, ds, 3)
    assert 0.0 <= ev.accuracy <= 100.0
    cm = modfnn.confusion_matrix([o.label for o in ev.outcomes], ds.labels, 4)
    assert cm.shape == (4, 4)
    assert cm.sum() == 32
