import math

import numpy as np
import pytest

from grad_core.rng import make_rng
from grad_core.serialization import load_params, save_params
from hpe_teacher import (
    BaselineTrainConfig,
    EmbeddingNet,
    EmptyTripletSet,
    TeacherTrainConfig,
    chance_triplets,
    cluster_distances,
    cross_entropy,
    embed,
    evaluate_triplets,
    hpe_distance,
    odd_one_out_accuracy,
    odd_one_out_correct,
    odd_one_out_from_embeddings,
    train_teacher,
    train_texture_baseline,
    triplet_loss,
)
from shapeworld.triplets import Triplet


def test_triplet_loss_hinge_values():
    a, p = np.array([0.0, 0.0]), np.array([1.0, 0.0])
    assert triplet_loss(a, p, np.array([3.0, 0.0]), margin=0.2).item() == 0.0
    expected = 1.0 - math.hypot(1.0, 0.1) + 0.2
    assert triplet_loss(a, p, np.array([1.0, 0.1]), margin=0.2).item() == pytest.approx(expected)


def test_triplet_loss_averages_batch_rows():
    a = np.zeros((2, 2))
    p = np.array([[1.0, 0.0], [1.0, 0.0]])
    n = np.array([[3.0, 0.0], [1.0, 0.0]])
    assert triplet_loss(a, p, n, margin=0.5).item() == pytest.approx(0.25)


def test_cross_entropy_of_uniform_logits_is_log_k():
    assert cross_entropy(np.zeros((4, 5)), np.array([0, 1, 2, 3])).item() == pytest.approx(math.log(5))


def test_odd_one_out_ties_count_as_wrong():
    result = odd_one_out_correct(np.array([1.0, 1.0, 1.0]), np.array([2.0, 1.0, 2.0]), np.array([2.0, 2.0, 0.5]))
    assert result.tolist() == [True, False, False]


def test_random_embeddings_score_near_chance():
    rng = make_rng(0, "chance")
    a, p, n = (rng.standard_normal((6000, 8)) for _ in range(3))
    assert abs(odd_one_out_from_embeddings(a, p, n).mean() - 1 / 3) < 0.03


def test_embeddings_are_unit_norm(tiny_teacher, tiny_world):
    vectors = tiny_teacher.embed_batch(tiny_world.stack(tiny_world.ids("train")))
    np.testing.assert_allclose(np.linalg.norm(vectors, axis=1), 1.0)
    single = embed(tiny_teacher, tiny_world.images[0]).numpy()
    np.testing.assert_allclose(single, tiny_teacher.embed_batch(tiny_world.images[0].reshape(1, -1))[0])


def test_hpe_distance_properties(tiny_teacher, tiny_world):
    a, b = tiny_world.images[0], tiny_world.images[1]
    assert hpe_distance(tiny_teacher, a, a) == 0.0
    assert hpe_distance(tiny_teacher, a, b) == pytest.approx(hpe_distance(tiny_teacher, b, a))
    assert 0.0 <= hpe_distance(tiny_teacher, a, b) <= 4.0


def test_evaluation_reports_pair_matrix(tiny_teacher, tiny_world):
    triplets = tiny_world.triplets("val")
    report = evaluate_triplets(tiny_teacher, triplets, tiny_world.images, tiny_world.labels())
    assert report.n_triplets == len(triplets)
    assert 0.0 <= report.accuracy <= 1.0
    assert set(report.pair_accuracy) <= {"circle", "square", "triangle"}
    assert report.accuracy == pytest.approx(odd_one_out_accuracy(tiny_teacher, triplets, tiny_world.images))


def test_empty_triplet_set_is_rejected(tiny_teacher, tiny_world):
    with pytest.raises(EmptyTripletSet):
        odd_one_out_accuracy(tiny_teacher, [], tiny_world.images)


def test_chance_triplets_draw_distinct_images():
    triplets = chance_triplets(list(range(10)), 50, make_rng(0, "c"))
    assert len(triplets) == 50
    assert all(len(set(t.as_tuple())) == 3 for t in triplets)


def test_cluster_distances_are_finite(tiny_teacher, tiny_world):
    stats = cluster_distances(tiny_teacher, tiny_world.images, tiny_world.labels())
    for value in (stats.same_shape, stats.same_texture, stats.different_shape):
        assert 0.0 <= value <= 4.0


def _tiny_teacher_config(**overrides):
    values = dict(epochs=15, triplets_per_epoch=64, batch_size=32, hidden=[16, 8], embedding_dim=4, lr=5e-3, seed=0)
    values.update(overrides)
    return TeacherTrainConfig(**values)


def test_teacher_training_lowers_triplet_loss(tiny_world):
    net, curve = train_teacher(tiny_world, _tiny_teacher_config())
    frame = curve.to_frame()
    assert list(frame.columns) == ["epoch", "train_loss", "val_loss", "val_acc"]
    assert len(frame) == 15
    assert frame["train_loss"].iloc[-3:].mean() < frame["train_loss"].iloc[:3].mean()
    assert net.widths == (3072, 16, 8, 4)


def test_teacher_training_is_deterministic(tiny_world):
    a, _ = train_teacher(tiny_world, _tiny_teacher_config(epochs=2))
    b, _ = train_teacher(tiny_world, _tiny_teacher_config(epochs=2))
    for name in a.params.names():
        np.testing.assert_array_equal(a.params[name].data, b.params[name].data)


def test_teacher_checkpoint_roundtrip_preserves_embeddings(tiny_world, tmp_path):
    net, _ = train_teacher(tiny_world, _tiny_teacher_config(epochs=1))
    save_params(tmp_path / "teacher.ckpt", net.params)
    restored = EmbeddingNet.from_params(load_params(tmp_path / "teacher.ckpt"))
    x = tiny_world.stack(tiny_world.ids("val"))
    np.testing.assert_allclose(restored.embed_batch(x), net.embed_batch(x), atol=1e-5)


def test_texture_baseline_returns_trunk_and_curve(tiny_world):
    config = BaselineTrainConfig(epochs=3, batch_size=8, hidden=[16, 8], embedding_dim=4, lr=5e-3)
    trunk, curve = train_texture_baseline(tiny_world, config)
    assert isinstance(trunk, EmbeddingNet)
    assert len(curve) == 3
    assert curve.last("train_loss") < math.log(2) + 0.5
    assert 0.0 <= curve.last("val_acc") <= 1.0


def test_evaluation_accepts_external_refs(tiny_teacher, tiny_world):
    images = {"x.png": tiny_world.images[0], "y.png": tiny_world.images[1], "z.png": tiny_world.images[2]}
    report = evaluate_triplets(tiny_teacher, [Triplet("x.png", "y.png", "z.png")], images)
    assert report.n_triplets == 1
    assert report.pair_accuracy == {}


def test_zeroed_final_layer_embeds_every_image_to_one_unit_vector(tiny_teacher, tiny_world):
    for name in ("embed.2.weight", "embed.2.bias"):
        tiny_teacher.params[name].data = np.zeros_like(tiny_teacher.params[name].data)
    images = np.stack([tiny_world.images[0], tiny_world.images[5]]).reshape(2, -1)
    assert not np.array_equal(images[0], images[1])
    out = tiny_teacher.embed_batch(images)
    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-6)
    np.testing.assert_array_equal(out[0], out[1])
    np.testing.assert_allclose(out[0], np.full(4, 0.5))
