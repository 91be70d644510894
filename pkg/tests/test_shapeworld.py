import numpy as np
import pytest
from PIL import Image

from grad_core.rng import make_rng
from shapeworld import (
    ConfigInvalid,
    DatasetConfig,
    DegenerateShape,
    EmptySplit,
    InsufficientVariety,
    LabeledImage,
    MalformedRow,
    MissingImage,
    ShapeClass,
    TextureClass,
    TripletSampler,
    build_dataset,
    check_triplet,
    export_triplets_csv,
    load_external_triplets,
    load_image_file,
    load_shapeworld,
    render_image,
    sample_triplet,
    shape_mask,
)
from shapeworld.geometry import BACKGROUND, SHAPE_TAGS


@pytest.mark.parametrize("tag", SHAPE_TAGS)
def test_every_shape_renders_inside_area_bounds(tag):
    image = render_image(ShapeClass(tag, 0.5), TextureClass("solid"), seed=1)
    assert image.pixels.shape == (3, 32, 32)
    assert 0.0 <= image.pixels.min() and image.pixels.max() <= 1.0
    area = shape_mask(ShapeClass(tag, 0.5)).mean()
    assert 0.05 <= area <= 0.8


def test_shape_far_off_canvas_is_degenerate():
    with pytest.raises(DegenerateShape) as info:
        render_image(ShapeClass("circle", 0.5, offset=(40, 40)), TextureClass("solid"), seed=0)
    assert info.value.area < 0.05


def test_corners_stay_background():
    pixels = render_image(ShapeClass("square", 0.4), TextureClass("stripes"), seed=0).pixels
    np.testing.assert_allclose(pixels[:, 0, 0], BACKGROUND)


def test_shape_and_texture_parameters_are_validated():
    with pytest.raises(ConfigInvalid):
        ShapeClass("hexagon", 0.5)
    with pytest.raises(ConfigInvalid):
        ShapeClass("circle", 0.9)
    with pytest.raises(ConfigInvalid):
        TextureClass("plaid")


def test_noise_texture_depends_on_seed():
    shape, texture = ShapeClass("square", 0.6), TextureClass("noise")
    a = render_image(shape, texture, seed=1).pixels
    b = render_image(shape, texture, seed=2).pixels
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, render_image(shape, texture, seed=1).pixels)


def test_build_is_deterministic(tiny_dataset_config):
    a = build_dataset(tiny_dataset_config)
    b = build_dataset(tiny_dataset_config)
    assert a.manifest.to_json() == b.manifest.to_json()
    for image_id in a.images:
        np.testing.assert_array_equal(a.images[image_id], b.images[image_id])


def test_every_cell_is_populated_and_split(tiny_world):
    labels = tiny_world.labels()
    cells = {(shape, texture) for shape, texture in labels.values()}
    assert len(cells) == 6
    val_cells = {labels[i] for i in tiny_world.ids("val")}
    assert val_cells == cells
    assert len(tiny_world.ids("train")) + len(tiny_world.ids("val")) == 24


def test_stored_triplets_satisfy_label_rule(tiny_world):
    labels = tiny_world.labels()
    for split in ("train", "val"):
        triplets = tiny_world.triplets(split)
        assert triplets
        assert all(check_triplet(t, labels) for t in triplets)
    val_ids = set(tiny_world.ids("val"))
    assert all(set(t.as_tuple()) <= val_ids for t in tiny_world.triplets("val"))


def test_shape_and_texture_are_independent(tiny_world):
    assert tiny_world.independence_test().independent


def test_too_few_images_for_cells_is_rejected():
    config = DatasetConfig(n_images=5, shapes=["circle", "square"], textures=["solid", "stripes"])
    with pytest.raises(ConfigInvalid):
        build_dataset(config)


def test_unknown_tags_fail_validation():
    with pytest.raises(ValueError):
        DatasetConfig(shapes=["circle", "blob"])


def test_empty_validation_split_raises_on_request():
    config = DatasetConfig(
        n_images=8, shapes=["circle", "square"], textures=["solid", "stripes"],
        val_fraction=0.0, train_triplets=5, val_triplets=5,
    )
    world = build_dataset(config)
    assert world.ids("val") == []
    with pytest.raises(EmptySplit):
        world.triplets("val")


def test_sampler_needs_two_shapes_and_texture_variety():
    rng = make_rng(0, "t")
    one_shape = [LabeledImage(i, "circle", t) for i, t in enumerate(["solid", "stripes"])]
    with pytest.raises(InsufficientVariety):
        TripletSampler(one_shape)
    one_texture = [LabeledImage(i, s, "solid") for i, s in enumerate(["circle", "square"])]
    with pytest.raises(InsufficientVariety):
        sample_triplet(rng, one_texture)


def test_sampler_only_emits_valid_triplets():
    items = [LabeledImage(i, s, t) for i, (s, t) in enumerate(
        [("circle", "solid"), ("circle", "stripes"), ("square", "solid"), ("triangle", "noise")]
    )]
    labels = {item.ref: (item.shape, item.texture) for item in items}
    triplets = TripletSampler(items).sample_many(make_rng(1, "s"), 200)
    assert all(check_triplet(t, labels) for t in triplets)
    assert {t.anchor for t in triplets} == {0, 1}


def test_persisted_world_reloads(persisted_world, tmp_path):
    reloaded = load_shapeworld(tmp_path / "data")
    assert reloaded.manifest == persisted_world.manifest
    for image_id, pixels in persisted_world.images.items():
        np.testing.assert_array_equal(reloaded.images[image_id], pixels)


def test_exported_triplets_load_back(persisted_world, tmp_path):
    triplets = persisted_world.triplets("val")
    csv_path = export_triplets_csv(triplets, persisted_world.image_paths(), tmp_path / "export" / "val.csv")
    loaded, cache = load_external_triplets(csv_path)
    assert len(loaded) == len(triplets)
    first = loaded[0]
    np.testing.assert_array_equal(cache[first.anchor], persisted_world.images[triplets[0].anchor])


def test_png_images_are_resized_to_32(tmp_path):
    rgb = np.zeros((64, 64, 3), dtype=np.uint8)
    rgb[..., 0] = 255
    Image.fromarray(rgb).save(tmp_path / "red.png")
    pixels = load_image_file(tmp_path / "red.png")
    assert pixels.shape == (3, 32, 32)
    np.testing.assert_allclose(pixels[0], 1.0)
    np.testing.assert_allclose(pixels[1], 0.0)


def _write_png(path):
    Image.fromarray(np.full((8, 8, 3), 128, dtype=np.uint8)).save(path)


def test_malformed_row_reports_line_number(tmp_path):
    for name in ("a.png", "b.png", "c.png"):
        _write_png(tmp_path / name)
    (tmp_path / "t.csv").write_text("anchor,positive,negative\na.png,b.png,c.png\na.png,b.png\n")
    with pytest.raises(MalformedRow) as info:
        load_external_triplets(tmp_path / "t.csv")
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_bad_header_is_line_one(tmp_path):
    (tmp_path / "t.csv").write_text("a,b,c\n")
    with pytest.raises(MalformedRow) as info:
        load_external_triplets(tmp_path / "t.csv")
    assert info.value.line == 1


def test_missing_image_is_reported(tmp_path):
    _write_png(tmp_path / "a.png")
    (tmp_path / "t.csv").write_text("anchor,positive,negative\na.png,a.png,gone.png\n")
    with pytest.raises(MissingImage):
        load_external_triplets(tmp_path / "t.csv")


def test_sampler_covers_every_ordered_shape_pair():
    items = [
        LabeledImage(i, shape, texture)
        for i, (shape, texture) in enumerate((s, t) for s in SHAPE_TAGS for t in ("solid", "stripes"))
    ]
    labels = {item.ref: item.shape for item in items}
    triplets = TripletSampler(items).sample_many(make_rng(2, "pairs"), 10000)
    seen = {(labels[t.anchor], labels[t.negative]) for t in triplets}
    assert seen == {(a, n) for a in SHAPE_TAGS for n in SHAPE_TAGS if a != n}


def test_default_world_splits_480_120_with_every_cell_in_train():
    world = build_dataset(DatasetConfig(n_images=600, val_fraction=0.2))
    assert len(world.ids("train")) == 480
    assert len(world.ids("val")) == 120
    labels = world.labels()
    assert len({labels[i] for i in world.ids("train")}) == 30


def test_exported_csv_has_header_and_unix_line_endings(persisted_world, tmp_path):
    triplets = list(persisted_world.triplets("train"))[:3]
    csv_path = export_triplets_csv(triplets, persisted_world.image_paths(), tmp_path / "t.csv")
    raw = csv_path.read_bytes()
    assert raw.startswith(b"anchor,positive,negative\n")
    assert b"\r" not in raw
    assert len(raw.decode("utf-8").splitlines()) == 4
