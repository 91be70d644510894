import numpy as np
import pytest

from grad_core import ops
from grad_core.errors import (
    CorruptFile,
    DetachedRoot,
    MissingArtifact,
    MissingGradShape,
    NonFinite,
    NotScalarRoot,
    ShapeMismatch,
    UnsupportedOp,
)
from grad_core.hashing import canonical_json, config_hash
from grad_core.optim import AdamConfig, ParamSet, frozen, optimizer_step
from grad_core.rng import derive_seed, make_rng
from grad_core.serialization import (
    decode_tensor,
    encode_tensor,
    load_param_arrays,
    load_params,
    load_tensor,
    save_params,
    save_tensor,
)
from grad_core.tensor import Tape, Tensor, active_tape, backward, no_tape
from grad_core.training import LossCurve, minibatches

CASES = 100
FD_STEP = 1e-6


def analytic_grads(fn, arrays):
    with Tape() as tape:
        leaves = [Tensor(a, requires_grad=True) for a in arrays]
        loss = fn(*leaves)
    grads = backward(loss, tape)
    return [grads[leaf] for leaf in leaves]


def numeric_grads(fn, arrays):
    out = []
    for i, base in enumerate(arrays):
        grad = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            bumped = [a.copy() for a in arrays]
            bumped[i][idx] += FD_STEP
            up = fn(*[Tensor(a) for a in bumped]).item()
            bumped[i][idx] -= 2 * FD_STEP
            down = fn(*[Tensor(a) for a in bumped]).item()
            grad[idx] = (up - down) / (2 * FD_STEP)
        out.append(grad)
    return out


def weighted(op, weight_seed=0):
    """Scalar probe sum(op(...) * w) so every output element contributes a distinct weight"""

    def fn(*tensors):
        out = op(*tensors)
        w = make_rng(weight_seed, "probe", *out.shape).standard_normal(out.shape)
        return ops.sum(ops.mul(out, w))

    return fn


def check_op(op, make_inputs):
    for case in range(CASES):
        rng = make_rng(case, "fd")
        arrays = make_inputs(rng)
        fn = weighted(op, case)
        for got, want in zip(analytic_grads(fn, arrays), numeric_grads(fn, arrays)):
            np.testing.assert_allclose(got, want, rtol=1e-4, atol=1e-6)


def away_from_zero(rng, shape):
    x = rng.standard_normal(shape)
    return np.where(np.abs(x) < 0.05, 0.5, x)


ELEMENTWISE = {
    "relu": (ops.relu, lambda r: [away_from_zero(r, (3, 4))]),
    "tanh": (ops.tanh, lambda r: [r.standard_normal((3, 4))]),
    "sigmoid": (ops.sigmoid, lambda r: [2 * r.standard_normal((5,))]),
    "square": (ops.square, lambda r: [r.standard_normal((2, 3))]),
    "sqrt": (ops.sqrt, lambda r: [0.5 + r.random((4,))]),
}

BINARY = {
    "add": (ops.add, lambda r: [r.standard_normal((3, 4)), r.standard_normal((3, 4))]),
    "sub": (ops.sub, lambda r: [r.standard_normal((3, 4)), r.standard_normal((3, 4))]),
    "mul": (ops.mul, lambda r: [r.standard_normal((3, 4)), r.standard_normal((3, 4))]),
    "mul_scalar": (ops.mul, lambda r: [r.standard_normal((3, 4)), np.array(r.standard_normal())]),
    "add_scalar": (ops.add, lambda r: [np.array(r.standard_normal()), r.standard_normal((2, 2))]),
}

STRUCTURAL = {
    "matmul_2d": (ops.matmul, lambda r: [r.standard_normal((3, 4)), r.standard_normal((4, 2))]),
    "matmul_vec_mat": (ops.matmul, lambda r: [r.standard_normal((4,)), r.standard_normal((4, 2))]),
    "matmul_mat_vec": (ops.matmul, lambda r: [r.standard_normal((3, 4)), r.standard_normal((4,))]),
    "matmul_dot": (ops.matmul, lambda r: [r.standard_normal((4,)), r.standard_normal((4,))]),
    "affine": (ops.affine, lambda r: [r.standard_normal((3, 4)), r.standard_normal((4, 2)), r.standard_normal((2,))]),
    "affine_row": (ops.affine, lambda r: [r.standard_normal((4,)), r.standard_normal((4, 2)), r.standard_normal((2,))]),
    "sum_all": (ops.sum, lambda r: [r.standard_normal((3, 4))]),
    "sum_axis0": (lambda x: ops.sum(x, axis=0), lambda r: [r.standard_normal((3, 4))]),
    "mean_axis1": (lambda x: ops.mean(x, axis=1), lambda r: [r.standard_normal((3, 4))]),
    "mean_all": (ops.mean, lambda r: [r.standard_normal((3, 4))]),
    "concat_rows": (lambda a, b: ops.concat([a, b], axis=0), lambda r: [r.standard_normal((2, 3)), r.standard_normal((1, 3))]),
    "concat_cols": (lambda a, b: ops.concat([a, b], axis=1), lambda r: [r.standard_normal((2, 3)), r.standard_normal((2, 2))]),
    "reshape": (lambda x: ops.reshape(x, (4, 3)), lambda r: [r.standard_normal((3, 4))]),
    "slice_rows": (lambda x: ops.slice(x, np.array([0, 2, 2])), lambda r: [r.standard_normal((3, 4))]),
    "slice_basic": (lambda x: ops.slice(x, np.s_[1:, :2]), lambda r: [r.standard_normal((3, 4))]),
    "l2norm": (lambda x: ops.l2norm(x, axis=1), lambda r: [r.standard_normal((3, 4)) + 0.1]),
    "normalize": (lambda x: ops.normalize(x, axis=-1), lambda r: [r.standard_normal((3, 4)) + 0.1]),
    "log_softmax": (ops.log_softmax, lambda r: [r.standard_normal((2, 5))]),
}


@pytest.mark.parametrize("name", sorted(ELEMENTWISE))
def test_elementwise_gradients_match_finite_differences(name):
    op, make_inputs = ELEMENTWISE[name]
    check_op(op, make_inputs)


@pytest.mark.parametrize("name", sorted(BINARY))
def test_binary_gradients_match_finite_differences(name):
    op, make_inputs = BINARY[name]
    check_op(op, make_inputs)


@pytest.mark.parametrize("name", sorted(STRUCTURAL))
def test_structural_gradients_match_finite_differences(name):
    op, make_inputs = STRUCTURAL[name]
    check_op(op, make_inputs)


def test_gradients_match_torch_on_composite_graph():
    torch = pytest.importorskip("torch")
    rng = make_rng(7, "torch")
    x, w, b = rng.standard_normal((5, 6)), rng.standard_normal((6, 3)), rng.standard_normal(3)

    def ours(x, w, b):
        h = ops.tanh(ops.affine(x, w, b))
        return ops.sum(ops.square(ops.slice(ops.normalize(h, axis=-1), np.s_[:, :2]))) + ops.mean(ops.log_softmax(h))

    got = analytic_grads(ours, [x, w, b])

    tx, tw, tb = (torch.tensor(a, dtype=torch.float64, requires_grad=True) for a in (x, w, b))
    h = torch.tanh(tx @ tw + tb)
    loss = (torch.nn.functional.normalize(h, dim=-1)[:, :2] ** 2).sum() + torch.log_softmax(h, dim=-1).mean()
    loss.backward()
    for ours_grad, theirs in zip(got, (tx.grad, tw.grad, tb.grad)):
        np.testing.assert_allclose(ours_grad, theirs.numpy(), rtol=1e-10, atol=1e-12)


def test_fan_out_accumulates():
    with Tape() as tape:
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        loss = ops.sum(ops.add(ops.mul(x, x), x))
    np.testing.assert_allclose(backward(loss, tape)[x], 2 * x.data + 1)


def test_unused_leaf_gets_zero_gradient():
    with Tape() as tape:
        x = Tensor([1.0, 2.0], requires_grad=True)
        y = Tensor([3.0, 4.0], requires_grad=True)
        tape.watch(y)
        loss = ops.sum(ops.square(x))
    grads = backward(loss, tape)
    np.testing.assert_array_equal(grads[y], np.zeros(2))


def test_constants_are_not_recorded():
    with Tape() as tape:
        x = Tensor([1.0, 2.0], requires_grad=True)
        c = Tensor([5.0, 6.0])
        loss = ops.sum(ops.mul(x, c))
    grads = backward(loss, tape)
    assert c not in grads
    np.testing.assert_array_equal(grads[x], c.data)


def test_no_tape_suspends_recording():
    with Tape() as tape:
        x = Tensor([1.0], requires_grad=True)
        with no_tape():
            assert active_tape() is None
            ops.square(x)
        assert active_tape() is tape
    assert len(tape) == 0


def test_backward_rejects_non_scalar_root():
    with Tape() as tape:
        x = Tensor([1.0, 2.0], requires_grad=True)
        y = ops.square(x)
    with pytest.raises(NotScalarRoot):
        backward(y, tape)


def test_backward_rejects_detached_root():
    with pytest.raises(DetachedRoot):
        backward(Tensor(1.0))


def test_non_finite_result_raises():
    with pytest.raises(NonFinite):
        ops.sqrt(Tensor([-1.0]))


def test_shape_mismatch_only_scalar_broadcast():
    with pytest.raises(ShapeMismatch):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones(3)))
    with pytest.raises(ShapeMismatch):
        ops.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_op_forward_dispatch_and_unknown_kind():
    out = ops.op_forward("concat", Tensor([1.0]), Tensor([2.0]), axis=0)
    np.testing.assert_array_equal(out.numpy(), [1.0, 2.0])
    with pytest.raises(UnsupportedOp):
        ops.op_forward("conv2d", Tensor([1.0]))


def test_l2norm_gradient_is_zero_at_origin():
    with Tape() as tape:
        x = Tensor(np.zeros(3), requires_grad=True)
        loss = ops.l2norm(x)
    np.testing.assert_array_equal(backward(loss, tape)[x], np.zeros(3))


def test_adam_first_step_moves_by_lr_against_gradient_sign():
    params = ParamSet()
    w = params.add("w", np.array([1.0, -1.0, 0.5]))
    optimizer_step(params, {"w": np.array([2.0, -3.0, 0.0])}, AdamConfig(lr=0.1))
    np.testing.assert_allclose(w.data, [0.9, -0.9, 0.5], atol=1e-6)
    assert params.step_count == 1


def test_adam_skips_params_without_gradient_and_checks_shape():
    params = ParamSet()
    a = params.add("a", np.ones(2))
    params.add("b", np.ones(2))
    optimizer_step(params, {"b": np.ones(2)}, AdamConfig())
    np.testing.assert_array_equal(a.data, np.ones(2))
    with pytest.raises(MissingGradShape):
        optimizer_step(params, {"a": np.ones(3)}, AdamConfig())


def test_adam_minimizes_quadratic():
    params = ParamSet()
    w = params.add("w", np.array([3.0, -2.0]))
    config = AdamConfig(lr=0.05)
    for _ in range(500):
        with Tape() as tape:
            loss = ops.sum(ops.square(w))
        optimizer_step(params, backward(loss, tape), config)
    assert np.all(np.abs(w.data) < 0.05)


def test_frozen_params_get_no_gradient():
    params = ParamSet()
    w = params.add("w", np.ones(2))
    with frozen(params):
        with Tape() as tape:
            x = Tensor([1.0, 2.0], requires_grad=True)
            loss = ops.sum(ops.mul(x, w))
        grads = backward(loss, tape)
    assert w not in grads
    assert w.requires_grad


def test_rng_is_keyed_and_reproducible():
    a = make_rng(3, "teacher", 1).random(4)
    np.testing.assert_array_equal(a, make_rng(3, "teacher", 1).random(4))
    assert not np.array_equal(a, make_rng(3, "teacher", 2).random(4))
    assert derive_seed(3, "image", 7) == derive_seed(3, "image", 7)
    assert derive_seed(3, "image", 7) != derive_seed(4, "image", 7)


def test_tensor_file_roundtrip_is_float32(tmp_path):
    array = np.linspace(0, 1, 12).reshape(3, 4)
    save_tensor(tmp_path / "t.stlb", array)
    loaded = load_tensor(tmp_path / "t.stlb")
    assert loaded.shape == (3, 4)
    np.testing.assert_array_equal(loaded, array.astype(np.float32))


def test_decode_rejects_bad_magic():
    blob = encode_tensor(np.ones(2))
    with pytest.raises(CorruptFile):
        decode_tensor(b"XXXX" + blob[4:])


def test_checkpoint_roundtrip_and_missing_file(tmp_path):
    params = ParamSet()
    params.add("layer.0.weight", np.arange(6.0).reshape(2, 3))
    params.add("layer.0.bias", np.array([0.5, -0.5, 0.25]))
    save_params(tmp_path / "m.ckpt", params)
    restored = load_params(tmp_path / "m.ckpt")
    assert restored.names() == params.names()
    np.testing.assert_array_equal(restored["layer.0.weight"].data, params["layer.0.weight"].data)
    with pytest.raises(MissingArtifact, match="checkpoint not found"):
        load_param_arrays(tmp_path / "absent.ckpt")


def test_truncated_checkpoint_is_corrupt(tmp_path):
    (tmp_path / "bad.ckpt").write_bytes(b"no index line")
    with pytest.raises(CorruptFile):
        load_param_arrays(tmp_path / "bad.ckpt")


def test_config_hash_ignores_key_order():
    assert canonical_json({"b": 1, "a": 2}) == '{"a":2,"b":1}'
    assert config_hash({"b": 1, "a": 2}) == config_hash({"a": 2, "b": 1})
    assert len(config_hash({})) == 16


def test_minibatches_cover_every_index_once():
    batches = list(minibatches(10, 4, make_rng(0, "mb")))
    assert [len(b) for b in batches] == [4, 4, 2]
    assert sorted(np.concatenate(batches).tolist()) == list(range(10))


def test_loss_curve_frame_has_epoch_column():
    curve = LossCurve(["train_loss"])
    curve.log(0, train_loss=1.5)
    curve.log(1, train_loss=0.5)
    frame = curve.to_frame()
    assert list(frame.columns) == ["epoch", "train_loss"]
    assert curve.last("train_loss") == 0.5


def test_normalize_maps_zero_rows_to_constant_unit_vector():
    with Tape() as tape:
        x = Tensor(np.array([[0.0, 0.0, 0.0, 0.0], [3.0, 0.0, 4.0, 0.0]]), requires_grad=True)
        y = ops.normalize(x, axis=-1)
        loss = ops.sum(ops.mul(y, np.arange(8.0).reshape(2, 4)))
    np.testing.assert_allclose(y.numpy()[0], np.full(4, 0.5))
    np.testing.assert_allclose(np.linalg.norm(y.numpy(), axis=1), 1.0)
    np.testing.assert_array_equal(backward(loss, tape)[x][0], np.zeros(4))


def test_item_requires_single_element():
    assert Tensor([2.5]).item() == 2.5
    with pytest.raises(ShapeMismatch):
        Tensor([1.0, 2.0]).item()


def test_backward_is_linear_in_the_root():
    rng = make_rng(0, "linearity")
    x0, w = rng.standard_normal(5), rng.standard_normal(5)

    def f(x):
        return ops.sum(ops.tanh(ops.mul(x, w)))

    def g(x):
        return ops.sum(ops.square(x))

    a, b = 1.7, -0.4
    combined = analytic_grads(lambda x: ops.add(ops.mul(f(x), a), ops.mul(g(x), b)), [x0])[0]
    separate = a * analytic_grads(f, [x0])[0] + b * analytic_grads(g, [x0])[0]
    np.testing.assert_allclose(combined, separate, rtol=1e-12, atol=1e-12)


def test_independent_tapes_give_identical_gradients():
    data = np.array([0.3, -1.2, 2.0])
    with Tape() as first:
        x1 = Tensor(data, requires_grad=True)
        loss1 = ops.sum(ops.mul(ops.tanh(x1), x1))
    with Tape() as second:
        x2 = Tensor(data, requires_grad=True)
        loss2 = ops.sum(ops.mul(ops.tanh(x2), x2))
    g1 = backward(loss1, first)[x1]
    g2 = backward(loss2, second)[x2]
    np.testing.assert_array_equal(g1, g2)
    np.testing.assert_array_equal(backward(loss1, first)[x1], g1)
    assert first.node_of(x2) is None and second.node_of(x1) is None


def _adam_run(seed):
    params = ParamSet()
    rng = make_rng(seed, "adam-run")
    w = params.add("w", rng.standard_normal((4, 3)))
    target = rng.standard_normal((4, 3))
    for _ in range(20):
        with Tape() as tape:
            loss = ops.sum(ops.square(ops.sub(w, target)))
        optimizer_step(params, backward(loss, tape), AdamConfig(lr=0.01))
    return params


def test_identical_optimizer_runs_are_bit_identical():
    a, b = _adam_run(7), _adam_run(7)
    for name in a.names():
        np.testing.assert_array_equal(a[name].data, b[name].data)
        np.testing.assert_array_equal(a.first_moments[name], b.first_moments[name])
