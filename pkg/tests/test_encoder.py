import numpy as np
import pytest

from lossgate import (
    DomainError,
    NumericError,
    encode,
    encode_backward,
    encode_batch,
    encode_batch_backward,
    finite_diff_grad,
    init_encoder,
    load_encoder,
    max_rel_error,
    save_encoder,
)
from lossgate.encoder import EncoderParams

SIZES = [5, 8, 8, 6]


def replace_array(params: EncoderParams, idx: int, value: np.ndarray) -> EncoderParams:
    arrays = [a.copy() for a in params.arrays()]
    arrays[idx] = value
    return EncoderParams.from_arrays(arrays)


class TestInit:
    def test_deterministic(self):
        a = init_encoder(SIZES, seed=3)
        b = init_encoder(SIZES, seed=3)
        for wa, wb in zip(a.arrays(), b.arrays()):
            assert np.array_equal(wa, wb)

    def test_biases_zero_and_weights_fan_in_bounded(self):
        p = init_encoder(SIZES, seed=1)
        for b in p.biases:
            assert np.all(b == 0.0)
        for w in p.weights:
            assert np.max(np.abs(w)) <= 1.0 / np.sqrt(w.shape[0])

    def test_layer_sizes_exposed(self):
        p = init_encoder(SIZES, seed=0)
        assert list(p.layer_sizes) == SIZES
        assert p.input_dim == 5 and p.embedding_dim == 6


class TestForward:
    def test_output_is_unit_norm(self):
        p = init_encoder(SIZES, seed=2)
        rng = np.random.default_rng(0)
        for _ in range(5):
            e = encode(p, rng.normal(size=(9, 5)))
            assert np.linalg.norm(e) == pytest.approx(1.0, abs=1e-9)

    def test_repeated_frame_equals_single_frame(self):
        p = init_encoder(SIZES, seed=2)
        frame = np.random.default_rng(1).normal(size=(1, 5))
        tiled = np.repeat(frame, 7, axis=0)
        assert np.allclose(encode(p, frame), encode(p, tiled), atol=1e-12)

    def test_frame_order_invariance(self):
        p = init_encoder(SIZES, seed=2)
        rng = np.random.default_rng(3)
        frames = rng.normal(size=(8, 5))
        shuffled = frames[rng.permutation(8)]
        assert np.allclose(encode(p, frames), encode(p, shuffled), atol=1e-12)

    def test_batch_matches_single(self):
        p = init_encoder(SIZES, seed=2)
        rng = np.random.default_rng(4)
        stack = rng.normal(size=(6, 9, 5))
        batch, _ = encode_batch(p, stack)
        for i in range(6):
            assert np.allclose(batch[i], encode(p, stack[i]), atol=1e-12)

    def test_degenerate_embedding_raises(self):
        # zero weights in the last layer pool to the zero vector
        p = init_encoder(SIZES, seed=2)
        p = replace_array(p, 4, np.zeros_like(p.weights[2]))
        with pytest.raises(NumericError, match="degenerate"):
            encode(p, np.random.default_rng(0).normal(size=(4, 5)))

    def test_shape_errors(self):
        p = init_encoder(SIZES, seed=2)
        with pytest.raises(DomainError):
            encode(p, np.zeros((4, 3)))  # wrong feature dim
        with pytest.raises(DomainError):
            encode_batch(p, np.zeros((4, 5)))  # missing batch axis


class TestBackward:
    def test_zero_upstream_gives_zero_grads(self):
        p = init_encoder(SIZES, seed=5)
        grads = encode_backward(p, np.random.default_rng(0).normal(size=(6, 5)), np.zeros(6))
        assert all(np.all(g == 0.0) for g in grads)

    def test_radial_upstream_annihilated(self):
        # normalization projects out any component parallel to the embedding
        p = init_encoder(SIZES, seed=5)
        frames = np.random.default_rng(1).normal(size=(6, 5))
        e = encode(p, frames)
        grads = encode_backward(p, frames, 2.5 * e)
        assert all(np.max(np.abs(g)) < 1e-12 for g in grads)

    def test_matches_finite_differences_on_random_instances(self):
        rng = np.random.default_rng(6)
        for trial in range(10):
            p = init_encoder(SIZES, seed=trial)
            frames = rng.normal(size=(rng.integers(2, 7), 5))
            upstream = rng.normal(size=6)
            grads = encode_backward(p, frames, upstream)
            arrays = p.arrays()
            for idx in range(len(arrays)):
                def f(x, idx=idx):
                    return float(np.dot(upstream, encode(replace_array(p, idx, x), frames)))
                fd = finite_diff_grad(f, arrays[idx].copy(), h=1e-5)
                assert max_rel_error(grads[idx], fd) < 1e-4

    def test_upstream_shape_checked(self):
        p = init_encoder(SIZES, seed=5)
        with pytest.raises(DomainError):
            encode_backward(p, np.zeros((3, 5)), np.zeros(4))
        _, cache = encode_batch(p, np.zeros((2, 3, 5)) + 0.5)
        with pytest.raises(DomainError):
            encode_batch_backward(p, cache, np.zeros((3, 6)))


class TestCheckpoint:
    def test_round_trip_bit_identical(self, tmp_path):
        p = init_encoder(SIZES, seed=9)
        path = tmp_path / "enc.ckpt"
        save_encoder(path, p)
        q = load_encoder(path)
        assert list(q.layer_sizes) == SIZES
        for a, b in zip(p.arrays(), q.arrays()):
            assert np.array_equal(a, b)

    def test_file_bytes_reproducible(self, tmp_path):
        p = init_encoder(SIZES, seed=9)
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_encoder(p1, p)
        save_encoder(p2, p)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOTANENC" + b"\0" * 16)
        with pytest.raises(DomainError):
            load_encoder(path)
