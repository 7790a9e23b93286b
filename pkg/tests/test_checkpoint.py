import numpy as np
import pytest

from gunwatch import checkpoint as ck
from gunwatch.architectures import build_paper_cnn, predict
from gunwatch.network import Network, dense, flatten, softmax_layer


@pytest.fixture
def small_net():
    net = build_paper_cnn(3, width_scale=0.125, seed=4)
    net.meta["class_names"] = ["a", "b", "c"]
    return net


class TestRoundTrip:
    def test_params_survive_within_f32_rounding(self, small_net, tmp_path):
        path = tmp_path / "net.ckpt"
        ck.save_checkpoint(small_net, path)
        loaded = ck.load_checkpoint(path)
        for i in small_net.parameterized_indices():
            for key in ("w", "b"):
                orig = small_net.params[i][key]
                got = loaded.params[i][key]
                np.testing.assert_array_equal(got, orig.astype(np.float32).astype(np.float64))

    def test_second_save_byte_identical(self, small_net, tmp_path):
        p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        ck.save_checkpoint(small_net, p1)
        ck.save_checkpoint(ck.load_checkpoint(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_metadata_and_structure_survive(self, small_net, tmp_path):
        path = tmp_path / "net.ckpt"
        small_net.trainable[0] = False
        ck.save_checkpoint(small_net, path)
        loaded = ck.load_checkpoint(path)
        assert loaded.meta["class_names"] == ["a", "b", "c"]
        assert loaded.meta["architecture"] == small_net.meta["architecture"]
        assert loaded.input_shape == small_net.input_shape
        assert loaded.trainable == small_net.trainable
        assert [s.kind for s in loaded.specs] == [s.kind for s in small_net.specs]

    def test_argmax_predictions_preserved(self, small_net, tmp_path, rng):
        path = tmp_path / "net.ckpt"
        ck.save_checkpoint(small_net, path)
        loaded = ck.load_checkpoint(path)
        for _ in range(10):
            x = rng.random((1, 32, 32))
            assert predict(small_net, x).class_index == predict(loaded, x).class_index

    def test_magic_prefix(self, small_net, tmp_path):
        path = tmp_path / "net.ckpt"
        ck.save_checkpoint(small_net, path)
        assert path.read_bytes()[:8] == b"HGCKPT01"


class TestErrorKinds:
    def _saved(self, tmp_path):
        net = Network([flatten(), dense(4, 2), softmax_layer()], (1, 2, 2), seed=1)
        path = tmp_path / "net.ckpt"
        ck.save_checkpoint(net, path)
        return path

    def test_corrupted_magic(self, tmp_path):
        path = self._saved(tmp_path)
        data = bytearray(path.read_bytes())
        data[3] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(ck.BadMagicError):
            ck.load_checkpoint(path)

    def test_version_mismatch(self, tmp_path):
        path = self._saved(tmp_path)
        data = path.read_bytes()
        patched = data.replace(b'"version":1', b'"version":9')
        path.write_bytes(patched)
        with pytest.raises(ck.VersionMismatchError):
            ck.load_checkpoint(path)

    def test_truncated_blob(self, tmp_path):
        path = self._saved(tmp_path)
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(ck.TruncatedError):
            ck.load_checkpoint(path)

    def test_length_mismatch_header_vs_blob(self, tmp_path):
        path = self._saved(tmp_path)
        data = path.read_bytes()
        path.write_bytes(data + b"\x00\x00\x00\x00")  # 1 extra float
        with pytest.raises(ck.ShapeMismatchError):
            ck.load_checkpoint(path)

    def test_truncated_header(self, tmp_path):
        path = self._saved(tmp_path)
        path.write_bytes(path.read_bytes()[:12])
        with pytest.raises(ck.TruncatedError):
            ck.load_checkpoint(path)

    def test_error_kinds_are_distinct(self):
        kinds = {ck.BadMagicError, ck.VersionMismatchError, ck.ShapeMismatchError, ck.TruncatedError}
        assert len(kinds) == 4
        for kind in kinds:
            assert issubclass(kind, ck.CheckpointError)
