import json
import struct

import numpy as np
import pytest

from conftest import rand_image, small_arch
from ycd import model as m
from ycd.arch import build_arch
from ycd.tensor import ShapeError, Tensor


class TestInitBackbone:
    def test_same_seed_bitwise_identical(self):
        arch = small_arch()
        a = m.init_backbone(arch, 42)
        b = m.init_backbone(arch, 42)
        assert len(a) == len(b)
        for wa, wb in zip(a, b):
            assert wa.tobytes() == wb.tobytes()

    def test_different_seeds_differ(self):
        arch = small_arch()
        a = m.init_backbone(arch, 0)
        b = m.init_backbone(arch, 1)
        assert any((wa != wb).any() for wa, wb in zip(a, b))

    def test_variance_near_he_target(self):
        arch = build_arch(1.0, 1.0)
        layout = m.backbone_weight_layout(arch)
        weights = m.init_backbone(arch, 7)
        checked = 0
        for (name, shape, fan_in), w in zip(layout, weights):
            if fan_in == 0 or w.size < 1000:
                continue
            target = 2.0 / fan_in
            var = float(w.astype(np.float64).var())
            assert 0.7 * target <= var <= 1.3 * target, name
            checked += 1
        assert checked > 10

    def test_scale_one_bias_zero(self):
        arch = small_arch()
        layout = m.backbone_weight_layout(arch)
        weights = m.init_backbone(arch, 0)
        for (name, _, _), w in zip(layout, weights):
            if name.endswith(".scale"):
                assert (w == 1.0).all()
            elif name.endswith(".bias"):
                assert (w == 0.0).all()


class TestForward:
    def test_zero_head_gives_uniform_probs(self, small_bundle):
        img = rand_image(small_bundle.arch.effective_resolution, seed=1)
        _, probs = m.forward(small_bundle, img)
        np.testing.assert_allclose(probs, [1 / 3] * 3, rtol=1e-12)

    def test_probs_length_is_label_count(self):
        arch = small_arch()
        bundle = m.new_bundle(arch, ("100", "250", "500", "1000"), 0)
        _, probs = m.forward(bundle, rand_image(arch.effective_resolution))
        assert probs.shape == (4,)
        assert probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_bitwise_purity(self, small_bundle):
        img = rand_image(small_bundle.arch.effective_resolution, seed=2)
        e1, p1 = m.forward(small_bundle, img)
        e2, p2 = m.forward(small_bundle, img)
        assert e1.tobytes() == e2.tobytes()
        assert p1.tobytes() == p2.tobytes()

    def test_resolution_mismatch_rejected(self, small_bundle):
        with pytest.raises(ShapeError):
            m.forward(small_bundle, rand_image(64))

    def test_label_permutation_equivariance(self):
        arch = small_arch()
        rng = np.random.default_rng(9)
        labels = ("100", "250", "500", "1000")
        base = m.new_bundle(arch, labels, 5)
        w = rng.standard_normal((arch.embedding_dim, 4)).astype(np.float32)
        b = rng.standard_normal(4).astype(np.float32)
        bundle = m.with_head(base, w, b)

        perm = [2, 0, 3, 1]
        permuted = m.with_head(
            m.new_bundle(arch, tuple(labels[i] for i in perm), 5),
            np.ascontiguousarray(w[:, perm]),
            np.ascontiguousarray(b[perm]),
        )
        img = rand_image(arch.effective_resolution, seed=3)
        _, probs = m.forward(bundle, img)
        _, probs_perm = m.forward(permuted, img)
        np.testing.assert_array_equal(probs[perm], probs_perm)

    def test_embed_rejects_batch_of_two(self, small_bundle):
        res = small_bundle.arch.effective_resolution
        rng = np.random.default_rng(0)
        batch = Tensor(rng.uniform(-1, 1, (2, res, res, 3)).astype(np.float32))
        with pytest.raises(ShapeError):
            m.embed(small_bundle, batch)


class TestHeadInstallation:
    def test_with_head_shape_checked(self, small_bundle):
        dim = small_bundle.arch.embedding_dim
        with pytest.raises(ShapeError):
            m.with_head(small_bundle, np.zeros((dim + 1, 3), np.float32),
                        np.zeros(3, np.float32))
        with pytest.raises(ShapeError):
            m.with_head(small_bundle, np.zeros((dim, 3), np.float32),
                        np.zeros(4, np.float32))

    def test_new_bundle_requires_labels(self):
        with pytest.raises(ValueError):
            m.new_bundle(small_arch(), (), 0)


class TestBundleRoundTrip:
    def test_fresh_bundle_round_trips_bitwise(self, small_bundle, tmp_path):
        path = tmp_path / "model.ycdm"
        m.save_bundle(small_bundle, path)
        loaded = m.load_bundle(path)
        assert m.bundles_equal(small_bundle, loaded)

    def test_trained_head_round_trips(self, small_bundle, tmp_path):
        rng = np.random.default_rng(11)
        dim = small_bundle.arch.embedding_dim
        trained = m.with_head(
            small_bundle,
            rng.standard_normal((dim, 3)).astype(np.float32),
            rng.standard_normal(3).astype(np.float32),
        )
        path = tmp_path / "trained.ycdm"
        m.save_bundle(trained, path)
        loaded = m.load_bundle(path)
        assert m.bundles_equal(trained, loaded)
        img = rand_image(trained.arch.effective_resolution, seed=4)
        _, p_orig = m.forward(trained, img)
        _, p_loaded = m.forward(loaded, img)
        assert p_orig.tobytes() == p_loaded.tobytes()

    def test_file_layout_is_little_endian(self, small_bundle, tmp_path):
        path = tmp_path / "layout.ycdm"
        m.save_bundle(small_bundle, path)
        blob = path.read_bytes()
        assert blob[:4] == b"YCDM"
        assert struct.unpack("<I", blob[4:8])[0] == 1
        header_len = struct.unpack("<Q", blob[8:16])[0]
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
        assert header["labels"] == list(small_bundle.labels)


class TestBundleErrors:
    def _saved(self, tmp_path, small_bundle):
        path = tmp_path / "base.ycdm"
        m.save_bundle(small_bundle, path)
        return path.read_bytes()

    def test_bad_magic(self, tmp_path, small_bundle):
        blob = bytearray(self._saved(tmp_path, small_bundle))
        blob[:4] = b"XXXX"
        bad = tmp_path / "bad_magic.ycdm"
        bad.write_bytes(bytes(blob))
        with pytest.raises(m.BadMagicError) as err:
            m.load_bundle(bad)
        assert err.value.code == "bad_magic"

    def test_unsupported_version(self, tmp_path, small_bundle):
        blob = bytearray(self._saved(tmp_path, small_bundle))
        blob[4:8] = struct.pack("<I", 99)
        bad = tmp_path / "bad_version.ycdm"
        bad.write_bytes(bytes(blob))
        with pytest.raises(m.UnsupportedVersionError) as err:
            m.load_bundle(bad)
        assert err.value.code == "unsupported_version"

    def test_truncated(self, tmp_path, small_bundle):
        blob = self._saved(tmp_path, small_bundle)
        for cut in (2, 10, len(blob) // 2, len(blob) - 3):
            bad = tmp_path / f"truncated_{cut}.ycdm"
            bad.write_bytes(blob[:cut])
            with pytest.raises(m.TruncatedFileError) as err:
                m.load_bundle(bad)
            assert err.value.code == "truncated"

    def test_corrupt_header_json(self, tmp_path, small_bundle):
        blob = bytearray(self._saved(tmp_path, small_bundle))
        header_len = struct.unpack("<Q", bytes(blob[8:16]))[0]
        blob[16 : 16 + header_len] = b"{" * header_len
        bad = tmp_path / "bad_header.ycdm"
        bad.write_bytes(bytes(blob))
        with pytest.raises(m.HeaderError) as err:
            m.load_bundle(bad)
        assert err.value.code == "bad_header"

    def test_shape_mismatch(self, tmp_path, small_bundle):
        # header claims 4 labels while the stored head was built for 3
        blob = self._saved(tmp_path, small_bundle)
        header_len = struct.unpack("<Q", blob[8:16])[0]
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
        header["labels"] = header["labels"] + ["extra"]
        raw = json.dumps(header).encode("utf-8")
        patched = blob[:8] + struct.pack("<Q", len(raw)) + raw + blob[16 + header_len :]
        bad = tmp_path / "mismatch.ycdm"
        bad.write_bytes(patched)
        with pytest.raises(m.BundleShapeMismatchError) as err:
            m.load_bundle(bad)
        assert err.value.code == "shape_mismatch"

    def test_error_codes_are_distinct(self):
        codes = {
            m.BadMagicError("x").code,
            m.UnsupportedVersionError("x").code,
            m.TruncatedFileError("x").code,
            m.HeaderError("x").code,
            m.BundleShapeMismatchError("x").code,
        }
        assert len(codes) == 5
