import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nandkit.embeddings import LayerGrid, PatchGridSet, stub_encode
from nandkit.formats import (
    BadMagicError,
    DimensionMismatchError,
    EmbeddingFileError,
    TruncatedPayloadError,
    VersionMismatchError,
    read_embedding_file,
    read_map_file,
    read_projection_file,
    write_embedding_file,
    write_map_file,
    write_projection_file,
)


def two_layer_set(with_global=True):
    rng = np.random.default_rng(5)
    layers = (
        LayerGrid(3, 4, 6, rng.standard_normal((3, 4, 6)).astype(np.float32)),
        LayerGrid(2, 2, 6, rng.standard_normal((2, 2, 6)).astype(np.float32)),
    )
    gvec = rng.standard_normal(8).astype(np.float32) if with_global else None
    return PatchGridSet(image_id="cls/test/type/000.png", layers=layers, global_vec=gvec)


class TestEmbeddingFile:
    @pytest.mark.parametrize("with_global", [True, False])
    def test_roundtrip_bit_exact(self, tmp_path, with_global):
        original = two_layer_set(with_global)
        p1 = tmp_path / "a.naeb"
        p2 = tmp_path / "b.naeb"
        write_embedding_file(original, p1)
        loaded = read_embedding_file(p1)
        write_embedding_file(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert loaded.image_id == original.image_id
        for la, lb in zip(loaded.layers, original.layers):
            assert np.array_equal(la.grid, lb.grid)

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.naeb"
        write_embedding_file(two_layer_set(), p)
        data = bytearray(p.read_bytes())
        data[:4] = b"JUNK"
        p.write_bytes(bytes(data))
        with pytest.raises(BadMagicError):
            read_embedding_file(p)

    def test_version_mismatch(self, tmp_path):
        p = tmp_path / "x.naeb"
        write_embedding_file(two_layer_set(), p)
        data = bytearray(p.read_bytes())
        data[4:6] = (99).to_bytes(2, "little")
        p.write_bytes(bytes(data))
        with pytest.raises(VersionMismatchError):
            read_embedding_file(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "x.naeb"
        write_embedding_file(two_layer_set(), p)
        data = p.read_bytes()
        p.write_bytes(data[: len(data) - 10])
        with pytest.raises(TruncatedPayloadError):
            read_embedding_file(p)

    def test_header_declares_more_layers_than_payload(self, tmp_path):
        # declare a 4th layer without providing its payload: truncation category
        import struct

        rng = np.random.default_rng(0)
        layers = tuple(
            LayerGrid(2, 2, 3, rng.standard_normal((2, 2, 3)).astype(np.float32))
            for _ in range(3)
        )
        p = tmp_path / "x.naeb"
        write_embedding_file(PatchGridSet(image_id="i", layers=layers), p)
        data = bytearray(p.read_bytes())
        # n_layers byte sits after magic(4) + version(2) + id len(2) + id(1)
        offset = 4 + 2 + 2 + 1
        assert data[offset] == 3
        data[offset] = 4
        headers_end = offset + 1 + 3 * 6
        data[headers_end:headers_end] = struct.pack("<HHH", 2, 2, 3)
        p.write_bytes(bytes(data))
        with pytest.raises(TruncatedPayloadError):
            read_embedding_file(p)

    def test_trailing_bytes_is_dimension_mismatch(self, tmp_path):
        p = tmp_path / "x.naeb"
        write_embedding_file(two_layer_set(), p)
        p.write_bytes(p.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(DimensionMismatchError):
            read_embedding_file(p)

    def test_nonfinite_payload_rejected(self, tmp_path):
        p = tmp_path / "x.naeb"
        write_embedding_file(two_layer_set(with_global=False), p)
        data = bytearray(p.read_bytes())
        nan = np.array([np.nan], dtype="<f4").tobytes()
        data[-4:] = nan
        p.write_bytes(bytes(data))
        with pytest.raises(EmbeddingFileError, match="non-finite"):
            read_embedding_file(p)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_roundtrip_property(self, tmp_path_factory, seed):
        gen = np.random.default_rng(seed)
        n_layers = int(gen.integers(1, 4))
        layers = tuple(
            LayerGrid(h, w, d, gen.standard_normal((h, w, d)).astype(np.float32))
            for h, w, d in (
                (int(gen.integers(1, 5)), int(gen.integers(1, 5)), int(gen.integers(1, 9)))
                for _ in range(n_layers)
            )
        )
        gvec = (
            gen.standard_normal(int(gen.integers(1, 9))).astype(np.float32)
            if gen.random() < 0.5
            else None
        )
        original = PatchGridSet(image_id=f"img-{seed}", layers=layers, global_vec=gvec)
        p = tmp_path_factory.mktemp("rt") / "x.naeb"
        write_embedding_file(original, p)
        loaded = read_embedding_file(p)
        assert loaded.image_id == original.image_id
        assert len(loaded.layers) == len(original.layers)
        for la, lb in zip(loaded.layers, original.layers):
            assert np.array_equal(la.grid, lb.grid)
        if gvec is None:
            assert loaded.global_vec is None
        else:
            assert np.array_equal(loaded.global_vec, gvec)


class TestMapFile:
    def test_roundtrip(self, tmp_path):
        scores = np.abs(np.random.default_rng(1).standard_normal((5, 7))).astype(np.float32)
        p = tmp_path / "m.naam"
        write_map_file(scores, p)
        np.testing.assert_array_equal(read_map_file(p), scores)

    def test_negative_scores_rejected_on_read(self, tmp_path):
        p = tmp_path / "m.naam"
        write_map_file(np.ones((2, 2)), p)
        data = bytearray(p.read_bytes())
        data[-4:] = np.array([-1.0], dtype="<f4").tobytes()
        p.write_bytes(bytes(data))
        with pytest.raises(EmbeddingFileError, match="negative"):
            read_map_file(p)

    def test_dims_mismatch(self, tmp_path):
        p = tmp_path / "m.naam"
        write_map_file(np.ones((2, 3)), p)
        data = bytearray(p.read_bytes())
        data[6:8] = (4).to_bytes(2, "little")  # height header
        p.write_bytes(bytes(data))
        with pytest.raises(TruncatedPayloadError):
            read_map_file(p)

    def test_negative_write_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_map_file(np.array([[-0.5]]), tmp_path / "m.naam")

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "m.naam"
        p.write_bytes(b"WHAT" + bytes(10))
        with pytest.raises(BadMagicError):
            read_map_file(p)


class TestProjectionFile:
    def test_roundtrip_with_identity_sentinel(self, tmp_path):
        rng = np.random.default_rng(2)
        layers = [
            (rng.standard_normal((3, 5)).astype(np.float32), rng.standard_normal(3).astype(np.float32)),
            None,
            (rng.standard_normal((2, 2)).astype(np.float32), rng.standard_normal(2).astype(np.float32)),
        ]
        p = tmp_path / "w.napj"
        write_projection_file(layers, p)
        loaded = read_projection_file(p)
        assert loaded[1] is None
        for got, want in ((loaded[0], layers[0]), (loaded[2], layers[2])):
            np.testing.assert_array_equal(got[0], want[0])
            np.testing.assert_array_equal(got[1], want[1])
        p2 = tmp_path / "w2.napj"
        write_projection_file(loaded, p2)
        assert p.read_bytes() == p2.read_bytes()

    def test_truncated(self, tmp_path):
        p = tmp_path / "w.napj"
        write_projection_file([(np.ones((2, 2), dtype=np.float32), np.ones(2, dtype=np.float32))], p)
        p.write_bytes(p.read_bytes()[:-4])
        with pytest.raises(TruncatedPayloadError):
            read_projection_file(p)

    def test_half_identity_dims_rejected(self, tmp_path):
        p = tmp_path / "w.napj"
        write_projection_file([None], p)
        data = bytearray(p.read_bytes())
        data[-2:] = (3).to_bytes(2, "little")  # out_dim 3 with in_dim 0
        p.write_bytes(bytes(data))
        with pytest.raises(DimensionMismatchError):
            read_projection_file(p)


class TestGoldenFixtures:
    """Committed binaries guard both the formats and the stub construction."""

    def test_naeb_golden(self, golden_dir):
        golden = golden_dir / "stub_golden.naeb"
        regenerated = stub_encode("golden", 7, [(3, 3, 8), (2, 2, 8)])
        fresh = golden_dir / "_fresh.naeb"
        write_embedding_file(regenerated, fresh)
        try:
            assert fresh.read_bytes() == golden.read_bytes(), (
                "stub encoder or NAEB writer drifted from the committed golden file"
            )
        finally:
            fresh.unlink()

    def test_naam_golden(self, golden_dir):
        loaded = read_map_file(golden_dir / "map_golden.naam")
        assert loaded.shape == (4, 6)
        assert loaded[0, 0] == np.float32(0.25)

    def test_napj_golden(self, golden_dir):
        layers = read_projection_file(golden_dir / "proj_golden.napj")
        assert len(layers) == 2 and layers[1] is None
        assert layers[0][0].shape == (4, 8)


@pytest.fixture()
def golden_dir():
    from pathlib import Path

    d = Path(__file__).parent / "data"
    assert d.is_dir(), "tests/data golden fixtures missing"
    return d
