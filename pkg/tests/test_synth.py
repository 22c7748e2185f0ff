import hashlib

import numpy as np

from nandkit.synth import build_fixture, defect_region, planted_encoder


class TestPlantedEncoder:
    def test_pure_function_of_seed(self):
        a = planted_encoder(seed=42)
        b = planted_encoder(seed=42)
        ref = "widget/test/scuff/003.png"
        ga = a.encoder.encode_image(ref)
        gb = b.encoder.encode_image(ref)
        for la, lb in zip(ga.layers, gb.layers):
            assert np.array_equal(la.grid, lb.grid)

    def test_defect_region_varies_by_index(self):
        regions = {defect_region(f"widget/test/scuff/{i:03d}.png") for i in range(8)}
        assert len(regions) == 4

    def test_good_images_have_no_defect_bias(self):
        fixture = planted_encoder(seed=42)
        from nandkit.embeddings import stub_encode

        ref = "widget/test/good/000.png"
        got = fixture.encoder.encode_image(ref)
        regions = fixture.encoder.bias_provider(ref)
        assert len(regions) == 1  # material only
        manual = stub_encode(ref, 42, fixture.encoder.layout, regions)
        assert np.array_equal(got.layers[0].grid, manual.layers[0].grid)


class TestBuildFixture:
    def test_tree_and_cache(self, planted):
        index, fixture, manifest, cache = planted
        assert index.classes == ("widget",)
        assert index.groups("widget") == {"dent": ("dent",), "scuff": ("scuff",)}
        assert len(manifest.images) == 44
        assert len(index.train_refs["widget"]) == 8

    def test_images_decode(self, planted):
        from PIL import Image

        index, *_ = planted
        path = index.image_path("widget/test/scuff/000.png")
        with Image.open(path) as img:
            assert img.size == (64, 64)

    def test_deterministic_across_builds(self, tmp_path, planted):
        index, _, manifest, cache = planted
        index2, _, manifest2 = build_fixture(tmp_path / "d2", tmp_path / "c2", seed=42)[:3]
        ref = "widget/test/dent/000.png"
        h1 = hashlib.sha256((cache / manifest.images[ref]["path"]).read_bytes()).hexdigest()
        h2 = hashlib.sha256(
            (tmp_path / "c2" / manifest2.images[ref]["path"]).read_bytes()
        ).hexdigest()
        assert h1 == h2
        img1 = index.image_path(ref).read_bytes()
        img2 = index2.image_path(ref).read_bytes()
        assert hashlib.sha256(img1).hexdigest() == hashlib.sha256(img2).hexdigest()
