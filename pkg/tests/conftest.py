from __future__ import annotations

import pytest

from schemaground.evaluate import load_manifest
from schemaground.gateway import ImageRef, ModelGateway
from schemaground.toydata import make_toy_dataset, tiny_png


@pytest.fixture(scope="session")
def toy(tmp_path_factory):
    return make_toy_dataset(tmp_path_factory.mktemp("toy"))


@pytest.fixture(scope="session")
def toy_manifest(toy):
    return load_manifest(toy.manifest_path)


@pytest.fixture()
def toy_gateway(toy, tmp_path):
    return ModelGateway.from_config(toy.backend_config_path, cache_dir=tmp_path / "cache")


@pytest.fixture(scope="session")
def tiny_image(tmp_path_factory):
    path = tmp_path_factory.mktemp("img") / "probe.png"
    path.write_bytes(tiny_png((7, 11, 13)))
    return ImageRef.from_file(path)
