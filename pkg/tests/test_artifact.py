import struct

import numpy as np
import pytest

from wmimpute import PipelineError
from wmimpute.artifact import FORMAT_VERSION, MAGIC, ModelArtifact, load_model, save_model
from wmimpute.core import NormStats
from wmimpute.imputers import AttentionConfig, TrainConfig, make_imputer
from wmimpute.imputers.attention import AttentionImputer


def fitted(kind, train):
    if kind == "attention":
        model = AttentionImputer(AttentionConfig(1, 8, 8, 2, 4, 4, 0.1, 0.1, "tiny"), TrainConfig(epochs=2, batch_size=8))
        return model.fit(train, seed=1)
    config = {"knn": {"k": 3}, "missforest": {"n_jobs": 1, "max_iter": 2}}.get(kind, {})
    return make_imputer(kind, config).fit(train, seed=1)


@pytest.fixture
def data(rng):
    train = rng.normal(size=(30, 24)).cumsum(axis=1)
    query = train[:6] + rng.normal(0, 0.2, (6, 24))
    query[np.arange(6), [1, 4, 9, 12, 20, 23]] = np.nan
    return train, query


@pytest.mark.parametrize("kind", ["mean", "interp", "knn", "missforest", "attention"])
def test_round_trip_is_bit_identical(kind, data, tmp_path):
    train, query = data
    model = fitted(kind, train)
    norm = {"b": NormStats(np.arange(24.0), np.ones(24) * 2, 30)}
    save_model(tmp_path / "m.wmi", model, norm, {"note": "test"})
    art = load_model(tmp_path / "m.wmi")
    again = art.imputer(kind)
    assert art.kind == kind and art.metadata["prng"] == "numpy.PCG64" and art.metadata["note"] == "test"
    assert np.array_equal(art.norm["b"].mean, norm["b"].mean)
    for name, arr in model.get_arrays().items():
        assert np.array_equal(art.arrays[name], arr)
    assert np.array_equal(again.impute(query), model.impute(query))


def test_layout(data):
    blob = ModelArtifact.from_imputer(fitted("mean", data[0])).to_bytes()
    magic, version, head = struct.unpack_from("<8sHI", blob)
    assert magic == MAGIC == b"WMIMPUTE" and version == FORMAT_VERSION
    payload = np.frombuffer(blob[14 + head:-32], dtype="<f8")
    assert np.array_equal(payload, data[0].mean(axis=0))


@pytest.fixture
def blob(data):
    return ModelArtifact.from_imputer(fitted("knn", data[0])).to_bytes()


def code_of(blob):
    with pytest.raises(PipelineError) as err:
        ModelArtifact.from_bytes(blob)
    return err.value.code


def test_truncated(blob):
    assert code_of(blob[:-10]) == "checksum-mismatch"
    assert code_of(blob[:20]) == "checksum-mismatch"


def test_corrupted_payload(blob):
    bad = bytearray(blob)
    bad[len(bad) // 2] ^= 0xFF
    assert code_of(bytes(bad)) == "checksum-mismatch"


def test_bad_magic(blob):
    assert code_of(b"NOTMODEL" + blob[8:]) == "bad-magic"


def test_version_mismatch(blob):
    assert code_of(blob[:8] + struct.pack("<H", FORMAT_VERSION + 1) + blob[10:]) == "version-mismatch"


def test_kind_mismatch(blob):
    with pytest.raises(PipelineError) as err:
        ModelArtifact.from_bytes(blob).imputer("missforest")
    assert err.value.code == "kind-mismatch"


def test_missing_file(tmp_path):
    with pytest.raises(PipelineError) as err:
        load_model(tmp_path / "absent.wmi")
    assert err.value.code == "missing-input"
