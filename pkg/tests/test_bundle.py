import json

import numpy as np
import numpy.testing as npt
import pytest

from neo_ensemble import preprocess as pp
from neo_ensemble.bundle import (
    FORMAT_VERSION,
    ModelBundle,
    decode_tensor,
    encode_tensor,
    load_bundle,
    save_bundle,
)
from neo_ensemble.ensemble import EnsembleConfig
from neo_ensemble.errors import BundleError
from neo_ensemble.features import packing_for
from neo_ensemble.nn import init_ffnn, init_rnn, predict_proba
from neo_ensemble.pipeline import bundle_predict, synthetic_inputs


@pytest.fixture
def bundle(small_dataset):
    params = pp.fit(small_dataset)
    return ModelBundle(
        params,
        init_ffnn([8, 16, 32, 1], seed=1),
        init_rnn([35, 32, 32, 1], seed=2),
        EnsembleConfig(),
        packing_for(params),
        provenance={"seeds": {"ffnn": 1, "rnn": 2}},
    )


class TestTensor:
    def test_round_trip(self, rng):
        a = rng.normal(size=(3, 4)).astype(np.float32).astype(np.float64)
        npt.assert_array_equal(decode_tensor(encode_tensor(a)), a)

    def test_truncated(self, rng):
        enc = encode_tensor(rng.normal(size=(4, 4)))
        enc["shape"] = [5, 4]
        with pytest.raises(BundleError, match="offset 64"):
            decode_tensor(enc)

    def test_bad_dtype(self, rng):
        enc = encode_tensor(rng.normal(size=2))
        enc["dtype"] = "<f8"
        with pytest.raises(BundleError):
            decode_tensor(enc)


class TestBundle:
    def test_save_load_save(self, bundle, tmp_path):
        p1 = save_bundle(bundle, tmp_path / "a.neo.json")
        b2 = load_bundle(p1)
        p2 = save_bundle(b2, tmp_path / "b.neo.json")
        assert p1.read_bytes() == p2.read_bytes()
        assert b2 == bundle

    def test_parameters_bit_exact(self, bundle, tmp_path):
        b2 = load_bundle(save_bundle(bundle, tmp_path / "m.neo.json"))
        for p, q in zip(bundle.ffnn.params + bundle.rnn.params, b2.ffnn.params + b2.rnn.params):
            npt.assert_array_equal(p, q)

    def test_quantized_in_memory(self, bundle):
        for p in bundle.ffnn.params + bundle.rnn.params:
            npt.assert_array_equal(p, p.astype(np.float32))

    def test_predictions_match(self, bundle, tmp_path):
        b2 = load_bundle(save_bundle(bundle, tmp_path / "m.neo.json"))
        Xf, Xr = synthetic_inputs(bundle, 1000, seed=3)
        npt.assert_array_equal(predict_proba(bundle.ffnn, Xf), predict_proba(b2.ffnn, Xf))
        npt.assert_array_equal(predict_proba(bundle.rnn, Xr), predict_proba(b2.rnn, Xr))

    def test_dataset_predictions_match(self, bundle, small_dataset, tmp_path):
        b2 = load_bundle(save_bundle(bundle, tmp_path / "m.neo.json"))
        for a, b in zip(bundle_predict(bundle, small_dataset), bundle_predict(b2, small_dataset)):
            npt.assert_array_equal(a, b)

    def test_key_order(self, bundle):
        doc = json.loads(bundle.to_bytes())
        assert list(doc) == sorted(doc)
        assert doc["format_version"] == FORMAT_VERSION
        assert doc["rnn"]["gate_order"] == ["f", "i", "o", "c"]

    def test_empty_file(self, tmp_path):
        (tmp_path / "e.json").write_bytes(b"")
        with pytest.raises(BundleError, match="offset 0"):
            load_bundle(tmp_path / "e.json")

    def test_truncated_file(self, bundle, tmp_path):
        raw = bundle.to_bytes()
        (tmp_path / "t.json").write_bytes(raw[: len(raw) // 2])
        with pytest.raises(BundleError, match="offset"):
            load_bundle(tmp_path / "t.json")

    def test_version_mismatch(self, bundle, tmp_path):
        doc = json.loads(bundle.to_bytes())
        doc["format_version"] = "neo-bundle/0"
        (tmp_path / "v.json").write_text(json.dumps(doc))
        with pytest.raises(BundleError, match="version"):
            load_bundle(tmp_path / "v.json")

    def test_missing_file(self, tmp_path):
        with pytest.raises(BundleError):
            load_bundle(tmp_path / "none.json")
