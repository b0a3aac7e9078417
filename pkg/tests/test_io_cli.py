import json
import os

import numpy as np
import pytest

import brepcodec.io as bio
from brepcodec.cli import main
from brepcodec.codec import CodecConfig, VocabLayout, tokenize
from brepcodec.lm import fit_ngram, sample_sequence, SamplerConfig
from brepcodec.model import normalize
from brepcodec.pipeline import encode_model, lossless_codebook
from brepcodec.primitives import box, l_bracket, ngon_prism, seam_cylinder, through_hole_box
from brepcodec.rq import train_codebook


class TestModelFiles:
    @pytest.mark.parametrize("maker", [box, ngon_prism, seam_cylinder,
                                       through_hole_box, l_bracket])
    def test_exact_roundtrip(self, tmp_path, maker):
        src = maker()
        path = tmp_path / "m.json"
        bio.save_model(src, path)
        loaded, tr = bio.load_model(path)
        assert tr is None
        assert bio.models_equal(src, loaded)

    def test_transform_preserved(self, tmp_path):
        m, rec = normalize(box(size=(2, 1, 1), at=(5, 5, 5)))
        path = tmp_path / "m.json"
        bio.save_model(m, path, transform=rec)
        loaded, tr = bio.load_model(path)
        assert tr == rec
        assert bio.models_equal(m, loaded)

    def test_malformed_json_reports_location(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format": "brepcodec-model/1", "vertices": [[0,')
        with pytest.raises(bio.FormatError, match="line"):
            bio.load_model(path)

    def test_wrong_format_tag(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"format": "something-else"}))
        with pytest.raises(bio.FormatError, match="not a model file"):
            bio.load_model(path)


class TestTokenFiles:
    def test_roundtrip_with_transforms(self, tmp_path):
        cb = lossless_codebook(normalize(box())[0])
        seqs = [encode_model(box(size=(1, 1, s)), cb) for s in (1.0, 1.3)]
        path = tmp_path / "t.tokens"
        bio.save_tokens(seqs, path)
        header, loaded = bio.load_tokens(path)
        assert header["codebook_id"] == cb.content_id()
        for a, b in zip(seqs, loaded):
            assert a.tokens == b.tokens
            assert b.header.transform is not None
            assert np.allclose(b.header.transform.offset, a.header.transform.offset)
            assert b.header.transform.scale == a.header.transform.scale

    def test_non_integer_token_reports_line(self, tmp_path):
        path = tmp_path / "t.tokens"
        path.write_text(json.dumps({"format": "brepcodec-tokens/1"})
                        + "\n1 2 x 4\n")
        with pytest.raises(bio.FormatError, match=":2"):
            bio.load_tokens(path)


class TestCodebookFiles:
    def test_roundtrip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        cb = train_codebook(rng.random((64, 12)), depth=3, size=8, seed=1)
        path = tmp_path / "cb.json"
        bio.save_codebook(cb, path)
        loaded = bio.load_codebook(path)
        assert loaded.content_id() == cb.content_id()
        assert np.array_equal(loaded.levels, cb.levels)
        assert np.array_equal(loaded.mean, cb.mean)

    def test_tamper_detected(self, tmp_path):
        rng = np.random.default_rng(0)
        cb = train_codebook(rng.random((64, 12)), depth=2, size=8, seed=1)
        path = tmp_path / "cb.json"
        bio.save_codebook(cb, path)
        doc = json.loads(path.read_text())
        doc["levels"][0][0][0] += 1.0
        path.write_text(json.dumps(doc))
        with pytest.raises(bio.FormatError, match="hash mismatch"):
            bio.load_codebook(path)


class TestNgramFiles:
    def test_roundtrip_sampling_identical(self, tmp_path):
        m, _ = normalize(box())
        cb = lossless_codebook(m)
        layout = VocabLayout.for_codebook(cb)
        seqs = [tokenize(m, cb)] * 3
        lm = fit_ngram(seqs, order=4, vocab_size=layout.vocab_size)
        path = tmp_path / "lm.json"
        bio.save_ngram(lm, path, layout_hash=layout.layout_hash())
        loaded, lh = bio.load_ngram(path)
        assert lh == layout.layout_hash()
        a = sample_sequence(lm, layout, SamplerConfig(seed=4))
        b = sample_sequence(loaded, layout, SamplerConfig(seed=4))
        assert a.tokens == b.tokens


class TestExports:
    def test_obj_export(self, tmp_path):
        m, _ = normalize(seam_cylinder())
        path = tmp_path / "m.obj"
        bio.export_obj(m, path, resolution=8)
        text = path.read_text()
        assert text.count("\nv ") > 50
        assert text.count("\nf ") > 10

    def test_vhp_debug_export(self, tmp_path):
        m, _ = normalize(box())
        path = tmp_path / "dbg.json"
        bio.export_vhp_debug(m, path)
        doc = json.loads(path.read_text())
        assert len(doc["faces"]) == 6
        assert len(doc["records"]) == 24
        labels = np.array(doc["faces"][0]["labels"])
        assert (labels >= 0).sum() > 0


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    spec = {"counts": {"box": 2, "prism": 1, "cylinder": 1, "hole_box": 1},
            "components": [1, 2], "seed": 5}
    (root / "spec.json").write_text(json.dumps(spec))
    assert main(["synth", "--spec", str(root / "spec.json"),
                 "--out", str(root / "corpus")]) == 0
    assert main(["train-codebook", str(root / "corpus"), "--levels", "4",
                 "--size", "48", "--seed", "0",
                 "--out", str(root / "cb.json")]) == 0
    assert main(["tokenize", str(root / "corpus"), "--codebook",
                 str(root / "cb.json"), "--out", str(root / "c.tokens")]) == 0
    return root


class TestCli:
    def test_validate_ok(self, workspace):
        assert main(["validate", str(workspace / "corpus")]) == 0

    def test_validate_failure_exit_1(self, workspace, tmp_path):
        m, _ = bio.load_model(sorted((workspace / "corpus").glob("*.json"))[0])
        import dataclasses

        m.halfedges[0] = dataclasses.replace(m.halfedges[0], twin=0)
        bad = tmp_path / "bad.json"
        bio.save_model(m, bad)
        assert main(["validate", str(bad)]) == 1

    def test_roundtrip_exit_0(self, workspace):
        assert main(["roundtrip", str(workspace / "corpus"),
                     "--codebook", str(workspace / "cb.json")]) == 0

    def test_detokenize_and_corruption_exit_2(self, workspace, tmp_path):
        out = tmp_path / "rebuilt"
        assert main(["detokenize", str(workspace / "c.tokens"),
                     "--codebook", str(workspace / "cb.json"),
                     "--out", str(out),
                     "--report", str(tmp_path / "rep.json")]) == 0
        assert sorted(out.glob("model_*.json"))
        # corrupt one token mid-group: a coordinate where a quantizer
        # code is required
        cb = bio.load_codebook(workspace / "cb.json")
        layout = VocabLayout.for_codebook(cb)
        lines = (workspace / "c.tokens").read_text().splitlines()
        parts = lines[1].split()
        ptr = next(i for i, t in enumerate(parts)
                   if layout.pointer_base <= int(t) < layout.rq_base)
        parts[ptr + 2] = "0"
        bad = tmp_path / "bad.tokens"
        bad.write_text("\n".join([lines[0], " ".join(parts)]) + "\n")
        code = main(["detokenize", str(bad),
                     "--codebook", str(workspace / "cb.json"),
                     "--out", str(tmp_path / "junk")])
        assert code == 2

    def test_synth_determinism_byte_identical(self, workspace, tmp_path):
        out2 = tmp_path / "corpus2"
        assert main(["synth", "--spec", str(workspace / "spec.json"),
                     "--out", str(out2)]) == 0
        for f in sorted(os.listdir(workspace / "corpus")):
            a = (workspace / "corpus" / f).read_bytes()
            b = (out2 / f).read_bytes()
            assert a == b, f

    def test_generate_determinism(self, workspace, tmp_path):
        assert main(["fit-lm", str(workspace / "c.tokens"), "--order", "4",
                     "--out", str(tmp_path / "lm.json")]) == 0
        for d in ("g1", "g2"):
            assert main(["generate", "--lm", str(tmp_path / "lm.json"),
                         "--codebook", str(workspace / "cb.json"),
                         "-n", "4", "--seed", "11", "--temperature", "0.6",
                         "--out", str(tmp_path / d)]) == 0
        a = (tmp_path / "g1" / "sequences.tokens").read_bytes()
        b = (tmp_path / "g2" / "sequences.tokens").read_bytes()
        assert a == b

    def test_autocomplete_cli(self, workspace, tmp_path):
        cb = bio.load_codebook(workspace / "cb.json")
        layout = VocabLayout.for_codebook(cb)
        _, seqs = bio.load_tokens(workspace / "c.tokens")
        prefix = seqs[0].tokens[:-1] + [layout.sep]
        bio.save_tokens([prefix], tmp_path / "prefix.tokens",
                        layout_hash=layout.layout_hash())
        assert main(["fit-lm", str(workspace / "c.tokens"),
                     "--out", str(tmp_path / "lm.json")]) == 0
        assert main(["autocomplete", "--lm", str(tmp_path / "lm.json"),
                     "--codebook", str(workspace / "cb.json"),
                     "--prefix", str(tmp_path / "prefix.tokens"),
                     "--out", str(tmp_path / "done")]) == 0
        _, outs = bio.load_tokens(tmp_path / "done" / "completed.tokens")
        assert outs[0].tokens[: len(prefix)] == prefix

    def test_eval_cli(self, workspace, tmp_path):
        rep_path = tmp_path / "metrics.json"
        csv_path = tmp_path / "table.csv"
        assert main(["eval", "--gen", str(workspace / "corpus"),
                     "--ref", str(workspace / "corpus"),
                     "--points", "300", "--seed", "1",
                     "--report", str(rep_path),
                     "--csv", str(csv_path),
                     "--codebook", str(workspace / "cb.json"),
                     "--train-tokens", str(workspace / "c.tokens")]) == 0
        rep = json.loads(rep_path.read_text())
        assert rep["coverage"] == 1.0
        assert rep["valid"] == 1.0
        assert rep["unique"] == 1.0
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "model,vertices,edges,faces,nearest_ref_chamfer"
        assert len(lines) == 1 + rep["n_generated"]

    def test_synth_seed_override(self, workspace, tmp_path):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["synth", "--spec", str(workspace / "spec.json"),
                     "--seed", "123", "--out", str(out_a)]) == 0
        assert main(["synth", "--spec", str(workspace / "spec.json"),
                     "--seed", "123", "--out", str(out_b)]) == 0
        for f in sorted(os.listdir(out_a)):
            assert (out_a / f).read_bytes() == (out_b / f).read_bytes()
        # a different seed changes the corpus
        out_c = tmp_path / "c"
        assert main(["synth", "--spec", str(workspace / "spec.json"),
                     "--seed", "124", "--out", str(out_c)]) == 0
        assert any((out_a / f).read_bytes() != (out_c / f).read_bytes()
                   for f in sorted(os.listdir(out_a)))

    def test_capacity_exit_3(self, tmp_path):
        spec = {"counts": {"box": 1}, "components": [5, 5],
                "placement_extent": 0.1, "max_retries": 2, "seed": 0}
        (tmp_path / "spec.json").write_text(json.dumps(spec))
        assert main(["synth", "--spec", str(tmp_path / "spec.json"),
                     "--out", str(tmp_path / "x")]) == 3

    def test_export_commands(self, workspace, tmp_path):
        model = sorted((workspace / "corpus").glob("*.json"))[0]
        assert main(["export-obj", str(model),
                     "--out", str(tmp_path / "m.obj")]) == 0
        assert main(["export-vhp-debug", str(model),
                     "--out", str(tmp_path / "m.vhp.json")]) == 0
        assert (tmp_path / "m.obj").exists()
        assert (tmp_path / "m.vhp.json").exists()
