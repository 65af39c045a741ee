"""CLI exit codes, determinism, and an end-to-end train/run/eval chain."""

import json
import sys
from pathlib import Path

import pytest

from selftalk.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def json_lines(out: str):
    return [json.loads(ln) for ln in out.splitlines() if ln.strip()]


def test_unknown_flag_is_usage_error(capsys):
    assert main(["latency", "--bogus"]) == 1
    assert main([]) == 1
    assert main(["no-such-command"]) == 1


def test_missing_manifest_is_data_error(capsys):
    assert main(["cache-sim", "--manifest", "/nonexistent/m.jsonl"]) == 2


def test_latency_defaults(capsys):
    code, out = run_cli(capsys, "latency")
    assert code == 0
    rec = json_lines(out)[-1]
    assert rec["full_ms"] == 6334.7
    assert rec["early_exit_ms"] == 3712.376
    assert rec["reduction"] == 0.41396


def test_latency_profile_file(capsys, tmp_path):
    prof = tmp_path / "p.cfg"
    prof.write_text("preprocess_ms = 10\nacoustic_ms = 90\n"
                    "linguistic_ms = 100\nfusion_ms = 0\n", encoding="utf-8")
    code, out = run_cli(capsys, "latency", "--profile-file", str(prof))
    assert code == 0
    assert json_lines(out)[-1]["full_ms"] == 200.0


@pytest.fixture(scope="module")
def tiny_corpus(tmp_path_factory):
    """Small well-separated corpus plus trained models, built once."""
    root = tmp_path_factory.mktemp("corpus")
    manifest = root / "corpus.jsonl"
    capsys = None  # CLI output irrelevant here
    args = ["gen-synth", "--out", str(manifest), "--seed", "5",
            "--participants", "3", "--sessions-per-participant", "1",
            "--utterances-per-session", "25",
            "--separation", "8.0", "--noise-scale", "0.5",
            "--vocab-overlap", "0.0"]
    assert main(args) == 0
    meta = root / "corpus.jsonl.meta.json"
    assert meta.exists()
    models = root / "models"
    models.mkdir()
    common = ["--manifest", str(manifest), "--meta", str(meta),
              "--lr", "0.005", "--batch-size", "16",
              "--max-epochs", "8", "--patience", "3", "--seed", "0"]
    for head, fname in (("acoustic", "acoustic.mmhd"),
                        ("linguistic", "linguistic.mmhd"),
                        ("fusion", "fusion.mmhd")):
        assert main(["train", "--head", head,
                     "--out", str(models / fname), *common]) == 0
    return {"manifest": manifest, "meta": meta, "models": models}


def test_gen_synth_deterministic(capsys, tmp_path):
    outs = []
    for name in ("a.jsonl", "b.jsonl"):
        path = tmp_path / name
        code, _ = run_cli(capsys, "gen-synth", "--out", str(path),
                          "--seed", "3", "--participants", "1",
                          "--sessions-per-participant", "1",
                          "--utterances-per-session", "10")
        assert code == 0
        outs.append((path.read_bytes(),
                     (tmp_path / f"{name}.meta.json").read_bytes()))
    assert outs[0] == outs[1]


def test_cache_sim_reports_totals(capsys, tiny_corpus):
    code, out = run_cli(capsys, "cache-sim", "--manifest",
                        str(tiny_corpus["manifest"]))
    assert code == 0
    recs = json_lines(out)
    assert recs
    for rec in recs:
        assert rec["total_s"] <= 30.0 + 1e-6 or rec["oversize"]
        assert rec["cached"] >= 1


def test_pipeline_eval_chain(capsys, tiny_corpus, tmp_path):
    traces = tmp_path / "traces.jsonl"
    code, out = run_cli(capsys, "pipeline",
                        "--manifest", str(tiny_corpus["manifest"]),
                        "--meta", str(tiny_corpus["meta"]),
                        "--models", str(tiny_corpus["models"]),
                        "--out", str(traces))
    assert code == 0
    summary = json_lines(out)[-1]
    ratios = summary["exit_ratios"]
    assert ratios["acoustic"] + ratios["linguistic"] + ratios["fusion"] \
        == pytest.approx(1.0)
    lines = traces.read_text(encoding="utf-8").splitlines()
    assert len(lines) == summary["utterances"] == 75
    first = json.loads(lines[0])
    assert {"session_id", "seq_no", "label", "final", "exit_stage",
            "acoustic"} <= set(first)

    code, out = run_cli(capsys, "eval", "--traces", str(traces),
                        "--csv-dir", str(tmp_path / "csv"))
    assert code == 0
    ev = json_lines(out)[-1]
    assert 0.0 <= ev["macro_f1"] <= 1.0
    assert len(ev["per_participant_macro_f1"]) == 3
    per_class = (tmp_path / "csv" / "per_class.csv").read_text(encoding="utf-8")
    assert per_class.startswith("class,precision,recall,f1,support\n")
    assert len(per_class.splitlines()) == 4

    code, out = run_cli(capsys, "latency", "--traces", str(traces))
    assert code == 0
    assert json_lines(out)[-1]["reduction"] < 1.0


def test_pipeline_workers_do_not_change_output(capsys, tiny_corpus, tmp_path):
    outs = []
    for workers, name in (("1", "t1.jsonl"), ("3", "t3.jsonl")):
        path = tmp_path / name
        code, _ = run_cli(capsys, "pipeline",
                          "--manifest", str(tiny_corpus["manifest"]),
                          "--meta", str(tiny_corpus["meta"]),
                          "--models", str(tiny_corpus["models"]),
                          "--workers", workers, "--out", str(path))
        assert code == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


CHILD_BACKEND = """\
import json
import sys

from selftalk.backend import handle_stub_request
from selftalk.manifest import read_manifest
from selftalk.util import canonical_json

table = {(u.session_id, u.seq_no): u.text for u in read_manifest(sys.argv[1])}
for line in sys.stdin.buffer:
    line = line.strip()
    if not line:
        continue
    resp = handle_stub_request(json.loads(line.decode("utf-8")), table)
    sys.stdout.write(canonical_json(resp) + "\\n")
    sys.stdout.flush()
"""


@pytest.fixture(scope="module")
def wire_corpus(tmp_path_factory):
    """Corpus with 30-utterance sessions, long enough that some context
    windows land on a fractional sample count."""
    root = tmp_path_factory.mktemp("wire")
    manifest = root / "corpus.jsonl"
    assert main(["gen-synth", "--out", str(manifest), "--seed", "9",
                 "--participants", "3", "--sessions-per-participant", "1",
                 "--utterances-per-session", "30",
                 "--separation", "8.0", "--noise-scale", "0.5",
                 "--vocab-overlap", "0.0"]) == 0
    meta = root / "corpus.jsonl.meta.json"
    models = root / "models"
    models.mkdir()
    common = ["--manifest", str(manifest), "--meta", str(meta),
              "--lr", "0.005", "--batch-size", "16",
              "--max-epochs", "8", "--patience", "3", "--seed", "0"]
    for head, fname in (("acoustic", "acoustic.mmhd"),
                        ("linguistic", "linguistic.mmhd"),
                        ("fusion", "fusion.mmhd")):
        assert main(["train", "--head", head,
                     "--out", str(models / fname), *common]) == 0
    return {"manifest": manifest, "meta": meta, "models": models}


def test_pipeline_exec_backend_matches_stub(capsys, wire_corpus, tmp_path):
    # Serving the same stub over exec:// must reproduce the in-process
    # traces byte for byte; any audio-window truncation on the wire path
    # shows up here as a degraded or diverging trace.
    script = tmp_path / "serve.py"
    script.write_text(CHILD_BACKEND, encoding="utf-8")
    outs = {}
    for backend, name in (("stub", "stub.jsonl"),
                          (f"exec://{sys.executable} {script} "
                           f"{wire_corpus['manifest']}", "wire.jsonl")):
        path = tmp_path / name
        code, _ = run_cli(capsys, "pipeline",
                          "--manifest", str(wire_corpus["manifest"]),
                          "--meta", str(wire_corpus["meta"]),
                          "--models", str(wire_corpus["models"]),
                          "--backend", backend, "--out", str(path))
        assert code == 0
        outs[name] = path.read_bytes()
    assert outs["stub.jsonl"] == outs["wire.jsonl"]
    records = [json.loads(ln) for ln in
               outs["wire.jsonl"].decode("utf-8").splitlines()]
    assert not any(r.get("degraded") for r in records)


def test_transcribe_eval_reports_all_strategies(capsys, tiny_corpus):
    code, out = run_cli(capsys, "transcribe-eval",
                        "--manifest", str(tiny_corpus["manifest"]))
    assert code == 0
    report = json_lines(out)[-1]
    assert set(report) == {"SingleUtterance", "PriorSound", "NoTemporal",
                           "NoQuantity", "Contextual"}
    for rec in report.values():
        assert 0.0 <= rec["wer"] <= 2.0
        assert rec["cer"] >= 0.0
    # Full context never loses to the no-context baseline.
    assert report["Contextual"]["wer"] <= report["SingleUtterance"]["wer"]


def test_promptgen_neutral(capsys, tiny_corpus, tmp_path):
    out_dir = tmp_path / "prompts"
    code, out = run_cli(capsys, "promptgen",
                        "--manifest", str(tiny_corpus["manifest"]),
                        "--template", "multi-zero",
                        "--neutral-descriptors", "--out-dir", str(out_dir))
    assert code == 0
    files = sorted(out_dir.glob("*.txt"))
    assert len(files) == 75
    body = files[0].read_text(encoding="utf-8")
    assert body.startswith("Classify the following tennis utterance")
    assert "Pitch Variance=Midium" in body


def test_promptgen_needs_feature_source(capsys, tiny_corpus, tmp_path):
    assert main(["promptgen", "--manifest", str(tiny_corpus["manifest"]),
                 "--out-dir", str(tmp_path / "p")]) == 1


def test_config_file_layering(capsys, tmp_path):
    cfg = tmp_path / "gen.cfg"
    cfg.write_text("participants = 1\nsessions-per-participant = 1\n"
                   "utterances-per-session = 6\nseed = 9\n", encoding="utf-8")
    out_a = tmp_path / "a.jsonl"
    code, _ = run_cli(capsys, "gen-synth", "--config", str(cfg),
                      "--out", str(out_a))
    assert code == 0
    assert len(out_a.read_text(encoding="utf-8").splitlines()) == 6
    # A flag beats the config file.
    out_b = tmp_path / "b.jsonl"
    code, _ = run_cli(capsys, "gen-synth", "--config", str(cfg),
                      "--utterances-per-session", "3", "--out", str(out_b))
    assert code == 0
    assert len(out_b.read_text(encoding="utf-8").splitlines()) == 3
