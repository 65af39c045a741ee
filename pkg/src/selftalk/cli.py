"""Command-line entry point.

Subcommands cover the whole workflow: synthetic data generation,
segmentation, caching simulation, feature extraction, head training,
staged inference, evaluation, latency accounting, transcription-strategy
comparison, and prompt generation.

Exit codes: 0 success, 1 usage, 2 data problem, 3 backend problem.
Flags override values from an optional flat key=value --config file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from selftalk import adaptation, cascade, evalkit, fusion, heads, latency
from selftalk import prompts, segmenter, synthgen, transcription
from selftalk.audio_io import load_wav, save_wav
from selftalk.backend import BackendClient, stub_transcribe
from selftalk.errors import BackendError, DataError
from selftalk.features import (
    TertileBounds,
    describe,
    extract_features,
    fit_tertiles,
)
from selftalk.labels import CLASSES
from selftalk.manifest import Utterance, group_by_session, read_manifest, write_manifest
from selftalk.util import canonical_json, read_flat_config


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse defaults to exit code 2 on usage errors; this CLI
    reserves 2 for data problems, so usage errors raise instead."""

    def error(self, message: str) -> None:
        raise _UsageError(message)


def _layered(args: argparse.Namespace, key: str, default, cast=None):
    """Flag value if given, else config-file value, else default."""
    val = getattr(args, key.replace("-", "_"), None)
    if val is not None:
        return val
    cfg = getattr(args, "_config_values", {})
    if key in cfg:
        raw = cfg[key]
        return cast(raw) if cast else raw
    return default


def _load_config(args: argparse.Namespace) -> None:
    path = getattr(args, "config", None)
    args._config_values = read_flat_config(path) if path else {}


def _emit(obj) -> None:
    sys.stdout.write(canonical_json(obj) + "\n")


# ---------------------------------------------------------------------------
# Subcommand implementations.

def _cmd_gen_synth(args) -> int:
    _load_config(args)
    cfg = synthgen.GeneratorConfig(
        seed=_layered(args, "seed", 0, int),
        n_participants=_layered(args, "participants", 25, int),
        sessions_per_participant=_layered(args, "sessions-per-participant", 4, int),
        utterances_per_session=_layered(args, "utterances-per-session", 100, int),
        separation=_layered(args, "separation", 3.0, float),
        noise_scale=_layered(args, "noise-scale", 1.0, float),
        vocab_overlap=_layered(args, "vocab-overlap", 0.2, float),
        min_gap_s=_layered(args, "min-gap-s", 0.0, float),
    )
    utterances, meta = synthgen.generate(cfg)
    out = Path(args.out)
    write_manifest(out, utterances)
    synthgen.write_meta(out.with_suffix(out.suffix + ".meta.json"), meta)
    if args.wav_dir:
        wav_dir = Path(args.wav_dir)
        wav_dir.mkdir(parents=True, exist_ok=True)
        sr = _layered(args, "sample-rate", 16000, int)
        for sid, session in group_by_session(utterances).items():
            clip = synthgen.synthesize_waveform(session, sample_rate=sr)
            save_wav(wav_dir / f"{sid}.wav", clip)
    _emit({"utterances": len(utterances), "manifest": str(out)})
    return 0


def _cmd_segment(args) -> int:
    _load_config(args)
    clip = load_wav(args.wav)
    segments = segmenter.segment_clip(
        clip,
        threshold_db=_layered(args, "threshold-db", segmenter.DEFAULT_THRESHOLD_DB, float),
        window_s=_layered(args, "window-s", 0.025, float),
        hop_s=_layered(args, "hop-s", 0.010, float),
        min_event_s=_layered(args, "min-event-s", segmenter.MIN_EVENT_S, float),
        merge_gap_s=_layered(args, "merge-gap-s", segmenter.MERGE_GAP_S, float),
    )
    for seg in segments:
        _emit({"t_start": seg.t_start, "t_end": seg.t_end})
    return 0


def _cmd_cache_sim(args) -> int:
    _load_config(args)
    from selftalk.cache import UtteranceCache

    budget = _layered(args, "budget-s", 30.0, float)
    for sid, session in group_by_session(read_manifest(args.manifest)).items():
        cache = UtteranceCache(budget_s=budget)
        for u in session:
            evicted = cache.push(segmenter.Segment(u.t_start, u.t_end), payload=u)
            _emit({"session_id": sid, "seq_no": u.seq_no,
                   "evicted": len(evicted), "cached": len(cache),
                   "total_s": round(cache.total_s, 6), "oversize": cache.oversize})
    return 0


def _cmd_featurize(args) -> int:
    _load_config(args)
    clip = load_wav(args.wav)
    segments = segmenter.segment_clip(clip)
    feats = [extract_features(clip.slice(s.t_start, s.t_end)) for s in segments]
    bounds = None
    if args.fit_bounds:
        bounds = fit_tertiles(feats)
        bounds.save(args.fit_bounds)
    elif args.bounds:
        bounds = TertileBounds.load(args.bounds)
    for seg, fv in zip(segments, feats):
        rec = {"t_start": seg.t_start, "t_end": seg.t_end,
               "pitch_mean": fv.pitch_mean, "pitch_variance": fv.pitch_variance,
               "pitch_range": fv.pitch_range, "intensity_mean": fv.intensity_mean,
               "intensity_range": fv.intensity_range, "duration_s": fv.duration_s}
        if bounds is not None:
            d = describe(fv, bounds)
            rec.update({"pitch_variance_cat": d.pitch_variance_cat,
                        "pitch_mean_cat": d.pitch_mean_cat,
                        "intensity_mean_cat": d.intensity_mean_cat,
                        "pitch_range_cat": d.pitch_range_cat,
                        "intensity_range_cat": d.intensity_range_cat,
                        "contour": d.contour})
        _emit(rec)
    return 0


def _adapted_embeddings(utterances: list[Utterance], meta: dict,
                        static_alpha: float | None = 0.5):
    """Embeddings the acoustic stage would see, session by session."""
    out: dict[tuple[str, int], np.ndarray] = {}
    for sid, session in group_by_session(utterances).items():
        state = adaptation.AdaptationState()
        for u in session:
            raw = adaptation.Embedding(
                synthgen.pseudo_embedding(meta, u.session_id, u.seq_no, u.label),
                "acoustic", u.t_start, u.t_end)
            adapted, _ = state.step(raw, None, static_alpha if static_alpha
                                    is not None else 1.0)
            out[(sid, u.seq_no)] = adapted.values
    return out


def _train_config(args) -> heads.TrainConfig:
    return heads.TrainConfig(
        learning_rate=_layered(args, "lr", 1e-4, float),
        batch_size=_layered(args, "batch-size", 32, int),
        patience=_layered(args, "patience", 10, int),
        max_epochs=_layered(args, "max-epochs", 200, int),
        seed=_layered(args, "seed", 0, int),
    )


def _cmd_train(args) -> int:
    _load_config(args)
    utterances = read_manifest(args.manifest)
    meta = synthgen.read_meta(args.meta)
    cfg = _train_config(args)
    rng = np.random.default_rng(cfg.seed)
    labels = [u.label for u in utterances]

    if args.head == "acoustic":
        emb = _adapted_embeddings(utterances, meta)
        x = np.stack([emb[(u.session_id, u.seq_no)] for u in utterances])
        head = heads.FeedForwardHead.create(x.shape[1], heads.HIDDEN_3LAYER, rng=rng)
        history = heads.train(head, x, labels, cfg)
        heads.save_head(args.out, head)
    elif args.head == "linguistic":
        x = np.stack([heads.reference_linguistic_encode(u.text) for u in utterances])
        head = heads.FeedForwardHead.create(x.shape[1], heads.HIDDEN_3LAYER, rng=rng)
        history = heads.train(head, x, labels, cfg)
        heads.save_head(args.out, head)
    elif args.head == "fusion":
        emb = _adapted_embeddings(utterances, meta)
        x1 = np.stack([emb[(u.session_id, u.seq_no)] for u in utterances])
        x2 = np.stack([heads.reference_linguistic_encode(u.text) for u in utterances])
        gate = fusion.FusionGate.create(x1.shape[1], x2.shape[1], rng=rng)
        history = fusion.train_fusion(gate, x1, x2, labels, cfg)
        gate.save(args.out)
    elif args.head == "gate":
        samples = []
        for sid, session in group_by_session(utterances).items():
            prev_vec, prev_end = None, None
            for u in session:
                vec = synthgen.pseudo_embedding(meta, u.session_id, u.seq_no, u.label)
                gap = float("inf") if prev_end is None else u.t_start - prev_end
                samples.append((vec, prev_vec, gap, CLASSES.index(u.label)))
                prev_vec, prev_end = vec, u.t_end
        dim = samples[0][0].size
        gate = adaptation.AlphaGateNet(dim)
        head = heads.FeedForwardHead.create(dim, heads.HIDDEN_3LAYER, rng=rng)
        history = adaptation.train_gate(gate, head, samples, cfg)
        heads.save_params(args.out, [(gate.w1, gate.b1), (gate.w2, gate.b2)])
    else:
        raise _UsageError(f"unknown head {args.head!r}")
    _emit({"head": args.head, "out": args.out,
           "best_epoch": history.best_epoch,
           "best_val_macro_f1": round(history.best_val_f1, 6),
           "epochs_run": len(history.epochs)})
    return 0


def _wire_components(args, utterances: list[Utterance], meta: dict,
                     models_dir: Path) -> cascade.Components:
    manifest_text = {(u.session_id, u.seq_no): u.text for u in utterances}
    strategy = _layered(args, "strategy", "Contextual")
    backend_uri = _layered(args, "backend", "stub")
    sr = _layered(args, "sample-rate", 16000, int)
    client = None
    if backend_uri != "stub":
        client = BackendClient(backend_uri)

    def text_of(snapshot: list[Utterance], target: Utterance) -> tuple[str, bool]:
        plan = transcription.plan_window(snapshot, target, strategy)
        layout, total = transcription.virtual_layout(plan)
        prompt = transcription.layout_prompt(layout)
        if client is None:
            _, words = stub_transcribe(prompt, manifest_text)
        else:
            # Ceil, not round: the clip must cover the layout's last
            # word end or the client rejects the span.
            silence = np.zeros(max(1, int(np.ceil(total * sr))))
            _, words = client.transcribe(silence, sr, prompt=prompt)
        span = next((a0, a1) for u, a0, a1 in layout
                    if u.seq_no == target.seq_no)
        return transcription.crop_target_text(words, span), True

    def embed(u: Utterance) -> np.ndarray:
        return synthgen.pseudo_embedding(meta, u.session_id, u.seq_no, u.label)

    alpha_gate = None
    static_alpha = _layered(args, "static-alpha", None, float)
    gate_model = _layered(args, "gate-model", None)
    if gate_model:
        layers = heads.load_params(gate_model)
        dim = layers[0][0].shape[1] // 2
        alpha_gate = adaptation.AlphaGateNet(dim, hidden=layers[0][0].shape[0])
        (alpha_gate.w1, alpha_gate.b1), (alpha_gate.w2, alpha_gate.b2) = layers
    elif static_alpha is None:
        static_alpha = 0.5

    fusion_mode = _layered(args, "fusion-mode", "adaptive")
    return cascade.Components(
        embed=embed,
        text_of=text_of,
        text_encode=heads.reference_linguistic_encode,
        acoustic_head=heads.load_head(models_dir / "acoustic.mmhd"),
        linguistic_head=heads.load_head(models_dir / "linguistic.mmhd"),
        fusion=fusion.FusionGate.load(models_dir / "fusion.mmhd", mode=fusion_mode),
        alpha_gate=alpha_gate,
        static_alpha=static_alpha,
    )


def _trace_record(tr: cascade.StageTrace) -> dict:
    u = tr.utterance
    rec = {"session_id": u.session_id, "participant_id": u.participant_id,
           "seq_no": u.seq_no, "label": u.label,
           "final": tr.final_label, "exit_stage": tr.exit_stage,
           "alpha": tr.alpha, "degraded": tr.degraded,
           "acoustic": {"p": [float(v) for v in tr.acoustic.p],
                        "predicted": tr.acoustic.predicted,
                        "least_margin": tr.acoustic.least_margin}}
    for name, dist in (("linguistic", tr.linguistic), ("fusion", tr.fusion)):
        if dist is not None:
            rec[name] = {"p": [float(v) for v in dist.p],
                         "predicted": dist.predicted,
                         "least_margin": dist.least_margin}
    return rec


def _cmd_pipeline(args) -> int:
    _load_config(args)
    utterances = read_manifest(args.manifest)
    meta = synthgen.read_meta(args.meta)
    policy = cascade.GatingPolicy.from_file(args.policy_file) \
        if args.policy_file else cascade.GatingPolicy()
    components = _wire_components(args, utterances, meta, Path(args.models))
    workers = _layered(args, "workers", 1, int)
    sessions = group_by_session(utterances)
    sids = sorted(sessions)

    def run_one(sid: str) -> list[cascade.StageTrace]:
        return cascade.run_session(sessions[sid], components, policy,
                                   run_all=args.run_all)

    # Sessions are independent; results are written in session order no
    # matter the worker count, so emitted bytes never depend on timing.
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, sids))
    else:
        results = [run_one(sid) for sid in sids]

    out_fh = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    exits = []
    try:
        for traces in results:
            for tr in traces:
                out_fh.write(canonical_json(_trace_record(tr)) + "\n")
                exits.append(tr.exit_stage)
    finally:
        if args.out:
            out_fh.close()
    ratios = latency.ExitRatios.from_exit_stages(exits)
    _emit({"utterances": len(exits),
           "exit_ratios": {"acoustic": ratios.p_acoustic,
                           "linguistic": ratios.p_linguistic,
                           "fusion": ratios.p_fusion}})
    return 0


def _read_traces(path: str) -> list[dict]:
    records = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for ln, line in enumerate(fh, 1):
                if line.strip():
                    try:
                        records.append(json.loads(line))
                    except json.JSONDecodeError as exc:
                        raise DataError(f"{path}:{ln}: bad trace line: {exc}") from exc
    except OSError as exc:
        raise DataError(f"cannot read traces {path}: {exc}") from exc
    if not records:
        raise DataError(f"no trace records in {path}")
    return records


def _cmd_eval(args) -> int:
    _load_config(args)
    records = _read_traces(args.traces)
    truths = [r["label"] for r in records]
    preds = [r["final"] for r in records]
    cm = evalkit.ConfusionMatrix.from_labels(truths, preds)
    summary = evalkit.metrics(cm)
    exits = [r["exit_stage"] for r in records]
    ratios = latency.ExitRatios.from_exit_stages(exits)
    by_participant: dict[str, list[tuple[str, str]]] = {}
    for r in records:
        by_participant.setdefault(r["participant_id"], []).append(
            (r["label"], r["final"]))
    per_participant = {
        pid: evalkit.macro_f1_from_labels([t for t, _ in pairs],
                                          [p for _, p in pairs])
        for pid, pairs in sorted(by_participant.items())}
    if args.csv_dir:
        csv_dir = Path(args.csv_dir)
        csv_dir.mkdir(parents=True, exist_ok=True)
        with open(csv_dir / "per_class.csv", "w", encoding="utf-8") as fh:
            fh.write("class,precision,recall,f1,support\n")
            for name, row in summary["per_class"].items():
                fh.write(f"{name},{row['precision']:.6f},{row['recall']:.6f},"
                         f"{row['f1']:.6f},{row['support']}\n")
        with open(csv_dir / "per_participant.csv", "w", encoding="utf-8") as fh:
            fh.write("participant,macro_f1\n")
            for pid, f1 in per_participant.items():
                fh.write(f"{pid},{f1:.6f}\n")
    _emit({"confusion": cm.counts.tolist(),
           "macro_f1": summary["macro_f1"],
           "macro_precision": summary["macro_precision"],
           "macro_recall": summary["macro_recall"],
           "accuracy": summary["accuracy"],
           "exit_ratios": {"acoustic": ratios.p_acoustic,
                           "linguistic": ratios.p_linguistic,
                           "fusion": ratios.p_fusion},
           "per_participant_macro_f1": per_participant})
    return 0


def _cmd_latency(args) -> int:
    _load_config(args)
    profile = latency.LatencyProfile.from_file(args.profile_file) \
        if args.profile_file else latency.LatencyProfile()
    if args.traces:
        stages = [r["exit_stage"] for r in _read_traces(args.traces)]
        ratios = latency.ExitRatios.from_exit_stages(stages)
    elif args.ratios_file:
        ratios = latency.ExitRatios.from_file(args.ratios_file)
    else:
        ratios = latency.ExitRatios()
    full = latency.expected_latency(profile, ratios, early_exit=False)
    early = latency.expected_latency(profile, ratios, early_exit=True)
    _emit({"full_ms": round(full, 3), "early_exit_ms": round(early, 3),
           "reduction": round(latency.reduction(profile, ratios), 5)})
    return 0


def _cmd_transcribe_eval(args) -> int:
    _load_config(args)
    utterances = read_manifest(args.manifest)
    seed = _layered(args, "seed", 0, int)
    sessions = group_by_session(utterances)
    totals = {s: {"word_errors": 0, "words": 0, "char_errors": 0, "chars": 0}
              for s in transcription.STRATEGIES}
    for sid in sorted(sessions):
        session = sessions[sid]
        for i, target in enumerate(session):
            history = session[:i + 1]
            for strat in transcription.STRATEGIES:
                plan = transcription.plan_window(history, target, strat)
                hyp = transcription.corrupt_target_text(plan, seed)
                ref = target.text
                t = totals[strat]
                t["word_errors"] += transcription.levenshtein(ref.split(), hyp.split())
                t["words"] += len(ref.split())
                t["char_errors"] += transcription.levenshtein(list(ref), list(hyp))
                t["chars"] += len(ref)
    report = {}
    for strat, t in totals.items():
        report[strat] = {"wer": t["word_errors"] / t["words"] if t["words"] else 0.0,
                         "cer": t["char_errors"] / t["chars"] if t["chars"] else 0.0}
    _emit(report)
    return 0


def _cmd_promptgen(args) -> int:
    _load_config(args)
    utterances = read_manifest(args.manifest)
    template = _layered(args, "template", "text-zero")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    features_by_key: dict[tuple[str, int], dict] = {}
    if args.features:
        with open(args.features, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    features_by_key[(rec["session_id"], int(rec["seq_no"]))] = rec
    elif not args.neutral_descriptors:
        raise _UsageError("promptgen needs --features or --neutral-descriptors")

    shots: tuple[prompts.Shot, ...] = ()
    if template.endswith("-few"):
        if not args.shots_file:
            raise _UsageError(f"template {template} needs --shots-file")
        with open(args.shots_file, "r", encoding="utf-8") as fh:
            raw_shots = json.load(fh)
        shots = tuple(
            prompts.Shot(tuple(s["history"]), s["text"],
                         _descriptors_from_record(s), float(s["duration_s"]),
                         s["result"])
            for s in raw_shots)

    for sid, session in sorted(group_by_session(utterances).items()):
        for i, u in enumerate(session):
            history = tuple(x.text for x in session[:i])
            rec = features_by_key.get((sid, u.seq_no))
            if rec is not None:
                descriptors = _descriptors_from_record(rec)
            else:
                descriptors = _neutral_descriptors()
            ctx = prompts.PromptContext(history, u.text, descriptors,
                                        u.duration_s, template, shots)
            path = out_dir / f"{sid}-{u.seq_no:04d}.txt"
            path.write_text(prompts.render(ctx), encoding="utf-8")
    _emit({"template": template, "out_dir": str(out_dir),
           "prompts": len(utterances)})
    return 0


def _descriptors_from_record(rec: dict):
    from selftalk.features import FeatureDescriptors

    try:
        return FeatureDescriptors(
            pitch_variance_cat=rec["pitch_variance_cat"],
            pitch_mean_cat=rec["pitch_mean_cat"],
            intensity_mean_cat=rec["intensity_mean_cat"],
            pitch_range_cat=rec["pitch_range_cat"],
            intensity_range_cat=rec["intensity_range_cat"],
            contour=rec["contour"])
    except KeyError as exc:
        raise DataError(f"feature record missing {exc}") from exc


def _neutral_descriptors():
    from selftalk.features import CONTOUR_STEADY, FeatureDescriptors

    return FeatureDescriptors("Midium", "Midium", "Midium", "Midium",
                              "Midium", CONTOUR_STEADY)


# ---------------------------------------------------------------------------
# Argument wiring.

def _build_parser() -> _Parser:
    parser = _Parser(prog="selftalk")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--config", help="flat key=value config file")
        return p

    p = add("gen-synth", _cmd_gen_synth, help="generate a synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--participants", type=int)
    p.add_argument("--sessions-per-participant", "--n-sessions", type=int,
                   dest="sessions_per_participant")
    p.add_argument("--utterances-per-session", type=int)
    p.add_argument("--separation", type=float)
    p.add_argument("--noise-scale", type=float)
    p.add_argument("--vocab-overlap", type=float)
    p.add_argument("--min-gap-s", type=float)
    p.add_argument("--wav-dir")
    p.add_argument("--sample-rate", type=int)

    p = add("segment", _cmd_segment, help="segment a WAV into utterances")
    p.add_argument("--wav", required=True)
    p.add_argument("--threshold-db", type=float)
    p.add_argument("--window-s", type=float)
    p.add_argument("--hop-s", type=float)
    p.add_argument("--min-event-s", type=float)
    p.add_argument("--merge-gap-s", type=float)

    p = add("cache-sim", _cmd_cache_sim, help="replay manifest through the cache")
    p.add_argument("--manifest", required=True)
    p.add_argument("--budget-s", type=float)

    p = add("featurize", _cmd_featurize, help="acoustic features per segment")
    p.add_argument("--wav", required=True)
    p.add_argument("--bounds", help="tertile bounds file for descriptors")
    p.add_argument("--fit-bounds", help="fit tertiles on this WAV and write here")

    p = add("train", _cmd_train, help="train a head on a synthetic corpus")
    p.add_argument("--head", required=True,
                   choices=["acoustic", "linguistic", "fusion", "gate"])
    p.add_argument("--manifest", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--seed", type=int)

    p = add("pipeline", _cmd_pipeline, help="run staged inference over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--models", required=True, help="directory with trained models")
    p.add_argument("--policy-file")
    p.add_argument("--backend", help="stub | tcp://host:port | exec://cmd")
    p.add_argument("--strategy", choices=list(transcription.STRATEGIES))
    p.add_argument("--static-alpha", type=float)
    p.add_argument("--gate-model")
    p.add_argument("--fusion-mode", choices=["adaptive", "static"])
    p.add_argument("--sample-rate", type=int)
    p.add_argument("--run-all", action="store_true",
                   help="compute every stage even after an accept")
    p.add_argument("--workers", type=int,
                   help="parallel session workers (default 1)")
    p.add_argument("--out", help="trace JSONL path (default stdout)")

    p = add("eval", _cmd_eval, help="metrics from a trace file")
    p.add_argument("--traces", required=True)
    p.add_argument("--csv-dir")

    p = add("latency", _cmd_latency, help="expected latency and reduction")
    p.add_argument("--profile-file")
    p.add_argument("--ratios-file")
    p.add_argument("--traces")

    p = add("transcribe-eval", _cmd_transcribe_eval,
            help="compare window strategies under corruption")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int)

    p = add("promptgen", _cmd_promptgen, help="render classification prompts")
    p.add_argument("--manifest", required=True)
    p.add_argument("--template", choices=list(prompts.TEMPLATE_IDS))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--features", help="featurize JSONL with session_id/seq_no keys")
    p.add_argument("--neutral-descriptors", action="store_true")
    p.add_argument("--shots-file", help="JSON shot list for few-shot templates")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    try:
        return args.fn(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except BackendError as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
