"""Batch command-line front-end wiring the pipeline stages together.

Subcommands: extract, labels, split, score, train-toy. Outputs are
sorted by utterance id and every run writes its resolved config next to
the outputs, so reruns with identical inputs are byte-identical.

Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

from . import corpus, labels as labels_mod, scoring, trainer
from .config import PipelineConfig
from .errors import DataError, MissingHypothesis, NoControls
from .extract import extract_from_file

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_config(path) -> PipelineConfig:
    return PipelineConfig.from_file(path) if path else PipelineConfig()


def _write_resolved_config(out_path, cfg: PipelineConfig):
    directory = os.path.dirname(os.path.abspath(out_path))
    os.makedirs(directory, exist_ok=True)
    base = os.path.basename(out_path).split(".")[0]
    with open(os.path.join(directory, f"{base}.resolved_config.json"), "w") as fh:
        fh.write(cfg.to_json() + "\n")


def _write_jsonl(path, rows):
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def _read_jsonl(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# --- subcommands ---

def cmd_extract(args) -> int:
    cfg = _load_config(args.config)
    records = corpus.load_manifest(args.manifest)
    rows = []
    n_failed = 0
    for rec in sorted(records, key=lambda r: r.utt_id):
        vector = extract_from_file(rec.audio_path, cfg)
        if len(vector.missing) == len(labels_mod.FEATURE_NAMES):
            n_failed += 1
        rows.append(
            {
                "utt_id": rec.utt_id,
                "speaker_id": rec.speaker_id,
                "cohort": rec.cohort,
                "features": {k: vector.values[k] for k in sorted(vector.values)},
                "missing": sorted(vector.missing),
                "notes": dict(sorted(vector.notes.items())),
            }
        )
    _write_resolved_config(args.out, cfg)
    _write_jsonl(args.out, rows)
    if records and n_failed == len(records):
        print("extraction failed for every utterance", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def _vector_from_row(row) -> labels_mod.BiomarkerVector:
    return labels_mod.BiomarkerVector(
        values=row["features"], missing=frozenset(row["missing"]), notes=row.get("notes", {})
    )


def cmd_labels(args) -> int:
    cfg = _load_config(args.config)
    rows = _read_jsonl(args.biomarkers)
    split = corpus.load_split(args.split)
    train_controls = [
        row
        for row in rows
        if row["cohort"] == "control" and split.by_speaker.get(row["speaker_id"]) == "train"
    ]
    if not train_controls:
        raise NoControls("no training-split control utterances")
    stats = labels_mod.fit_control_stats(
        [(_vector_from_row(r), r["cohort"]) for r in train_controls],
        utt_ids=[r["utt_id"] for r in train_controls],
    )
    out_rows = []
    skipped = {}
    for row in sorted(rows, key=lambda r: r["utt_id"]):
        vector = _vector_from_row(row)
        try:
            lab = labels_mod.make_labels(vector, stats, cfg.bin_edge)
        except DataError as exc:
            skipped[row["utt_id"]] = f"{type(exc).__name__}: {exc}"
            continue
        out_rows.append(
            {
                "utt_id": row["utt_id"],
                "speaker_id": row["speaker_id"],
                "cohort": row["cohort"],
                "split": split.by_speaker.get(row["speaker_id"]),
                "z": {k: lab.z[k] for k in sorted(lab.z)},
                "bins": {k: lab.bins[k] for k in sorted(lab.bins)},
                "family_labels": dict(sorted(lab.family_labels.items())),
            }
        )
    _write_resolved_config(args.out, cfg)
    _write_jsonl(args.out, out_rows)
    stats_path = os.path.splitext(args.out)[0] + ".stats.json"
    with open(stats_path, "w") as fh:
        json.dump(
            {"mean": stats.mean, "std": stats.std, "control_ids": list(stats.control_ids),
             "skipped": skipped},
            fh,
            sort_keys=True,
            indent=2,
        )
        fh.write("\n")
    return EXIT_OK


def cmd_split(args) -> int:
    cfg = _load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    records = corpus.load_manifest(args.manifest)
    assignment = corpus.split_speakers(records, seed)
    _write_resolved_config(args.out, cfg)
    with open(args.out, "w") as fh:
        fh.write(assignment.to_json() + "\n")
    return EXIT_OK


def cmd_score(args) -> int:
    cfg = _load_config(args.config)
    records = corpus.load_manifest(args.manifest)
    by_utt = {r.utt_id: r for r in records}
    hyp_rows = _read_jsonl(args.hypotheses)
    hyps = {}
    for row in hyp_rows:
        hyps.setdefault(row["model"], {})[row["utt_id"]] = row["hypothesis"]

    scored = []
    for model in sorted(hyps):
        missing = sorted(set(by_utt) - set(hyps[model]))
        if missing:
            raise MissingHypothesis(model, missing)
        for utt_id, rec in sorted(by_utt.items()):
            scored.append(
                scoring.ScoredUtterance(
                    ref=rec.reference,
                    hyp=hyps[model][utt_id],
                    cohort=rec.cohort,
                    model=model,
                )
            )
    reports = scoring.score(scored)

    os.makedirs(args.out, exist_ok=True)
    _write_resolved_config(os.path.join(args.out, "report.json"), cfg)
    rows = [r.as_row() for r in reports]
    with open(os.path.join(args.out, "report.json"), "w") as fh:
        json.dump(rows, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(args.out, "report.csv"), "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)

    if args.baseline_model:
        if args.baseline_model not in hyps:
            raise DataError(f"baseline model {args.baseline_model!r} not in hypotheses")
        base = [r for r in reports if r.model == args.baseline_model]
        delta_rows = []
        for model in sorted(hyps):
            if model == args.baseline_model:
                continue
            var = [r for r in reports if r.model == model]
            for d in scoring.delta_report(base, var):
                delta_rows.append(d.as_row(model))
        with open(os.path.join(args.out, "deltas.json"), "w") as fh:
            json.dump(delta_rows, fh, sort_keys=True, indent=2)
            fh.write("\n")
        with open(os.path.join(args.out, "deltas.csv"), "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["model", "cohort", "d_wer", "d_sub", "d_del", "d_ins"]
            )
            writer.writeheader()
            writer.writerows(delta_rows)
    return EXIT_OK


def cmd_train_toy(args) -> int:
    cfg = _load_config(args.config)
    family = args.family or cfg.family
    records = corpus.load_manifest(args.manifest)
    if args.split:
        split = corpus.load_split(args.split)
        records = [r for r in records if split.by_speaker.get(r.speaker_id) == "train"]
    records = sorted(records, key=lambda r: r.utt_id)
    if not records:
        raise DataError("no training utterances after split filtering")

    enc_cfg = trainer.ToyEncoderConfig(
        n_mels=cfg.n_mels,
        frame=cfg.frame_spec(),
        n_layers=cfg.n_layers,
        hidden_dim=cfg.hidden_dim,
        adapter_dim=cfg.adapter_dim,
        vocab=cfg.vocab,
        seed=cfg.seed,
    )
    from .audio_core import load_wav

    feats, targets = [], []
    for rec in records:
        audio = load_wav(rec.audio_path)
        feats.append(trainer.log_mel(audio, enc_cfg))
        targets.append(enc_cfg.encode_text(rec.reference))

    family_labels = None
    n_bio = None
    if family != "none":
        label_rows = {row["utt_id"]: row for row in _read_jsonl(args.labels)} if args.labels else {}
        missing = [r.utt_id for r in records if r.utt_id not in label_rows]
        if missing:
            raise DataError(f"labels file missing utterances: {missing[:5]}...")
        family_labels = [label_rows[r.utt_id]["family_labels"][family] for r in records]
        n_bio = labels_mod.family_n_classes(family)

    model = trainer.ToyAdapterModel(enc_cfg, n_bio_classes=n_bio)
    batch = trainer.make_batch(feats, targets, family_labels)
    loss_cfg = trainer.JointLossConfig(lam=cfg.lambda_bio if family != "none" else 0.0,
                                       active_family=family)
    history = trainer.train(model, batch, loss_cfg, cfg.train_steps, cfg.learning_rate)

    os.makedirs(args.out, exist_ok=True)
    _write_resolved_config(os.path.join(args.out, "losses.csv"), cfg)
    with open(os.path.join(args.out, "losses.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "total", "asr", "bio"])
        for step, bd in enumerate(history):
            writer.writerow(
                [step, f"{bd['total']:.6f}", f"{bd['asr']:.6f}", f"{bd['bio']:.6f}"]
            )
    trainer.save_params(os.path.join(args.out, "checkpoint.npz"), model)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="speechmark", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract biomarker vectors from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output biomarkers JSONL path")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("labels", help="fit control stats and emit supervisory labels")
    p.add_argument("--biomarkers", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output labels JSONL path")
    p.set_defaults(func=cmd_labels)

    p = sub.add_parser("split", help="speaker-independent cohort-stratified split")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output split JSON path")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("score", help="WER report with S/D/I forensics")
    p.add_argument("--manifest", required=True)
    p.add_argument("--hypotheses", required=True)
    p.add_argument("--baseline-model")
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train-toy", help="train the toy adapter model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--labels")
    p.add_argument("--split")
    p.add_argument("--family", choices=["none", "prosody", "phonation", "articulation"])
    p.add_argument("--config")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_train_toy)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
