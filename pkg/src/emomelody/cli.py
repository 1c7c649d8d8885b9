"""Pipeline command line: ingest, analyze, label, balance, train, generate, eval.

Every stage reads files, writes files atomically (temp file + rename), and
logs line-oriented JSON to stderr so drop reasons stay machine-checkable.
All randomness flows from one root seed; rerunning a stage with the same
seed and inputs rewrites byte-identical outputs.

Exit codes: 0 success, 1 fatal configuration or IO problem, 2 empty result.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import os
import random
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # 3.10 fallback
    import tomli as tomllib

from .errors import (
    DegenerateSeriesError,
    ExhaustedRetriesError,
    MalformedTableError,
    TuneError,
)
from .features import FEATURE_NAMES, extract_features
from .generator import (
    DEFAULT_MAX_CHARS,
    CharLanguageModel,
    load_model,
    parse_rate,
)
from .labeling import ControlCode, LabeledTune, balance, label_corpus
from .midi import rms, synthesize, to_midi_bytes, write_wav
from .musicxml import read_musicxml
from .notation import iter_tunes, parse_abc, serialize_abc
from .score import segment
from .stats import CorrelationRow, gaussian_kde, pearson
from .template import TEMPLATE_FEATURES, generate_with_emotion

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_EMPTY = 2

QUADRANTS = ("Q1", "Q2", "Q3", "Q4")
VALENCE_BIT = {"Q1": 1, "Q2": 0, "Q3": 0, "Q4": 1}
AROUSAL_BIT = {"Q1": 1, "Q2": 1, "Q3": 0, "Q4": 0}

TABLE_COLUMNS = (
    "label", "valence", "arousal", "key", "mode", "tempo",
    "direction", "avg_pitch", "pitch_range", "pitch_sd", "rms",
)
# features with continuous scales get KDE curves; mode/direction get bars
MULTISCALE_FEATURES = ("key", "tempo", "avg_pitch", "pitch_range", "pitch_sd", "rms")

_ABC_SUFFIXES = {".abc", ".txt"}
_XML_SUFFIXES = {".xml", ".musicxml", ".mxl"}


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    out: str = "out"
    split: int = 10  # train:test ratio, ten training records per held-out one
    order: int = 6
    alpha: float = 0.01
    count: int = 10
    samples: int = 100
    temperature: float = 0.7
    max_chars: int = DEFAULT_MAX_CHARS
    threshold: float | None = None
    chunk_measures: int = 20
    merge_tail_at: int = 10
    wav: bool = False
    guarded: bool = True

    def __post_init__(self):
        if self.split <= 1:
            raise ValueError("split ratio must exceed 1")
        if self.count <= 0 or self.samples <= 0:
            raise ValueError("counts must be positive")
        if self.order < 1 or not self.alpha > 0:
            raise ValueError("order must be >= 1 and alpha positive")
        if self.temperature < 0 or self.max_chars < 1:
            raise ValueError("temperature must be >= 0 and max_chars >= 1")


def _log(event: str, **payload):
    record = {"event": event}
    record.update(payload)
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def _atomic_write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        mode="wb", dir=path.parent, prefix=f".{path.name}.", delete=False
    )
    try:
        handle.write(data)
        handle.close()
        os.replace(handle.name, path)
    except BaseException:
        handle.close()
        os.unlink(handle.name)
        raise


def _write_text(path: Path, text: str):
    _atomic_write(path, text.encode("utf-8"))


def _write_json(path: Path, payload):
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_jsonl(path: Path, records):
    lines = [json.dumps(record, sort_keys=True) for record in records]
    _write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def _read_jsonl(path: Path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _collect_files(inputs: list[str]) -> list[Path]:
    files: list[Path] = []
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            found = [
                p for p in sorted(path.rglob("*"))
                if p.suffix.lower() in (_ABC_SUFFIXES | _XML_SUFFIXES)
            ]
            files.extend(found)
        elif path.is_file():
            files.append(path)
        else:
            raise FileNotFoundError(f"input path does not exist: {item}")
    return files


def _scores_from_file(path: Path):
    """Yield (source_tag, Score) pairs; parse errors raise per tune."""
    if path.suffix.lower() in _XML_SUFFIXES:
        yield str(path), read_musicxml(path)
        return
    text = path.read_text(encoding="utf-8")
    for index, tune_text in enumerate(iter_tunes(text)):
        yield f"{path}#{index}", tune_text


def cmd_ingest(config: PipelineConfig, inputs: list[str]) -> int:
    out = Path(config.out)
    files = _collect_files(inputs)
    if not files:
        _log("fatal", reason="no input files found", inputs=inputs)
        return EXIT_FATAL
    scores = []
    dropped = 0
    duplicates = 0
    seen: set[str] = set()
    for path in files:
        try:
            entries = list(_scores_from_file(path))
        except (TuneError, OSError, ValueError) as exc:
            _log("drop", file=str(path), reason=str(exc))
            dropped += 1
            continue
        for source, item in entries:
            try:
                score = item if not isinstance(item, str) else parse_abc(item)
            except TuneError as exc:
                _log("drop", file=source, reason=str(exc))
                dropped += 1
                continue
            canonical = serialize_abc(score)
            digest = hashlib.sha256(canonical.encode("utf-8")).hexdigest()
            if digest in seen:
                _log("drop", file=source, reason="duplicate content")
                duplicates += 1
                continue
            seen.add(digest)
            scores.append((source, score))
    chunks = []
    for source, score in scores:
        for part_index, part in enumerate(
            segment(score, config.chunk_measures, config.merge_tail_at)
        ):
            chunks.append((f"{source}/{part_index}", part))
    if not chunks:
        _log("fatal", reason="no records survived ingest")
        return EXIT_EMPTY
    pairs = [(score, extract_features(score)) for _, score in chunks]
    labeled, threshold = label_corpus(pairs, config.threshold)
    records = [
        {"abc": serialize_abc(item.score), "label": item.label, "source": source}
        for (source, _), item in zip(chunks, labeled)
    ]
    by_quadrant = {q: sum(r["label"] == q for r in records) for q in QUADRANTS}
    _write_jsonl(out / "records.jsonl", records)
    _write_json(out / "manifest.json", {
        "records": len(records),
        "tunes": len(scores),
        "dropped": dropped,
        "duplicates": duplicates,
        "by_quadrant": by_quadrant,
        "threshold": threshold,
    })
    _log("ingest", records=len(records), dropped=dropped, duplicates=duplicates)
    return EXIT_OK


def cmd_label(config: PipelineConfig, dataset: str) -> int:
    out = Path(config.out)
    rows = _read_jsonl(Path(dataset))
    if not rows:
        _log("fatal", reason="dataset is empty", dataset=dataset)
        return EXIT_EMPTY
    scores = [parse_abc(row["abc"]) for row in rows]
    pairs = [(score, extract_features(score)) for score in scores]
    labeled, threshold = label_corpus(pairs, config.threshold)
    records = [
        {
            "control": item.control.render(),
            "abc": serialize_abc(item.score),
            "label": item.label,
        }
        for item in labeled
    ]
    by_quadrant = {q: sum(r["label"] == q for r in records) for q in QUADRANTS}
    _write_jsonl(out / "labeled.jsonl", records)
    _write_json(out / "manifest.json", {
        "records": len(records),
        "by_quadrant": by_quadrant,
        "threshold": threshold,
    })
    _log("label", records=len(records), threshold=threshold)
    return EXIT_OK


def cmd_balance(config: PipelineConfig, dataset: str) -> int:
    out = Path(config.out)
    rows = _read_jsonl(Path(dataset))
    if not rows:
        _log("fatal", reason="dataset is empty", dataset=dataset)
        return EXIT_EMPTY
    labeled = [
        LabeledTune(
            score=parse_abc(row["abc"]),
            label=row["label"],
            control=ControlCode.parse(row["control"]),
        )
        for row in rows
    ]
    expanded, warnings = balance(labeled)
    for message in warnings:
        _log("range-warning", reason=message)
    records = [
        {
            "control": item.control.render(),
            "abc": serialize_abc(item.score),
            "label": item.label,
        }
        for item in expanded
    ]
    by_quadrant = {q: sum(r["label"] == q for r in records) for q in QUADRANTS}
    _write_jsonl(out / "balanced.jsonl", records)
    _write_json(out / "manifest.json", {
        "records": len(records),
        "by_quadrant": by_quadrant,
        "range_warnings": len(warnings),
    })
    _log("balance", records=len(records), warnings=len(warnings))
    return EXIT_OK


def _dataset_examples(rows: list[dict]) -> list[tuple[ControlCode, str]]:
    examples = []
    for row in rows:
        if "control" not in row:
            raise ValueError("dataset records lack control codes; run the label stage")
        examples.append((ControlCode.parse(row["control"]), row["abc"]))
    return examples


def cmd_train(config: PipelineConfig, dataset: str) -> int:
    out = Path(config.out)
    rows = _read_jsonl(Path(dataset))
    if not rows:
        _log("fatal", reason="dataset is empty", dataset=dataset)
        return EXIT_EMPTY
    examples = _dataset_examples(rows)
    indices = list(range(len(examples)))
    random.Random(config.seed).shuffle(indices)
    n_test = len(examples) // (config.split + 1)
    test = [examples[i] for i in indices[:n_test]]
    train = [examples[i] for i in indices[n_test:]]
    model = CharLanguageModel.train(train, config.order, config.alpha)
    _atomic_write(out / "model.bin", model.save_bytes())
    metrics = {
        "examples": len(examples),
        "train_records": len(train),
        "test_records": len(test),
        "order": config.order,
        "alpha": config.alpha,
        "vocabulary": len(model.vocab),
        "contexts": len(model.counts),
        "train_ce": model.cross_entropy(train),
        "test_ce": model.cross_entropy(test) if test else None,
    }
    _write_json(out / "metrics.json", metrics)
    _log("train", **{k: v for k, v in metrics.items() if k != "alpha"})
    return EXIT_OK


def cmd_generate(config: PipelineConfig, model_path: str, emotions: list[str],
                 ablate: list[str]) -> int:
    out = Path(config.out)
    model = load_model(Path(model_path))
    features = tuple(f for f in TEMPLATE_FEATURES if f not in ablate)
    pieces = []
    for label in emotions:
        for index in range(config.count):
            seed = f"{config.seed}:{label}:{index}"
            try:
                piece = generate_with_emotion(
                    model, label, seed=seed, features=features,
                    temperature=config.temperature, max_chars=config.max_chars,
                    guarded=config.guarded,
                )
            except ExhaustedRetriesError as exc:
                _log("drop", label=label, index=index, reason=str(exc))
                continue
            stem = f"{label.lower()}_{index:03d}"
            _write_text(out / f"{stem}.abc", piece.abc_text)
            _atomic_write(out / f"{stem}.mid", to_midi_bytes(piece.performance))
            entry = {
                "file": stem,
                "label": piece.label,
                "applied": piece.applied,
                "attempts": piece.attempts,
            }
            if config.wav:
                audio = synthesize(piece.performance)
                buffer = io.BytesIO()
                write_wav(buffer, audio)
                _atomic_write(out / f"{stem}.wav", buffer.getvalue())
                entry["rms"] = rms(audio)
            pieces.append(entry)
    if not pieces:
        _log("fatal", reason="no pieces were generated")
        return EXIT_EMPTY
    _write_json(out / "manifest.json", {"pieces": pieces, "seed": config.seed})
    _log("generate", pieces=len(pieces))
    return EXIT_OK


def cmd_eval(config: PipelineConfig, model_path: str, dataset: str) -> int:
    out = Path(config.out)
    model = load_model(Path(model_path))
    rows = _read_jsonl(Path(dataset))
    if not rows:
        _log("fatal", reason="dataset is empty", dataset=dataset)
        return EXIT_EMPTY
    codes = [ControlCode.parse(row["control"]) for row in rows if "control" in row]
    if not codes:
        _log("fatal", reason="dataset records lack control codes")
        return EXIT_FATAL
    rng = random.Random(config.seed)
    prompts = [rng.choice(codes) for _ in range(config.samples)]
    rate = parse_rate(
        model, prompts, samples_per_prompt=1, seed=config.seed,
        temperature=config.temperature, max_chars=config.max_chars,
        guarded=config.guarded,
    )
    report = {
        "parse_rate": rate,
        "samples": config.samples,
        "temperature": config.temperature,
        "guarded": config.guarded,
    }
    _write_json(out / "parse_rate.json", report)
    _log("eval", **report)
    return EXIT_OK


def _feature_row(label: str, score) -> dict:
    vector = extract_features(score)
    return {
        "label": label,
        "valence": VALENCE_BIT[label],
        "arousal": AROUSAL_BIT[label],
        "key": vector.key_pc,
        "mode": vector.mode,
        "tempo": vector.value("tempo"),
        "direction": vector.direction,
        "avg_pitch": vector.average_pitch,
        "pitch_range": vector.pitch_range,
        "pitch_sd": vector.pitch_sd,
        "rms": vector.rms,
    }


def _read_table(path: Path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedTableError("feature table is empty") from None
        if tuple(header) != TABLE_COLUMNS:
            raise MalformedTableError(
                f"expected columns {','.join(TABLE_COLUMNS)}, got {','.join(header)}"
            )
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(TABLE_COLUMNS):
                raise MalformedTableError(
                    f"row {line_no} has {len(row)} cells, expected {len(TABLE_COLUMNS)}"
                )
            record = {"label": row[0]}
            for name, cell in zip(TABLE_COLUMNS[1:], row[1:]):
                try:
                    record[name] = float(cell)
                except ValueError:
                    raise MalformedTableError(
                        f"row {line_no}: {name} is not numeric: {cell!r}"
                    ) from None
            rows.append(record)
    return rows


def _format_float(value: float) -> str:
    return format(value, ".12g")


def cmd_analyze(config: PipelineConfig, table: str | None, dataset: str | None) -> int:
    out = Path(config.out)
    if table:
        rows = _read_table(Path(table))
    else:
        data = _read_jsonl(Path(dataset))
        if not data:
            _log("fatal", reason="dataset is empty", dataset=dataset)
            return EXIT_EMPTY
        rows = [_feature_row(r["label"], parse_abc(r["abc"])) for r in data]
        body = [",".join(TABLE_COLUMNS)]
        body += [
            ",".join([r["label"]] + [_format_float(r[c]) for c in TABLE_COLUMNS[1:]])
            for r in rows
        ]
        _write_text(out / "features.csv", "\n".join(body) + "\n")
    if not rows:
        _log("fatal", reason="feature table has no rows")
        return EXIT_EMPTY
    lines = ["dimension,feature,r,p,descriptor,significant"]
    live_rows = 0
    failure: DegenerateSeriesError | None = None
    for dimension in ("valence", "arousal"):
        axis = [row[dimension] for row in rows]
        for feature in FEATURE_NAMES:
            values = [row[feature] for row in rows]
            try:
                r, p = pearson(axis, values)
            except DegenerateSeriesError as exc:
                # a single flat column should not sink the whole report
                failure = exc
                _log("correlation-skip", dimension=dimension, feature=feature,
                     reason=str(exc))
                lines.append(f"{dimension},{feature},nan,nan,degenerate,false")
                continue
            live_rows += 1
            row_report = CorrelationRow(dimension, feature, r, p)
            lines.append(",".join([
                dimension, feature, _format_float(r), _format_float(p),
                row_report.descriptor, str(row_report.significant).lower(),
            ]))
    if live_rows == 0 and failure is not None:
        raise failure  # nothing correlates: the table itself is unusable
    _write_text(out / "report.csv", "\n".join(lines) + "\n")
    for feature in MULTISCALE_FEATURES:
        for quadrant in QUADRANTS:
            values = [r[feature] for r in rows if r["label"] == quadrant]
            try:
                grid, density = gaussian_kde(values)
            except DegenerateSeriesError as exc:
                _log("kde-skip", feature=feature, quadrant=quadrant, reason=str(exc))
                continue
            curve = ["x,density"]
            curve += [
                f"{_format_float(x)},{_format_float(d)}"
                for x, d in zip(grid, density)
            ]
            _write_text(out / f"kde_{feature}_{quadrant.lower()}.csv",
                        "\n".join(curve) + "\n")
    mode_lines = ["quadrant,minor,major"]
    direction_lines = ["quadrant,down,level,up"]
    for quadrant in QUADRANTS:
        sub = [r for r in rows if r["label"] == quadrant]
        minor = sum(r["mode"] == 0 for r in sub)
        mode_lines.append(f"{quadrant},{minor},{len(sub) - minor}")
        down = sum(r["direction"] < 0 for r in sub)
        up = sum(r["direction"] > 0 for r in sub)
        direction_lines.append(f"{quadrant},{down},{len(sub) - down - up},{up}")
    _write_text(out / "bars_mode.csv", "\n".join(mode_lines) + "\n")
    _write_text(out / "bars_direction.csv", "\n".join(direction_lines) + "\n")
    _log("analyze", rows=len(rows), report_rows=len(lines) - 1)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; keep 2 for empty
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="emomelody", description=__doc__)
    parser.add_argument("--config", help="TOML file with pipeline settings")
    parser.add_argument("--seed", type=int, help="root seed for all randomness")
    parser.add_argument("--out", help="output directory for this stage")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, dedup, segment, and label raw tunes")
    p.add_argument("inputs", nargs="+", help="ABC/MusicXML files or directories")
    p.add_argument("--threshold", type=float, help="pitch-spread split override")
    p.add_argument("--chunk-measures", type=int, dest="chunk_measures")
    p.add_argument("--merge-tail-at", type=int, dest="merge_tail_at")

    p = sub.add_parser("analyze", help="correlation report, KDE curves, bar counts")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--table", help="feature CSV (label + 10 numeric columns)")
    group.add_argument("--dataset", help="labeled JSONL to featurize first")

    p = sub.add_parser("label", help="auto-label records and attach control codes")
    p.add_argument("--dataset", required=True, help="records JSONL from ingest")
    p.add_argument("--threshold", type=float, help="pitch-spread split override")

    p = sub.add_parser("balance", help="equalize quadrants by key transposition")
    p.add_argument("--dataset", required=True, help="labeled JSONL")

    p = sub.add_parser("train", help="fit the character model and report CE")
    p.add_argument("--dataset", required=True, help="labeled/balanced JSONL")
    p.add_argument("--order", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--split", type=int, help="train:test ratio (default 10)")

    p = sub.add_parser("generate", help="sample melodies and apply the template")
    p.add_argument("--model", required=True)
    p.add_argument("--emotion", required=True,
                   help="comma list of quadrants, e.g. Q1 or Q1,Q3")
    p.add_argument("--count", type=int, help="pieces per quadrant")
    p.add_argument("--ablate", default="",
                   help=f"comma list from {','.join(TEMPLATE_FEATURES)}")
    p.add_argument("--temperature", type=float)
    p.add_argument("--unguarded", action="store_true",
                   help="sample without the grammar mask")
    p.add_argument("--wav", action="store_true", help="also synthesize audio")

    p = sub.add_parser("eval", help="measure parse rate over sampled prompts")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True, help="JSONL with control codes")
    p.add_argument("--samples", type=int)
    p.add_argument("--temperature", type=float)
    p.add_argument("--unguarded", action="store_true")
    return parser


def _load_config(args) -> PipelineConfig:
    values: dict = {}
    if args.config:
        with open(args.config, "rb") as handle:
            values.update(tomllib.load(handle))
    for name in (
        "seed", "out", "threshold", "chunk_measures", "merge_tail_at",
        "order", "alpha", "split", "count", "samples", "temperature",
    ):
        value = getattr(args, name, None)
        if value is not None:
            values[name] = value
    if getattr(args, "wav", False):
        values["wav"] = True
    if getattr(args, "unguarded", False):
        values["guarded"] = False
    known = {field.name for field in dataclasses.fields(PipelineConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return PipelineConfig(**values)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args)
        if args.command == "ingest":
            return cmd_ingest(config, args.inputs)
        if args.command == "analyze":
            return cmd_analyze(config, args.table, args.dataset)
        if args.command == "label":
            return cmd_label(config, args.dataset)
        if args.command == "balance":
            return cmd_balance(config, args.dataset)
        if args.command == "train":
            return cmd_train(config, args.dataset)
        if args.command == "generate":
            emotions = [e.strip() for e in args.emotion.split(",") if e.strip()]
            bad = [e for e in emotions if e not in QUADRANTS]
            if bad or not emotions:
                raise ValueError(f"emotion must name quadrants Q1..Q4, got {args.emotion!r}")
            ablate = [a.strip() for a in args.ablate.split(",") if a.strip()]
            bad = [a for a in ablate if a not in TEMPLATE_FEATURES]
            if bad:
                raise ValueError(f"unknown ablation features: {', '.join(bad)}")
            return cmd_generate(config, args.model, emotions, ablate)
        if args.command == "eval":
            return cmd_eval(config, args.model, args.dataset)
        raise ValueError(f"unknown command {args.command!r}")
    except (TuneError, OSError, ValueError) as exc:
        _log("fatal", reason=str(exc))
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
