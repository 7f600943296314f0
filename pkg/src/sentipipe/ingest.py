"""File ingestion: ad annotation JSON, AU stream CSV, and the coverage filter.

Parsers are strict on purpose. A malformed row aborts the whole parse instead
of being skipped, because silently dropped rows would bias every KPI computed
downstream. Writers emit the exact same formats the parsers accept, with full
float precision, so a parse -> write -> parse cycle is lossless.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .core import (
    AdLabel,
    AdSpec,
    AuFrame,
    AuVector,
    CANONICAL_AU_NAMES,
    Interval,
    N_AUS,
    VideoRecord,
    canonical_au_index,
)
from .errors import SchemaError, ValidationError

DEFAULT_MIN_COVERAGE = 0.90

# CSV schema for AU streams. Metadata columns are fixed; AU columns may appear
# in any order in the header and are matched by name.
STREAM_META_COLUMNS = ("video_id", "ad_id", "frame_index", "timestamp_s", "face_detected")
STREAM_AU_COLUMNS = (
    "au_1", "au_2", "au_4", "au_5", "au_6", "au_7", "au_9", "au_10", "au_14",
    "au_15", "au_17", "au_18", "au_20", "au_24", "au_25", "au_26", "au_28",
    "au_eye_closure", "au_smile", "au_smirk",
)

_ANNOTATION_KEYS = {"ad_id", "label", "duration_s", "moments"}
_LABEL_BY_STRING = {label.value: label for label in AdLabel}


@dataclass(frozen=True)
class Dataset:
    """A parsed corpus: the ad annotation map plus every participant video."""

    ads: dict[str, AdSpec]
    videos: tuple[VideoRecord, ...]

    def __post_init__(self) -> None:
        videos = tuple(self.videos)
        for ad_id, ad in self.ads.items():
            if ad.ad_id != ad_id:
                raise ValidationError(
                    f"ads map key {ad_id!r} does not match AdSpec.ad_id {ad.ad_id!r}")
        seen: set[str] = set()
        for video in videos:
            if video.video_id in seen:
                raise ValidationError(f"duplicate video_id {video.video_id!r}")
            seen.add(video.video_id)
            if video.ad_id not in self.ads:
                raise ValidationError(
                    f"video {video.video_id!r} references unknown ad {video.ad_id!r}")
        object.__setattr__(self, "videos", videos)

    def videos_by_ad(self) -> dict[str, list[VideoRecord]]:
        grouped: dict[str, list[VideoRecord]] = {}
        for video in self.videos:
            grouped.setdefault(video.ad_id, []).append(video)
        return grouped


def _au_column_to_index(column: str) -> int | None:
    """Resolve an ``au_*`` header cell to a canonical AU position, else None."""
    if not column.startswith("au_"):
        return None
    suffix = column[3:]
    name = ("AU" + suffix) if suffix.isdigit() else suffix.replace("_", "")
    return canonical_au_index(name)


def parse_ad_annotations(path: str | Path) -> dict[str, AdSpec]:
    """Read the ad annotation JSON into an ordered ad_id -> AdSpec map."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(payload, list):
        raise SchemaError(f"{path}: expected a JSON array of ad objects")
    ads: dict[str, AdSpec] = {}
    for i, item in enumerate(payload):
        if not isinstance(item, dict):
            raise SchemaError(f"{path}: entry {i} is not an object")
        if set(item) != _ANNOTATION_KEYS:
            raise SchemaError(
                f"{path}: entry {i} must have exactly the keys "
                f"{sorted(_ANNOTATION_KEYS)}, got {sorted(item)}")
        ad_id = item["ad_id"]
        if not isinstance(ad_id, str) or not ad_id:
            raise SchemaError(f"{path}: entry {i} has a non-string or empty ad_id")
        if ad_id in ads:
            raise SchemaError(f"{path}: duplicate ad_id {ad_id!r}")
        label = _LABEL_BY_STRING.get(item["label"])
        if label is None:
            raise ValidationError(
                f"{path}: ad {ad_id!r} label must be one of "
                f"{sorted(_LABEL_BY_STRING)}, got {item['label']!r}")
        duration = item["duration_s"]
        if isinstance(duration, bool) or not isinstance(duration, (int, float)):
            raise SchemaError(f"{path}: ad {ad_id!r} duration_s is not a number")
        raw_moments = item["moments"]
        if not isinstance(raw_moments, list):
            raise SchemaError(f"{path}: ad {ad_id!r} moments is not an array")
        moments = []
        for pair in raw_moments:
            if (not isinstance(pair, list) or len(pair) != 2
                    or any(isinstance(x, bool) or not isinstance(x, (int, float))
                           for x in pair)):
                raise SchemaError(
                    f"{path}: ad {ad_id!r} moments must be [start, end] number pairs")
            moments.append(Interval(float(pair[0]), float(pair[1])))
        moments.sort(key=lambda m: (m.start_s, m.end_s))
        ads[ad_id] = AdSpec(ad_id=ad_id, label=label, duration_s=float(duration),
                            moments=tuple(moments))
    return ads


def write_ad_annotations(ads: dict[str, AdSpec], path: str | Path) -> None:
    """Serialize an ad map to the annotation JSON format, preserving order."""
    payload = [
        {
            "ad_id": ad.ad_id,
            "label": ad.label.value,
            "duration_s": ad.duration_s,
            "moments": [[m.start_s, m.end_s] for m in ad.moments],
        }
        for ad in ads.values()
    ]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _resolve_stream_header(header: Sequence[str], path) -> tuple[dict[str, int], list[int]]:
    seen: set[str] = set()
    for column in header:
        if column in seen:
            raise SchemaError(f"{path}: duplicate column {column!r}")
        seen.add(column)
    meta_pos: dict[str, int] = {}
    au_pos: list[int | None] = [None] * N_AUS
    for pos, column in enumerate(header):
        if column in STREAM_META_COLUMNS:
            meta_pos[column] = pos
            continue
        try:
            index = _au_column_to_index(column)
        except Exception:
            index = None
        if index is None:
            raise SchemaError(f"{path}: unrecognized column {column!r}")
        au_pos[index] = pos
    missing_meta = [c for c in STREAM_META_COLUMNS if c not in meta_pos]
    if missing_meta:
        raise SchemaError(f"{path}: missing columns {missing_meta}")
    missing_aus = [CANONICAL_AU_NAMES[i] for i, p in enumerate(au_pos) if p is None]
    if missing_aus:
        raise SchemaError(f"{path}: missing AU columns for {missing_aus}")
    return meta_pos, [p for p in au_pos if p is not None]


def parse_au_stream(path: str | Path) -> list[VideoRecord]:
    """Read an AU stream CSV into VideoRecords, in first-appearance order.

    Rows belonging to one video must appear in strictly increasing frame_index
    order and must all name the same ad.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty AU stream file")
        meta_pos, au_pos = _resolve_stream_header(header, path)
        vid_p = meta_pos["video_id"]
        ad_p = meta_pos["ad_id"]
        idx_p = meta_pos["frame_index"]
        ts_p = meta_pos["timestamp_s"]
        face_p = meta_pos["face_detected"]
        n_cols = len(header)

        frames_by_video: dict[str, list[AuFrame]] = {}
        ad_by_video: dict[str, str] = {}
        last_frame: dict[str, AuFrame] = {}
        for row in reader:
            line = reader.line_num
            if len(row) != n_cols:
                raise SchemaError(
                    f"{path}:{line}: expected {n_cols} cells, got {len(row)}")
            video_id = row[vid_p]
            ad_id = row[ad_p]
            if not video_id or not ad_id:
                raise SchemaError(f"{path}:{line}: empty video_id or ad_id")
            try:
                frame_index = int(row[idx_p])
                timestamp = float(row[ts_p])
            except ValueError as exc:
                raise SchemaError(f"{path}:{line}: {exc}") from exc
            face_cell = row[face_p]
            if face_cell not in ("0", "1"):
                raise SchemaError(
                    f"{path}:{line}: face_detected must be 0 or 1, got {face_cell!r}")
            face = face_cell == "1"
            if face:
                scores = []
                for pos in au_pos:
                    cell = row[pos]
                    if cell == "":
                        raise ValidationError(
                            f"{path}:{line}: missing AU value in column "
                            f"{header[pos]!r} on a face-detected row")
                    try:
                        scores.append(float(cell))
                    except ValueError as exc:
                        raise SchemaError(f"{path}:{line}: {exc}") from exc
                try:
                    aus = AuVector(tuple(scores))
                except ValidationError as exc:
                    raise ValidationError(f"{path}:{line}: {exc}") from exc
            else:
                for pos in au_pos:
                    if row[pos] != "":
                        raise ValidationError(
                            f"{path}:{line}: AU cell {header[pos]!r} must be empty "
                            f"when no face was detected")
                aus = None
            try:
                frame = AuFrame(frame_index, timestamp, face, aus)
            except ValidationError as exc:
                raise ValidationError(f"{path}:{line}: {exc}") from exc

            known_ad = ad_by_video.get(video_id)
            if known_ad is None:
                ad_by_video[video_id] = ad_id
                frames_by_video[video_id] = []
            elif known_ad != ad_id:
                raise ValidationError(
                    f"{path}:{line}: video {video_id!r} maps to both ads "
                    f"{known_ad!r} and {ad_id!r}")
            prev = last_frame.get(video_id)
            if prev is not None:
                if frame.frame_index <= prev.frame_index:
                    raise ValidationError(
                        f"{path}:{line}: video {video_id!r} frame_index must "
                        f"increase strictly ({prev.frame_index} then {frame.frame_index})")
                if frame.timestamp_s < prev.timestamp_s:
                    raise ValidationError(
                        f"{path}:{line}: video {video_id!r} timestamps must be "
                        f"non-decreasing")
            frames_by_video[video_id].append(frame)
            last_frame[video_id] = frame

    return [
        VideoRecord(video_id, ad_by_video[video_id], tuple(frames))
        for video_id, frames in frames_by_video.items()
    ]


def write_au_stream(videos: Iterable[VideoRecord], path: str | Path) -> None:
    """Serialize videos to the AU stream CSV format with full float precision."""
    header = list(STREAM_META_COLUMNS) + list(STREAM_AU_COLUMNS)
    empty_aus = [""] * N_AUS
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for video in videos:
            for frame in video.frames:
                if frame.face_detected:
                    au_cells = [repr(s) for s in frame.aus.scores]
                    face = "1"
                else:
                    au_cells = empty_aus
                    face = "0"
                writer.writerow(
                    [video.video_id, video.ad_id, frame.frame_index,
                     repr(frame.timestamp_s), face] + au_cells)


def face_coverage(video: VideoRecord) -> float:
    """Fraction of the video's frames in which a face was detected."""
    detected = sum(1 for f in video.frames if f.face_detected)
    return detected / len(video.frames)


def filter_by_coverage(
    videos: Iterable[VideoRecord],
    min_coverage: float = DEFAULT_MIN_COVERAGE,
) -> tuple[list[VideoRecord], list[str]]:
    """Split videos into (kept, dropped_ids) by face coverage.

    A video is kept when its coverage is at or above ``min_coverage``; the
    boundary itself passes. Order is preserved on both sides.
    """
    if not 0.0 <= min_coverage <= 1.0:
        raise ValidationError(f"min_coverage must lie in [0, 1], got {min_coverage}")
    kept: list[VideoRecord] = []
    dropped: list[str] = []
    for video in videos:
        if face_coverage(video) >= min_coverage:
            kept.append(video)
        else:
            dropped.append(video.video_id)
    return kept, dropped


def load_dataset(
    annotations_path: str | Path,
    streams_path: str | Path,
    min_coverage: float = DEFAULT_MIN_COVERAGE,
) -> tuple[Dataset, list[str]]:
    """Parse an annotation file plus an AU stream file into one Dataset.

    Applies the coverage filter; returns (dataset, dropped_video_ids).
    """
    ads = parse_ad_annotations(annotations_path)
    videos = parse_au_stream(streams_path)
    kept, dropped = filter_by_coverage(videos, min_coverage)
    return Dataset(ads=ads, videos=tuple(kept)), dropped


def write_dataset(
    dataset: Dataset,
    annotations_path: str | Path,
    streams_path: str | Path,
) -> None:
    """Write one Dataset back out in the two on-disk formats."""
    write_ad_annotations(dataset.ads, annotations_path)
    write_au_stream(dataset.videos, streams_path)
