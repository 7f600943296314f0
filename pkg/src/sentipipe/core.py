"""Domain types for the sentimentality pipeline.

Everything downstream (ingestion, weak labeling, the classifier, aggregation,
KPIs) speaks in terms of these containers. They are frozen dataclasses that
validate their invariants at construction time, so an instance that exists is
an instance that is well formed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError, UnknownAuName, ValidationError

# Fixed AU ordering used for every score vector, file column set, and report
# column. The last three entries are compound expressions emitted by the same
# detector bank as the numbered action units.
CANONICAL_AU_NAMES: tuple[str, ...] = (
    "AU1", "AU2", "AU4", "AU5", "AU6", "AU7", "AU9", "AU10", "AU14", "AU15",
    "AU17", "AU18", "AU20", "AU24", "AU25", "AU26", "AU28",
    "EyeClosure", "Smile", "Smirk",
)
N_AUS = len(CANONICAL_AU_NAMES)

_INDEX_BY_LOWER_NAME = {name.lower(): i for i, name in enumerate(CANONICAL_AU_NAMES)}


def canonical_au_index(name: str) -> int:
    """Map an AU name (case-insensitive) to its fixed position in 0..19."""
    try:
        return _INDEX_BY_LOWER_NAME[name.lower()]
    except (KeyError, AttributeError):
        raise UnknownAuName(f"unknown AU name: {name!r}") from None


@dataclass(frozen=True, slots=True)
class AuVector:
    """Twenty AU activation scores in [0, 1], in canonical AU order."""

    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        scores = tuple(float(s) for s in self.scores)
        if len(scores) != N_AUS:
            raise ValidationError(
                f"AuVector needs exactly {N_AUS} scores, got {len(scores)}")
        for i, s in enumerate(scores):
            if not 0.0 <= s <= 1.0:  # also rejects NaN
                raise ValidationError(
                    f"AU score {CANONICAL_AU_NAMES[i]}={s} outside [0, 1]")
        object.__setattr__(self, "scores", scores)

    def __getitem__(self, index: int) -> float:
        return self.scores[index]

    def __iter__(self):
        return iter(self.scores)

    def __len__(self) -> int:
        return N_AUS


def active_au_count(aus: AuVector, threshold: float = 0.5) -> int:
    """Number of AU scores at or above ``threshold`` (boundary counts as active)."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"activation threshold must lie in (0, 1), got {threshold}")
    return sum(1 for s in aus.scores if s >= threshold)


@dataclass(frozen=True, slots=True)
class AuFrame:
    """One analyzed video frame: a detection flag plus AU scores when a face was found."""

    frame_index: int
    timestamp_s: float
    face_detected: bool
    aus: AuVector | None = None

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValidationError(f"frame_index must be >= 0, got {self.frame_index}")
        if not math.isfinite(self.timestamp_s) or self.timestamp_s < 0:
            raise ValidationError(
                f"timestamp_s must be finite and >= 0, got {self.timestamp_s}")
        if self.face_detected and self.aus is None:
            raise ValidationError("frame with a detected face is missing AU scores")
        if not self.face_detected and self.aus is not None:
            raise ValidationError("frame without a detected face cannot carry AU scores")


@dataclass(frozen=True, slots=True)
class VideoRecord:
    """One participant's frame sequence recorded while watching one ad."""

    video_id: str
    ad_id: str
    frames: tuple[AuFrame, ...]

    def __post_init__(self) -> None:
        frames = tuple(self.frames)
        if not frames:
            raise ValidationError(f"video {self.video_id!r} has no frames")
        prev = frames[0]
        for frame in frames[1:]:
            if frame.frame_index <= prev.frame_index:
                raise ValidationError(
                    f"video {self.video_id!r}: frame_index must increase strictly "
                    f"({prev.frame_index} then {frame.frame_index})")
            if frame.timestamp_s < prev.timestamp_s:
                raise ValidationError(
                    f"video {self.video_id!r}: timestamps must be non-decreasing "
                    f"({prev.timestamp_s} then {frame.timestamp_s})")
            prev = frame
        object.__setattr__(self, "frames", frames)


@dataclass(frozen=True, slots=True)
class Interval:
    """Half-open time interval [start_s, end_s) in seconds."""

    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        start, end = float(self.start_s), float(self.end_s)
        if not (math.isfinite(start) and math.isfinite(end)):
            raise ValidationError("interval bounds must be finite")
        if not 0.0 <= start < end:
            raise ValidationError(
                f"interval needs 0 <= start < end, got [{start}, {end})")
        object.__setattr__(self, "start_s", start)
        object.__setattr__(self, "end_s", end)

    @property
    def length_s(self) -> float:
        return self.end_s - self.start_s


class AdLabel(str, Enum):
    SENTIMENTAL = "sentimental"
    NON_SENTIMENTAL = "non_sentimental"


@dataclass(frozen=True, slots=True)
class AdSpec:
    """Ad-level ground truth: class label, duration, and sentimental moments."""

    ad_id: str
    label: AdLabel
    duration_s: float
    moments: tuple[Interval, ...] = ()

    def __post_init__(self) -> None:
        duration = float(self.duration_s)
        if not math.isfinite(duration) or duration <= 0:
            raise ValidationError(
                f"ad {self.ad_id!r}: duration_s must be finite and > 0, got {duration}")
        moments = tuple(self.moments)
        if self.label is AdLabel.NON_SENTIMENTAL and moments:
            raise ValidationError(
                f"ad {self.ad_id!r}: non-sentimental ads cannot carry moments")
        if self.label is AdLabel.SENTIMENTAL and not moments:
            raise ValidationError(
                f"ad {self.ad_id!r}: sentimental ads need at least one moment")
        prev_end = 0.0
        for i, m in enumerate(moments):
            if i and m.start_s < prev_end:
                raise ValidationError(
                    f"ad {self.ad_id!r}: moments must be sorted and disjoint")
            if m.end_s > duration:
                raise ValidationError(
                    f"ad {self.ad_id!r}: moment [{m.start_s}, {m.end_s}) exceeds "
                    f"duration {duration}")
            prev_end = m.end_s
        object.__setattr__(self, "duration_s", duration)
        object.__setattr__(self, "moments", moments)

    @property
    def is_sentimental(self) -> bool:
        return self.label is AdLabel.SENTIMENTAL


@dataclass(frozen=True, slots=True)
class LabeledExample:
    """One weakly labeled training example: an AU vector plus a binary target.

    ``source`` keeps the (video_id, frame_index) provenance so labels stay
    auditable after extraction.
    """

    aus: AuVector
    label: int
    source: tuple[str, int]

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValidationError(f"label must be 0 or 1, got {self.label!r}")
        vid, idx = self.source
        object.__setattr__(self, "source", (str(vid), int(idx)))


@dataclass(frozen=True, slots=True)
class CurveBin:
    """One time bin of an aggregate curve.

    ``participant_count`` is the number of participants whose frames landed in
    the bin; it is 0 for bins whose value was filled by interpolation.
    """

    timestamp_s: float
    mean_score: float
    participant_count: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.timestamp_s) or self.timestamp_s < 0:
            raise ValidationError(f"bin timestamp must be finite and >= 0")
        if not 0.0 <= self.mean_score <= 1.0:
            raise ValidationError(
                f"bin mean_score {self.mean_score} outside [0, 1]")
        if self.participant_count < 0:
            raise ValidationError("participant_count must be >= 0")


@dataclass(frozen=True, slots=True)
class AggregateCurve:
    """Per-ad sentimentality curve: one mean score per fixed-width time bin.

    Bin k covers [k * step_s, (k + 1) * step_s); together the bins cover
    [0, duration) of the ad.
    """

    ad_id: str
    step_s: float
    values: tuple[CurveBin, ...]

    def __post_init__(self) -> None:
        step = float(self.step_s)
        if not math.isfinite(step) or step <= 0:
            raise ValidationError(f"step_s must be finite and > 0, got {step}")
        values = tuple(self.values)
        if not values:
            raise ValidationError(f"curve for ad {self.ad_id!r} has no bins")
        for i, v in enumerate(values):
            if abs(v.timestamp_s - i * step) > 1e-9:
                raise ValidationError(
                    f"curve for ad {self.ad_id!r}: bin {i} timestamp {v.timestamp_s} "
                    f"breaks the arithmetic progression with step {step}")
        object.__setattr__(self, "step_s", step)
        object.__setattr__(self, "values", values)

    @property
    def n_bins(self) -> int:
        return len(self.values)

    @property
    def domain_end_s(self) -> float:
        return len(self.values) * self.step_s

    def bin_scores(self) -> tuple[float, ...]:
        return tuple(v.mean_score for v in self.values)
