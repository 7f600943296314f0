"""Ad-level evaluation: ROC-AUC and the two KPIs built on top of it.

ROC-Ad asks whether whole-curve maxima separate sentimental from
non-sentimental ads. ROC-Sent stays inside the sentimental ads and asks
whether the curve peaks inside the labeled moments rather than elsewhere:
each ad contributes one positive (max over its moments) and one negative
(max over the complement of its moments).
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .aggregate import DEFAULT_STEP_S, aggregate_scores, max_over_interval
from .core import (
    CANONICAL_AU_NAMES,
    AdSpec,
    AggregateCurve,
    Interval,
    VideoRecord,
)
from .errors import (
    ConfigError,
    DegenerateComplement,
    EmptyScoreList,
    InsufficientAds,
    NoMoments,
    UnknownAdId,
    ValidationError,
)


def roc_auc(pos_scores: Sequence[float], neg_scores: Sequence[float]) -> float:
    """Mann-Whitney ROC-AUC with half credit for ties.

    Equals (wins + 0.5 * ties) / (n_pos * n_neg) over all pos/neg pairs.
    Computed from rank sums in doubled-rank integer arithmetic, so the result
    is exact: identical to the brute-force pair count, not merely close.
    """
    pos = [float(s) for s in pos_scores]
    neg = [float(s) for s in neg_scores]
    if not pos or not neg:
        raise EmptyScoreList(
            f"need scores on both sides, got {len(pos)} positive and "
            f"{len(neg)} negative")
    for s in pos + neg:
        if not math.isfinite(s):
            raise ValidationError(f"scores must be finite, got {s}")
    pos_at = Counter(pos)
    neg_at = Counter(neg)
    # doubled midrank of a tie group spanning 1-based ranks a..b is a + b,
    # an integer, so u2 below is exact integer arithmetic throughout
    u2 = 0
    seen = 0
    for value in sorted(pos_at.keys() | neg_at.keys()):
        p = pos_at.get(value, 0)
        group = p + neg_at.get(value, 0)
        u2 += p * (2 * seen + group + 1)
        seen += group
    u2 -= len(pos) * (len(pos) + 1)
    return u2 / (2 * len(pos) * len(neg))


def curve_max(curve: AggregateCurve) -> float:
    return max(curve.bin_scores())


def complement_intervals(
    moments: Sequence[Interval], duration_s: float, guard_s: float = 0.0
) -> tuple[Interval, ...]:
    """Gaps of [0, duration) not covered by the moments.

    guard_s additionally shrinks each gap edge that touches a moment, keeping
    frames right next to a moment out of the negative side. Gaps that shrink
    to nothing are dropped.
    """
    if guard_s < 0 or not math.isfinite(guard_s):
        raise ConfigError(f"guard_s must be finite and >= 0, got {guard_s}")
    ordered = sorted(moments, key=lambda m: m.start_s)
    gaps: list[Interval] = []
    cursor = 0.0
    guarded_left = False  # whether the gap's left edge abuts a moment
    for m in ordered:
        start = cursor + guard_s if guarded_left else cursor
        end = m.start_s - guard_s
        if start < end:
            gaps.append(Interval(start_s=start, end_s=end))
        cursor = m.end_s
        guarded_left = True
    start = cursor + guard_s if guarded_left else cursor
    if start < duration_s:
        gaps.append(Interval(start_s=start, end_s=duration_s))
    return tuple(gaps)


def kpi_roc_ad(
    curves: Sequence[AggregateCurve], ads: Mapping[str, AdSpec]
) -> float:
    """ROC-AUC of whole-curve maxima, sentimental vs non-sentimental ads."""
    pos, neg = [], []
    for curve in curves:
        ad = ads.get(curve.ad_id)
        if ad is None:
            raise UnknownAdId(f"curve references unknown ad {curve.ad_id!r}")
        (pos if ad.is_sentimental else neg).append(curve_max(curve))
    if not pos or not neg:
        raise InsufficientAds(
            f"need both ad classes, got {len(pos)} sentimental and "
            f"{len(neg)} non-sentimental")
    return roc_auc(pos, neg)


def _moment_and_complement_max(
    curve: AggregateCurve, ad: AdSpec, guard_s: float
) -> tuple[float, float]:
    if not ad.moments:
        raise NoMoments(f"ad {curve.ad_id!r} has no labeled moments")
    pos = max(max_over_interval(curve, m) for m in ad.moments)
    gaps = complement_intervals(ad.moments, ad.duration_s, guard_s)
    if not gaps:
        raise DegenerateComplement(
            f"ad {curve.ad_id!r}: moments (plus guard {guard_s}s) cover the "
            f"whole ad, leaving no negative intervals")
    neg = max(max_over_interval(curve, g) for g in gaps)
    return pos, neg


def kpi_roc_sent(
    curves: Sequence[AggregateCurve],
    ads: Mapping[str, AdSpec],
    guard_s: float = 0.0,
) -> float:
    """ROC-AUC of within-ad maxima: labeled moments vs their complement.

    Every curve must belong to a sentimental ad; each contributes exactly one
    positive and one negative score.
    """
    if not curves:
        raise NoMoments("no sentimental ad curves provided")
    pos, neg = [], []
    for curve in curves:
        ad = ads.get(curve.ad_id)
        if ad is None:
            raise UnknownAdId(f"curve references unknown ad {curve.ad_id!r}")
        p, n = _moment_and_complement_max(curve, ad, guard_s)
        pos.append(p)
        neg.append(n)
    return roc_auc(pos, neg)


@dataclass(frozen=True, slots=True)
class AdScore:
    """Per-ad detail behind the KPIs. moment/complement maxima are None for
    non-sentimental ads (they only enter ROC-Ad)."""

    label: str
    curve_max: float
    moment_max: float | None = None
    complement_max: float | None = None


@dataclass(frozen=True, slots=True)
class KpiReport:
    roc_ad: float
    roc_sent: float
    avg: float
    per_ad_scores: Mapping[str, AdScore]

    def __post_init__(self) -> None:
        for name in ("roc_ad", "roc_sent"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{name} {v} outside [0, 1]")
        if self.avg != (self.roc_ad + self.roc_sent) / 2:
            raise ValidationError(
                f"avg {self.avg} is not the exact mean of roc_ad and roc_sent")
        object.__setattr__(self, "per_ad_scores", dict(self.per_ad_scores))


def evaluate_kpis(
    curves: Sequence[AggregateCurve],
    ads: Mapping[str, AdSpec],
    guard_s: float = 0.0,
) -> KpiReport:
    """Compute both KPIs over one set of per-ad curves."""
    roc_ad = kpi_roc_ad(curves, ads)
    sent_curves = [c for c in curves if ads[c.ad_id].is_sentimental]
    roc_sent = kpi_roc_sent(sent_curves, ads, guard_s)
    details: dict[str, AdScore] = {}
    for curve in curves:
        ad = ads[curve.ad_id]
        if ad.is_sentimental:
            p, n = _moment_and_complement_max(curve, ad, guard_s)
            details[curve.ad_id] = AdScore(
                label=ad.label.value, curve_max=curve_max(curve),
                moment_max=p, complement_max=n)
        else:
            details[curve.ad_id] = AdScore(
                label=ad.label.value, curve_max=curve_max(curve))
    return KpiReport(
        roc_ad=roc_ad,
        roc_sent=roc_sent,
        avg=(roc_ad + roc_sent) / 2,
        per_ad_scores=details,
    )


def _face_frame_matrix(video: VideoRecord) -> tuple[np.ndarray, np.ndarray]:
    """(timestamps, au matrix (n, 20)) over the face-detected frames."""
    ts = [f.timestamp_s for f in video.frames if f.face_detected]
    if not ts:
        return np.empty(0), np.empty((0, len(CANONICAL_AU_NAMES)))
    aus = np.array(
        [f.aus.scores for f in video.frames if f.face_detected], dtype=np.float64)
    return np.array(ts, dtype=np.float64), aus


def single_au_baselines(
    videos_by_ad: Mapping[str, Sequence[VideoRecord]],
    ads: Mapping[str, AdSpec],
    step_s: float = DEFAULT_STEP_S,
    guard_s: float = 0.0,
) -> list[KpiReport]:
    """KPIs obtained by using each raw AU activation as the score.

    Returns one report per AU in canonical order. These are the single-marker
    reference points the trained model has to beat.
    """
    extracted = {
        ad_id: [_face_frame_matrix(v) for v in videos]
        for ad_id, videos in videos_by_ad.items()
    }
    reports = []
    for k in range(len(CANONICAL_AU_NAMES)):
        curves = []
        for ad_id in videos_by_ad:
            per_participant = [(ts, aus[:, k]) for ts, aus in extracted[ad_id]]
            curves.append(
                aggregate_scores(ad_id, per_participant, ads[ad_id].duration_s,
                                 step_s))
        reports.append(evaluate_kpis(curves, ads, guard_s))
    return reports


def chance_baseline(
    videos_by_ad: Mapping[str, Sequence[VideoRecord]],
    ads: Mapping[str, AdSpec],
    step_s: float = DEFAULT_STEP_S,
    guard_s: float = 0.0,
) -> KpiReport:
    """KPIs with every frame scored a constant 0.5: all-ties, so both land
    at 0.5 exactly. Kept as an explicit column to anchor the table."""
    curves = []
    for ad_id, videos in videos_by_ad.items():
        per_participant = []
        for v in videos:
            ts, _ = _face_frame_matrix(v)
            per_participant.append((ts, np.full(ts.shape, 0.5)))
        curves.append(
            aggregate_scores(ad_id, per_participant, ads[ad_id].duration_s,
                             step_s))
    return evaluate_kpis(curves, ads, guard_s)


def write_kpi_report(
    report: KpiReport, path: str | Path, metadata: Mapping[str, object] | None = None
) -> None:
    per_ad = []
    for ad_id in sorted(report.per_ad_scores):
        d = report.per_ad_scores[ad_id]
        per_ad.append({
            "ad_id": ad_id,
            "label": d.label,
            "curve_max": d.curve_max,
            "moment_max": d.moment_max,
            "complement_max": d.complement_max,
        })
    payload: dict[str, object] = {
        "roc_ad": report.roc_ad,
        "roc_sent": report.roc_sent,
        "avg": report.avg,
        "per_ad": per_ad,
    }
    if metadata is not None:
        payload["metadata"] = dict(metadata)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_kpi_table_csv(
    chance: KpiReport,
    per_au: Sequence[KpiReport],
    model: KpiReport,
    path: str | Path,
) -> None:
    """Rows ROC-Ad / ROC-Sent / Avg; columns chance, the 20 AUs, model."""
    if len(per_au) != len(CANONICAL_AU_NAMES):
        raise ValidationError(
            f"expected {len(CANONICAL_AU_NAMES)} per-AU reports, got {len(per_au)}")
    columns = [("chance", chance)]
    columns += list(zip(CANONICAL_AU_NAMES, per_au))
    columns.append(("model", model))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric"] + [name for name, _ in columns])
        for row_name, attr in (("ROC-Ad", "roc_ad"), ("ROC-Sent", "roc_sent"),
                               ("Avg", "avg")):
            writer.writerow(
                [row_name] + [repr(getattr(r, attr)) for _, r in columns])


def read_kpi_report(path: str | Path) -> dict:
    """Load a KPI report JSON as a plain dict (used by tooling and tests)."""
    return json.loads(Path(path).read_text(encoding="utf-8"))
