"""Turning per-frame scores into per-ad curves.

A curve has one bin per ``step_s`` seconds of ad time, bin k covering
[k * step_s, (k + 1) * step_s). Each participant contributes the mean of
their frame scores inside a bin; the bin value is the mean over contributing
participants, so participants with different frame rates carry equal weight.
Bins nobody's frames landed in are filled by linear interpolation between
populated neighbours (edge gaps copy the nearest populated bin) and are
marked with participant_count 0.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import AggregateCurve, CurveBin, Interval, VideoRecord
from .errors import EmptyInterval, NoPredictions, SchemaError, ValidationError
from .mlp import MlpParams, _forward_batch

DEFAULT_STEP_S = 0.5

CURVE_CSV_COLUMNS = ("ad_id", "timestamp_s", "mean_score", "participant_count")


def n_bins_for(duration_s: float, step_s: float = DEFAULT_STEP_S) -> int:
    """Number of bins covering [0, duration). At least 1 even for tiny ads."""
    if not math.isfinite(duration_s) or duration_s <= 0:
        raise ValidationError(f"duration_s must be finite and > 0, got {duration_s}")
    if not math.isfinite(step_s) or step_s <= 0:
        raise ValidationError(f"step_s must be finite and > 0, got {step_s}")
    # the 1e-9 slack keeps exact multiples (10.0 / 0.5) from gaining a bin
    # when the quotient lands a hair above an integer
    return max(1, math.ceil(duration_s / step_s - 1e-9))


def score_video(params: MlpParams, video: VideoRecord) -> tuple[np.ndarray, np.ndarray]:
    """Model scores for every face-detected frame of one video.

    Returns (timestamps, scores) as float64 arrays in frame order; both are
    empty when the video has no face frames.
    """
    ts = [f.timestamp_s for f in video.frames if f.face_detected]
    if not ts:
        return np.empty(0), np.empty(0)
    x = np.array(
        [f.aus.scores for f in video.frames if f.face_detected], dtype=np.float64)
    p, _ = _forward_batch(params, x)
    return np.array(ts, dtype=np.float64), p


def aggregate_scores(
    ad_id: str,
    per_participant: Sequence[tuple[np.ndarray, np.ndarray]],
    duration_s: float,
    step_s: float = DEFAULT_STEP_S,
) -> AggregateCurve:
    """Build the curve for one ad from per-participant (timestamps, scores).

    Frames outside the bin domain are ignored. The result is independent of
    participant order: the across-participant mean uses exact summation.
    """
    n = n_bins_for(duration_s, step_s)
    per_bin: list[list[float]] = [[] for _ in range(n)]
    for ts, scores in per_participant:
        ts = np.asarray(ts, dtype=np.float64)
        scores = np.asarray(scores, dtype=np.float64)
        if ts.shape != scores.shape:
            raise ValidationError("timestamps and scores must have equal length")
        if ts.size == 0:
            continue
        k = np.floor(ts / step_s).astype(np.int64)
        keep = (k >= 0) & (k < n)
        k, s = k[keep], scores[keep]
        if k.size == 0:
            continue
        counts = np.bincount(k, minlength=n)
        sums = np.bincount(k, weights=s, minlength=n)
        for b in np.flatnonzero(counts):
            per_bin[b].append(sums[b] / counts[b])
    counts = [len(vals) for vals in per_bin]
    populated = [b for b in range(n) if counts[b]]
    if not populated:
        raise NoPredictions(
            f"ad {ad_id!r}: no scored frames fall inside [0, {n * step_s})")
    values = np.full(n, np.nan)
    for b in populated:
        # fsum is exactly rounded, so the mean does not depend on the order
        # participants were listed in
        values[b] = math.fsum(per_bin[b]) / counts[b]
    if len(populated) < n:
        filled = np.interp(np.arange(n), populated, values[populated])
        # np.interp may perturb knot values by an ulp; keep measured bins exact
        filled[populated] = values[populated]
        values = filled
    values = np.clip(values, 0.0, 1.0)
    bins = tuple(
        CurveBin(timestamp_s=b * step_s, mean_score=float(values[b]),
                 participant_count=counts[b])
        for b in range(n))
    return AggregateCurve(ad_id=ad_id, step_s=step_s, values=bins)


def aggregate_ad(
    params: MlpParams,
    ad_id: str,
    videos: Sequence[VideoRecord],
    duration_s: float,
    step_s: float = DEFAULT_STEP_S,
) -> AggregateCurve:
    """Score every video of one ad and aggregate into its curve."""
    scored = [score_video(params, v) for v in videos]
    return aggregate_scores(ad_id, scored, duration_s, step_s)


def max_over_interval(curve: AggregateCurve, interval: Interval) -> float:
    """Maximum bin value over the bins whose start lies in [start, end).

    When the interval is too narrow to contain any bin start, it falls back
    to the single bin containing its start. Raises EmptyInterval when the
    interval lies entirely outside the curve domain.
    """
    n = curve.n_bins
    step = curve.step_s
    first = max(0, math.ceil(interval.start_s / step - 1e-9))
    last_excl = min(n, math.ceil(interval.end_s / step - 1e-9))
    if first >= last_excl:
        k = math.floor(interval.start_s / step + 1e-9)
        if not 0 <= k < n:
            raise EmptyInterval(
                f"interval [{interval.start_s}, {interval.end_s}) lies outside "
                f"the curve domain [0, {curve.domain_end_s})")
        first, last_excl = k, k + 1
    return max(v.mean_score for v in curve.values[first:last_excl])


def write_curves_csv(curves: Sequence[AggregateCurve], path: str | Path) -> None:
    """One row per bin, curves in the given order. repr() floats round-trip."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_CSV_COLUMNS)
        for curve in curves:
            for v in curve.values:
                writer.writerow([
                    curve.ad_id,
                    repr(v.timestamp_s),
                    repr(v.mean_score),
                    v.participant_count,
                ])


def read_curves_csv(path: str | Path) -> list[AggregateCurve]:
    """Parse a curves CSV back into AggregateCurve objects.

    Rows of one ad must be contiguous and in bin order. A single-bin curve
    does not pin down its own step, so the default step is assumed there.
    """
    groups: dict[str, list[CurveBin]] = {}
    last_ad: str | None = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        if tuple(header) != CURVE_CSV_COLUMNS:
            raise SchemaError(
                f"{path}: expected header {','.join(CURVE_CSV_COLUMNS)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise SchemaError(f"{path}:{lineno}: expected 4 cells, got {len(row)}")
            ad_id, ts_s, score_s, count_s = row
            if not ad_id:
                raise SchemaError(f"{path}:{lineno}: empty ad_id")
            if ad_id in groups and ad_id != last_ad:
                raise SchemaError(
                    f"{path}:{lineno}: rows for ad {ad_id!r} are not contiguous")
            try:
                ts = float(ts_s)
                score = float(score_s)
                count = int(count_s)
            except ValueError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
            try:
                bin_ = CurveBin(timestamp_s=ts, mean_score=score,
                                participant_count=count)
            except ValidationError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc}") from exc
            groups.setdefault(ad_id, []).append(bin_)
            last_ad = ad_id
    curves = []
    for ad_id, bins in groups.items():
        step = bins[1].timestamp_s - bins[0].timestamp_s if len(bins) > 1 else DEFAULT_STEP_S
        try:
            curves.append(AggregateCurve(ad_id=ad_id, step_s=step, values=tuple(bins)))
        except ValidationError as exc:
            raise SchemaError(f"{path}: {exc}") from exc
    return curves


def export_curve_svg(
    curve: AggregateCurve,
    path: str | Path,
    moments: Sequence[Interval] = (),
    width: int = 640,
    height: int = 240,
) -> None:
    """Render one curve as a standalone SVG line chart.

    Moments are shaded behind the line. Purely cosmetic output; numbers are
    formatted to fixed precision so reruns are byte-identical.
    """
    pad_l, pad_r, pad_t, pad_b = 42.0, 12.0, 12.0, 30.0
    plot_w = width - pad_l - pad_r
    plot_h = height - pad_t - pad_b
    t_max = curve.domain_end_s

    def x_of(t: float) -> float:
        return pad_l + plot_w * min(max(t / t_max, 0.0), 1.0)

    def y_of(score: float) -> float:
        return pad_t + plot_h * (1.0 - score)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    for m in moments:
        x0, x1 = x_of(m.start_s), x_of(m.end_s)
        parts.append(
            f'<rect x="{x0:.2f}" y="{pad_t:.2f}" width="{x1 - x0:.2f}" '
            f'height="{plot_h:.2f}" fill="#f3c6c6"/>')
    for frac in (0.0, 0.5, 1.0):
        y = y_of(frac)
        parts.append(
            f'<line x1="{pad_l:.2f}" y1="{y:.2f}" x2="{pad_l + plot_w:.2f}" '
            f'y2="{y:.2f}" stroke="#dddddd" stroke-width="1"/>')
        parts.append(
            f'<text x="{pad_l - 6:.2f}" y="{y + 4:.2f}" font-size="11" '
            f'font-family="sans-serif" text-anchor="end">{frac:.1f}</text>')
    pts = " ".join(
        f"{x_of(v.timestamp_s + curve.step_s / 2):.2f},{y_of(v.mean_score):.2f}"
        for v in curve.values)
    parts.append(
        f'<polyline points="{pts}" fill="none" stroke="#2b6cb0" stroke-width="2"/>')
    parts.append(
        f'<text x="{pad_l:.2f}" y="{height - 8:.2f}" font-size="11" '
        f'font-family="sans-serif">{curve.ad_id} '
        f'(0 to {t_max:g} s, step {curve.step_s:g} s)</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
