import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sentipipe.aggregate import (
    CURVE_CSV_COLUMNS,
    DEFAULT_STEP_S,
    aggregate_ad,
    aggregate_scores,
    export_curve_svg,
    max_over_interval,
    n_bins_for,
    read_curves_csv,
    score_video,
    write_curves_csv,
)
from sentipipe.core import Interval
from sentipipe.errors import (
    EmptyInterval,
    NoPredictions,
    SchemaError,
    ValidationError,
)
from sentipipe.mlp import MlpParams

from conftest import constant_video, curve_of, make_video


class TestNBins:
    def test_exact_multiple(self):
        assert n_bins_for(10.0, 0.5) == 20
        assert n_bins_for(2.0, 0.5) == 4

    def test_partial_final_bin(self):
        assert n_bins_for(10.3, 0.5) == 21
        assert n_bins_for(0.2, 0.5) == 1

    def test_float_division_noise(self):
        # 0.9 / 0.3 lands a hair above 3.0 in float arithmetic
        assert n_bins_for(0.9, 0.3) == 3

    def test_default_step(self):
        assert n_bins_for(60.0) == 120


class TestScoreVideo:
    def test_face_frames_only(self):
        video = make_video("v", "a", [
            (0.0, True, [0.1] * 20),
            (0.5, False, None),
            (1.0, True, [0.9] * 20),
        ])
        ts, scores = score_video(MlpParams.zeros(), video)
        assert ts.tolist() == [0.0, 1.0]
        assert scores.tolist() == [0.5, 0.5]

    def test_no_faces(self):
        video = make_video("v", "a", [(0.0, False, None)])
        ts, scores = score_video(MlpParams.zeros(), video)
        assert ts.size == 0 and scores.size == 0


class TestAggregateScores:
    def test_hand_computed_bins(self):
        p1 = (np.array([0.0, 0.25, 0.6]), np.array([0.2, 0.4, 0.6]))
        p2 = (np.array([0.1, 1.6]), np.array([0.8, 1.0]))
        curve = aggregate_scores("ad", [p1, p2], duration_s=2.0, step_s=0.5)
        assert curve.n_bins == 4
        # participant means inside bin 0: (0.2 + 0.4) / 2 and 0.8
        b0 = math.fsum([(0.2 + 0.4) / 2, 0.8]) / 2
        assert curve.bin_scores()[0] == b0
        assert curve.bin_scores()[1] == 0.6
        assert curve.bin_scores()[3] == 1.0
        assert [v.participant_count for v in curve.values] == [2, 1, 0, 1]

    def test_gap_is_linearly_interpolated(self):
        p1 = (np.array([0.6, 1.6]), np.array([0.6, 1.0]))
        curve = aggregate_scores("ad", [p1], duration_s=2.0, step_s=0.5)
        # bin 2 sits midway between the knots at bins 1 and 3
        assert curve.bin_scores()[2] == pytest.approx(0.8, abs=1e-12)
        assert curve.values[2].participant_count == 0

    def test_participants_weigh_equally_not_by_frame_count(self):
        many = (np.array([0.0, 0.1, 0.2, 0.3]), np.array([0.3, 0.3, 0.3, 0.3]))
        one = (np.array([0.05]), np.array([0.9]))
        curve = aggregate_scores("ad", [many, one], duration_s=0.5, step_s=0.5)
        assert curve.bin_scores()[0] == pytest.approx(0.6, abs=1e-12)

    def test_leading_and_trailing_gaps_copy_nearest(self):
        p = (np.array([0.6, 1.2]), np.array([0.4, 0.8]))
        curve = aggregate_scores("ad", [p], duration_s=2.5, step_s=0.5)
        # populated bins are 1 and 2; 0 copies bin 1, bins 3 and 4 copy bin 2
        assert curve.bin_scores() == (0.4, 0.4, 0.8, 0.8, 0.8)
        assert [v.participant_count for v in curve.values] == [0, 1, 1, 0, 0]

    def test_single_populated_bin_fills_whole_curve(self):
        p = (np.array([1.0]), np.array([0.7]))
        curve = aggregate_scores("ad", [p], duration_s=2.0, step_s=0.5)
        assert curve.bin_scores() == (0.7, 0.7, 0.7, 0.7)

    def test_values_clipped_to_unit_interval(self):
        p = (np.array([0.0]), np.array([1.5]))
        curve = aggregate_scores("ad", [p], duration_s=0.5, step_s=0.5)
        assert curve.bin_scores() == (1.0,)

    def test_out_of_domain_frames_ignored(self):
        p = (np.array([0.0, 5.0, -1.0]), np.array([0.2, 0.9, 0.9]))
        curve = aggregate_scores("ad", [p], duration_s=1.0, step_s=0.5)
        assert curve.bin_scores() == (0.2, 0.2)

    def test_no_predictions_when_nothing_in_domain(self):
        p = (np.array([5.0]), np.array([0.9]))
        with pytest.raises(NoPredictions):
            aggregate_scores("ad", [p], duration_s=1.0, step_s=0.5)

    def test_no_predictions_when_no_participants(self):
        with pytest.raises(NoPredictions):
            aggregate_scores("ad", [], duration_s=1.0, step_s=0.5)

    def test_shape_mismatch(self):
        p = (np.array([0.0, 0.5]), np.array([0.2]))
        with pytest.raises(ValidationError):
            aggregate_scores("ad", [p], duration_s=1.0, step_s=0.5)


class TestAggregateAd:
    def test_constant_model_gives_flat_curve(self):
        videos = [constant_video(f"v{i}", "a", [0.4] * 20, n_frames=20, fps=2.0)
                  for i in range(3)]
        curve = aggregate_ad(MlpParams.zeros(), "a", videos, duration_s=10.0)
        assert curve.n_bins == 20
        assert set(curve.bin_scores()) == {0.5}
        assert all(v.participant_count == 3 for v in curve.values)


@st.composite
def participants(draw):
    n = draw(st.integers(2, 5))
    parts = []
    for _ in range(n):
        m = draw(st.integers(1, 6))
        ts = draw(st.lists(st.floats(0.0, 9.99, allow_nan=False),
                           min_size=m, max_size=m))
        sc = draw(st.lists(st.floats(0.0, 1.0, allow_nan=False),
                           min_size=m, max_size=m))
        parts.append((np.array(ts), np.array(sc)))
    perm = draw(st.permutations(list(range(n))))
    return parts, perm


@settings(max_examples=50, deadline=None)
@given(participants())
def test_participant_order_never_changes_the_curve(parts_and_perm):
    parts, perm = parts_and_perm
    base = aggregate_scores("ad", parts, duration_s=10.0, step_s=0.5)
    shuffled = aggregate_scores("ad", [parts[i] for i in perm],
                                duration_s=10.0, step_s=0.5)
    assert base == shuffled  # bit-identical, not just close


class TestMaxOverInterval:
    CURVE = curve_of([0.1, 0.9, 0.3, 0.7])  # step 0.5, domain [0, 2)

    def test_spanning_interval(self):
        assert max_over_interval(self.CURVE, Interval(0.5, 1.5)) == 0.9
        assert max_over_interval(self.CURVE, Interval(0.0, 2.0)) == 0.9

    def test_end_is_exclusive(self):
        # bins 1 only: bin 2 starts exactly at end_s
        assert max_over_interval(self.CURVE, Interval(0.5, 1.0)) == 0.9
        assert max_over_interval(self.CURVE, Interval(1.0, 1.5)) == 0.3

    def test_narrow_interval_falls_back_to_containing_bin(self):
        assert max_over_interval(self.CURVE, Interval(1.6, 1.9)) == 0.7
        assert max_over_interval(self.CURVE, Interval(0.2, 0.4)) == 0.1

    def test_outside_domain(self):
        with pytest.raises(EmptyInterval):
            max_over_interval(self.CURVE, Interval(2.5, 3.0))

    def test_interval_beyond_domain_is_clipped(self):
        assert max_over_interval(self.CURVE, Interval(1.5, 99.0)) == 0.7

    def test_float_noise_near_bin_edge(self):
        # a start a hair below the bin edge still selects that bin
        start = 0.5 - 5e-11
        assert max_over_interval(self.CURVE, Interval(start, 1.0)) == 0.9


class TestCurvesCsv:
    def _curves(self):
        return [
            curve_of([0.25, 1 / 3, 0.5], ad_id="ad_a", counts=[2, 0, 1]),
            curve_of([0.7], ad_id="ad_b"),
        ]

    def test_round_trip(self, tmp_path):
        path = tmp_path / "curves.csv"
        write_curves_csv(self._curves(), path)
        assert read_curves_csv(path) == self._curves()

    def test_rewrite_is_byte_identical(self, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_curves_csv(self._curves(), p1)
        write_curves_csv(read_curves_csv(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_header(self, tmp_path):
        path = tmp_path / "curves.csv"
        write_curves_csv(self._curves(), path)
        assert path.read_text().splitlines()[0] == ",".join(CURVE_CSV_COLUMNS)

    def test_single_bin_curve_assumes_default_step(self, tmp_path):
        path = tmp_path / "curves.csv"
        write_curves_csv([curve_of([0.7], step=DEFAULT_STEP_S)], path)
        [curve] = read_curves_csv(path)
        assert curve.step_s == DEFAULT_STEP_S

    def test_empty_file(self, tmp_path):
        path = tmp_path / "curves.csv"
        path.write_text("")
        with pytest.raises(SchemaError, match="empty"):
            read_curves_csv(path)

    def test_wrong_header(self, tmp_path):
        path = tmp_path / "curves.csv"
        path.write_text("ad,na,nb,nc\n")
        with pytest.raises(SchemaError, match="header"):
            read_curves_csv(path)

    def test_non_contiguous_rows(self, tmp_path):
        path = tmp_path / "curves.csv"
        write_curves_csv(self._curves(), path)
        lines = path.read_text().splitlines()
        lines.append(lines[1].replace("ad_a,0.0", "ad_a,1.5"))
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SchemaError, match="contiguous"):
            read_curves_csv(path)

    def test_bad_number(self, tmp_path):
        path = tmp_path / "curves.csv"
        path.write_text(",".join(CURVE_CSV_COLUMNS) + "\nad,0.0,high,1\n")
        with pytest.raises(SchemaError, match=":2:"):
            read_curves_csv(path)

    def test_negative_count(self, tmp_path):
        path = tmp_path / "curves.csv"
        path.write_text(",".join(CURVE_CSV_COLUMNS) + "\nad,0.0,0.5,-1\n")
        with pytest.raises(SchemaError):
            read_curves_csv(path)

    def test_broken_progression(self, tmp_path):
        path = tmp_path / "curves.csv"
        path.write_text(",".join(CURVE_CSV_COLUMNS)
                        + "\nad,0.0,0.5,1\nad,0.5,0.5,1\nad,1.7,0.5,1\n")
        with pytest.raises(SchemaError, match="progression"):
            read_curves_csv(path)


class TestSvgExport:
    def test_deterministic_bytes(self, tmp_path):
        curve = curve_of([0.2, 0.8, 0.5, 0.4])
        moments = (Interval(0.5, 1.5),)
        p1, p2 = tmp_path / "a.svg", tmp_path / "b.svg"
        export_curve_svg(curve, p1, moments)
        export_curve_svg(curve, p2, moments)
        assert p1.read_bytes() == p2.read_bytes()

    def test_structure(self, tmp_path):
        curve = curve_of([0.2, 0.8])
        path = tmp_path / "c.svg"
        export_curve_svg(curve, path, (Interval(0.0, 0.5),))
        text = path.read_text()
        assert text.startswith("<svg")
        assert "<polyline" in text
        assert "<rect" in text

    def test_no_moments(self, tmp_path):
        path = tmp_path / "c.svg"
        export_curve_svg(curve_of([0.2, 0.8]), path)
        assert "<polyline" in path.read_text()
