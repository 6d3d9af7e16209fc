import io
import itertools
from datetime import date, datetime, timezone

import pytest

from citypulse.ingest import (
    ActivityParseReport,
    ActivityRecord,
    Antenna,
    CityConfig,
    IngestError,
    activity_shards,
    parse_activity,
    parse_activity_all,
    parse_antennas,
    parse_window_start,
)

LONDON_BBOX = (51.3, -0.5, 51.7, 0.3)


def antennas_csv(*rows: str) -> io.StringIO:
    return io.StringIO("\n".join(["antenna_id,lat,lon", *rows]) + "\n")

def activity_csv(*rows: str) -> io.StringIO:
    header = "antenna_id,window_start,calls,sms,data_down,data_up,data_requests"
    return io.StringIO("\n".join([header, *rows]) + "\n")


class TestParseAntennas:
    def test_valid_row_maps_fields(self):
        result = parse_antennas(antennas_csv("A1,51.5560,-0.2795"), bbox=LONDON_BBOX)
        assert result.antennas == [Antenna("A1", 51.5560, -0.2795)]
        assert result.rejected == [] and result.excluded == []

    def test_non_numeric_coordinate_rejects_row_with_line_number(self):
        result = parse_antennas(antennas_csv("A2,abc,0.0"))
        assert result.antennas == []
        assert len(result.rejected) == 1
        assert result.rejected[0].line_no == 2

    def test_header_only_gives_empty_result(self):
        result = parse_antennas(antennas_csv())
        assert result.antennas == [] and result.rejected == []

    def test_missing_header_is_fatal(self):
        with pytest.raises(IngestError, match="header"):
            parse_antennas(io.StringIO("A1,51.0,0.0\n"))

    def test_duplicate_antenna_id_is_fatal(self):
        with pytest.raises(IngestError, match="duplicate antenna_id 'A1'"):
            parse_antennas(antennas_csv("A1,51.5,0.0", "A1,51.6,0.1"))

    def test_out_of_bbox_rows_are_excluded_and_reported(self):
        result = parse_antennas(antennas_csv("A1,51.5,0.0", "A2,40.7,-74.0"), bbox=LONDON_BBOX)
        assert [a.antenna_id for a in result.antennas] == ["A1"]
        assert len(result.excluded) == 1
        assert result.excluded[0].line_no == 3
        assert "A2" in result.excluded[0].reason

    def test_coordinate_out_of_wgs84_range_rejected(self):
        result = parse_antennas(antennas_csv("A1,91.0,0.0"))
        assert result.antennas == [] and len(result.rejected) == 1

    def test_row_order_preserved(self):
        rows = [f"A{i},51.{i},0.0" for i in range(1, 6)]
        result = parse_antennas(antennas_csv(*rows))
        assert [a.antenna_id for a in result.antennas] == [f"A{i}" for i in range(1, 6)]

    def test_crlf_and_bom_tolerated(self):
        text = "﻿antenna_id,lat,lon\r\nA1,51.5,0.0\r\n"
        result = parse_antennas(io.StringIO(text, newline=""))
        assert result.antennas == [Antenna("A1", 51.5, 0.0)]


class TestParseWindowStart:
    def test_accepted_variants(self):
        expect = datetime(2013, 4, 1, 0, 15, tzinfo=timezone.utc)
        for text in [
            "2013-04-01T00:15:00Z",
            "2013-04-01 00:15:00Z",
            "2013-04-01T00:15:00+00:00",
            "2013-04-01T00:15:00.000Z",
        ]:
            assert parse_window_start(text) == expect

    def test_unaligned_minute_rejected(self):
        with pytest.raises(ValueError, match="unaligned window"):
            parse_window_start("2013-04-01T00:07:00Z")

    def test_nonzero_seconds_rejected(self):
        with pytest.raises(ValueError, match="unaligned window"):
            parse_window_start("2013-04-01T00:15:30Z")

    def test_naive_or_offset_timestamps_rejected(self):
        for text in ["2013-04-01T00:15:00", "2013-04-01T00:15:00+01:00", "junk"]:
            with pytest.raises(ValueError, match="unparseable"):
                parse_window_start(text)


class TestParseActivity:
    def test_valid_row_maps_fields(self):
        records, report = parse_activity_all(
            activity_csv("A1,2013-04-01T00:15:00Z,5,2,1048576,262144,17")
        )
        assert records == [
            ActivityRecord("A1", datetime(2013, 4, 1, 0, 15, tzinfo=timezone.utc),
                           5, 2, 1048576, 262144, 17)
        ]
        assert report.accepted == 1 and report.rejected == []

    def test_unaligned_window_rejected(self):
        records, report = parse_activity_all(activity_csv("A1,2013-04-01T00:07:00Z,1,0,0,0,0"))
        assert records == []
        assert report.rejected[0].line_no == 2
        assert "unaligned window" in report.rejected[0].reason

    def test_negative_counter_rejected(self):
        _, report = parse_activity_all(activity_csv("A1,2013-04-01T00:15:00Z,1,-2,0,0,0"))
        assert len(report.rejected) == 1
        assert report.rejected[0].reason.startswith("negative counter")

    def test_non_integer_counter_rejected(self):
        for bad in ["1.5", "x", "", "5_0"]:
            _, report = parse_activity_all(
                activity_csv(f"A1,2013-04-01T00:15:00Z,{bad},0,0,0,0")
            )
            assert len(report.rejected) == 1, bad
            assert report.rejected[0].reason.startswith("non-integer counter")

    def test_wrong_field_count_rejected(self):
        _, report = parse_activity_all(activity_csv("A1,2013-04-01T00:15:00Z,1,2,3"))
        assert report.rejected[0].reason.startswith("expected 7 fields")

    def test_count_conservation_accepted_plus_rejected(self):
        rows = [
            "A1,2013-04-01T00:15:00Z,1,2,3,4,5",
            "A1,bad,1,2,3,4,5",
            "A2,2013-04-01T00:30:00Z,0,0,0,0,0",
            "A2,2013-04-01T00:31:00Z,0,0,0,0,0",
        ]
        records, report = parse_activity_all(activity_csv(*rows))
        assert report.accepted == len(records) == 2
        assert report.accepted + len(report.rejected) == len(rows)

    def test_blank_lines_not_counted(self):
        stream = io.StringIO(
            "antenna_id,window_start,calls,sms,data_down,data_up,data_requests\n"
            "A1,2013-04-01T00:15:00Z,1,2,3,4,5\n"
            "\n"
            "A2,2013-04-01T00:15:00Z,1,2,3,4,5\n"
        )
        records, report = parse_activity_all(stream)
        assert len(records) == 2 and report.rejected == []
        # line numbers still physical: A2 sits on line 4
        assert records[1].antenna_id == "A2"

    def test_streaming_does_not_exhaust_input(self):
        def rows():
            yield "antenna_id,window_start,calls,sms,data_down,data_up,data_requests"
            for i in itertools.count():
                yield f"A1,2013-04-01T00:15:00Z,{i},0,0,0,0"

        # an infinite stream: only works if parsing is lazy
        head = list(itertools.islice(parse_activity(rows()), 5))
        assert [r.calls for r in head] == [0, 1, 2, 3, 4]

    def test_csv_roundtrip_identity(self):
        import random

        rng = random.Random(17)
        base = datetime(2013, 4, 1, tzinfo=timezone.utc)
        originals = []
        lines = []
        for i in range(300):
            rec = ActivityRecord(
                antenna_id=f"A{rng.randrange(50)}",
                window_start=base.replace(
                    day=1 + rng.randrange(28),
                    hour=rng.randrange(24),
                    minute=15 * rng.randrange(4),
                ),
                calls=rng.randrange(10**4),
                sms=rng.randrange(10**4),
                data_down=rng.randrange(10**12),
                data_up=rng.randrange(10**9),
                data_requests=rng.randrange(10**5),
            )
            originals.append(rec)
            lines.append(rec.to_csv_row())
        reparsed, report = parse_activity_all(activity_csv(*lines))
        assert reparsed == originals
        assert report.rejected == []


class TestCityConfig:
    def make(self, **kw) -> CityConfig:
        args = dict(
            city_id="test",
            bbox=(51.3, -0.5, 51.7, 0.3),
            cell_size_m=500.0,
            period_start=date(2013, 4, 1),
            period_end=date(2013, 4, 8),
            timezone="Europe/London",
        )
        args.update(kw)
        return CityConfig(**args)

    def test_n_windows_for_one_week(self):
        assert self.make().n_windows == 7 * 96

    def test_degenerate_bbox_rejected(self):
        with pytest.raises(IngestError, match="bbox"):
            self.make(bbox=(51.5, 0.0, 51.5, 0.1))

    def test_period_shorter_than_a_week_rejected(self):
        with pytest.raises(IngestError, match="week"):
            self.make(period_end=date(2013, 4, 5))

    def test_unknown_timezone_rejected(self):
        with pytest.raises(IngestError, match="timezone"):
            self.make(timezone="Mars/Olympus")

    def test_window_index_roundtrip(self):
        cfg = self.make()
        for i in [0, 1, 95, 96, cfg.n_windows - 1]:
            assert cfg.window_index(cfg.window_start_utc(i)) == i

    def test_window_index_outside_period_is_none(self):
        cfg = self.make()
        before = datetime(2013, 3, 31, 23, 45, tzinfo=timezone.utc)
        after = datetime(2013, 4, 8, 0, 0, tzinfo=timezone.utc)
        assert cfg.window_index(before) is None
        assert cfg.window_index(after) is None

    def test_window_index_unaligned_raises(self):
        cfg = self.make()
        with pytest.raises(ValueError, match="boundary"):
            cfg.window_index(datetime(2013, 4, 1, 0, 7, tzinfo=timezone.utc))

    def test_json_roundtrip(self):
        cfg = self.make()
        assert CityConfig.from_json_dict(cfg.to_json_dict()) == cfg


class TestActivityShards:
    def test_single_file(self, tmp_path):
        (tmp_path / "activity.csv").write_text("x")
        assert activity_shards(tmp_path) == [tmp_path / "activity.csv"]

    def test_sharded_sorted(self, tmp_path):
        for name in ["activity-002.csv", "activity-001.csv"]:
            (tmp_path / name).write_text("x")
        assert [p.name for p in activity_shards(tmp_path)] == [
            "activity-001.csv",
            "activity-002.csv",
        ]

    def test_both_forms_present_is_an_error(self, tmp_path):
        (tmp_path / "activity.csv").write_text("x")
        (tmp_path / "activity-001.csv").write_text("x")
        with pytest.raises(IngestError, match="both"):
            activity_shards(tmp_path)

    def test_neither_form_present_is_an_error(self, tmp_path):
        with pytest.raises(IngestError, match="no activity"):
            activity_shards(tmp_path)
