"""Regional feed parsing, national aggregation, series CSV round-trip."""

import io
import random
from datetime import date
from pathlib import Path

import numpy as np
import pytest

from seirctl.dataio import (
    ObservedSeries,
    aggregate_national,
    parse_regional_csv,
    read_series_csv,
    write_series_csv,
)
from seirctl.errors import DataFormatError

from conftest import FIXTURE_CSV
from reference_tables import TABLES

HEADER = "data,codice_regione,ricoverati_con_sintomi,totale_positivi,dimessi_guariti,deceduti"


def mini_csv(rows):
    return HEADER + "\n" + "\n".join(rows) + ("\n" if rows else "")


class TestParse:
    def test_header_only_gives_no_records(self):
        assert parse_regional_csv(io.StringIO(mini_csv([]))) == []

    def test_fixture_parses_fully(self, fixture_records):
        assert len(fixture_records) == 61 * 3
        first = fixture_records[0]
        assert first.date == date(2020, 9, 1)
        assert first.region == 1
        assert first.positives == 13378

    def test_accepts_byte_stream(self):
        text = mini_csv(["2020-09-01T17:00:00,1,5,10,20,30"])
        records = parse_regional_csv(io.BytesIO(text.encode("utf-8")))
        assert records == parse_regional_csv(io.StringIO(text))
        assert records[0].recovered == 20

    def test_unknown_extra_columns_ignored(self):
        text = (
            "data,stato,codice_regione,ricoverati_con_sintomi,"
            "totale_positivi,dimessi_guariti,deceduti,note\n"
            "2020-09-01,ITA,3,5,10,20,30,hello\n"
        )
        (rec,) = parse_regional_csv(io.StringIO(text))
        assert (rec.region, rec.positives, rec.deceased) == (3, 10, 30)

    def test_missing_required_column_reported(self):
        text = "data,codice_regione,totale_positivi,dimessi_guariti,deceduti\n"
        with pytest.raises(DataFormatError, match="ricoverati_con_sintomi"):
            parse_regional_csv(io.StringIO(text))

    def test_empty_input_rejected(self):
        with pytest.raises(DataFormatError, match="empty input"):
            parse_regional_csv(io.StringIO(""))

    def test_malformed_rows_reported_with_line_numbers(self):
        text = mini_csv(
            [
                "2020-09-01T17:00:00,1,5,10,20,30",
                "2020-09-02T17:00:00,1,5,not_a_number,20,30",
            ]
        )
        with pytest.raises(DataFormatError, match="line 3"):
            parse_regional_csv(io.StringIO(text))

    def test_negative_counts_rejected(self):
        text = mini_csv(["2020-09-01,1,5,-10,20,30"])
        with pytest.raises(DataFormatError, match="negative count"):
            parse_regional_csv(io.StringIO(text))


class TestAggregate:
    def test_fixture_reproduces_reference_series(self, fixture_records):
        # the published day-of-month anchors for all three series and both
        # months must come out of the regional sums exactly
        obs = aggregate_national(
            fixture_records, (date(2020, 9, 1), date(2020, 10, 31))
        )
        columns = {"Q": obs.q, "R": obs.r, "D": obs.d}
        for (series, month), rows in TABLES.items():
            base = date(2020, 9, 1) if month == "2020-09" else date(2020, 10, 1)
            for day, real, *_ in rows:
                offset = (base.replace(day=day) - date(2020, 9, 1)).days
                assert columns[series][offset] == float(real), (series, month, day)

    def test_first_day_levels(self, observed_sept_oct):
        assert observed_sept_oct.dates[0] == date(2020, 9, 1)
        assert observed_sept_oct.q[0] == 26754.0
        assert observed_sept_oct.r[0] == 207944.0
        assert observed_sept_oct.d[0] == 35491.0

    def test_single_region_is_identity(self):
        records = parse_regional_csv(
            io.StringIO(
                mini_csv(
                    [
                        "2020-09-01,7,1,100,200,300",
                        "2020-09-02,7,1,110,220,330",
                    ]
                )
            )
        )
        obs = aggregate_national(records, (date(2020, 9, 1), date(2020, 9, 2)))
        assert list(obs.q) == [100.0, 110.0]
        assert list(obs.r) == [200.0, 220.0]
        assert list(obs.d) == [300.0, 330.0]

    def test_regions_sum(self):
        records = parse_regional_csv(
            io.StringIO(
                mini_csv(
                    [
                        "2020-09-01,1,0,10,1,2",
                        "2020-09-01,2,0,20,3,4",
                    ]
                )
            )
        )
        obs = aggregate_national(records, (date(2020, 9, 1), date(2020, 9, 1)))
        assert (obs.q[0], obs.r[0], obs.d[0]) == (30.0, 4.0, 6.0)

    def test_record_order_is_irrelevant(self, fixture_records):
        window = (date(2020, 9, 1), date(2020, 10, 31))
        reference = aggregate_national(fixture_records, window)
        shuffled = list(fixture_records)
        random.Random(99).shuffle(shuffled)
        again = aggregate_national(shuffled, window)
        assert again.dates == reference.dates
        assert np.array_equal(again.q, reference.q)
        assert np.array_equal(again.r, reference.r)
        assert np.array_equal(again.d, reference.d)

    def test_duplicate_region_day_rejected(self):
        records = parse_regional_csv(
            io.StringIO(
                mini_csv(
                    [
                        "2020-09-01,1,0,10,1,2",
                        "2020-09-01,1,0,10,1,2",
                    ]
                )
            )
        )
        with pytest.raises(DataFormatError, match="duplicate record for region 1"):
            aggregate_national(records, (date(2020, 9, 1), date(2020, 9, 1)))

    def test_missing_days_listed(self, fixture_records):
        # window extends past the fixture's last day by two
        with pytest.raises(DataFormatError, match="2 day\\(s\\).*2020-11-01"):
            aggregate_national(
                fixture_records, (date(2020, 9, 1), date(2020, 11, 2))
            )

    def test_reversed_window_rejected(self, fixture_records):
        with pytest.raises(ValueError, match="empty window"):
            aggregate_national(
                fixture_records, (date(2020, 10, 1), date(2020, 9, 1))
            )


class TestSeriesCsv:
    def test_round_trip(self, observed_sept_oct, tmp_path):
        path = tmp_path / "national.csv"
        write_series_csv(observed_sept_oct, path)
        again = read_series_csv(path)
        assert again.dates == observed_sept_oct.dates
        assert np.array_equal(again.q, observed_sept_oct.q)
        assert np.array_equal(again.r, observed_sept_oct.r)
        assert np.array_equal(again.d, observed_sept_oct.d)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("day,Q,R,D\n2020-09-01,1,2,3\n")
        with pytest.raises(DataFormatError, match="expected header"):
            read_series_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(DataFormatError, match="empty file"):
            read_series_csv(path)

    def test_header_without_rows_rejected(self, tmp_path):
        path = tmp_path / "no_rows.csv"
        path.write_text("date,Q,R,D\n")
        with pytest.raises(DataFormatError, match="no data rows"):
            read_series_csv(path)

    def test_bad_row_reported_with_line(self, tmp_path):
        path = tmp_path / "torn.csv"
        path.write_text("date,Q,R,D\n2020-09-01,1,2,3\n2020-09-02,4,five,6\n")
        with pytest.raises(DataFormatError, match="line 3"):
            read_series_csv(path)


class TestObservedSeries:
    def test_dates_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            ObservedSeries(
                (date(2020, 9, 2), date(2020, 9, 1)),
                np.array([1.0, 2.0]),
                np.array([1.0, 2.0]),
                np.array([1.0, 2.0]),
            )

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            ObservedSeries(
                (date(2020, 9, 1), date(2020, 9, 2)),
                np.array([1.0]),
                np.array([1.0, 2.0]),
                np.array([1.0, 2.0]),
            )

    def test_day_offsets_handle_gaps(self):
        obs = ObservedSeries(
            (date(2020, 9, 1), date(2020, 9, 3), date(2020, 10, 1)),
            np.ones(3),
            np.ones(3),
            np.ones(3),
        )
        assert list(obs.day_offsets()) == [0.0, 2.0, 30.0]

    def test_values_read_only(self, observed_sept_oct):
        with pytest.raises(ValueError):
            observed_sept_oct.q[0] = 5.0

    def test_fixture_csv_exists(self):
        assert Path(FIXTURE_CSV).exists()
