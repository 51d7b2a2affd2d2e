import numpy as np
import pytest

from metermarket.data import (
    IngestError,
    PERIODS_PER_DAY,
    ingest_csv,
    rescale_reference,
    split_indices,
    synthetic_reference,
    synthetic_table,
    write_table_csv,
)


@pytest.fixture
def small_table():
    return synthetic_table(n_consumers=3, n_days=2, seed=7)


def test_synthetic_table_shape_and_floor(small_table):
    assert small_table.loads.shape == (3, 2 * PERIODS_PER_DAY)
    assert small_table.ids == ("c01", "c02", "c03")
    assert small_table.loads.min() >= 0.01
    again = synthetic_table(n_consumers=3, n_days=2, seed=7)
    np.testing.assert_array_equal(small_table.loads, again.loads)


def test_csv_roundtrip_exact(small_table, tmp_path):
    path = tmp_path / "meters.csv"
    write_table_csv(small_table, path)
    back = ingest_csv(path)
    assert back.ids == small_table.ids
    assert back.timestamps == small_table.timestamps
    np.testing.assert_array_equal(back.loads, small_table.loads)


def test_missing_reading_names_consumer_and_timestamp(small_table, tmp_path):
    write_table_csv(small_table, tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    kept = [ln for ln in lines if not ln.startswith("c02,2024-01-06 05:00")]
    (tmp_path / "gap.csv").write_text("\n".join(kept) + "\n")
    with pytest.raises(IngestError, match="c02 missing reading at 2024-01-06 05:00"):
        ingest_csv(tmp_path / "gap.csv")


def test_cadence_gap_names_surrounding_stamps(small_table, tmp_path):
    write_table_csv(small_table, tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    # drop 05:00 for everyone so the shared grid itself has a hole
    kept = [ln for ln in lines if "2024-01-06 05:00" not in ln]
    (tmp_path / "hole.csv").write_text("\n".join(kept) + "\n")
    with pytest.raises(IngestError, match="cadence gap between 2024-01-06 04:30:00 and 2024-01-06 05:30:00"):
        ingest_csv(tmp_path / "hole.csv")


def test_duplicate_reading_rejected(small_table, tmp_path):
    write_table_csv(small_table, tmp_path / "m.csv")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    dupe = next(ln for ln in lines if ln.startswith("c01,"))
    (tmp_path / "dup.csv").write_text("\n".join(lines + [dupe]) + "\n")
    with pytest.raises(IngestError, match="duplicate reading for id c01"):
        ingest_csv(tmp_path / "dup.csv")


def test_empty_file_reports_no_rows(tmp_path):
    (tmp_path / "empty.csv").write_text("id,timestamp,kwh\n")
    with pytest.raises(IngestError, match="no rows"):
        ingest_csv(tmp_path / "empty.csv")


def test_bad_rows_are_itemized(tmp_path):
    (tmp_path / "bad.csv").write_text(
        "id,timestamp,kwh\n"
        "c01,2024-01-06 00:00,0.5\n"
        "c01,not-a-date,0.5\n"
        "c01,2024-01-06 00:30,oops\n"
        "c01,2024-01-06 01:00,-1.0\n"
    )
    with pytest.raises(IngestError) as err:
        ingest_csv(tmp_path / "bad.csv")
    text = str(err.value)
    assert "line 3: unparseable timestamp 'not-a-date'" in text
    assert "line 4: unparseable kwh 'oops'" in text
    assert "line 5: kwh must be finite and nonnegative" in text


def test_wrong_header_rejected(tmp_path):
    (tmp_path / "h.csv").write_text("meter,when,load\nc01,2024-01-06 00:00,0.5\n")
    with pytest.raises(IngestError, match="expected header id,timestamp,kwh"):
        ingest_csv(tmp_path / "h.csv")


def test_split_is_chronological_and_disjoint(small_table):
    tr, va, te = split_indices(small_table.n_periods)
    train = small_table.window(tr)
    val = small_table.window(va)
    test = small_table.window(te)
    assert train.n_periods + val.n_periods + test.n_periods == small_table.n_periods
    assert max(train.timestamps) < min(val.timestamps) < min(test.timestamps)
    assert max(val.timestamps) < min(test.timestamps)


def test_split_fractions():
    tr, va, te = split_indices(1000)
    assert (tr.stop, va.stop - va.start, te.stop - te.start) == (700, 100, 200)
    with pytest.raises(ValueError):
        split_indices(1000, fractions=(0.7, 0.1, 0.1))
    with pytest.raises(ValueError):
        split_indices(5)


def test_rescale_reference_matches_sum_ratio():
    reference = np.array([2.0, 4.0, 6.0, 8.0])
    target = np.array([1.0, 2.0, 3.0, 4.0])
    scaled = rescale_reference(reference, target)
    np.testing.assert_allclose(scaled, target)
    assert scaled.sum() == pytest.approx(target.sum())
    windowed = rescale_reference(reference, target, window=slice(0, 2))
    assert windowed[:2].sum() == pytest.approx(target[:2].sum())


def test_rescale_zero_reference_rejected():
    with pytest.raises(ValueError, match="sums to zero"):
        rescale_reference(np.zeros(4), np.ones(4))


def test_reference_tracks_aggregate_without_copying(small_table):
    ref = synthetic_reference(small_table, seed=1)
    aggregate = small_table.loads.mean(axis=0)
    assert ref.shape == aggregate.shape
    corr = np.corrcoef(ref, aggregate)[0, 1]
    assert corr > 0.6
    assert not np.allclose(ref, aggregate)
