import importlib.resources

import pytest

from gq.footprint import footprint_report, load_topology

MILLION = 1e6


@pytest.fixture(scope="module")
def conformer_shapes():
    path = importlib.resources.files("gq.fixtures") / "conformer_table1.json"
    return load_topology(str(path))


def test_subsampling_params():
    shapes = [
        ("conv0", (3, 3, 1, 128)),
        ("conv1", (3, 3, 128, 128)),
        ("dense", (6144, 256)),
    ]
    report = footprint_report(shapes, {}, default_bits=5)
    assert report.total_params == 1_721_472
    assert round(report.total_params / MILLION, 2) == 1.72


def test_conformer_group_totals(conformer_shapes):
    report = footprint_report(conformer_shapes, {}, default_bits=5)
    groups = report.group_params()
    assert round(groups["subsampling"] / MILLION, 2) == 1.72
    assert round(groups["conformer_blocks"] / MILLION, 2) == 21.87
    assert round(groups["encoder_proj"] / MILLION, 2) == 0.26
    assert groups["decoder"] == 2_621_440
    assert round(groups["decoder"] / MILLION, 2) == 2.62
    assert groups["joint"] == 1_280_512
    assert round(groups["joint"] / MILLION, 2) == 1.28
    assert report.total_params == pytest.approx(28e6, rel=0.02)


def test_last_block_excludes_final_dense(conformer_shapes):
    names = [name for name, _, _ in conformer_shapes]
    assert "block12.ffn1.dense1" in names
    assert "block13.ffn1.dense1" not in names
    assert sum(1 for n in names if n.startswith("block13.")) == 11
    assert sum(1 for n in names if n.startswith("block00.")) == 12


@pytest.mark.parametrize("bits,expected", [(5, 6.4), (6, 5.3), (8, 4.0), (4, 8.0)])
def test_uniform_reduction_ratio(conformer_shapes, bits, expected):
    report = footprint_report(conformer_shapes, {}, default_bits=bits)
    assert round(report.reduction_ratio, 1) == expected


def test_uniform_ratio_is_exactly_32_over_b():
    shapes = [("a", (16, 16)), ("b", (3, 5, 7)), ("c", (11,))]
    for b in range(1, 9):
        report = footprint_report(shapes, {}, default_bits=b)
        assert report.reduction_ratio == 32.0 / b


def test_mixed_bit_map():
    shapes = [("x", (100,)), ("y", (300,))]
    report = footprint_report(shapes, {"x": 8}, default_bits=4)
    assert report.rows[0].bit_depth == 8
    assert report.rows[1].bit_depth == 4
    assert report.total_packed_bits == 100 * 8 + 300 * 4


def test_overhead_reported_separately():
    shapes = [("x", (1000,))]
    report = footprint_report(shapes, {}, default_bits=5)
    row = report.rows[0]
    assert row.codebook_overhead_bytes == 32 + 4
    assert row.packed_stream_bytes == 625
    # overhead never leaks into the headline ratio
    assert report.reduction_ratio == 32.0 / 5


def test_bad_inputs():
    with pytest.raises(ValueError):
        footprint_report([("x", (0, 2))], {}, default_bits=5)
    with pytest.raises(ValueError):
        footprint_report([("x", (4,))], {}, default_bits=9)
    with pytest.raises(ValueError):
        footprint_report([("x", (4,))], {})  # no depth anywhere


def test_csv_and_json_shapes(conformer_shapes):
    report = footprint_report(conformer_shapes, {}, default_bits=5)
    csv = report.to_csv()
    assert csv.count("\n") == len(report.rows) + 2  # header + rows + total
    doc = report.to_json_dict()
    assert doc["totals"]["params"] == report.total_params
    assert doc["reduction_ratio_vs_32bit"] == report.reduction_ratio
