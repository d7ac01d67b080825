import math

import pytest

from dphaser import bench


def test_fit_recovers_exact_line():
    pts = [(c, 2.0 * math.log2(c) + 1.0) for c in (2, 8, 32)]
    a, b = bench.fit_log(pts)
    assert a == pytest.approx(2.0) and b == pytest.approx(1.0)


def test_single_task_is_one_hop_from_head():
    assert bench.root_hops(1, 0.5, 0) == [1]


def test_hops_grow_sublinearly():
    means = [sum(bench.root_hops(n, 0.5, 1)) / n for n in (16, 64, 256)]
    assert means[0] < means[2] < means[0] * 16


def test_insert_and_delete_counts_positive():
    ins, hops, dele, h = bench.insert_and_delete(32, 0.5, 3)
    assert ins >= hops + 2 and 2 <= dele <= 2 * h + 1


def test_promotion_needs_no_messages_at_p_zero():
    assert bench.promote_per_node(8, 0.0, 0) == 0


def test_row_matches_csv_fields():
    row = bench.bench_n(8, 0.5, 3)
    assert len(row.csv()) == len(bench.CSV_FIELDS) and row.bootstrap_rounds == 3


def test_promote_shape_grows_with_c():
    assert bench.promote_shape(4, 0.5) < bench.promote_shape(64, 0.5)
