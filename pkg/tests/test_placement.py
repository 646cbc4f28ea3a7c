import math

import pytest
from hypothesis import assume, given, strategies as st

from coopvod.catalog import build_catalog
from coopvod.errors import ConfigError
from coopvod.placement import (PrefixAllocation, allocate_prefixes, assign_to_proxies,
                               build_placement, build_single_proxy_placement, dump_placement,
                               group_video_sets, load_placement, lookup)
from coopvod.topology import build_topology


def test_proportional_split_of_two_videos():
    catalog, pop = build_catalog(2, 100.0, alpha=1.0)
    alloc = allocate_prefixes(catalog, pop, b_minutes=90, m_proxies=1, w_min=1, w_max=100)
    assert alloc.w == {1: 60.0, 2: 30.0}
    assert alloc.total == 90.0


def test_single_video_takes_whole_capacity():
    catalog, pop = build_catalog(1, 60.0)
    alloc = allocate_prefixes(catalog, pop, b_minutes=10, m_proxies=1, w_min=5, w_max=60)
    assert alloc.w == {1: 10.0}


def test_default_prefixes_stay_in_published_range():
    catalog, pop = build_catalog(3000, 60.0)
    for m, b in ((6, 300), (6, 600), (1, 300), (4, 1000)):
        alloc = allocate_prefixes(catalog, pop, b, m, 25, 60)
        assert all(25 <= w <= 60 for w in alloc.w.values())
        assert alloc.w[1] == min(max(math.floor(m * b * pop.weights[0] + 0.5), 25), 60)


def test_capacity_too_small_for_first_video():
    catalog, pop = build_catalog(5, 60.0)
    with pytest.raises(ConfigError):
        allocate_prefixes(catalog, pop, b_minutes=10, m_proxies=1, w_min=25, w_max=60)


@pytest.mark.parametrize("kwargs", [dict(b_minutes=0), dict(m_proxies=0),
                                    dict(w_min=30, w_max=20), dict(w_min=0)])
def test_bad_allocation_arguments(kwargs):
    catalog, pop = build_catalog(5, 60.0)
    args = dict(b_minutes=100, m_proxies=2, w_min=10, w_max=30) | kwargs
    with pytest.raises(ConfigError):
        allocate_prefixes(catalog, pop, **args)


def test_first_fit_decreasing_example():
    # hand-built allocations carry no plan, so plain FFD applies
    alloc = PrefixAllocation({1: 60.0, 2: 30.0, 3: 30.0}, b_minutes=60, m_proxies=2)
    d = assign_to_proxies(alloc, 2)
    assert d.by_proxy == {1: {1}, 2: {2, 3}}


def test_one_video_goes_to_first_proxy():
    d = assign_to_proxies(PrefixAllocation({1: 10.0}, 60, 3), 3)
    assert d.by_proxy == {1: {1}}


def test_overflow_is_reported_uncached():
    d = assign_to_proxies(PrefixAllocation({1: 50.0, 2: 50.0}, 60, 1), 1)
    assert d.by_proxy == {1: {1}}
    assert d.unplaced == [2]
    assert lookup(d, 2) is None


def test_prefix_longer_than_buffer_is_an_error():
    with pytest.raises(ConfigError):
        assign_to_proxies(PrefixAllocation({1: 61.0}, 60, 2), 2)


def test_lookup_examples():
    d = assign_to_proxies(PrefixAllocation({1: 50.0, 3: 40.0}, 60, 2), 2, n_videos=100)
    assert lookup(d, 3) == (2, 40.0)
    assert lookup(d, 99) is None
    with pytest.raises(ValueError):
        lookup(d, 101)
    with pytest.raises(ValueError):
        lookup(d, 0)


def test_tracker_bin_is_filled_last():
    from coopvod.placement import TRACKER_BIN
    alloc = PrefixAllocation({1: 60.0, 2: 60.0, 3: 60.0}, 60, 3)
    d = assign_to_proxies(alloc, 2, tracker_bin=True)
    assert d.by_proxy == {1: {1}, 2: {2}, TRACKER_BIN: {3}}


def test_partitioned_classes_cover_catalog_around_each_group():
    sets = group_video_sets(30, 6, "partitioned")
    for g in range(6):
        left, right = sets[(g - 1) % 6], sets[(g + 1) % 6]
        assert set(sets[g]).isdisjoint(left) and set(sets[g]).isdisjoint(right)
        assert set(sets[g]) | set(left) | set(right) == set(range(1, 31))


def test_disjoint_mode_splits_all_groups():
    sets = group_video_sets(12, 4, "disjoint")
    assert sorted(v for s in sets for v in s) == list(range(1, 13))
    assert sets[0] == [1, 5, 9]


def test_replicated_mode_offers_everything():
    assert group_video_sets(5, 3, "replicated") == [[1, 2, 3, 4, 5]] * 3


def test_unknown_mode():
    with pytest.raises(ConfigError):
        group_video_sets(5, 3, "striped")


def test_dump_and_load_round_trip(tmp_path):
    catalog, pop = build_catalog(200, 35.0)
    topo = build_topology(3, 2)
    directory = build_placement(catalog, pop, topo, 120, 25, 60, tracker_cache=True)
    path = tmp_path / "placement.csv"
    dump_placement(directory, path)
    back = load_placement(path, 200, 3, 2)
    assert list(back.rows()) == list(directory.rows())
    assert back.tracker_cache


@pytest.mark.parametrize("body, line", [("1,1,5\n", 2), ("1,1,5,10\n1,9,6,10\n", 3),
                                        ("1,1,x,10\n", 2), ("1,1,5,-3\n", 2)])
def test_load_rejects_malformed_rows(tmp_path, body, line):
    path = tmp_path / "p.csv"
    path.write_text("group,proxy,video_id,w_minutes\n" + body)
    with pytest.raises(ValueError, match=f":{line}:"):
        load_placement(path, 100, 2, 3)


def test_single_proxy_baseline_caches_top_of_catalog():
    catalog, pop = build_catalog(100, 35.0)
    sp = build_single_proxy_placement(catalog, pop, 300, 25, 60)
    assert sorted(sp.w) == list(range(1, len(sp.w) + 1))
    assert math.fsum(sp.w.values()) == pytest.approx(300)
    assert sp.lookup(100) is None


# -- randomized constraints ---------------------------------------------------

@st.composite
def placement_configs(draw):
    n = draw(st.integers(1, 400))
    alpha = draw(st.sampled_from([0.0, 0.5, 0.986, 1.0, 1.5]))
    w_min = draw(st.floats(1.0, 40.0))
    w_max = draw(st.floats(w_min, 90.0))
    lengths = draw(st.lists(st.floats(5.0, 120.0), min_size=n, max_size=n))
    m = draw(st.integers(1, 8))
    b = draw(st.floats(max(w_min, 1.0), 600.0))
    return n, alpha, lengths, m, b, w_min, w_max


def check_group(alloc, directory, catalog, m, b):
    """Hard constraints that must hold for any allocation."""
    assert not directory.unplaced
    loads = [directory.load(q) for q in range(1, m + 1)]
    assert all(load <= b + 1e-6 for load in loads)
    assert alloc.total <= m * b + 1e-6
    assert math.fsum(loads) == pytest.approx(alloc.total)
    for vid, w in alloc.w.items():
        assert 0 < w <= catalog.length(vid) + 1e-9
    holders = [vid for vids in directory.by_proxy.values() for vid in vids]
    assert len(holders) == len(set(holders))
    assert sorted(holders) == sorted(alloc.w)


@given(placement_configs())
def test_random_allocations_respect_capacity(cfg):
    n, alpha, lengths, m, b, w_min, w_max = cfg
    catalog, pop = build_catalog(n, lengths, alpha)
    try:
        alloc = allocate_prefixes(catalog, pop, b, m, w_min, w_max)
    except ConfigError:
        assume(False)
    directory = assign_to_proxies(alloc, m)
    check_group(alloc, directory, catalog, m, b)
    # the plan is followed bin by bin
    assert [sorted(d) for d in alloc.bins if d] == \
        [sorted(directory.by_proxy[q]) for q in sorted(directory.by_proxy)]
    # a plentiful catalog fills every bin to within a minute
    offered = math.fsum(min(s, w_max, b) for s in lengths)
    if offered >= m * b + 2 * w_max:
        assert alloc.total >= m * b - m


@given(placement_configs())
def test_more_popular_videos_get_no_shorter_prefix(cfg):
    n, alpha, _, m, b, w_min, w_max = cfg
    catalog, pop = build_catalog(n, 200.0, alpha)
    try:
        alloc = allocate_prefixes(catalog, pop, b, m, w_min, w_max)
    except ConfigError:
        assume(False)
    ids = sorted(alloc.w)
    assert ids == list(range(1, len(ids) + 1))
    sizes = [alloc.w[i] for i in ids]
    assert all(a >= b_ - 1e-9 for a, b_ in zip(sizes, sizes[1:]))


@given(st.dictionaries(st.integers(1, 50), st.floats(1.0, 60.0), max_size=40),
       st.integers(1, 6))
def test_lookup_agrees_with_inverse_map(w, m):
    d = assign_to_proxies(PrefixAllocation(w, 60.0, m), m, n_videos=50)
    for vid in range(1, 51):
        hit = lookup(d, vid)
        holders = [q for q, vids in d.by_proxy.items() if vid in vids]
        if hit is None:
            assert holders == []
        else:
            assert holders == [hit[0]] and hit[1] == w[vid]
    placed = {v for vids in d.by_proxy.values() for v in vids}
    assert placed | set(d.unplaced) == set(w)
