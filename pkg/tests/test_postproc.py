from collections import deque

import numpy as np
import pytest

from tpslayout import postproc, synth
from tpslayout.maps import LayoutMaps

from conftest import merged_corner_maps


def upper_widths(maps, unit=None):
    comps = postproc.connected_components(postproc.binarize(maps.corner), 8, True)
    keep = comps.centroid[:, 1] < maps.height / 2
    return sorted(comps.width[keep].tolist())


def flood_fill_partition(binary, conn8, wrap):
    h, w = binary.shape
    seen = np.zeros_like(binary, dtype=bool)
    parts = []
    steps = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    if conn8:
        steps += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
    for i in range(h):
        for j in range(w):
            if not binary[i, j] or seen[i, j]:
                continue
            comp, queue = set(), deque([(i, j)])
            seen[i, j] = True
            while queue:
                a, b = queue.popleft()
                comp.add((a, b))
                for di, dj in steps:
                    x, y = a + di, b + dj
                    if wrap:
                        y %= w
                    if 0 <= x < h and 0 <= y < w and binary[x, y] and not seen[x, y]:
                        seen[x, y] = True
                        queue.append((x, y))
            parts.append(frozenset(comp))
    return set(parts)


def label_partition(labels):
    parts = {}
    for (i, j), v in np.ndenumerate(labels):
        if v:
            parts.setdefault(v, set()).add((i, j))
    return {frozenset(p) for p in parts.values()}


def test_binarize_examples():
    assert postproc.binarize(np.zeros((4, 5))).sum() == 0
    assert postproc.binarize(np.full((4, 5), 0.6)).all()
    with pytest.raises(ValueError):
        postproc.binarize(np.zeros((2, 2, 3)))


def test_binarized_gaussian_diameter():
    sigma = 18.75
    yy, xx = np.mgrid[0:200, 0:200] + 0.5
    blob = np.exp(-((xx - 100) ** 2 + (yy - 100) ** 2) / (2 * sigma**2))
    row = postproc.binarize(blob)[100]
    assert abs(row.sum() - 2 * sigma * np.sqrt(2 * np.log(2))) <= 1


def test_two_discs_and_seam(backend):
    yy, xx = np.mgrid[0:40, 0:100]
    a = (xx - 20) ** 2 + (yy - 20) ** 2 < 64
    b = (xx - 70) ** 2 + (yy - 20) ** 2 < 64
    assert postproc.connected_components(a | b).count == 2
    seam = ((xx - 0) ** 2 + (yy - 20) ** 2 < 64) | ((xx - 100) ** 2 + (yy - 20) ** 2 < 64)
    comps = postproc.connected_components(seam, wrap_x=True)
    assert comps.count == 1
    assert comps.width[0] == 15 and comps.col_start[0] == 93
    assert postproc.connected_components(seam, wrap_x=False).count == 2


def test_sprinkled_rectangles_count(backend, rng):
    img = np.zeros((300, 600), dtype=np.uint8)
    for _ in range(100):
        y, x = rng.integers(0, 290), rng.integers(0, 590)
        img[y:y + rng.integers(1, 10), x:x + rng.integers(1, 10)] = 1
    comps = postproc.connected_components(img, 8, True)
    assert comps.count == len(flood_fill_partition(img, True, True))


@pytest.mark.parametrize("conn8", [True, False])
@pytest.mark.parametrize("wrap", [True, False])
def test_labeling_matches_flood_fill(backend, conn8, wrap):
    rng = np.random.default_rng(1000 + 2 * conn8 + wrap)
    for _ in range(250):
        h, w = rng.integers(1, 12), rng.integers(1, 16)
        img = (rng.uniform(size=(h, w)) < rng.uniform(0.2, 0.7)).astype(np.uint8)
        comps = postproc.connected_components(img, 8 if conn8 else 4, wrap)
        assert label_partition(comps.labels) == flood_fill_partition(img, conn8, wrap)
        # labels are contiguous from 1, and only foreground pixels carry labels
        assert set(np.unique(comps.labels)) - {0} == set(range(1, comps.count + 1))
        assert np.all(img[comps.labels > 0] == 1)


def test_component_stats():
    img = np.zeros((10, 20), dtype=np.uint8)
    img[2:5, 3:9] = 1
    c = postproc.connected_components(img)
    assert (c.row_min[0], c.row_max[0], c.col_start[0], c.width[0], c.pixel_count[0]) == (2, 4, 3, 6, 18)
    assert np.allclose(c.centroid[0], [6.0, 3.5])


def test_split_150_into_two():
    maps = merged_corner_maps([150])
    out = postproc.split_corners(maps)
    assert upper_widths(out) == [72, 73]
    gap = np.flatnonzero(out.corner[170] == 0)
    gap = gap[(gap > 20) & (gap < 170)]
    assert len(gap) == 5 and np.all(np.diff(gap) == 1)
    # floor corners and the edge map are cut in the same columns
    assert np.all(out.corner[340, gap] == 0) and np.all(out.edge[:, gap] == 0)
    assert np.array_equal(np.flatnonzero(out.corner[340, 20:170] == 0) + 20, gap)


def test_split_parts_equal_with_remainder_left():
    # 150 - 5 = 145 -> parts 73 + 72, remainder to the left
    assert postproc.split_columns(20, 150, 2, 5).tolist() == list(range(20 + 73, 20 + 78))
    assert postproc.split_columns(0, 227, 3, 5).tolist() == [73, 74, 75, 76, 77, 150, 151, 152, 153, 154]


def test_single_corner_unchanged():
    maps = merged_corner_maps([70])
    assert postproc.split_corners(maps) is maps


def test_split_225_relabel_oracle():
    out = postproc.split_corners(merged_corner_maps([225]))
    upper = postproc.binarize(out.corner)[:256]
    assert len(flood_fill_partition(upper, True, True)) == 3


def test_outside_bands_untouched(rng):
    maps = merged_corner_maps([150, 70, 225])
    noisy = LayoutMaps(np.clip(maps.edge + rng.uniform(0, 0.2, maps.edge.shape), 0, 1), maps.corner)
    out = postproc.split_corners(noisy)
    changed = np.flatnonzero((out.corner != noisy.corner).any(axis=0) | (out.edge != noisy.edge).any(axis=(0, 2)))
    zeroed = np.flatnonzero((out.corner == 0).all(axis=0) & (out.edge == 0).all(axis=(0, 2)))
    assert set(changed) <= set(zeroed)
    assert len(changed) == 5 + 10


def test_lower_corners_ignored():
    maps = merged_corner_maps([70])
    corner = maps.corner.copy()
    corner[330:360, 400:550] = 1.0  # a wide blob below the horizon only
    out = postproc.split_corners(LayoutMaps(maps.edge, corner))
    assert np.array_equal(out.corner, corner)


def test_split_across_seam():
    corner = np.zeros((512, 1024))
    corner[150:200, 950:] = 1.0
    corner[150:200, :76] = 1.0  # 150 columns in total, straddling the seam
    out = postproc.split_corners(LayoutMaps(np.zeros((512, 1024, 3)), corner))
    assert upper_widths(out) == [72, 73]


@pytest.mark.parametrize("widths", [[150], [225, 70], [150, 150, 75]])
def test_idempotent_on_fixtures(widths):
    once = postproc.split_corners(merged_corner_maps(widths))
    twice = postproc.split_corners(once)
    assert twice.equals(once)


def test_idempotent_and_width_bound_on_corpus():
    spec = synth.CorpusSpec(count=12, seed=3, kind="manhattan", min_corners=4, max_corners=10)
    for s in synth.generate(spec):
        once = postproc.split_corners(s.maps)
        assert postproc.split_corners(once).equals(once)
        assert all(w < 2 * 75 - 25 for w in upper_widths(once))


def test_unsplittable_band_is_documented():
    # widths that round to m >= 2 but miss the tolerance stay merged
    dead = [w for w in range(125, 400) if not (abs(w - 75 * int(np.floor(w / 75 + 0.5))) <= 25)]
    assert dead and dead[0] == 176
    out = postproc.split_corners(merged_corner_maps([dead[0]]))
    assert upper_widths(out) == [176]


@pytest.mark.parametrize("unit, expected", [(50, "over"), (75, "exact"), (100, "under")])
def test_unit_width_ordering(unit, expected):
    widths = [75, 150, 225, 70, 150]  # 1 + 2 + 3 + 1 + 2 corners
    truth = 9
    out = postproc.split_corners(merged_corner_maps(widths, gap=50), unit_width=unit)
    n = len(upper_widths(out))
    assert {"over": n > truth, "exact": n == truth, "under": n < truth}[expected]


def test_invalid_parameters():
    with pytest.raises(ValueError):
        postproc.split_corners(merged_corner_maps([70]), unit_width=0)
    with pytest.raises(ValueError):
        postproc.connected_components(np.zeros((3, 3)), connectivity=6)
