import numpy as np
import pytest

from tpslayout import layout as lay
from tpslayout._accel import HAVE_NUMBA, use_backend

BACKENDS = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]


@pytest.fixture(params=BACKENDS)
def backend(request):
    with use_backend(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


@pytest.fixture(scope="session")
def reference_maps():
    return lay.reference_layout()


@pytest.fixture(scope="session")
def small_reference():
    return lay.reference_layout(256, 128)


def l_shaped_room(ceiling=2.8):
    poly = np.array([[2.0, -1.5], [2.0, 1.0], [0.5, 1.0], [0.5, 2.5], [-2.0, 2.5], [-2.0, -1.5]])
    return lay.RoomLayout(poly, ceiling, manhattan=True)


def merged_corner_maps(widths, width=1024, height=512, top=(150, 200), bottom=(320, 370), gap=60):
    """Corner map with one upper and one lower rectangular blob per entry of ``widths``.

    Blob ``k`` spans exactly ``widths[k]`` columns; the edge map carries a red
    vertical at every covered column so edits to it are visible.
    """
    from tpslayout.maps import LayoutMaps

    corner = np.zeros((height, width))
    edge = np.zeros((height, width, 3))
    x = 20
    for w in widths:
        corner[top[0]:top[1], x:x + w] = 1.0
        corner[bottom[0]:bottom[1], x:x + w] = 1.0
        edge[top[1]:bottom[0], x:x + w, 0] = 1.0
        x += w + gap
    if x - gap > width:
        raise ValueError("fixture does not fit")
    return LayoutMaps(edge, corner)
