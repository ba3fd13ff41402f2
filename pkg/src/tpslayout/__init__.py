"""Room layout estimation as thin-plate-spline warping of a reference layout.

The reference room's edge and corner maps are deformed by a TPS defined on a
square lattice of control points.  Fitting the control points to a target
layout, post-processing merged corners and reading the room back from the
warped corner map gives a 3-D layout.
"""

from ._accel import backend, set_backend, use_backend
from .fit import FitConfig, FitTrace, combine_losses, fit_tps, huber_loss, overall_loss, warp_maps
from .layout import (
    CornerAnnotation,
    RoomLayout,
    canonical_room,
    corner_annotation,
    cuboid,
    export_obj,
    maps_to_layout,
    reference_layout,
    render_maps,
)
from .maps import LayoutMaps
from .metrics import MetricsReport, corner_error, iou_2d, iou_3d, pixel_error
from .postproc import connected_components, split_corners
from .synth import CorpusSpec, generate
from .tps import ControlGrid, SamplingGrid, make_sampling_grid, solve_coefficients

__version__ = "0.1.0"
