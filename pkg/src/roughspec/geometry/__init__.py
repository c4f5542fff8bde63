from .diagnostics import GeometryReport, mosco_diagnostic, sample_boundary
from .metrics import attouch_wets, hausdorff
from .oracles import (
    DomainOracle,
    boundary_distance,
    koch_polygon,
    oracle_annulus,
    oracle_disc,
    oracle_julia,
    oracle_koch,
    oracle_square,
    oracle_strips,
    points_in_polygon,
)
from .pixels import (
    EmptyPixelationError,
    PixelDomain,
    boundary_points,
    collar_mask,
    components,
    edge_segments,
    estimate_Q,
    exposed_edges,
    inside_pixels,
    pixelate,
    read_pbm,
    read_points_csv,
    segment_distance,
    write_pbm,
    write_points_csv,
)
