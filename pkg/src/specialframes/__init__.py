"""Frames in which a linear connection or derivation has vanishing components along a map."""

from .calculus import Axis, OdeSettings, integral_curve, multiparam_transport, partial, solve_linear_transport
from .core import (
    ConnectionField,
    FrameSpec,
    ScalarField,
    SDerivationAlongX,
    VectorField,
    assemble_WX,
    commutation_coefficients,
    connection_WX,
    torsion_components,
    transform_components,
    transform_connection,
)
from .domain import Box
from .errors import (
    AdaptedCoordinatesRequired,
    DomainBoundaryError,
    EvaluationError,
    GeometryError,
    ObstructionFailed,
    ParseError,
    ScenarioError,
    SingularFrameError,
    TransportError,
)
from .framebuilder import (
    build_frame_along_map,
    build_frame_at_point,
    build_frame_fixed_field,
    check_holonomic,
    check_uniqueness,
    verify_vanishing,
)
from .obstruction import Grid, ParamMap, curvature_matrices, detect_crossings, obstruction_matrices

__version__ = "0.1.0"
