"""Guaranteed output-set bounds for small feedforward networks by partitioning and propagation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    DimensionMismatchError,
    FitError,
    NetworkFormatError,
    NonFiniteError,
    ReachError,
    UndefinedErrorMetric,
    UnsupportedDimensionError,
)
from .geometry import (  # noqa: E402
    BoxBound,
    Hull2D,
    LowerBounds,
    Polygon,
    Shape,
    convex_hull_2d,
    estimate_error,
    merge,
    polygon_area,
    union_area_boxes_2d,
)
from .network import (  # noqa: E402
    Activation,
    Box,
    Layer,
    Network,
    SampleSet,
    forward,
    load_network,
    random_network,
    sample_outputs,
    truth_samples,
)
from .partition import AnalysisResult, AnalyzerConfig, Partitioner, analyze  # noqa: E402
from .propagators import (  # noqa: E402
    AffineBounds,
    Propagator,
    Relaxation,
    concretize,
    propagate,
    propagate_ibp,
    propagate_linear,
    relax_activation,
)
