"""Neutralized entropy quantities for non-autonomous dynamical systems."""
__version__ = "0.1.0"

from .dynamics import (  # noqa: E402
    Affine,
    BallSpec,
    Logistic,
    MapSequence,
    Scale,
    Shift,
    SymbolicShift,
    Tent,
    Torus,
    UnitInterval,
    autonomous,
    ball_contains,
    bowen_dist,
    compose,
    parse_map,
    parse_space,
    periodic,
)
from .errors import (  # noqa: E402
    ArgumentError,
    BracketError,
    ConfigurationError,
    DomainError,
    EntropyError,
    InstanceError,
    SizeError,
    SolverError,
    UnknownEntryError,
)
from .measures import FiniteMeasure, SamplerConfig, empirical_measure, mass_of_ball  # noqa: E402
from .covering import (  # noqa: E402
    CoverFamily,
    FiniteInstance,
    candidate_balls,
    exact_min_cover,
    greedy_cover,
    vitali_select,
)
from .lp import LinearProgram, fractional_cover, frostman_measure, solve  # noqa: E402
from .estimators import (  # noqa: E402
    TargetSet,
    bk_entropy,
    critical_exponent,
    entropy_NB,
    entropy_NWB,
    katok_entropy,
    nb_report,
    nwb_report,
    outer_M,
    outer_W,
)
