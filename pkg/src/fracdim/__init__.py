"""Certified dimension bounds for self-similar and diagonal self-affine
measures with overlaps.

The package splits along the pipeline: exact interval and cylinder
machinery (:mod:`fracdim.ifs`, :mod:`fracdim.algebraic`), certified
measure upper bounds (:mod:`fracdim.measure_bounds`), conditional-entropy
assembly into dimension lower bounds (:mod:`fracdim.entropy_bounds`),
uniform bounds over parameter ranges (:mod:`fracdim.sweep`), entropy upper
bounds from matrix families (:mod:`fracdim.pisot`), the planar extension
(:mod:`fracdim.selfaffine`), and the command line (:mod:`fracdim.cli`).
"""

from .core_math import EntropyValue, WeightVector
from .errors import (
    CertificationError,
    ConvergenceError,
    DomainError,
    FracdimError,
    NotFinitelyResolvable,
    PreconditionError,
    ResourceLimitError,
)
from .ifs import (
    IFS1D,
    Box2D,
    Interval,
    Partition,
    Similarity1D,
    attractor_hull,
    bernoulli_ifs,
    bernoulli_partition,
    generate_partition,
    parse_ifs_file,
    three_map_overlap_ifs,
)
from .measure_bounds import (
    UBConfig,
    UBResult,
    exact_cylinder_measures,
    measure_upper_bound,
    measure_upper_bound_batch,
)
from .entropy_bounds import (
    BoundReport,
    conditional_entropy_upper,
    dimension_lower_bound,
)
from .sweep import (
    SweepCell,
    SweepRow,
    SweepSummary,
    multinacci_bound,
    power_trick_bound,
    run_schedule,
    uniform_lower_bound,
)
from .pisot import (
    MatrixFamily,
    construct_family,
    dim_upper_table,
    entropy_upper_seq,
    load_family,
    pisot_dim_upper,
    pressure_estimate,
    save_family,
)
from .selfaffine import DiagonalIFS2D, PlanarBoundReport, selfaffine_lower_bound

__all__ = [
    "EntropyValue",
    "WeightVector",
    "FracdimError",
    "DomainError",
    "PreconditionError",
    "ResourceLimitError",
    "NotFinitelyResolvable",
    "ConvergenceError",
    "CertificationError",
    "IFS1D",
    "Interval",
    "Box2D",
    "Partition",
    "Similarity1D",
    "attractor_hull",
    "bernoulli_ifs",
    "bernoulli_partition",
    "generate_partition",
    "parse_ifs_file",
    "three_map_overlap_ifs",
    "UBConfig",
    "UBResult",
    "exact_cylinder_measures",
    "measure_upper_bound",
    "measure_upper_bound_batch",
    "BoundReport",
    "conditional_entropy_upper",
    "dimension_lower_bound",
    "SweepCell",
    "SweepRow",
    "SweepSummary",
    "run_schedule",
    "uniform_lower_bound",
    "power_trick_bound",
    "multinacci_bound",
    "MatrixFamily",
    "load_family",
    "save_family",
    "construct_family",
    "entropy_upper_seq",
    "pressure_estimate",
    "pisot_dim_upper",
    "dim_upper_table",
    "DiagonalIFS2D",
    "PlanarBoundReport",
    "selfaffine_lower_bound",
]
