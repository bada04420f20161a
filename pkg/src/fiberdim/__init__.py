"""Numerical thermodynamic formalism for continued-fraction skew products.

Layers, bottom up: exact symbolic coding on pair digit words (``words``),
fiber contraction families with certified constants (``systems``), transfer
operator Gibbs states and pressure (``thermo``), dimension formulas
(``dimension``), Monte Carlo estimators (``empirics``), and a batch CLI
(``cli``).
"""

from .errors import (BracketFailure, ConfigError, DegenerateExponent,
                     DomainError, DomainEscape, EnumerationCapExceeded,
                     FiberdimError, InsufficientScales, InvalidWord,
                     NonPrimitive, RationalTermination, SummabilityFailure)
from .words import (Box, ComposedMap, Interval, cf_map,
                    cf_map_derivative_mod, cf_value_float,
                    certify_derivative_sup, enumerate_pair_words,
                    induced_ifs_maps, orbit_derivative_product,
                    pair_alphabet, pi_tilde, rho0_digits, rho0_value)
from .systems import (Disk, FiberWordContext, PastWord, SimilaritySchedule,
                      SmaleSystem, SystemReport, fiber_derivative_mod,
                      fiber_map, image_disk, make_system, pi2_hat,
                      sample_fiber_limit_set, verify_system)
from .thermo import (ConstantPotential, GeometricPotential, GibbsApprox,
                     McEstimate, MeasureStats, PressureEstimate,
                     TablePotential, entropy, gibbs_markov, lyapunov_fiber,
                     lyapunov_fiber_exact, lyapunov_marginal,
                     marginal_entropy, measure_stats, potential_mean,
                     pressure_cylinder_sum, pressure_derivative_check,
                     variational_gap)
from .dimension import (BowenResult, DimensionReport, SummabilityReport,
                        SweepResult, analytic_similarity_dimension,
                        bowen_dimension, branch_value, dimension_report,
                        fiber_measure_dimension, global_dimension,
                        moran_root, summability_scan, variational_sweep,
                        z_marginal_dimension)
from .empirics import (BoxDimEstimate, ExactnessReport, LocalDimEstimate,
                       PointCloud, box_dimension, exactness_report,
                       local_dimension, sample_measure)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
