"""Two-way functional ANOVA with repeated measures via B-spline basis expansion."""

from .basis import (BSplineBasis, SampledCurve, build_basis, eval_basis, fit_curve,
                    fit_curves, gcv_select)
from .design import (ContrastPair, EffectEstimates, RMDataset, build_design_matrix,
                     contrast_for, estimate_effects)
from .dmm import assemble_wide, dmm_sscp, dmm_test, fit_b
from .errors import *  # noqa: F401,F403
from .manova import SSCPPair, StatisticValue, manova_statistics, wilks_pvalue
from .mmm import SphericityResult, mmm_sscp, mmm_test, rearrange, sphericity_test
from .permutation import (PermutationConfig, permutation_pvalue, permutation_test,
                          permute_dataset)
from .report import TestReport

__version__ = "0.1.0"
