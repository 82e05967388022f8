"""Differentially private Benjamini-Hochberg (PrivateBHq) and FDR_k tools."""

from .errors import CalibrationError, DomainError, EmptyCandidatesError, NumericalError, ParameterError
from .fdr import (
    CkEstimate,
    FdpRecord,
    bound_fdr_k,
    bound_fdr_upper_k,
    estimate_ck,
    estimate_ck_finite,
    estimate_ck_many,
    fdp,
)
from .mechanisms import (
    NOISE_OFF,
    NoisyCandidate,
    PrivacyBudget,
    advanced_composition,
    calibrate,
    laplace_concentration_bound,
    laplace_sample,
    peel,
    private_min,
)
from .procedures import (
    RejectionSet,
    bhq_cutoffs,
    bhq_step_down,
    bhq_step_up,
    gamma_cutoffs,
    inflated_level,
    is_compliant,
    private_bhq,
    private_bhq_pvalues,
)
from .pvalues import (
    Dataset,
    SensitivityProfile,
    binomial_pvalue,
    binomial_pvalues,
    default_nu,
    log_truncate,
    read_dataset,
    sensitivity_scan_binomial,
    sensitivity_scan_truncexp,
    truncexp_pvalue,
    truncexp_tail,
    write_dataset,
)
from .simlab import (
    ExperimentConfig,
    ExperimentResult,
    adversarial_compliant,
    gen_block_example,
    gen_normal_example,
    gen_student_example,
    run_experiment,
    t_pvalues,
    z_pvalues,
)

__version__ = "0.1.0"
