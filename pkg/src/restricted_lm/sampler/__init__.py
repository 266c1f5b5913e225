from .chain import NORMAL, STUDENT_T, ChainConfig, ChainOutput, run_chain
from .hierarchical import HierarchicalOutput, run_hierarchical
from .priors import NIGPrior, ThetaState, conjugate_posterior, gibbs_theta_normal
from .proposal import (
    UNIFORM,
    VMF,
    AugmentedState,
    Constraint,
    ProposalEvaluation,
    h_transform,
    inverse_h,
    mh_augment_step,
    proposal_log_density,
)
from .student_t import run_student_t_baseline, t_prior_adjustment

__all__ = [
    "NORMAL", "STUDENT_T", "UNIFORM", "VMF",
    "AugmentedState", "ChainConfig", "ChainOutput", "Constraint", "HierarchicalOutput", "NIGPrior",
    "ProposalEvaluation", "ThetaState",
    "conjugate_posterior", "gibbs_theta_normal", "h_transform", "inverse_h", "mh_augment_step",
    "proposal_log_density", "run_chain", "run_hierarchical", "run_student_t_baseline", "t_prior_adjustment",
]
