"""Greedy selection of explicit kernel features (MFGA) and kernel-approximation baselines."""

from .data import (
    Dataset,
    RawDataset,
    Schema,
    Standardizer,
    Task,
    apply_standardizer,
    bandwidth_heuristic,
    fit_standardizer,
    load_csv,
    split,
    subsample,
)
from .features import (
    CandidateSet,
    FeatureDescriptor,
    build_candidate_set,
    enumerate_multi_indices,
    gaussian_kernel,
    linear_feature,
    n_multi_indices,
    rff_candidate_set,
    sample_rff,
    taylor_design,
    taylor_feature,
    truncation_bound,
)
from .objectives import LogisticLoss, Objective, QuadraticLoss
from .greedy import SparseModel, TrainTrace, mfga_train, predict, refit, select_indices
from .baselines import (
    KernelModel,
    eerf_score,
    kernel_predict,
    kernel_train_exact,
    lkrf_reweight,
    rks_train,
)

__version__ = "0.1.0"
