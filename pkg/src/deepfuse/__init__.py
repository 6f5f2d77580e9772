"""Deep-feature reduction, SVM ensembles and cross-validated fusion."""

__version__ = "0.1.0"

from .ensemble import (
    ClassifierPool,
    EnsembleSelection,
    PoolEntry,
    argmax_predict,
    drop_last_layers,
    make_classifier_id,
    pool_from_scores,
    sffs_select,
    sum_rule,
)
from .errors import ConfigError, FormatError, TrainingError, ValidationError
from .evaluation import (
    CvResult,
    RowSpec,
    SffsSettings,
    SvmSettings,
    WilcoxonResult,
    accuracy,
    run_cv,
    wilcoxon_signed_rank,
)
from .reducers import (
    FittedReducer,
    Method,
    ReductionPlan,
    Scope,
    channel_budget,
    effective_method,
    fit_reducer,
    load_reducer,
    needs_reduction,
    reduce_layer,
    save_reducer,
    select_layers,
)
from .svm import (
    BinarySvmModel,
    MulticlassSvmModel,
    StandardizationStats,
    load_model,
    predict_scores,
    save_model,
    train_binary,
    train_multiclass,
)
from .tensor_store import (
    ActivationTensor,
    DatasetManifest,
    FoldSpec,
    LayerInfo,
    SampleInfo,
    flatten,
    load_manifest,
    read_tensor,
    save_manifest,
    stratified_folds,
    write_tensor,
)
from .transforms import (
    chi2_scores,
    chi2_select,
    cooc_channel_values,
    cooc_tensor,
    dct_channel,
    dct_channel_inverse,
    dct_global,
    dct_global_inverse,
    gep_value,
    gmtp_values,
    lbp_histogram,
    pca_fit,
    pca_project,
)
