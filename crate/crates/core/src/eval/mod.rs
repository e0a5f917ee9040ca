//! Evaluation metrics and report assembly.

mod fixlik;
mod heatmap;
mod metrics;
mod pos;
mod regression;
mod report;

pub use fixlik::{
    constant_model, model_fixation_likelihood, per_word_rate_bound, score_decisions,
    FixationLikelihood, MaskedSequence, MissingFill,
};
pub use heatmap::{bin_color, emit_heatmap, heat_bin, render_heatmap, HeatToken};
pub use metrics::{
    accuracy_f1, conditional_fixation_ratio, conditional_fixation_ratio_known, correlations,
    pearson, perplexity, spearman, AccuracyF1, ConditionalFixation, Correlations,
};
pub use pos::{pos_compare, pos_table, PosComparison, PosRow};
pub use regression::{
    deviance, gaussian_log_likelihood, ols_regression, residualize, OlsFit, RegressionMatrix,
};
pub use report::{
    ConditionalRow, CorrelationRow, EvalReport, LikelihoodRow, PerplexityRow, PosCompareRow,
    PosReport, PredictionRow, RegressionCoefRow, RegressionModelRow, RegressionReport,
};
