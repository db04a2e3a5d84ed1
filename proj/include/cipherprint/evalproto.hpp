#pragma once
// Grouped cross-validation with boundary purging, metrics, cross-domain gaps, sanity
// checks and separability analysis.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cipherprint/fingerprint.hpp"
#include "cipherprint/learn.hpp"

namespace cipherprint {

struct FoldPlan {
    int repeats = 5;
    int folds = 5;
    std::size_t purge_radius = 3;
    std::uint64_t seed = 0;
    std::vector<std::string> groups;            // sorted unique group ids
    std::vector<int> group_label;               // parallel to groups
    std::vector<std::vector<int>> assignment;   // [repeat][group] -> fold
    int max_class_imbalance = 0;                // worst (max - min) groups of one class across folds

    int fold_of(int repeat, const std::string& group) const;
    nlohmann::json to_json() const;
};

// Greedy label-stratified group assignment. Throws ConfigError when a class has fewer than
// k groups or a group carries two labels.
FoldPlan plan_folds(const std::vector<std::string>& groups, const std::vector<int>& labels, int k = 5,
                    int repeats = 5, std::uint64_t seed = 0, std::size_t purge_radius = 3);

struct PurgeResult {
    std::vector<std::size_t> kept;
    std::size_t purged = 0;
};

// Drops training windows that share a source with a test window and lie within rho
// window indices of it.
PurgeResult purge_training(const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
                           const std::vector<std::string>& sources, const std::vector<std::size_t>& window_index,
                           std::size_t rho);

double accuracy(const std::vector<int>& y, const std::vector<int>& pred);
// Mean of per-class F1 over classes 0..n_classes-1. A class with no support and no
// predictions contributes 0. n_classes = 0 means the largest label seen plus one.
double macro_f1(const std::vector<int>& y, const std::vector<int>& pred, int n_classes = 0);

struct AucResult {
    double macro = 0.0;
    std::vector<double> per_class;  // NaN for skipped classes
    std::vector<int> skipped;       // classes with no positives or no negatives
};
// One-vs-rest Mann-Whitney AUC per score column with mid-ranks for ties.
AucResult macro_auc(const std::vector<int>& y, const MatrixXd& scores);
double binary_auc(const std::vector<double>& scores, const std::vector<bool>& positive);

// (M_ss - M_st) / M_ss * 100. Throws std::invalid_argument unless M_ss > 0.
double generalization_gap(double m_ss, double m_st);

struct MetricsReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    double macro_auc = 0.0;
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<int> auc_skipped;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t n_purged = 0;

    nlohmann::json to_json() const;
};

MetricsReport evaluate_predictions(const std::vector<int>& y, const MatrixXd& scores, int n_classes);

struct CvOptions {
    int folds = 5;
    int repeats = 5;
    std::uint64_t seed = 0;
    std::size_t purge_radius = 3;
    int jobs = 1;
    bool shuffle_train_labels = false;
    // Optional relabelling applied before training (e.g. one-vs-rest); empty means identity.
    std::vector<int> label_map;
};

struct CvResult {
    FoldPlan plan;
    std::vector<MetricsReport> folds;  // repeat-major
    MetricsReport mean;

    nlohmann::json to_json() const;
};

// Trains on every fold's (purged) training split and scores its test split. The
// standardizer and model of each fold see only the training rows; the fold hash is
// checked before prediction.
CvResult cross_validate(const FingerprintMatrix& data, ModelKind kind, const Hyper& hyper, const CvOptions& opt);
CvResult cross_validate(const FingerprintMatrix& data, ModelKind kind, const Hyper& hyper, const CvOptions& opt,
                        const FoldPlan& plan);

// Standardizer and model fitted on every sample of a dataset.
TrainedPipeline train_full(const FingerprintMatrix& data, ModelKind kind, const Hyper& hyper);

struct GapMatrix {
    std::vector<std::string> domains;
    std::map<std::string, std::vector<std::vector<double>>> values;  // metric -> [s][t]
    std::map<std::string, std::vector<std::vector<double>>> gaps;

    nlohmann::json to_json() const;
};

struct NamedDataset {
    std::string name;
    const FingerprintMatrix* data;
};

// Diagonal cells use the grouped-CV mean; off-diagonal cells train on the whole source.
// Throws HashMismatch when datasets differ in panel, segmentation or feature set.
GapMatrix run_cross_domain(const std::vector<NamedDataset>& datasets, ModelKind kind, const Hyper& hyper,
                           const CvOptions& opt);

struct ShuffleReport {
    double shuffled_accuracy = 0.0;
    double control_accuracy = 0.0;
    double chance = 0.0;
    double band_lo = 0.0;
    double band_hi = 0.0;
    bool pass = false;

    nlohmann::json to_json() const;
};
ShuffleReport sanity_label_shuffle(const FingerprintMatrix& data, ModelKind kind, const Hyper& hyper,
                                   const CvOptions& opt);

struct EdgeRefitReport {
    double fixed_accuracy = 0.0;
    double refit_accuracy = 0.0;
    double difference = 0.0;
    bool pass = false;
    std::vector<double> fixed_edges;
    std::vector<std::vector<double>> refit_edges;  // one per fold
    std::vector<std::string> refit_fitted_on;     // fold hash of the training rows behind each edge set

    nlohmann::json to_json() const;
};
// Pools the calibrated scores of the training rows and places K-1 interior edges at their quantiles.
std::vector<double> quantile_edges(const ScoreTable& table, const std::vector<std::size_t>& rows, std::size_t K);
EdgeRefitReport sanity_bin_edge_refit(const ScoreTable& table, const SegmentationConfig& cfg,
                                      const std::vector<std::string>& column_names, ModelKind kind,
                                      const Hyper& hyper, const CvOptions& opt);

struct LocoReport {
    std::vector<std::string> class_names;
    std::vector<double> seen_accuracy;                 // accuracy on the remaining classes
    std::vector<std::vector<double>> heldout_spread;  // where the held-out class is predicted

    nlohmann::json to_json() const;
};
LocoReport sanity_leave_one_cipher_out(const FingerprintMatrix& data, ModelKind kind, const Hyper& hyper,
                                       const CvOptions& opt, const std::vector<std::string>& class_names);

struct SeparabilityReport {
    double bhattacharyya_full = 0.0;
    VectorXd lda_axis;
    double lda_separation = 0.0;
    std::pair<int, int> most_confusable{0, 1};
    std::vector<std::vector<double>> pairwise_full;
    std::vector<std::vector<double>> pairwise_lda;

    nlohmann::json to_json() const;
};
inline constexpr double kShrinkage = 0.1;
double bhattacharyya_gaussian(const VectorXd& mu1, const MatrixXd& S1, const VectorXd& mu2, const MatrixXd& S2);
// (1 - alpha) S + alpha * (trace(S) / d) I
MatrixXd shrink_covariance(const MatrixXd& S, double alpha = kShrinkage);
SeparabilityReport separability_analysis(const MatrixXd& X, const std::vector<int>& y);

struct DistributionCurves {
    std::string column;
    std::vector<double> edges;
    std::vector<std::string> class_names;
    // [class] -> list of (source id, per-bin fractions)
    std::vector<std::vector<std::pair<std::string, std::vector<double>>>> seed_curves;
    std::vector<std::vector<double>> mean_curves;  // pointwise mean of each class's seed curves

    std::string to_csv() const;
};
// Throws ConfigError for an unknown column.
DistributionCurves export_distribution_fingerprint(const ScoreTable& table, const std::string& column,
                                                   const std::vector<std::string>& column_names,
                                                   const std::vector<std::string>& class_names, std::size_t K = 10);

}  // namespace cipherprint
