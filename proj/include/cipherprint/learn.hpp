#pragma once
// Train-split standardization and the three classifiers: softmax regression, one-vs-rest
// linear SVM and a one-hidden-layer MLP.

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cipherprint/common.hpp"

namespace cipherprint {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kSigmaFloor = 1e-8;

// Hash of a set of training row ids (sorted), used to tie fitted state to its split.
std::string fold_hash(std::vector<std::size_t> train_rows);

struct Standardizer {
    VectorXd mean;
    VectorXd sd;
    std::string fitted_on;  // fold hash of the training rows

    MatrixXd apply(const MatrixXd& X) const;
};

// Throws std::invalid_argument on empty input.
Standardizer fit_standardizer(const MatrixXd& X_train, std::string fitted_on = "");

enum class ModelKind { LogReg, LinearSVM, MLP };
std::string_view model_kind_name(ModelKind k);
ModelKind model_kind_from_name(std::string_view name);  // throws ConfigError
const std::vector<ModelKind>& all_model_kinds();

struct Hyper {
    double lambda = 1e-4;
    double lr = 0.1;
    int epochs = 500;
    int hidden = 128;
    int batch = 64;
    std::uint64_t seed = 0;
    int n_classes = 0;  // 0 means max(y) + 1

    static Hyper defaults(ModelKind k);
    nlohmann::json to_json() const;
    static Hyper from_json(const nlohmann::json& j);
};

struct Model {
    ModelKind kind = ModelKind::LogReg;
    Hyper hyper;
    int n_classes = 0;
    // LogReg and SVM use W (classes x dim) and b. The MLP uses W1 (hidden x dim), b1,
    // W (classes x hidden) and b.
    MatrixXd W1;
    VectorXd b1;
    MatrixXd W;
    VectorXd b;
    std::vector<double> loss_trace;

    Eigen::Index input_dim() const { return kind == ModelKind::MLP ? W1.cols() : W.cols(); }
};

Model train_logreg(const MatrixXd& X, const std::vector<int>& y, const Hyper& h = Hyper::defaults(ModelKind::LogReg));
Model train_linear_svm(const MatrixXd& X, const std::vector<int>& y,
                       const Hyper& h = Hyper::defaults(ModelKind::LinearSVM));
Model train_mlp(const MatrixXd& X, const std::vector<int>& y, const Hyper& h = Hyper::defaults(ModelKind::MLP));
Model train_model(ModelKind kind, const MatrixXd& X, const std::vector<int>& y, const Hyper& h);

// Softmax probabilities for LogReg and MLP, raw margins for the SVM.
MatrixXd predict_scores(const Model& m, const MatrixXd& X);
std::vector<int> predict_labels(const Model& m, const MatrixXd& X);

// Objectives and analytic gradients, exposed for finite-difference checks.
// LogReg: mean cross-entropy + lambda * ||W||^2 (bias unregularized).
double logreg_objective(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, const std::vector<int>& y,
                        double lambda);
void logreg_gradient(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, const std::vector<int>& y,
                     double lambda, MatrixXd& gW, VectorXd& gb);
// MLP: mean cross-entropy + lambda * (||W1||^2 + ||W||^2).
double mlp_objective(const Model& m, const MatrixXd& X, const std::vector<int>& y);
void mlp_gradient(const Model& m, const MatrixXd& X, const std::vector<int>& y, Model& grad);
// SVM one-vs-rest primal: sum over heads of lambda/2 ||w||^2 + mean hinge.
double svm_objective(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, const std::vector<int>& y,
                     double lambda);

// A trained model together with the standardizer and the provenance it was fitted under.
struct TrainedPipeline {
    Standardizer standardizer;
    Model model;
    std::string feature_set;
    std::string panel_version;
    std::string config_hash;

    MatrixXd scores(const MatrixXd& X_raw) const { return predict_scores(model, standardizer.apply(X_raw)); }
};

// Binary model file: magic, JSON header length, JSON header, little-endian doubles.
void save_pipeline(const TrainedPipeline& p, const std::filesystem::path& path);
// Throws HashMismatch when the stored panel version or config hash differs from the expected one.
TrainedPipeline load_pipeline(const std::filesystem::path& path, const std::string& expected_panel_version,
                              const std::string& expected_config_hash);

}  // namespace cipherprint
