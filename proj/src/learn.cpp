#include "cipherprint/learn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>

#include "cipherprint/artifacts.hpp"
#include "cipherprint/cryptobox.hpp"

namespace cipherprint {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

namespace {

constexpr std::string_view kModelMagic = "CPMODEL1";

int check_inputs(const MatrixXd& X, const std::vector<int>& y, const Hyper& h) {
    if (X.rows() == 0) throw std::invalid_argument("training set is empty");
    if (static_cast<std::size_t>(X.rows()) != y.size()) {
        throw std::invalid_argument("dimension mismatch: " + std::to_string(X.rows()) + " rows vs " +
                                    std::to_string(y.size()) + " labels");
    }
    if (!X.allFinite()) throw std::invalid_argument("non-finite feature value");
    const int ymax = *std::max_element(y.begin(), y.end());
    const int ymin = *std::min_element(y.begin(), y.end());
    const int C = h.n_classes > 0 ? h.n_classes : ymax + 1;
    if (ymin < 0 || ymax >= C) throw std::invalid_argument("label outside [0, n_classes)");
    return std::max(C, 2);
}

void check_dim(const Model& m, const MatrixXd& X) {
    if (X.cols() != m.input_dim()) {
        throw std::invalid_argument("dimension mismatch: model expects " + std::to_string(m.input_dim()) +
                                    " features, got " + std::to_string(X.cols()));
    }
}

MatrixXd one_hot(const std::vector<int>& y, int C) {
    MatrixXd Y = MatrixXd::Zero(static_cast<Eigen::Index>(y.size()), C);
    for (std::size_t i = 0; i < y.size(); ++i) Y(static_cast<Eigen::Index>(i), y[i]) = 1.0;
    return Y;
}

// Row-wise softmax of logits, in place.
void softmax_rows(MatrixXd& Z) {
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        const double mx = Z.row(i).maxCoeff();
        Z.row(i) = (Z.row(i).array() - mx).exp();
        Z.row(i) /= Z.row(i).sum();
    }
}

// Mean cross-entropy from logits, using log-sum-exp.
double cross_entropy(const MatrixXd& logits, const std::vector<int>& y) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
        total += lse - logits(i, y[static_cast<std::size_t>(i)]);
    }
    return total / static_cast<double>(logits.rows());
}

MatrixXd linear_logits(const MatrixXd& W, const VectorXd& b, const MatrixXd& X) {
    MatrixXd Z = X * W.transpose();
    Z.rowwise() += b.transpose();
    return Z;
}

Seed seed_of(std::uint64_t seed, std::string_view purpose) {
    const auto h = sha256(as_bytes("cipherprint.learn|" + std::string(purpose) + "|" + std::to_string(seed)));
    Seed s{};
    std::copy(h.begin(), h.end(), s.begin());
    return s;
}

double gaussian(KeyedStream& rng) {
    const double u1 = 1.0 - rng.uniform();
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

struct MlpForward {
    MatrixXd Z1;
    MatrixXd A;
    MatrixXd logits;
};

MlpForward mlp_forward(const Model& m, const MatrixXd& X) {
    MlpForward f;
    f.Z1 = linear_logits(m.W1, m.b1, X);
    f.A = f.Z1.cwiseMax(0.0);
    f.logits = linear_logits(m.W, m.b, f.A);
    return f;
}

// Gradient of the mean cross-entropy plus L2 over the rows of X.
void mlp_batch_gradient(const Model& m, const MatrixXd& X, const std::vector<int>& y, Model& g) {
    const auto f = mlp_forward(m, X);
    MatrixXd G = f.logits;
    softmax_rows(G);
    G -= one_hot(y, m.n_classes);
    G /= static_cast<double>(X.rows());
    const double lam2 = 2.0 * m.hyper.lambda;
    g.W = G.transpose() * f.A + lam2 * m.W;
    g.b = G.colwise().sum().transpose();
    MatrixXd dZ1 = (G * m.W).cwiseProduct((f.Z1.array() > 0.0).cast<double>().matrix());
    g.W1 = dZ1.transpose() * X + lam2 * m.W1;
    g.b1 = dZ1.colwise().sum().transpose();
}

}  // namespace

std::string fold_hash(std::vector<std::size_t> train_rows) {
    std::sort(train_rows.begin(), train_rows.end());
    std::string text;
    for (auto r : train_rows) text += std::to_string(r) + ",";
    return sha256_hex(text);
}

MatrixXd Standardizer::apply(const MatrixXd& X) const {
    if (X.cols() != mean.size()) throw std::invalid_argument("standardizer: dimension mismatch");
    MatrixXd out = X.rowwise() - mean.transpose();
    out.array().rowwise() /= sd.transpose().array();
    return out;
}

Standardizer fit_standardizer(const MatrixXd& X_train, std::string fitted_on) {
    if (X_train.rows() == 0 || X_train.cols() == 0) throw std::invalid_argument("fit_standardizer: empty input");
    Standardizer s;
    s.mean = X_train.colwise().mean().transpose();
    const MatrixXd centered = X_train.rowwise() - s.mean.transpose();
    s.sd = (centered.array().square().colwise().sum() / static_cast<double>(X_train.rows())).sqrt().transpose();
    s.sd = s.sd.cwiseMax(kSigmaFloor);
    s.fitted_on = std::move(fitted_on);
    return s;
}

std::string_view model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::LogReg: return "logreg";
        case ModelKind::LinearSVM: return "svm_linear";
        case ModelKind::MLP: return "mlp";
    }
    return "?";
}

ModelKind model_kind_from_name(std::string_view name) {
    for (auto k : all_model_kinds()) {
        if (model_kind_name(k) == name) return k;
    }
    if (name == "svm" || name == "linear_svm") return ModelKind::LinearSVM;
    throw ConfigError("unknown model: " + std::string(name));
}

const std::vector<ModelKind>& all_model_kinds() {
    static const std::vector<ModelKind> all = {ModelKind::LogReg, ModelKind::LinearSVM, ModelKind::MLP};
    return all;
}

Hyper Hyper::defaults(ModelKind k) {
    Hyper h;
    switch (k) {
        case ModelKind::LogReg: break;
        case ModelKind::LinearSVM: h.lr = 0.0; break;  // step size follows 1 / (lambda t)
        case ModelKind::MLP:
            h.lr = 0.05;
            h.epochs = 60;
            break;
    }
    return h;
}

nlohmann::json Hyper::to_json() const {
    return {{"lambda", lambda}, {"lr", lr},       {"epochs", epochs},       {"hidden", hidden},
            {"batch", batch},   {"seed", seed},   {"n_classes", n_classes}};
}

Hyper Hyper::from_json(const nlohmann::json& j) {
    Hyper h;
    h.lambda = j.value("lambda", h.lambda);
    h.lr = j.value("lr", h.lr);
    h.epochs = j.value("epochs", h.epochs);
    h.hidden = j.value("hidden", h.hidden);
    h.batch = j.value("batch", h.batch);
    h.seed = j.value("seed", h.seed);
    h.n_classes = j.value("n_classes", h.n_classes);
    if (h.lambda < 0 || h.epochs < 1 || h.hidden < 1 || h.batch < 1) throw ConfigError("invalid hyperparameters");
    return h;
}

double logreg_objective(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, const std::vector<int>& y,
                        double lambda) {
    return cross_entropy(linear_logits(W, b, X), y) + lambda * W.squaredNorm();
}

void logreg_gradient(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, const std::vector<int>& y,
                     double lambda, MatrixXd& gW, VectorXd& gb) {
    MatrixXd G = linear_logits(W, b, X);
    softmax_rows(G);
    G -= one_hot(y, static_cast<int>(W.rows()));
    G /= static_cast<double>(X.rows());
    gW = G.transpose() * X + 2.0 * lambda * W;
    gb = G.colwise().sum().transpose();
}

Model train_logreg(const MatrixXd& X, const std::vector<int>& y, const Hyper& h) {
    Model m;
    m.kind = ModelKind::LogReg;
    m.hyper = h;
    m.n_classes = check_inputs(X, y, h);
    m.W = MatrixXd::Zero(m.n_classes, X.cols());
    m.b = VectorXd::Zero(m.n_classes);
    MatrixXd gW;
    VectorXd gb;
    // Gradient step on the data term, then the exact proximal step of the L2 term. This is
    // stable for any lambda, where a plain step would diverge once lr * lambda is large.
    const double shrink = 1.0 / (1.0 + 2.0 * h.lr * h.lambda);
    for (int epoch = 0; epoch < h.epochs; ++epoch) {
        logreg_gradient(m.W, m.b, X, y, 0.0, gW, gb);
        m.W = (m.W - h.lr * gW) * shrink;
        m.b -= h.lr * gb;
        m.loss_trace.push_back(logreg_objective(m.W, m.b, X, y, h.lambda));
    }
    return m;
}

double svm_objective(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, const std::vector<int>& y,
                     double lambda) {
    const MatrixXd margins = linear_logits(W, b, X);
    double total = 0.0;
    for (Eigen::Index c = 0; c < W.rows(); ++c) {
        double hinge = 0.0;
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            const double t = y[static_cast<std::size_t>(i)] == c ? 1.0 : -1.0;
            hinge += std::max(0.0, 1.0 - t * margins(i, c));
        }
        total += 0.5 * lambda * (W.row(c).squaredNorm() + b(c) * b(c)) + hinge / static_cast<double>(X.rows());
    }
    return total;
}

Model train_linear_svm(const MatrixXd& X, const std::vector<int>& y, const Hyper& h) {
    Model m;
    m.kind = ModelKind::LinearSVM;
    m.hyper = h;
    m.n_classes = check_inputs(X, y, h);
    if (h.lambda <= 0) throw std::invalid_argument("svm needs lambda > 0");
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    m.W = MatrixXd::Zero(m.n_classes, d);
    m.b = VectorXd::Zero(m.n_classes);
    std::vector<std::vector<double>> head_trace(static_cast<std::size_t>(m.n_classes));
    // Full-batch Pegasos per head. The bias is an extra coordinate on a constant feature.
    // The returned weights are the best averaged iterate seen so far, so the recorded
    // objective never increases.
    for (int c = 0; c < m.n_classes; ++c) {
        VectorXd t(n);
        for (Eigen::Index i = 0; i < n; ++i) t(i) = y[static_cast<std::size_t>(i)] == c ? 1.0 : -1.0;
        VectorXd w = VectorXd::Zero(d);
        double bias = 0.0;
        VectorXd w_sum = VectorXd::Zero(d);
        double b_sum = 0.0;
        VectorXd best_w = w;
        double best_b = 0.0;
        auto head_obj = [&](const VectorXd& ww, double bb) {
            const VectorXd marg = (X * ww).array() + bb;
            const double hinge = (1.0 - t.array() * marg.array()).max(0.0).sum() / static_cast<double>(n);
            return 0.5 * h.lambda * (ww.squaredNorm() + bb * bb) + hinge;
        };
        double best = head_obj(w, bias);
        const double radius = 1.0 / std::sqrt(h.lambda);
        for (int epoch = 1; epoch <= h.epochs; ++epoch) {
            const double eta = 1.0 / (h.lambda * epoch);
            const VectorXd marg = (X * w).array() + bias;
            VectorXd coef = VectorXd::Zero(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                if (t(i) * marg(i) < 1.0) coef(i) = t(i);
            }
            const VectorXd gw = h.lambda * w - X.transpose() * coef / static_cast<double>(n);
            const double gb = h.lambda * bias - coef.sum() / static_cast<double>(n);
            w -= eta * gw;
            bias -= eta * gb;
            const double norm = std::sqrt(w.squaredNorm() + bias * bias);
            if (norm > radius) {
                w *= radius / norm;
                bias *= radius / norm;
            }
            w_sum += w;
            b_sum += bias;
            const VectorXd w_avg = w_sum / epoch;
            const double b_avg = b_sum / epoch;
            const double obj = head_obj(w_avg, b_avg);
            if (obj < best) {
                best = obj;
                best_w = w_avg;
                best_b = b_avg;
            }
            head_trace[static_cast<std::size_t>(c)].push_back(best);
        }
        m.W.row(c) = best_w.transpose();
        m.b(c) = best_b;
    }
    for (int epoch = 0; epoch < h.epochs; ++epoch) {
        double total = 0.0;
        for (const auto& tr : head_trace) total += tr[static_cast<std::size_t>(epoch)];
        m.loss_trace.push_back(total);
    }
    return m;
}

double mlp_objective(const Model& m, const MatrixXd& X, const std::vector<int>& y) {
    const auto f = mlp_forward(m, X);
    return cross_entropy(f.logits, y) + m.hyper.lambda * (m.W1.squaredNorm() + m.W.squaredNorm());
}

void mlp_gradient(const Model& m, const MatrixXd& X, const std::vector<int>& y, Model& grad) {
    mlp_batch_gradient(m, X, y, grad);
}

Model train_mlp(const MatrixXd& X, const std::vector<int>& y, const Hyper& h) {
    Model m;
    m.kind = ModelKind::MLP;
    m.hyper = h;
    m.n_classes = check_inputs(X, y, h);
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    KeyedStream init(seed_of(h.seed, "mlp-init"), "weights");
    m.W1.resize(h.hidden, d);
    const double s1 = std::sqrt(2.0 / static_cast<double>(d));
    for (Eigen::Index i = 0; i < m.W1.size(); ++i) m.W1.data()[i] = s1 * gaussian(init);
    m.b1 = VectorXd::Zero(h.hidden);
    m.W.resize(m.n_classes, h.hidden);
    const double s2 = std::sqrt(1.0 / static_cast<double>(h.hidden));
    for (Eigen::Index i = 0; i < m.W.size(); ++i) m.W.data()[i] = s2 * gaussian(init);
    m.b = VectorXd::Zero(m.n_classes);

    KeyedStream shuffle(seed_of(h.seed, "mlp-shuffle"), "order");
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    Model g;
    MatrixXd Xb;
    std::vector<int> yb;
    for (int epoch = 0; epoch < h.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(h.batch)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(h.batch));
            Xb.resize(static_cast<Eigen::Index>(stop - start), d);
            yb.assign(stop - start, 0);
            for (std::size_t k = start; k < stop; ++k) {
                Xb.row(static_cast<Eigen::Index>(k - start)) = X.row(order[k]);
                yb[k - start] = y[static_cast<std::size_t>(order[k])];
            }
            mlp_batch_gradient(m, Xb, yb, g);
            m.W1 -= h.lr * g.W1;
            m.b1 -= h.lr * g.b1;
            m.W -= h.lr * g.W;
            m.b -= h.lr * g.b;
        }
        m.loss_trace.push_back(mlp_objective(m, X, y));
    }
    return m;
}

Model train_model(ModelKind kind, const MatrixXd& X, const std::vector<int>& y, const Hyper& h) {
    switch (kind) {
        case ModelKind::LogReg: return train_logreg(X, y, h);
        case ModelKind::LinearSVM: return train_linear_svm(X, y, h);
        case ModelKind::MLP: return train_mlp(X, y, h);
    }
    throw std::logic_error("unknown model kind");
}

MatrixXd predict_scores(const Model& m, const MatrixXd& X) {
    check_dim(m, X);
    if (m.kind == ModelKind::LinearSVM) return linear_logits(m.W, m.b, X);
    MatrixXd Z = m.kind == ModelKind::MLP ? mlp_forward(m, X).logits : linear_logits(m.W, m.b, X);
    softmax_rows(Z);
    return Z;
}

std::vector<int> predict_labels(const Model& m, const MatrixXd& X) {
    const MatrixXd S = predict_scores(m, X);
    std::vector<int> out(static_cast<std::size_t>(S.rows()));
    for (Eigen::Index i = 0; i < S.rows(); ++i) {
        Eigen::Index arg = 0;
        S.row(i).maxCoeff(&arg);
        out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
}

void save_pipeline(const TrainedPipeline& p, const std::filesystem::path& path) {
    const Model& m = p.model;
    nlohmann::json shapes = nlohmann::json::array();
    std::vector<double> payload;
    // Matrices are stored row-major so the file layout does not depend on Eigen's storage order.
    auto add = [&](const char* name, const MatrixXd& M) {
        shapes.push_back({{"name", name}, {"rows", M.rows()}, {"cols", M.cols()}});
        for (Eigen::Index r = 0; r < M.rows(); ++r) {
            for (Eigen::Index c = 0; c < M.cols(); ++c) payload.push_back(M(r, c));
        }
    };
    add("std_mean", p.standardizer.mean);
    add("std_sd", p.standardizer.sd);
    add("W1", m.W1);
    add("b1", m.b1);
    add("W", m.W);
    add("b", m.b);
    nlohmann::json header = {
        {"format", "cipherprint.model.v1"},
        {"kind", model_kind_name(m.kind)},
        {"hyper", m.hyper.to_json()},
        {"n_classes", m.n_classes},
        {"feature_set", p.feature_set},
        {"panel_version", p.panel_version},
        {"config_hash", p.config_hash},
        {"standardizer_fitted_on", p.standardizer.fitted_on},
        {"final_loss", m.loss_trace.empty() ? 0.0 : m.loss_trace.back()},
        {"loss_trace", m.loss_trace},
        {"shapes", shapes},
    };
    write_blob(path, kModelMagic, header, payload);
}

TrainedPipeline load_pipeline(const std::filesystem::path& path, const std::string& expected_panel_version,
                              const std::string& expected_config_hash) {
    const Blob blob = read_blob(path, kModelMagic);
    const auto& h = blob.header;
    if (h.at("panel_version") != expected_panel_version) {
        throw HashMismatch("model " + path.string() + " was trained under panel " +
                           h.at("panel_version").get<std::string>() + ", expected " + expected_panel_version);
    }
    if (h.at("config_hash") != expected_config_hash) {
        throw HashMismatch("model " + path.string() + " was trained under config " +
                           h.at("config_hash").get<std::string>() + ", expected " + expected_config_hash);
    }
    TrainedPipeline p;
    p.feature_set = h.at("feature_set");
    p.panel_version = h.at("panel_version");
    p.config_hash = h.at("config_hash");
    p.standardizer.fitted_on = h.at("standardizer_fitted_on");
    Model& m = p.model;
    m.kind = model_kind_from_name(h.at("kind").get<std::string>());
    m.hyper = Hyper::from_json(h.at("hyper"));
    m.n_classes = h.at("n_classes");
    m.loss_trace = h.at("loss_trace").get<std::vector<double>>();
    std::size_t pos = 0;
    auto take = [&](MatrixXd& M, const nlohmann::json& shape) {
        const Eigen::Index r = shape.at("rows"), c = shape.at("cols");
        if (pos + static_cast<std::size_t>(r * c) > blob.payload.size()) throw HashMismatch("model payload truncated");
        M.resize(r, c);
        for (Eigen::Index i = 0; i < r; ++i) {
            for (Eigen::Index j = 0; j < c; ++j) M(i, j) = blob.payload[pos++];
        }
    };
    const auto& shapes = h.at("shapes");
    MatrixXd tmp;
    take(tmp, shapes.at(0));
    p.standardizer.mean = tmp.col(0);
    take(tmp, shapes.at(1));
    p.standardizer.sd = tmp.col(0);
    take(m.W1, shapes.at(2));
    take(tmp, shapes.at(3));
    m.b1 = tmp.cols() ? VectorXd(tmp.col(0)) : VectorXd();
    take(m.W, shapes.at(4));
    take(tmp, shapes.at(5));
    m.b = tmp.col(0);
    return p;
}

}  // namespace cipherprint
