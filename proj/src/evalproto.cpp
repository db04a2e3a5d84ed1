#include "cipherprint/evalproto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include <Eigen/Eigenvalues>

#include "cipherprint/artifacts.hpp"
#include "cipherprint/cryptobox.hpp"

namespace cipherprint {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Seed seed_from_u64(std::uint64_t seed, std::string_view purpose) {
    const auto h = sha256(as_bytes("cipherprint.eval|" + std::string(purpose) + "|" + std::to_string(seed)));
    Seed s{};
    std::copy(h.begin(), h.end(), s.begin());
    return s;
}

template <class T>
void shuffle_in_place(std::vector<T>& v, KeyedStream& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

nlohmann::json nan_to_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

nlohmann::json matrix_json(const std::vector<std::vector<double>>& m) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& row : m) {
        nlohmann::json r = nlohmann::json::array();
        for (double v : row) r.push_back(nan_to_null(v));
        out.push_back(r);
    }
    return out;
}

std::vector<int> mapped_labels(const FingerprintMatrix& data, const std::vector<int>& label_map) {
    std::vector<int> y = data.labels;
    if (!label_map.empty()) {
        for (int& v : y) {
            if (v < 0 || static_cast<std::size_t>(v) >= label_map.size()) throw ConfigError("label_map does not cover label");
            v = label_map[static_cast<std::size_t>(v)];
        }
    }
    return y;
}

int class_count(const std::vector<int>& y) { return std::max(2, *std::max_element(y.begin(), y.end()) + 1); }

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::size_t purged = 0;
};

Split fold_split(const FingerprintMatrix& data, const FoldPlan& plan,
                 const std::unordered_map<std::string, std::size_t>& group_index, int repeat, int fold,
                 std::size_t rho) {
    Split s;
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const int f = plan.assignment[static_cast<std::size_t>(repeat)][group_index.at(data.groups[i])];
        (f == fold ? s.test : train).push_back(i);
    }
    auto pr = purge_training(train, s.test, data.sources, data.window_index, rho);
    s.train = std::move(pr.kept);
    s.purged = pr.purged;
    return s;
}

MatrixXd take_rows(const MatrixXd& X, const std::vector<std::size_t>& idx) {
    MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(idx[i]));
    return out;
}

template <class T>
std::vector<T> take(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(v[i]);
    return out;
}

// Fit on train rows only, score the test rows.
MetricsReport fit_and_score(const MatrixXd& X, const std::vector<int>& y, const Split& split, ModelKind kind,
                            Hyper hyper, int C, std::optional<Seed> shuffle_seed) {
    std::vector<std::size_t> overlap;
    std::set_intersection(split.train.begin(), split.train.end(), split.test.begin(), split.test.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty()) throw std::logic_error("train and test splits overlap");
    if (split.train.empty() || split.test.empty()) throw ConfigError("empty train or test split");
    const std::string fh = fold_hash(split.train);
    const Standardizer st = fit_standardizer(take_rows(X, split.train), fh);
    std::vector<int> ytrain = take(y, split.train);
    if (shuffle_seed) {
        KeyedStream rng(*shuffle_seed, "train-label-shuffle");
        shuffle_in_place(ytrain, rng);
    }
    hyper.n_classes = C;
    const Model m = train_model(kind, st.apply(take_rows(X, split.train)), ytrain, hyper);
    if (st.fitted_on != fold_hash(split.train)) throw std::logic_error("standardizer was fitted on a different split");
    const MatrixXd scores = predict_scores(m, st.apply(take_rows(X, split.test)));
    MetricsReport r = evaluate_predictions(take(y, split.test), scores, C);
    r.n_train = split.train.size();
    r.n_test = split.test.size();
    r.n_purged = split.purged;
    return r;
}

MetricsReport mean_report(const std::vector<MetricsReport>& folds) {
    MetricsReport m;
    if (folds.empty()) return m;
    const std::size_t C = folds.front().precision.size();
    m.precision.assign(C, 0.0);
    m.recall.assign(C, 0.0);
    for (const auto& f : folds) {
        m.accuracy += f.accuracy;
        m.macro_f1 += f.macro_f1;
        m.macro_auc += f.macro_auc;
        for (std::size_t c = 0; c < C; ++c) {
            m.precision[c] += f.precision[c];
            m.recall[c] += f.recall[c];
        }
        m.n_train += f.n_train;
        m.n_test += f.n_test;
        m.n_purged += f.n_purged;
    }
    const double n = static_cast<double>(folds.size());
    m.accuracy /= n;
    m.macro_f1 /= n;
    m.macro_auc /= n;
    for (std::size_t c = 0; c < C; ++c) {
        m.precision[c] /= n;
        m.recall[c] /= n;
    }
    return m;
}

std::unordered_map<std::string, std::size_t> index_groups(const FoldPlan& plan) {
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t g = 0; g < plan.groups.size(); ++g) idx[plan.groups[g]] = g;
    return idx;
}

double log_det_spd(const MatrixXd& S) {
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw std::runtime_error("singular covariance even after shrinkage");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

int FoldPlan::fold_of(int repeat, const std::string& group) const {
    const auto it = std::lower_bound(groups.begin(), groups.end(), group);
    if (it == groups.end() || *it != group) throw std::out_of_range("unknown group " + group);
    return assignment.at(static_cast<std::size_t>(repeat))[static_cast<std::size_t>(it - groups.begin())];
}

nlohmann::json FoldPlan::to_json() const {
    return {{"repeats", repeats},     {"folds", folds},         {"purge_radius", purge_radius},
            {"seed", seed},           {"groups", groups},       {"group_label", group_label},
            {"assignment", assignment}, {"max_class_imbalance", max_class_imbalance}};
}

FoldPlan plan_folds(const std::vector<std::string>& groups, const std::vector<int>& labels, int k, int repeats,
                    std::uint64_t seed, std::size_t purge_radius) {
    if (groups.size() != labels.size()) throw std::invalid_argument("plan_folds: groups and labels differ in length");
    if (k < 2 || repeats < 1) throw ConfigError("plan_folds needs k >= 2 and repeats >= 1");
    std::map<std::string, int> label_of;
    std::map<std::string, std::size_t> size_of;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        auto [it, fresh] = label_of.emplace(groups[i], labels[i]);
        if (!fresh && it->second != labels[i]) throw ConfigError("group " + groups[i] + " carries two labels");
        ++size_of[groups[i]];
    }
    FoldPlan plan;
    plan.repeats = repeats;
    plan.folds = k;
    plan.purge_radius = purge_radius;
    plan.seed = seed;
    std::map<int, std::vector<std::size_t>> by_class;
    for (const auto& [g, lab] : label_of) {
        by_class[lab].push_back(plan.groups.size());
        plan.groups.push_back(g);
        plan.group_label.push_back(lab);
    }
    for (const auto& [lab, members] : by_class) {
        if (members.size() < static_cast<std::size_t>(k)) {
            throw ConfigError("too few groups: class " + std::to_string(lab) + " has " + std::to_string(members.size()) +
                              " groups, need at least " + std::to_string(k));
        }
    }
    const Seed base = seed_from_u64(seed, "fold-plan");
    for (int r = 0; r < repeats; ++r) {
        KeyedStream rng(base, "repeat/" + std::to_string(r));
        std::vector<int> assign(plan.groups.size(), -1);
        std::vector<std::size_t> total(static_cast<std::size_t>(k), 0);
        for (const auto& [lab, members] : by_class) {
            std::vector<std::size_t> order = members;
            shuffle_in_place(order, rng);
            std::vector<int> per_fold(static_cast<std::size_t>(k), 0);
            for (auto g : order) {
                std::size_t best = 0;
                for (std::size_t f = 1; f < per_fold.size(); ++f) {
                    if (std::tie(per_fold[f], total[f]) < std::tie(per_fold[best], total[best])) best = f;
                }
                assign[g] = static_cast<int>(best);
                ++per_fold[best];
                total[best] += size_of[plan.groups[g]];
            }
            const auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end());
            plan.max_class_imbalance = std::max(plan.max_class_imbalance, *hi - *lo);
        }
        plan.assignment.push_back(std::move(assign));
    }
    return plan;
}

PurgeResult purge_training(const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
                           const std::vector<std::string>& sources, const std::vector<std::size_t>& window_index,
                           std::size_t rho) {
    std::unordered_map<std::string, std::vector<std::size_t>> test_windows;
    for (auto i : test) test_windows[sources[i]].push_back(window_index[i]);
    PurgeResult r;
    for (auto i : train) {
        bool drop = false;
        const auto it = test_windows.find(sources[i]);
        if (it != test_windows.end()) {
            for (auto w : it->second) {
                const std::size_t d = w > window_index[i] ? w - window_index[i] : window_index[i] - w;
                if (d <= rho) {
                    drop = true;
                    break;
                }
            }
        }
        if (drop) {
            ++r.purged;
        } else {
            r.kept.push_back(i);
        }
    }
    return r;
}

double accuracy(const std::vector<int>& y, const std::vector<int>& pred) {
    if (y.empty() || y.size() != pred.size()) throw std::invalid_argument("accuracy: empty or misaligned input");
    std::size_t hit = 0;
    for (std::size_t i = 0; i < y.size(); ++i) hit += y[i] == pred[i];
    return static_cast<double>(hit) / static_cast<double>(y.size());
}

double macro_f1(const std::vector<int>& y, const std::vector<int>& pred, int n_classes) {
    if (y.empty() || y.size() != pred.size()) throw std::invalid_argument("macro_f1: empty or misaligned input");
    if (n_classes <= 0) {
        n_classes = 1 + std::max(*std::max_element(y.begin(), y.end()), *std::max_element(pred.begin(), pred.end()));
    }
    double total = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        std::size_t tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            tp += y[i] == c && pred[i] == c;
            fp += y[i] != c && pred[i] == c;
            fn += y[i] == c && pred[i] != c;
        }
        if (tp > 0) total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }
    return total / n_classes;
}

double binary_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
        i = j + 1;
    }
    double rank_sum = 0.0;
    std::size_t np = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (positive[i]) {
            rank_sum += rank[i];
            ++np;
        }
    }
    const std::size_t nn = n - np;
    if (np == 0 || nn == 0) return kNaN;
    const double u = rank_sum - 0.5 * static_cast<double>(np) * static_cast<double>(np + 1);
    return u / (static_cast<double>(np) * static_cast<double>(nn));
}

AucResult macro_auc(const std::vector<int>& y, const MatrixXd& scores) {
    if (y.empty() || static_cast<std::size_t>(scores.rows()) != y.size()) {
        throw std::invalid_argument("macro_auc: empty or misaligned input");
    }
    AucResult r;
    double total = 0.0;
    int used = 0;
    std::vector<double> col(y.size());
    std::vector<bool> pos(y.size());
    for (Eigen::Index c = 0; c < scores.cols(); ++c) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            col[i] = scores(static_cast<Eigen::Index>(i), c);
            pos[i] = y[i] == c;
        }
        const double a = binary_auc(col, pos);
        r.per_class.push_back(a);
        if (std::isnan(a)) {
            r.skipped.push_back(static_cast<int>(c));
        } else {
            total += a;
            ++used;
        }
    }
    if (used == 0) throw std::invalid_argument("macro_auc: no class has both positives and negatives");
    r.macro = total / used;
    return r;
}

double generalization_gap(double m_ss, double m_st) {
    if (!(m_ss > 0.0)) throw std::invalid_argument("generalization_gap: in-domain metric must be positive");
    return (m_ss - m_st) / m_ss * 100.0;
}

nlohmann::json MetricsReport::to_json() const {
    return {{"accuracy", accuracy}, {"macro_f1", macro_f1}, {"macro_auc", nan_to_null(macro_auc)},
            {"precision", precision}, {"recall", recall}, {"auc_skipped_classes", auc_skipped},
            {"n_train", n_train}, {"n_test", n_test}, {"n_purged", n_purged}};
}

MetricsReport evaluate_predictions(const std::vector<int>& y, const MatrixXd& scores, int n_classes) {
    std::vector<int> pred(y.size());
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        Eigen::Index arg = 0;
        scores.row(i).maxCoeff(&arg);
        pred[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    MetricsReport r;
    r.accuracy = accuracy(y, pred);
    r.macro_f1 = macro_f1(y, pred, n_classes);
    const auto auc = macro_auc(y, scores);
    r.macro_auc = auc.macro;
    r.auc_skipped = auc.skipped;
    for (int c = 0; c < n_classes; ++c) {
        std::size_t tp = 0, pp = 0, ap = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            tp += y[i] == c && pred[i] == c;
            pp += pred[i] == c;
            ap += y[i] == c;
        }
        r.precision.push_back(pp ? static_cast<double>(tp) / static_cast<double>(pp) : 0.0);
        r.recall.push_back(ap ? static_cast<double>(tp) / static_cast<double>(ap) : 0.0);
    }
    r.n_test = y.size();
    return r;
}

nlohmann::json CvResult::to_json() const {
    nlohmann::json f = nlohmann::json::array();
    for (const auto& r : folds) f.push_back(r.to_json());
    return {{"plan", plan.to_json()}, {"folds", f}, {"mean", mean.to_json()}};
}

CvResult cross_validate(const FingerprintMatrix& data, ModelKind kind, const Hyper& hyper, const CvOptions& opt) {
    const std::vector<int> y = mapped_labels(data, opt.label_map);
    return cross_validate(data, kind, hyper, opt,
                          plan_folds(data.groups, y, opt.folds, opt.repeats, opt.seed, opt.purge_radius));
}

CvResult cross_validate(const FingerprintMatrix& data, ModelKind kind, const Hyper& hyper, const CvOptions& opt,
                        const FoldPlan& plan) {
    const std::vector<int> y = mapped_labels(data, opt.label_map);
    const int C = class_count(y);
    const auto gidx = index_groups(plan);
    const std::size_t tasks = static_cast<std::size_t>(plan.repeats * plan.folds);
    CvResult res;
    res.plan = plan;
    res.folds.resize(tasks);
    const Seed shuffle_base = seed_from_u64(opt.seed, "label-shuffle");
    parallel_for(tasks, opt.jobs, [&](std::size_t t) {
        const int r = static_cast<int>(t) / plan.folds;
        const int f = static_cast<int>(t) % plan.folds;
        const Split split = fold_split(data, plan, gidx, r, f, plan.purge_radius);
        Hyper h = hyper;
        h.seed = hyper.seed + t;
        std::optional<Seed> shuffle;
        if (opt.shuffle_train_labels) shuffle = derive_seed(shuffle_base, "fold/" + std::to_string(t));
        res.folds[t] = fit_and_score(data.X, y, split, kind, h, C, shuffle);
    });
    res.mean = mean_report(res.folds);
    return res;
}

TrainedPipeline train_full(const FingerprintMatrix& data, ModelKind kind, const Hyper& hyper) {
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    TrainedPipeline p;
    p.standardizer = fit_standardizer(data.X, fold_hash(all));
    Hyper h = hyper;
    if (h.n_classes == 0) h.n_classes = class_count(data.labels);
    p.model = train_model(kind, p.standardizer.apply(data.X), data.labels, h);
    p.feature_set = std::string(feature_set_name(data.feature_set));
    p.panel_version = data.panel_version;
    return p;
}

nlohmann::json GapMatrix::to_json() const {
    nlohmann::json v = nlohmann::json::object(), g = nlohmann::json::object();
    for (const auto& [k, m] : values) v[k] = matrix_json(m);
    for (const auto& [k, m] : gaps) g[k] = matrix_json(m);
    return {{"domains", domains}, {"values", v}, {"gaps_percent", g}};
}

GapMatrix run_cross_domain(const std::vector<NamedDataset>& datasets, ModelKind kind, const Hyper& hyper,
                           const CvOptions& opt) {
    if (datasets.size() < 2) throw ConfigError("cross-domain evaluation needs at least two datasets");
    const FingerprintMatrix& ref = *datasets.front().data;
    for (const auto& d : datasets) {
        if (d.data->panel_version != ref.panel_version || d.data->seg_hash != ref.seg_hash ||
            d.data->feature_set != ref.feature_set || d.data->X.cols() != ref.X.cols()) {
            throw HashMismatch("dataset " + d.name + " differs from " + datasets.front().name +
                               " in panel, segmentation or feature set");
        }
    }
    const std::size_t D = datasets.size();
    const std::vector<std::string> metrics = {"accuracy", "macro_f1", "macro_auc"};
    GapMatrix gm;
    for (const auto& d : datasets) gm.domains.push_back(d.name);
    for (const auto& m : metrics) {
        gm.values[m].assign(D, std::vector<double>(D, 0.0));
        gm.gaps[m].assign(D, std::vector<double>(D, 0.0));
    }
    Hyper h = hyper;
    h.n_classes = 0;
    for (const auto& d : datasets) h.n_classes = std::max(h.n_classes, class_count(d.data->labels));
    for (std::size_t s = 0; s < D; ++s) {
        const auto cv = cross_validate(*datasets[s].data, kind, h, opt);
        gm.values["accuracy"][s][s] = cv.mean.accuracy;
        gm.values["macro_f1"][s][s] = cv.mean.macro_f1;
        gm.values["macro_auc"][s][s] = cv.mean.macro_auc;
        const TrainedPipeline p = train_full(*datasets[s].data, kind, h);
        for (std::size_t t = 0; t < D; ++t) {
            if (t == s) continue;
            const auto& target = *datasets[t].data;
            const auto r = evaluate_predictions(target.labels, p.scores(target.X), h.n_classes);
            gm.values["accuracy"][s][t] = r.accuracy;
            gm.values["macro_f1"][s][t] = r.macro_f1;
            gm.values["macro_auc"][s][t] = r.macro_auc;
        }
    }
    for (const auto& m : metrics) {
        for (std::size_t s = 0; s < D; ++s) {
            for (std::size_t t = 0; t < D; ++t) {
                const double mss = gm.values[m][s][s];
                gm.gaps[m][s][t] = s == t ? 0.0 : (mss > 0.0 ? generalization_gap(mss, gm.values[m][s][t]) : kNaN);
            }
        }
    }
    return gm;
}

nlohmann::json ShuffleReport::to_json() const {
    return {{"shuffled_accuracy", shuffled_accuracy}, {"control_accuracy", control_accuracy}, {"chance", chance},
            {"band", {band_lo, band_hi}}, {"pass", pass}};
}

ShuffleReport sanity_label_shuffle(const FingerprintMatrix& data, ModelKind kind, const Hyper& hyper,
                                   const CvOptions& opt) {
    const std::vector<int> y = mapped_labels(data, opt.label_map);
    const FoldPlan plan = plan_folds(data.groups, y, opt.folds, opt.repeats, opt.seed, opt.purge_radius);
    CvOptions shuffled = opt;
    shuffled.shuffle_train_labels = true;
    CvOptions control = opt;
    control.shuffle_train_labels = false;
    ShuffleReport r;
    r.shuffled_accuracy = cross_validate(data, kind, hyper, shuffled, plan).mean.accuracy;
    r.control_accuracy = cross_validate(data, kind, hyper, control, plan).mean.accuracy;
    r.chance = 1.0 / static_cast<double>(std::set<int>(y.begin(), y.end()).size());
    r.band_lo = r.chance - 0.05;
    r.band_hi = r.chance + 0.05;
    r.pass = r.shuffled_accuracy >= r.band_lo && r.shuffled_accuracy <= r.band_hi;
    return r;
}

nlohmann::json EdgeRefitReport::to_json() const {
    return {{"fixed_accuracy", fixed_accuracy}, {"refit_accuracy", refit_accuracy}, {"difference", difference},
            {"pass", pass}, {"fixed_edges", fixed_edges}, {"refit_edges", refit_edges},
            {"refit_fitted_on", refit_fitted_on}};
}

std::vector<double> quantile_edges(const ScoreTable& table, const std::vector<std::size_t>& rows, std::size_t K) {
    if (rows.empty() || K < 1) throw std::invalid_argument("quantile_edges: no rows");
    std::vector<double> pool;
    pool.reserve(rows.size() * kNumColumns);
    for (auto r : rows) pool.insert(pool.end(), table.rows[r].begin(), table.rows[r].end());
    std::sort(pool.begin(), pool.end());
    std::vector<double> e(K + 1);
    e[0] = 0.0;
    e[K] = 1.0;
    for (std::size_t b = 1; b < K; ++b) {
        const std::size_t idx = std::min(pool.size() - 1, (b * pool.size()) / K);
        e[b] = pool[idx];
    }
    // Ties in the pooled sample could repeat an edge; keep them strictly increasing.
    for (std::size_t b = 1; b < K; ++b) {
        const double room = (1.0 - e[b - 1]) / static_cast<double>(K - b + 1);
        if (!(e[b] > e[b - 1]) || !(e[b] < 1.0)) e[b] = e[b - 1] + room;
    }
    return e;
}

EdgeRefitReport sanity_bin_edge_refit(const ScoreTable& table, const SegmentationConfig& cfg,
                                      const std::vector<std::string>& column_names, ModelKind kind,
                                      const Hyper& hyper, const CvOptions& opt) {
    SegmentationConfig fixed = cfg;
    fixed.bin_edges = equispaced_edges(cfg.K);
    fixed.validate();
    const FingerprintMatrix base = build_fingerprints(table, fixed, FeatureSet::Ours, column_names, opt.jobs);
    const std::vector<int> y = mapped_labels(base, opt.label_map);
    const int C = class_count(y);
    const FoldPlan plan = plan_folds(base.groups, y, opt.folds, opt.repeats, opt.seed, opt.purge_radius);
    const auto gidx = index_groups(plan);
    EdgeRefitReport rep;
    rep.fixed_edges = fixed.bin_edges;
    std::vector<MetricsReport> fixed_folds, refit_folds;
    for (int r = 0; r < plan.repeats; ++r) {
        for (int f = 0; f < plan.folds; ++f) {
            const Split split = fold_split(base, plan, gidx, r, f, plan.purge_radius);
            Hyper h = hyper;
            h.seed = hyper.seed + static_cast<std::uint64_t>(r * plan.folds + f);
            fixed_folds.push_back(fit_and_score(base.X, y, split, kind, h, C, std::nullopt));
            std::set<std::size_t> rows;
            for (auto i : split.train) {
                for (std::size_t k = 0; k < cfg.W; ++k) rows.insert(base.spans[i].first_row + k);
            }
            const std::vector<std::size_t> train_rows(rows.begin(), rows.end());
            SegmentationConfig refit = cfg;
            refit.bin_edges = quantile_edges(table, train_rows, cfg.K);
            refit.validate();
            rep.refit_edges.push_back(refit.bin_edges);
            rep.refit_fitted_on.push_back(fold_hash(train_rows));
            const FingerprintMatrix fm = build_fingerprints(table, refit, FeatureSet::Ours, column_names, opt.jobs);
            refit_folds.push_back(fit_and_score(fm.X, y, split, kind, h, C, std::nullopt));
        }
    }
    rep.fixed_accuracy = mean_report(fixed_folds).accuracy;
    rep.refit_accuracy = mean_report(refit_folds).accuracy;
    rep.difference = rep.refit_accuracy - rep.fixed_accuracy;
    rep.pass = std::abs(rep.difference) <= 0.02;
    return rep;
}

nlohmann::json LocoReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        rows.push_back({{"held_out", class_names[c]},
                        {"seen_accuracy", seen_accuracy[c]},
                        {"held_out_predicted_as", heldout_spread[c]}});
    }
    return {{"classes", class_names}, {"rows", rows}, {"threshold", nullptr}};
}

LocoReport sanity_leave_one_cipher_out(const FingerprintMatrix& data, ModelKind kind, const Hyper& hyper,
                                       const CvOptions& opt, const std::vector<std::string>& class_names) {
    const std::vector<int> y = data.labels;
    const int C = class_count(y);
    const FoldPlan plan = plan_folds(data.groups, y, opt.folds, 1, opt.seed, opt.purge_radius);
    const auto gidx = index_groups(plan);
    LocoReport rep;
    rep.class_names = class_names;
    for (int held = 0; held < C; ++held) {
        std::size_t seen_hit = 0, seen_total = 0;
        std::vector<double> spread(static_cast<std::size_t>(C), 0.0);
        std::size_t held_total = 0;
        for (int f = 0; f < plan.folds; ++f) {
            Split split = fold_split(data, plan, gidx, 0, f, plan.purge_radius);
            std::erase_if(split.train, [&](std::size_t i) { return y[i] == held; });
            std::vector<std::size_t> idx(split.train);
            const Standardizer st = fit_standardizer(take_rows(data.X, idx), fold_hash(idx));
            Hyper h = hyper;
            h.n_classes = C;
            h.seed = hyper.seed + static_cast<std::uint64_t>(f);
            const Model m = train_model(kind, st.apply(take_rows(data.X, idx)), take(y, idx), h);
            const auto pred = predict_labels(m, st.apply(take_rows(data.X, split.test)));
            for (std::size_t k = 0; k < split.test.size(); ++k) {
                const int truth = y[split.test[k]];
                if (truth == held) {
                    spread[static_cast<std::size_t>(pred[k])] += 1.0;
                    ++held_total;
                } else {
                    seen_hit += pred[k] == truth;
                    ++seen_total;
                }
            }
        }
        for (double& v : spread) v = held_total ? v / static_cast<double>(held_total) : 0.0;
        rep.seen_accuracy.push_back(seen_total ? static_cast<double>(seen_hit) / static_cast<double>(seen_total) : 0.0);
        rep.heldout_spread.push_back(spread);
    }
    if (rep.class_names.size() < static_cast<std::size_t>(C)) {
        for (int c = static_cast<int>(rep.class_names.size()); c < C; ++c) rep.class_names.push_back(std::to_string(c));
    }
    return rep;
}

nlohmann::json SeparabilityReport::to_json() const {
    return {{"bhattacharyya_full", bhattacharyya_full},
            {"lda_separation", lda_separation},
            {"most_confusable", {most_confusable.first, most_confusable.second}},
            {"pairwise_full", matrix_json(pairwise_full)},
            {"pairwise_lda", matrix_json(pairwise_lda)},
            {"lda_axis", std::vector<double>(lda_axis.data(), lda_axis.data() + lda_axis.size())},
            {"shrinkage", kShrinkage}};
}

double bhattacharyya_gaussian(const VectorXd& mu1, const MatrixXd& S1, const VectorXd& mu2, const MatrixXd& S2) {
    const MatrixXd S = 0.5 * (S1 + S2);
    Eigen::LLT<MatrixXd> llt(S);
    if (llt.info() != Eigen::Success) throw std::runtime_error("singular covariance even after shrinkage");
    const VectorXd d = mu1 - mu2;
    const double maha = d.dot(llt.solve(d));
    return 0.125 * maha + 0.5 * (log_det_spd(S) - 0.5 * (log_det_spd(S1) + log_det_spd(S2)));
}

MatrixXd shrink_covariance(const MatrixXd& S, double alpha) {
    const double scale = S.trace() / static_cast<double>(S.rows());
    MatrixXd out = (1.0 - alpha) * S;
    out.diagonal().array() += alpha * scale;
    return out;
}

SeparabilityReport separability_analysis(const MatrixXd& X, const std::vector<int>& y) {
    if (static_cast<std::size_t>(X.rows()) != y.size()) throw std::invalid_argument("separability: misaligned input");
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < y.size(); ++i) members[y[i]].push_back(i);
    if (members.size() < 2) throw std::invalid_argument("separability needs at least two classes");
    const Eigen::Index d = X.cols();
    std::vector<VectorXd> mu;
    std::vector<MatrixXd> cov;
    std::vector<double> weight;
    for (const auto& [c, idx] : members) {
        if (static_cast<double>(idx.size()) < static_cast<double>(d) / 10.0) {
            throw std::invalid_argument("class " + std::to_string(c) + " has too few samples for its dimension");
        }
        const MatrixXd Xc = take_rows(X, idx);
        const VectorXd m = Xc.colwise().mean().transpose();
        const MatrixXd centered = Xc.rowwise() - m.transpose();
        mu.push_back(m);
        cov.push_back(shrink_covariance(centered.transpose() * centered / static_cast<double>(idx.size())));
        weight.push_back(static_cast<double>(idx.size()) / static_cast<double>(X.rows()));
    }
    const std::size_t C = mu.size();
    SeparabilityReport rep;
    rep.pairwise_full.assign(C, std::vector<double>(C, 0.0));
    rep.pairwise_lda.assign(C, std::vector<double>(C, 0.0));
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < C; ++a) {
        for (std::size_t b = a + 1; b < C; ++b) {
            const double v = bhattacharyya_gaussian(mu[a], cov[a], mu[b], cov[b]);
            rep.pairwise_full[a][b] = rep.pairwise_full[b][a] = v;
            sum += v;
            ++pairs;
        }
    }
    rep.bhattacharyya_full = sum / static_cast<double>(pairs);

    VectorXd grand = VectorXd::Zero(d);
    for (std::size_t c = 0; c < C; ++c) grand += weight[c] * mu[c];
    MatrixXd Sw = MatrixXd::Zero(d, d);
    MatrixXd Sb = MatrixXd::Zero(d, d);
    for (std::size_t c = 0; c < C; ++c) {
        Sw += weight[c] * cov[c];
        const VectorXd dm = mu[c] - grand;
        Sb += weight[c] * dm * dm.transpose();
    }
    Eigen::GeneralizedSelfAdjointEigenSolver<MatrixXd> ges(Sb, Sw);
    if (ges.info() != Eigen::Success) throw std::runtime_error("LDA eigenproblem failed");
    rep.lda_axis = ges.eigenvectors().col(d - 1).normalized();

    // The projected Gaussians are the projections of the fitted ones, so no pair can gain
    // distance from the projection.
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < C; ++a) {
        for (std::size_t b = a + 1; b < C; ++b) {
            const double ma = mu[a].dot(rep.lda_axis), mb = mu[b].dot(rep.lda_axis);
            const double va = rep.lda_axis.dot(cov[a] * rep.lda_axis), vb = rep.lda_axis.dot(cov[b] * rep.lda_axis);
            const double v = 0.25 * (ma - mb) * (ma - mb) / (va + vb) +
                             0.5 * std::log(0.5 * (va + vb) / std::sqrt(va * vb));
            rep.pairwise_lda[a][b] = rep.pairwise_lda[b][a] = v;
            if (v < best) {
                best = v;
                rep.most_confusable = {std::next(members.begin(), static_cast<std::ptrdiff_t>(a))->first,
                                       std::next(members.begin(), static_cast<std::ptrdiff_t>(b))->first};
            }
        }
    }
    rep.lda_separation = best;
    return rep;
}

std::string DistributionCurves::to_csv() const {
    std::string out = "column,class,source,bin,lo,hi,fraction\n";
    const std::size_t K = edges.size() - 1;
    auto row = [&](const std::string& cls, const std::string& src, const std::vector<double>& curve) {
        for (std::size_t b = 0; b < K; ++b) {
            out += csv_escape(column) + "," + csv_escape(cls) + "," + csv_escape(src) + "," + std::to_string(b) + "," +
                   format_number(edges[b]) + "," + format_number(edges[b + 1]) + "," + format_number(curve[b]) + "\n";
        }
    };
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        for (const auto& [src, curve] : seed_curves[c]) row(class_names[c], src, curve);
        if (!seed_curves[c].empty()) row(class_names[c], "mean", mean_curves[c]);
    }
    return out;
}

DistributionCurves export_distribution_fingerprint(const ScoreTable& table, const std::string& column,
                                                   const std::vector<std::string>& column_names,
                                                   const std::vector<std::string>& class_names, std::size_t K) {
    const auto it = std::find(column_names.begin(), column_names.end(), column);
    if (it == column_names.end()) throw ConfigError("unknown column: " + column);
    const std::size_t t = static_cast<std::size_t>(it - column_names.begin());
    DistributionCurves dc;
    dc.column = column;
    dc.edges = equispaced_edges(K);
    dc.class_names = class_names;
    dc.seed_curves.resize(class_names.size());
    dc.mean_curves.assign(class_names.size(), std::vector<double>(K, 0.0));
    for (const auto& s : table.streams) {
        if (s.label < 0 || static_cast<std::size_t>(s.label) >= class_names.size() || s.n_rows == 0) continue;
        std::vector<double> v;
        for (std::size_t k = 0; k < s.n_rows; ++k) v.push_back(table.rows[s.first_row + k][t]);
        dc.seed_curves[static_cast<std::size_t>(s.label)].push_back({s.source_id, window_histogram(v, dc.edges)});
    }
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        const auto& curves = dc.seed_curves[c];
        for (const auto& [src, curve] : curves) {
            for (std::size_t b = 0; b < K; ++b) dc.mean_curves[c][b] += curve[b] / static_cast<double>(curves.size());
        }
    }
    return dc;
}

}  // namespace cipherprint
