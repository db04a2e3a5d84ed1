#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "cipherprint/cryptobox.hpp"
#include "cipherprint/evalproto.hpp"

using namespace cipherprint;

namespace {

double normal_draw(KeyedStream& rng) {
    const double u1 = 1.0 - rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * rng.uniform());
}

// 6 classes x groups_per_class streams x windows, class signal of the given strength.
FingerprintMatrix synthetic(double signal, int groups_per_class = 5, int windows = 8, int dim = 6) {
    KeyedStream rng(Seed{}, "synthetic");
    FingerprintMatrix m;
    const int n = 6 * groups_per_class * windows;
    m.X.resize(n, dim);
    int row = 0;
    for (int c = 0; c < 6; ++c) {
        for (int g = 0; g < groups_per_class; ++g) {
            const std::string id = "c" + std::to_string(c) + "/g" + std::to_string(g);
            for (int w = 0; w < windows; ++w, ++row) {
                for (int j = 0; j < dim; ++j) m.X(row, j) = normal_draw(rng) + (j == c ? signal : 0.0);
                m.labels.push_back(c);
                m.groups.push_back(id);
                m.sources.push_back(id);
                m.window_index.push_back(static_cast<std::size_t>(w));
                m.row_spans.push_back({static_cast<std::size_t>(8 * w), static_cast<std::size_t>(8 * w + 31)});
            }
        }
    }
    m.panel_version = "p";
    m.seg_hash = "s";
    for (int j = 0; j < dim; ++j) m.feature_names.push_back("f" + std::to_string(j));
    return m;
}

CvOptions quick_options() {
    CvOptions o;
    o.repeats = 1;
    return o;
}

}  // namespace

TEST(FoldPlan, OneGroupPerClassPerFold) {
    std::vector<std::string> groups;
    std::vector<int> labels;
    for (int c = 0; c < 6; ++c) {
        for (int g = 0; g < 5; ++g) {
            // Each group appears with several windows.
            for (int w = 0; w < 3; ++w) {
                groups.push_back("c" + std::to_string(c) + "g" + std::to_string(g));
                labels.push_back(c);
            }
        }
    }
    const auto plan = plan_folds(groups, labels, 5, 5, 42);
    ASSERT_EQ(plan.groups.size(), 30u);
    ASSERT_EQ(plan.assignment.size(), 5u);
    EXPECT_EQ(plan.max_class_imbalance, 0);
    for (int r = 0; r < 5; ++r) {
        std::vector<std::vector<int>> count(5, std::vector<int>(6, 0));
        for (std::size_t g = 0; g < plan.groups.size(); ++g) {
            const int f = plan.assignment[r][g];
            ASSERT_GE(f, 0);
            ASSERT_LT(f, 5);
            count[f][plan.group_label[g]] += 1;
            EXPECT_EQ(plan.fold_of(r, plan.groups[g]), f);
        }
        for (const auto& fold : count) {
            for (int k : fold) EXPECT_EQ(k, 1);
        }
    }
    EXPECT_NE(plan.assignment[0], plan.assignment[1]);
    EXPECT_EQ(plan_folds(groups, labels, 5, 5, 42).assignment, plan.assignment);
}

TEST(FoldPlan, RejectsTooFewGroupsAndMixedLabels) {
    std::vector<std::string> groups = {"a", "b", "c", "d"};
    std::vector<int> labels = {0, 0, 0, 0};
    EXPECT_THROW(plan_folds(groups, labels, 5), ConfigError);
    groups = {"a", "a", "b", "c", "d", "e"};
    labels = {0, 1, 0, 0, 0, 0};
    EXPECT_THROW(plan_folds(groups, labels, 5), ConfigError);
}

TEST(Purge, DropsNeighboursOfTestWindowsInTheSameSource) {
    const std::vector<std::string> sources = {"a", "a", "a", "a", "a", "b", "a"};
    const std::vector<std::size_t> idx = {0, 3, 4, 7, 8, 5, 5};
    const auto r = purge_training({0, 1, 2, 3, 4, 5}, {6}, sources, idx, 3);
    EXPECT_EQ(r.kept, (std::vector<std::size_t>{0, 5}));
    EXPECT_EQ(r.purged, 4u);
    const auto none = purge_training({0, 1, 2, 3, 4, 5}, {6}, sources, idx, 0);
    EXPECT_EQ(none.purged, 0u);
}

TEST(Metrics, AccuracyAndMacroF1) {
    EXPECT_DOUBLE_EQ(accuracy({0, 0, 1, 1}, {0, 1, 1, 1}), 0.75);
    // Class 0: F1 = 2/3, class 1: F1 = 0.8.
    EXPECT_NEAR(macro_f1({0, 0, 1, 1}, {0, 1, 1, 1}), (2.0 / 3.0 + 0.8) / 2.0, 1e-15);
    // An absent class counts as zero.
    EXPECT_NEAR(macro_f1({0, 0, 1, 1}, {0, 1, 1, 1}, 3), (2.0 / 3.0 + 0.8) / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(macro_f1({0, 1, 2}, {0, 1, 2}), 1.0);
}

TEST(Metrics, BinaryAucWorkedExampleAndTies) {
    EXPECT_DOUBLE_EQ(binary_auc({0.1, 0.4, 0.35, 0.8}, {false, false, true, true}), 0.75);
    EXPECT_DOUBLE_EQ(binary_auc({0.5, 0.5, 0.5, 0.5}, {false, true, false, true}), 0.5);
    EXPECT_DOUBLE_EQ(binary_auc({1, 2, 3, 4}, {false, false, true, true}), 1.0);
}

TEST(Metrics, AucMatchesBruteForcePairCount) {
    KeyedStream rng(Seed{}, "auc");
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> s;
        std::vector<bool> pos;
        for (int i = 0; i < 60; ++i) {
            s.push_back(static_cast<double>(rng.below(10)));  // plenty of ties
            pos.push_back(rng.below(3) == 0);
        }
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            for (std::size_t j = 0; j < s.size(); ++j) {
                if (!pos[i] || pos[j]) continue;
                num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
                den += 1.0;
            }
        }
        EXPECT_NEAR(binary_auc(s, pos), num / den, 1e-12);
    }
}

TEST(Metrics, MacroAucSkipsDegenerateClasses) {
    MatrixXd scores(4, 3);
    scores << 0.9, 0.1, 0.0, 0.2, 0.8, 0.0, 0.6, 0.4, 0.0, 0.3, 0.7, 0.0;
    const auto r = macro_auc({0, 1, 0, 1}, scores);
    EXPECT_EQ(r.skipped, std::vector<int>{2});
    EXPECT_TRUE(std::isnan(r.per_class[2]));
    EXPECT_DOUBLE_EQ(r.macro, 1.0);
}

TEST(Metrics, GeneralizationGap) {
    EXPECT_DOUBLE_EQ(generalization_gap(0.8, 0.6), 25.0);
    EXPECT_DOUBLE_EQ(generalization_gap(0.5, 0.6), -20.0);
    EXPECT_THROW(generalization_gap(0.0, 0.3), std::invalid_argument);
}

TEST(CrossValidate, LearnsSignalAndReportsFolds) {
    const auto data = synthetic(4.0);
    auto opt = quick_options();
    const auto cv = cross_validate(data, ModelKind::LogReg, Hyper::defaults(ModelKind::LogReg), opt);
    ASSERT_EQ(cv.folds.size(), 5u);
    EXPECT_GT(cv.mean.accuracy, 0.9);
    EXPECT_GT(cv.mean.macro_auc, 0.95);
    std::size_t tested = 0;
    for (const auto& f : cv.folds) tested += f.n_test;
    EXPECT_EQ(tested, data.size());
    const auto again = cross_validate(data, ModelKind::LogReg, Hyper::defaults(ModelKind::LogReg), opt);
    EXPECT_EQ(again.to_json(), cv.to_json());
}

TEST(CrossValidate, PurgesWhenGroupsAreCoarserThanSources) {
    auto data = synthetic(4.0);
    // Pairs of adjacent groups become two halves of one source, so test windows at the
    // seam purge their training neighbours.
    for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t g = i / 8;
        data.sources[i] = "src" + std::to_string(g / 2);
        data.window_index[i] = (g % 2) * 8 + i % 8;
    }
    auto opt = quick_options();
    const auto cv = cross_validate(data, ModelKind::LogReg, Hyper::defaults(ModelKind::LogReg), opt);
    std::size_t purged = 0;
    for (const auto& f : cv.folds) purged += f.n_purged;
    // Each pair loses 3 windows at the seam whenever exactly one half is tested.
    EXPECT_GT(purged, 0u);
    EXPECT_GT(cv.mean.accuracy, 0.9);
}

TEST(CrossValidate, LabelMapGivesBinaryProblem) {
    const auto data = synthetic(4.0);
    auto opt = quick_options();
    opt.label_map = {1, 0, 0, 0, 0, 0};
    const auto cv = cross_validate(data, ModelKind::LogReg, Hyper::defaults(ModelKind::LogReg), opt);
    EXPECT_GT(cv.mean.accuracy, 0.95);
    EXPECT_EQ(cv.mean.recall.size(), 2u);
}

TEST(Sanity, LabelShuffleFallsToChance) {
    const auto data = synthetic(4.0, 5, 16);
    const auto r = sanity_label_shuffle(data, ModelKind::LogReg, Hyper::defaults(ModelKind::LogReg), quick_options());
    EXPECT_NEAR(r.chance, 1.0 / 6.0, 1e-12);
    EXPECT_GT(r.control_accuracy, 0.9);
    EXPECT_LT(r.shuffled_accuracy, 0.3);
    EXPECT_DOUBLE_EQ(r.band_lo, r.chance - 0.05);
}

TEST(CrossDomain, DiagonalIsCvAndGapsFollow) {
    const auto a = synthetic(4.0);
    auto b = synthetic(1.0);
    const auto opt = quick_options();
    const auto gm = run_cross_domain({{"A", &a}, {"B", &b}}, ModelKind::LogReg, Hyper::defaults(ModelKind::LogReg), opt);
    ASSERT_EQ(gm.domains, (std::vector<std::string>{"A", "B"}));
    const auto& acc = gm.values.at("accuracy");
    const auto cv = cross_validate(a, ModelKind::LogReg, Hyper::defaults(ModelKind::LogReg), opt);
    EXPECT_DOUBLE_EQ(acc[0][0], cv.mean.accuracy);
    EXPECT_DOUBLE_EQ(gm.gaps.at("accuracy")[0][1], generalization_gap(acc[0][0], acc[0][1]));
    EXPECT_DOUBLE_EQ(gm.gaps.at("accuracy")[1][1], 0.0);
    b.panel_version = "other";
    EXPECT_THROW(run_cross_domain({{"A", &a}, {"B", &b}}, ModelKind::LogReg, Hyper::defaults(ModelKind::LogReg), opt),
                 HashMismatch);
}

TEST(Separability, BhattacharyyaClosedForm) {
    VectorXd m1(1), m2(1);
    m1 << 0.0;
    m2 << 2.0;
    const MatrixXd I = MatrixXd::Identity(1, 1);
    EXPECT_NEAR(bhattacharyya_gaussian(m1, I, m2, I), 0.5, 1e-15);
    // Equal means, variances 1 and 4: 0.5 ln(2.5 / 2).
    EXPECT_NEAR(bhattacharyya_gaussian(m1, I, m1, 4.0 * I), 0.5 * std::log(1.25), 1e-15);
}

TEST(Separability, ShrinkageFormula) {
    MatrixXd S(2, 2);
    S << 3, 1, 1, 1;
    const MatrixXd R = shrink_covariance(S, 0.1);
    EXPECT_DOUBLE_EQ(R(0, 0), 0.9 * 3 + 0.1 * 2);
    EXPECT_DOUBLE_EQ(R(0, 1), 0.9);
    EXPECT_DOUBLE_EQ(R(1, 1), 0.9 + 0.2);
}

TEST(Separability, IdenticalClassesAreInseparableAndLdaIsBounded) {
    const auto d = synthetic(0.0, 5, 8, 4);
    auto y = d.labels;
    for (auto& v : y) v = v % 2;
    MatrixXd X(2 * d.X.rows(), d.X.cols());
    X << d.X, d.X;
    std::vector<int> yy(y);
    for (auto v : y) yy.push_back(1 - v);  // both classes hold exactly the same samples
    const auto flat = separability_analysis(X, yy);
    EXPECT_NEAR(flat.bhattacharyya_full, 0.0, 1e-9);

    const auto sep = synthetic(3.0, 5, 8, 6);
    const auto r = separability_analysis(sep.X, sep.labels);
    EXPECT_GT(r.bhattacharyya_full, 0.5);
    EXPECT_LE(r.lda_separation, r.bhattacharyya_full + 1e-9);
    EXPECT_EQ(r.lda_axis.size(), 6);
    EXPECT_LT(r.most_confusable.first, r.most_confusable.second);
}

TEST(Distribution, PerSourceHistogramsAndMean) {
    ScoreTable t;
    RawValues row;
    row.fill(0.5);
    for (double v : {0.05, 0.15, 0.15, 0.95, 0.55, 0.55}) {
        row[0] = v;
        t.rows.push_back(row);
    }
    t.streams = {{"s0", "s0", 0, 0, 4, 0}, {"s1", "s1", 0, 4, 2, 0}};
    std::vector<std::string> cols(kNumColumns, "x");
    cols[0] = "col0";
    const auto dc = export_distribution_fingerprint(t, "col0", cols, {"A", "B"}, 10);
    ASSERT_EQ(dc.seed_curves[0].size(), 2u);
    EXPECT_TRUE(dc.seed_curves[1].empty());
    EXPECT_DOUBLE_EQ(dc.seed_curves[0][0].second[1], 0.5);
    EXPECT_DOUBLE_EQ(dc.seed_curves[0][1].second[5], 1.0);
    EXPECT_DOUBLE_EQ(dc.mean_curves[0][5], 0.5);
    EXPECT_DOUBLE_EQ(dc.mean_curves[0][0], 0.125);
    const std::string csv = dc.to_csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "column,class,source,bin,lo,hi,fraction");
    EXPECT_NE(csv.find("col0,A,mean,5,0.5,0.6,0.5"), std::string::npos);
    EXPECT_THROW(export_distribution_fingerprint(t, "nope", cols, {"A"}), ConfigError);
}
