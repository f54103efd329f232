#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "relgate/dataset.hpp"
#include "relgate/detectors.hpp"
#include "relgate/errors.hpp"
#include "relgate/gate.hpp"

#include "support/lof_oracle.hpp"
#include "support/test_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace relgate;
using testutil::matrix_from;

namespace {

FeatureMatrix spaceviewer_matrix() {
    ReleaseDataset ds = load_dataset(testutil::spaceviewer_path());
    return to_feature_matrix(ds.records);
}

std::vector<int> ids_by_descending_score(const ScoreVector& sv) {
    std::vector<std::size_t> idx(sv.scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return sv.scores[a] > sv.scores[b];
    });
    std::vector<int> ids;
    for (std::size_t i : idx) ids.push_back(sv.row_ids[i]);
    return ids;
}

const FeatureMatrix kMicro = matrix_from({{0.0}, {1.0}, {2.0}, {10.0}});

} // namespace

TEST_CASE("standardize z-scores kept columns and drops constant ones") {
    SUBCASE("two-point column becomes [-1, 1]") {
        auto [z, params] = standardize(matrix_from({{1.0}, {3.0}}));
        CHECK(z.at(0, 0) == doctest::Approx(-1.0));
        CHECK(z.at(1, 0) == doctest::Approx(1.0));
        CHECK(params.means[0] == doctest::Approx(2.0));
        CHECK(params.stds[0] == doctest::Approx(1.0));
    }
    SUBCASE("constant column dropped, varying column kept") {
        auto [z, params] = standardize(matrix_from({{5.0, 1.0}, {5.0, 2.0}, {5.0, 3.0}}));
        CHECK(z.cols == 1);
        REQUIRE(params.kept_features.size() == 1);
        CHECK(params.kept_features[0] == 1);
    }
    SUBCASE("all-constant matrix raises the no-variance error") {
        CHECK_THROWS_AS(standardize(matrix_from({{5.0}, {5.0}, {5.0}})), NoVarianceError);
    }
    SUBCASE("fixture P1 column standardizes against its own mean and std") {
        FeatureMatrix m = spaceviewer_matrix();
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) mean += m.at(r, 0);
        mean /= double(m.rows);
        double var = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            var += (m.at(r, 0) - mean) * (m.at(r, 0) - mean);
        }
        double std_dev = std::sqrt(var / double(m.rows));
        auto [z, params] = standardize(m);
        CHECK(z.at(0, 0) == doctest::Approx((22.57 - mean) / std_dev).epsilon(1e-12));
    }
    SUBCASE("standardized columns have mean 0 and population std 1") {
        testutil::Rng rng(3);
        auto [z, params] = standardize(testutil::random_matrix(rng, 17, 4));
        for (std::size_t c = 0; c < z.cols; ++c) {
            double mean = 0.0, var = 0.0;
            for (std::size_t r = 0; r < z.rows; ++r) mean += z.at(r, c);
            mean /= double(z.rows);
            for (std::size_t r = 0; r < z.rows; ++r) {
                var += (z.at(r, c) - mean) * (z.at(r, c) - mean);
            }
            var /= double(z.rows);
            CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
            CHECK(var == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("screen_features drops near-constant columns") {
    FeatureMatrix m = matrix_from({{1.0, 0.0, 7.0},
                                   {2.0, 0.0, 7.0},
                                   {3.0, 1.0, 7.0},
                                   {4.0, 0.0, 7.0}});
    auto [screened, kept] = screen_features(m, 3);
    CHECK(kept == std::vector<std::size_t>{0}); // binary and constant columns go
    CHECK(screened.cols == 1);
    CHECK(screened.at(2, 0) == 3.0);

    auto [all, kept_all] = screen_features(m, 1);
    CHECK(kept_all.size() == 3);
    CHECK(all.cols == 3);
}

TEST_CASE("k_distance_neighbors on the four-point line") {
    auto [kd0, nb0] = k_distance_neighbors(kMicro, 0, 2);
    CHECK(kd0 == doctest::Approx(2.0));
    CHECK(nb0 == std::set<std::size_t>{1, 2});

    auto [kd3, nb3] = k_distance_neighbors(kMicro, 3, 2);
    CHECK(kd3 == doctest::Approx(9.0));
    CHECK(nb3 == std::set<std::size_t>{1, 2});

    SUBCASE("identical points have k_dist 0 and every other row as neighbor") {
        FeatureMatrix same = matrix_from({{4.0}, {4.0}, {4.0}, {4.0}});
        auto [kd, nb] = k_distance_neighbors(same, 1, 2);
        CHECK(kd == 0.0);
        CHECK(nb == std::set<std::size_t>{0, 2, 3});
    }
    SUBCASE("ties at the k-distance expand the neighbor set") {
        FeatureMatrix tied = matrix_from({{0.0}, {1.0}, {-1.0}, {5.0}});
        auto [kd, nb] = k_distance_neighbors(tied, 0, 1);
        CHECK(kd == doctest::Approx(1.0));
        CHECK(nb == std::set<std::size_t>{1, 2});
    }
}

TEST_CASE("lof micro-case matches the hand computation") {
    ScoreVector lof = lof_scores(kMicro, 2);
    // lrd values are 2/3, 1/2, 2/3, 2/17; LOF(10) = ((1/2 + 2/3)/2) / (2/17).
    CHECK(std::abs(lof.scores[3] - 119.0 / 24.0) < 1e-9);
    CHECK(std::abs(lof.scores[0] - 0.875) < 1e-9);
    CHECK(std::abs(lof.scores[2] - 0.875) < 1e-9);

    auto ref = oracle::lof_reference({{0.0}, {1.0}, {2.0}, {10.0}}, 2);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(std::abs(lof.scores[i] - ref[i]) < 1e-9);
    }
}

TEST_CASE("lof matches the brute-force oracle on random matrices") {
    testutil::Rng rng(2024);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 5 + rng.below(36);
        std::size_t d = 1 + rng.below(6);
        std::size_t k = 2 + rng.below(std::min<std::size_t>(20, n - 1) - 1);
        FeatureMatrix m = testutil::random_matrix(rng, n, d);

        std::vector<std::vector<double>> pts(n, std::vector<double>(d));
        for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < d; ++c) pts[r][c] = m.at(r, c);
        }
        ScoreVector got = lof_scores(m, k);
        auto want = oracle::lof_reference(pts, k);
        for (std::size_t r = 0; r < n; ++r) {
            CHECK(std::abs(got.scores[r] - want[r]) < 1e-9);
        }
    }
}

TEST_CASE("lof handles coincident points through the lrd delta") {
    FeatureMatrix m = matrix_from({{1.0}, {1.0}, {1.0}, {1.0}, {9.0}});
    ScoreVector lof = lof_scores(m, 2);
    for (double s : lof.scores) {
        CHECK(std::isfinite(s));
    }
    // The duplicated cluster is perfectly dense; each clone scores exactly 1.
    CHECK(lof.scores[0] == doctest::Approx(1.0));
    CHECK(lof.scores[4] > 10.0);
}

TEST_CASE("lof on a uniform grid: near 1 inside, boundary-inflated corners") {
    FeatureMatrix grid = FeatureMatrix::zeros(25, 2);
    for (int i = 0; i < 25; ++i) {
        grid.at(i, 0) = double(i / 5);
        grid.at(i, 1) = double(i % 5);
    }
    ScoreVector lof = lof_scores(grid, 4);

    std::vector<std::vector<double>> pts(25, std::vector<double>(2));
    for (int i = 0; i < 25; ++i) pts[i] = {grid.at(i, 0), grid.at(i, 1)};
    auto ref = oracle::lof_reference(pts, 4);
    double max_score = 0.0, min_score = 1e9;
    for (std::size_t i = 0; i < 25; ++i) {
        CHECK(std::abs(lof.scores[i] - ref[i]) < 1e-9);
        max_score = std::max(max_score, lof.scores[i]);
        min_score = std::min(min_score, lof.scores[i]);
    }
    // Interior density is uniform (center exactly 0.9062) but the four
    // corners sit at 1.2237: tie-expanded LOF overshoots 1 at the boundary.
    CHECK(lof.scores[12] == doctest::Approx(0.9062).epsilon(1e-3));
    CHECK(min_score > 0.9);
    CHECK(max_score == doctest::Approx(1.2237).epsilon(1e-3));
    CHECK(lof.scores[0] == doctest::Approx(max_score));
    CHECK(lof.scores[4] == doctest::Approx(max_score));
    CHECK(lof.scores[20] == doctest::Approx(max_score));
    CHECK(lof.scores[24] == doctest::Approx(max_score));
}

TEST_CASE("knn outlier scores") {
    ScoreVector knn = knn_outlier_scores(kMicro, 2);
    CHECK(knn.scores[3] == doctest::Approx(8.5)); // (8 + 9) / 2
    CHECK(knn.scores[0] == doctest::Approx(1.5)); // (1 + 2) / 2

    SUBCASE("identical points all score zero") {
        FeatureMatrix same = matrix_from({{2.0}, {2.0}, {2.0}});
        for (double s : knn_outlier_scores(same, 2).scores) CHECK(s == 0.0);
    }
    SUBCASE("k out of range is a config error") {
        CHECK_THROWS_AS(knn_outlier_scores(kMicro, 4), ConfigError);
        CHECK_THROWS_AS(lof_scores(kMicro, 0), ConfigError);
    }
}

TEST_CASE("permutation equivariance of every detector") {
    testutil::Rng rng(99);
    FeatureMatrix m = testutil::random_matrix(rng, 14, 3);
    for (std::size_t r = 0; r < m.rows; ++r) m.row_ids[r] = int(100 + r);

    // Reverse the rows, ids travelling with them.
    FeatureMatrix rev = FeatureMatrix::zeros(m.rows, m.cols);
    for (std::size_t r = 0; r < m.rows; ++r) {
        rev.row_ids[r] = m.row_ids[m.rows - 1 - r];
        for (std::size_t c = 0; c < m.cols; ++c) rev.at(r, c) = m.at(m.rows - 1 - r, c);
    }

    auto check_equivariant = [&](const ScoreVector& a, const ScoreVector& b) {
        REQUIRE(a.scores.size() == b.scores.size());
        for (std::size_t r = 0; r < a.scores.size(); ++r) {
            CHECK(a.scores[r] ==
                  doctest::Approx(b.scores[b.scores.size() - 1 - r]).epsilon(1e-12));
        }
    };
    check_equivariant(lof_scores(m, 5), lof_scores(rev, 5));
    check_equivariant(knn_outlier_scores(m, 5), knn_outlier_scores(rev, 5));
    check_equivariant(mahalanobis_scores(m, 1e-6), mahalanobis_scores(rev, 1e-6));
    check_equivariant(isolation_forest_scores(m, 50, 8, 7),
                      isolation_forest_scores(rev, 50, 8, 7));
}

TEST_CASE("affine map on raw features leaves standardized LOF and kNN unchanged") {
    testutil::Rng rng(41);
    for (int trial = 0; trial < 5; ++trial) {
        std::size_t n = 10 + rng.below(20);
        std::size_t d = 1 + rng.below(5);
        FeatureMatrix m = testutil::random_matrix(rng, n, d);

        FeatureMatrix mapped = m;
        for (std::size_t c = 0; c < d; ++c) {
            double a = 0.0;
            while (std::abs(a) < 0.05) a = rng.uniform(-5.0, 5.0);
            double b = rng.uniform(-100.0, 100.0);
            for (std::size_t r = 0; r < n; ++r) mapped.at(r, c) = a * m.at(r, c) + b;
        }

        std::size_t k = 2 + rng.below(5);
        auto [z1, p1] = standardize(m);
        auto [z2, p2] = standardize(mapped);
        ScoreVector lof1 = lof_scores(z1, k), lof2 = lof_scores(z2, k);
        ScoreVector knn1 = knn_outlier_scores(z1, k), knn2 = knn_outlier_scores(z2, k);
        for (std::size_t r = 0; r < n; ++r) {
            CHECK(std::abs(lof1.scores[r] - lof2.scores[r]) < 1e-9);
            CHECK(std::abs(knn1.scores[r] - knn2.scores[r]) < 1e-9);
        }
    }
}

TEST_CASE("mahalanobis scores") {
    SUBCASE("the mean point scores zero") {
        FeatureMatrix m = matrix_from({{1.0, 2.0}, {3.0, 4.0}, {2.0, 3.0}});
        ScoreVector sv = mahalanobis_scores(m, 1e-9);
        CHECK(sv.scores[2] == doctest::Approx(0.0).epsilon(1e-6)); // row 2 is the mean
    }
    SUBCASE("identity sample covariance reduces to Euclidean distance") {
        double a = std::sqrt(1.5); // four points at +-a give unit sample covariance
        FeatureMatrix m =
            matrix_from({{a, 0.0}, {-a, 0.0}, {0.0, a}, {0.0, -a}});
        ScoreVector sv = mahalanobis_scores(m, 1e-9);
        for (double s : sv.scores) CHECK(s == doctest::Approx(a).epsilon(1e-4));
    }
    SUBCASE("standardized fixture: ID 24 has the largest score") {
        auto [z, params] = standardize(spaceviewer_matrix());
        ScoreVector sv = mahalanobis_scores(z, 1e-6);
        CHECK(ids_by_descending_score(sv)[0] == 24);
    }
    SUBCASE("invariant under invertible linear maps as ridge vanishes") {
        testutil::Rng rng(5);
        FeatureMatrix m = testutil::random_matrix(rng, 30, 3);
        // A fixed well-conditioned mixing matrix.
        const double A[3][3] = {{2.0, 0.5, 0.0}, {-0.3, 1.5, 0.2}, {0.1, 0.0, 1.2}};
        FeatureMatrix mixed = FeatureMatrix::zeros(m.rows, m.cols);
        mixed.row_ids = m.row_ids;
        for (std::size_t r = 0; r < m.rows; ++r) {
            for (std::size_t i = 0; i < 3; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < 3; ++j) s += A[i][j] * m.at(r, j);
                mixed.at(r, i) = s;
            }
        }
        ScoreVector plain = mahalanobis_scores(m, 1e-9);
        ScoreVector moved = mahalanobis_scores(mixed, 1e-9);
        for (std::size_t r = 0; r < m.rows; ++r) {
            CHECK(plain.scores[r] == doctest::Approx(moved.scores[r]).epsilon(1e-4));
        }
    }
}

TEST_CASE("isolation forest") {
    SUBCASE("a far outlier in a tight cluster gets the maximum score") {
        testutil::Rng rng(12);
        FeatureMatrix m = FeatureMatrix::zeros(21, 2);
        for (std::size_t r = 0; r < 20; ++r) {
            m.at(r, 0) = rng.uniform(-0.5, 0.5);
            m.at(r, 1) = rng.uniform(-0.5, 0.5);
        }
        m.at(20, 0) = 50.0;
        m.at(20, 1) = -40.0;
        ScoreVector sv = isolation_forest_scores(m, 100, 16, 42);
        CHECK(std::max_element(sv.scores.begin(), sv.scores.end()) - sv.scores.begin() ==
              20);
    }
    SUBCASE("same seed gives identical scores, different seed differs somewhere") {
        testutil::Rng rng(13);
        FeatureMatrix m = testutil::random_matrix(rng, 30, 4);
        ScoreVector a = isolation_forest_scores(m, 64, 16, 7);
        ScoreVector b = isolation_forest_scores(m, 64, 16, 7);
        CHECK(a.scores == b.scores);
        ScoreVector c = isolation_forest_scores(m, 64, 16, 8);
        CHECK(a.scores != c.scores);
    }
    SUBCASE("scores stay in (0, 1)") {
        testutil::Rng rng(14);
        FeatureMatrix m = testutil::random_matrix(rng, 40, 3);
        for (double s : isolation_forest_scores(m, 50, 32, 3).scores) {
            CHECK(s > 0.0);
            CHECK(s < 1.0);
        }
    }
    SUBCASE("standardized fixture, seed 42, 100 trees: 22 and 24 in the top three") {
        auto [z, params] = standardize(spaceviewer_matrix());
        ScoreVector sv = isolation_forest_scores(z, 100, 256, 42);
        auto order = ids_by_descending_score(sv);
        std::vector<int> top3(order.begin(), order.begin() + 3);
        CHECK(std::count(top3.begin(), top3.end(), 22) == 1);
        CHECK(std::count(top3.begin(), top3.end(), 24) == 1);
    }
}

TEST_CASE("classify maps scores to severities by the two thresholds") {
    DetectorConfig cfg; // review 1.2, anomaly 1.5
    CHECK(classify(1.0, cfg) == Severity::ok);
    CHECK(classify(1.35, cfg) == Severity::review);
    CHECK(classify(4.96, cfg) == Severity::anomaly);
    CHECK(classify(1.2, cfg) == Severity::ok);      // boundary: not above review
    CHECK(classify(1.5, cfg) == Severity::review);  // boundary: not above anomaly

    ScoreVector sv;
    sv.scores = {1.0, 1.35, 4.96};
    CHECK(classify(sv, cfg) ==
          std::vector<Severity>{Severity::ok, Severity::review, Severity::anomaly});

    SUBCASE("raising the anomaly threshold never turns ok into anomaly") {
        DetectorConfig loose = cfg;
        loose.anomaly_threshold = 3.0;
        testutil::Rng rng(6);
        for (int i = 0; i < 200; ++i) {
            double s = rng.uniform(0.0, 5.0);
            if (classify(s, cfg) == Severity::ok) {
                CHECK(classify(s, loose) != Severity::anomaly);
            }
        }
    }
    SUBCASE("inverted thresholds are rejected") {
        DetectorConfig bad = cfg;
        bad.review_threshold = 2.0;
        CHECK_THROWS_AS(classify(1.0, bad), ConfigError);
    }
}

TEST_CASE("decision boundary grids") {
    DetectorConfig cfg;
    cfg.k_neighbors = 4;

    SUBCASE("resolution 2 scores exactly 4 points") {
        testutil::Rng rng(21);
        FeatureMatrix m = testutil::random_matrix(rng, 12, 2);
        BoundaryGrid g = decision_boundary_grid(DetectorKind::knn, m, 0, 1, 2, cfg);
        CHECK(g.scores.size() == 4);
        CHECK(g.xs.size() == 2);
    }
    SUBCASE("mahalanobis grid over a radially symmetric set is symmetric") {
        // 8 points on a circle plus nothing else: mean at origin.
        std::vector<std::vector<double>> pts;
        for (int i = 0; i < 8; ++i) {
            double t = 2.0 * M_PI * double(i) / 8.0;
            pts.push_back({std::cos(t), std::sin(t)});
        }
        FeatureMatrix m = matrix_from(pts);
        BoundaryGrid g =
            decision_boundary_grid(DetectorKind::mahalanobis, m, 0, 1, 11, cfg);
        for (std::size_t iy = 0; iy < 11; ++iy) {
            for (std::size_t ix = 0; ix < 11; ++ix) {
                CHECK(g.score_at(ix, iy) ==
                      doctest::Approx(g.score_at(10 - ix, 10 - iy)).epsilon(1e-9));
            }
        }
    }
    SUBCASE("invalid feature selections are rejected") {
        testutil::Rng rng(22);
        FeatureMatrix m = testutil::random_matrix(rng, 8, 3);
        CHECK_THROWS_AS(decision_boundary_grid(DetectorKind::lof, m, 1, 1, 4, cfg),
                        ConfigError);
        CHECK_THROWS_AS(decision_boundary_grid(DetectorKind::lof, m, 0, 5, 4, cfg),
                        ConfigError);
        CHECK_THROWS_AS(decision_boundary_grid(DetectorKind::lof, m, 0, 1, 1, cfg),
                        ConfigError);
    }
    SUBCASE("fixture (P1, P4): the cell nearest ID 24 outscores the median cell") {
        auto [z, params] = standardize(spaceviewer_matrix());
        DetectorConfig table_cfg;
        std::size_t k20 = 20;
        table_cfg.k_neighbors = k20;
        // Columns 0 and 3 of the standardized matrix are P1 and P4.
        BoundaryGrid g = decision_boundary_grid(DetectorKind::lof, z, 0, 3, 60, table_cfg);

        auto nearest_index = [](const std::vector<double>& ticks, double v) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < ticks.size(); ++i) {
                if (std::abs(ticks[i] - v) < std::abs(ticks[best] - v)) best = i;
            }
            return best;
        };
        double zx = (244.0 - params.means[0]) / params.stds[0];
        double zy = (50.0 - params.means[3]) / params.stds[3];
        // Median of a standardized column is the standardized raw median.
        std::vector<double> col0, col3;
        for (std::size_t r = 0; r < z.rows; ++r) {
            col0.push_back(z.at(r, 0));
            col3.push_back(z.at(r, 3));
        }
        std::sort(col0.begin(), col0.end());
        std::sort(col3.begin(), col3.end());
        double extreme = g.score_at(nearest_index(g.xs, zx), nearest_index(g.ys, zy));
        double median = g.score_at(nearest_index(g.xs, col0[12]),
                                   nearest_index(g.ys, col3[12]));
        CHECK(extreme > median);
    }
}
