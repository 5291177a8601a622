#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "jacspec/network.hpp"
#include "jacspec/pruning.hpp"
#include "test_support.hpp"

using namespace jacspec;

namespace {

NetworkWeights draw(const MlpConfig& cfg, std::uint64_t seed, double sigma_w2 = 2.0) {
    return sample_network(cfg, {IidEnsemble{sigma_w2}, cfg.width}, StreamPlan{seed, 0, cfg.depth});
}

std::vector<double> input_for(const MlpConfig& cfg, std::uint64_t seed) {
    auto rng = StreamPlan{seed, 0, cfg.depth}.input_stream();
    return synthetic_input(rng, cfg.input_dim);
}

}  // namespace

TEST(Forward, HandWorkedTwoLayer) {
    const MlpConfig cfg{2, 2, 1, 0};
    NetworkWeights w;
    w.w_in = DenseMatrix(2, 2, {1, 0, 0, -1});
    w.hidden = {DenseMatrix(2, 2, {2, 1, -1, 3})};
    const std::vector<double> x = {1.0, 1.0};
    const auto t = forward(cfg, w, x);
    // Y0 = (1, -1), D0 = (1, 0), Y1 = W1 relu(Y0) = (2, -1), D1 = (1, 0).
    EXPECT_EQ(t.preactivations[0], (std::vector<double>{1, -1}));
    EXPECT_EQ(t.indicators[0], (std::vector<double>{1, 0}));
    EXPECT_EQ(t.preactivations[1], (std::vector<double>{2, -1}));
    EXPECT_EQ(t.indicators[1], (std::vector<double>{1, 0}));
    // J_1 = W_1 D_0 = [[2,0],[-1,0]], norm √5.
    EXPECT_NEAR(std::exp(jacobian(t, w, 1).log_spectral_norm().log_norm), std::sqrt(5.0), 1e-12);
}

TEST(Forward, ReluDerivativeAtZeroIsZero) {
    EXPECT_EQ(relu_indicator(std::vector<double>{0.0, -0.0, 1e-300}),
              (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Forward, DimensionAndDomainErrors) {
    const MlpConfig cfg{3, 4, 2, 0};
    const auto w = draw(cfg, 1);
    EXPECT_THROW(forward(cfg, w, std::vector<double>(2, 1.0)), DimensionError);
    const auto t = forward(cfg, w, std::vector<double>(3, 1.0));
    EXPECT_THROW(jacobian(t, w, 0), DomainError);
    EXPECT_THROW(jacobian(t, w, 3), DomainError);
    EXPECT_THROW((MlpConfig{0, 4, 2, 0}.validate()), DomainError);
}

TEST(Forward, OverflowNamesLayer) {
    const MlpConfig cfg{2, 2, 3, 0};
    NetworkWeights w;
    w.w_in = DenseMatrix::identity(2);
    w.hidden = {DenseMatrix(2, 2, {1e200, 0, 0, 1}), DenseMatrix(2, 2, {1e200, 0, 0, 1}),
                DenseMatrix::identity(2)};
    try {
        forward(cfg, w, std::vector<double>{1.0, 1.0});
        FAIL() << "expected OverflowError";
    } catch (const OverflowError& e) {
        EXPECT_EQ(e.layer(), 2u);
    }
}

TEST(Forward, OutputLayerIsOptional) {
    const MlpConfig with{5, 6, 3, 2};
    const auto t = forward(with, draw(with, 3), input_for(with, 3));
    ASSERT_TRUE(t.output.has_value());
    EXPECT_EQ(t.output->size(), 2u);
    const MlpConfig without{5, 6, 3, 0};
    EXPECT_FALSE(forward(without, draw(without, 3), input_for(without, 3)).output.has_value());
}

TEST(Jacobian, MatchesFiniteDifferences) {
    const MlpConfig cfg{8, 8, 4, 0};
    int checked = 0;
    for (std::uint64_t seed = 0; checked < 20 && seed < 200; ++seed) {
        const auto w = draw(cfg, seed);
        const auto x = input_for(cfg, seed);
        try {
            const auto fd = finite_difference_jacobian(cfg, w, x, 1, 1e-6);
            const auto t = forward(cfg, w, x);
            EXPECT_LE(max_abs_difference(jacobian(t, w, 1).to_dense(), fd), 1e-6);
            ++checked;
        } catch (const KinkProximityError&) {
        }
    }
    EXPECT_EQ(checked, 20);
}

TEST(Jacobian, IntermediateLayersMatchFiniteDifferences) {
    const MlpConfig cfg{6, 6, 5, 0};
    const auto w = draw(cfg, 99);
    const auto x = input_for(cfg, 99);
    const auto t = forward(cfg, w, x);
    for (std::size_t k = 1; k <= cfg.depth; ++k) {
        const auto fd = finite_difference_jacobian(cfg, w, x, k, 1e-6);
        EXPECT_LE(max_abs_difference(jacobian(t, w, k).to_dense(), fd), 1e-6) << "k=" << k;
    }
}

TEST(Jacobian, LastLayerIsWeightTimesIndicator) {
    const MlpConfig cfg{4, 5, 3, 0};
    const auto w = draw(cfg, 5);
    const auto t = forward(cfg, w, input_for(cfg, 5));
    const auto expected = scale_columns(w.layer(3), t.indicators[2]);
    EXPECT_LT(max_abs_difference(jacobian(t, w, 3).to_dense(), expected), 1e-14);
}

TEST(Jacobian, ProductOrderMatchesNaive) {
    const MlpConfig cfg{4, 6, 3, 0};
    const auto w = draw(cfg, 6);
    const auto t = forward(cfg, w, input_for(cfg, 6));
    DenseMatrix naive = scale_columns(w.layer(1), t.indicators[0]);
    for (std::size_t l = 2; l <= 3; ++l)
        naive = test::naive_product(scale_columns(w.layer(l), t.indicators[l - 1]), naive);
    EXPECT_LT(max_abs_difference(jacobian(t, w, 1).to_dense(), naive), 1e-12);
}

TEST(Jacobian, ZeroMaskGivesNegInf) {
    const MlpConfig cfg{3, 4, 3, 0};
    auto w = draw(cfg, 7);
    for (std::size_t l = 0; l < 3; ++l) w.masks.push_back(mask_from_pattern(DenseMatrix(4, 4), 1.0));
    EXPECT_EQ(jacobian_log_norm(cfg, w, input_for(cfg, 7)), kNegInf);
}

TEST(Jacobian, HomogeneityInSigma) {
    // ReLU is positively homogeneous: scaling every hidden layer by c leaves
    // the patterns and multiplies J_1 by c^L.
    const MlpConfig cfg{16, 16, 10, 0};
    const auto a = draw(cfg, 8, 2.0);
    const auto b = draw(cfg, 8, 4.0);
    const auto x = input_for(cfg, 8);
    EXPECT_NEAR(jacobian_log_norm(cfg, b, x) - jacobian_log_norm(cfg, a, x),
                0.5 * 10 * std::log(2.0), 1e-9);
}

TEST(Jacobian, CriticalDepthAverageGrowsSlowly) {
    const MlpConfig cfg{64, 64, 30, 0};
    double sum = 0.0;
    for (std::uint64_t s = 0; s < 4; ++s) sum += jacobian_log_norm(cfg, draw(cfg, s), input_for(cfg, s));
    EXPECT_LT(std::abs(sum / 4.0), 0.1 * 30);
}

TEST(Jacobian, FiniteDifferenceFlagsKinks) {
    const MlpConfig cfg{2, 2, 1, 0};
    NetworkWeights w;
    w.w_in = DenseMatrix(2, 2, {1, -1, 1, 1});
    w.hidden = {DenseMatrix::identity(2)};
    EXPECT_THROW(finite_difference_jacobian(cfg, w, std::vector<double>{1.0, 1.0}, 1, 1e-6),
                 KinkProximityError);
}

TEST(SyntheticInput, NormIsSqrtD) {
    auto rng = make_rng(1, 1);
    const auto x = synthetic_input(rng, 37);
    EXPECT_NEAR(norm2(x), std::sqrt(37.0), 1e-12);
}

TEST(LoadInputVector, ParsesAndChecksLength) {
    const auto path = std::filesystem::temp_directory_path() / "jacspec_input_test.txt";
    {
        std::ofstream out(path);
        out << "1.5\n\n-2\n  3e-1 \n";
    }
    EXPECT_EQ(load_input_vector(path, 3), (std::vector<double>{1.5, -2.0, 0.3}));
    EXPECT_THROW(load_input_vector(path, 4), DimensionError);
    std::filesystem::remove(path);
    EXPECT_THROW(load_input_vector(path, 0), IoError);
}

TEST(SampleNetwork, TruncatedNetworkSharesLayers) {
    const MlpConfig full{5, 6, 10, 0};
    const MlpConfig trunc{5, 6, 4, 0};
    const StreamPlan plan{3, 2, 10};
    const auto a = sample_network(full, {IidEnsemble{2.0}, 6}, plan);
    const auto b = sample_network(trunc, {IidEnsemble{2.0}, 6}, plan);
    EXPECT_EQ(a.w_in, b.w_in);
    for (std::size_t l = 0; l < 4; ++l) EXPECT_EQ(a.hidden[l], b.hidden[l]);
    EXPECT_THROW(sample_network(full, {IidEnsemble{2.0}, 7}, plan), DimensionError);
}
