#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "jacspec/dense_matrix.hpp"
#include "jacspec/matrix_io.hpp"
#include "jacspec/scaled_product.hpp"
#include "jacspec/spectral.hpp"
#include "test_support.hpp"

using namespace jacspec;
using jacspec::test::naive_product;
using jacspec::test::random_matrix;
using jacspec::test::rel_diff;

namespace {

DenseMatrix householder(std::uint64_t seed, std::size_t n) {
    auto rng = make_rng(seed, 17);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    const double nv = norm2(v);
    DenseMatrix h = DenseMatrix::identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) h(i, j) -= 2.0 * v[i] * v[j] / (nv * nv);
    return h;
}

}  // namespace

TEST(DenseMatrix, RejectsNonFiniteAndWrongLength) {
    EXPECT_THROW(DenseMatrix(2, 2, {1.0, 2.0, 3.0}), DimensionError);
    EXPECT_THROW(DenseMatrix(1, 2, {1.0, std::nan("")}), DomainError);
    EXPECT_THROW(DenseMatrix(1, 1, {INFINITY}), DomainError);
}

TEST(Matmul, HandWorkedProduct) {
    const DenseMatrix a(2, 2, {1, 2, 3, 4});
    const DenseMatrix b(2, 2, {5, 6, 7, 8});
    EXPECT_EQ(matmul(a, b), DenseMatrix(2, 2, {19, 22, 43, 50}));
}

TEST(Matmul, IdentityAndZero) {
    const auto a = random_matrix(1, 5, 7);
    EXPECT_EQ(matmul(a, DenseMatrix::identity(7)), a);
    EXPECT_TRUE(all_zero(matmul(DenseMatrix(3, 5), a)));
}

TEST(Matmul, DimensionMismatchNamesBothShapes) {
    try {
        matmul(DenseMatrix(2, 3), DenseMatrix(4, 2));
        FAIL() << "expected DimensionError";
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos);
        EXPECT_NE(msg.find("4x2"), std::string::npos);
    }
}

TEST(Matmul, MatchesLongDoubleOracle) {
    const auto a = random_matrix(2, 13, 9);
    const auto b = random_matrix(3, 9, 11);
    EXPECT_LT(max_abs_difference(matmul(a, b), naive_product(a, b)), 1e-13);
}

TEST(SpectralNorm, IdentityAndDiagonal) {
    EXPECT_NEAR(spectral_norm(DenseMatrix::identity(6)).value, 1.0, 1e-15);
    const std::vector<double> d = {3.0, -5.0};
    EXPECT_NEAR(spectral_norm(DenseMatrix::diagonal(d)).value, 5.0, 1e-9);
}

TEST(SpectralNorm, ClosedFormTwoByTwo) {
    // AᵀA = [[10,14],[14,20]]; λ_max = (30 + √884)/2.
    const double expected = std::sqrt((30.0 + std::sqrt(884.0)) / 2.0);
    const auto est = spectral_norm(DenseMatrix(2, 2, {1, 2, 3, 4}));
    EXPECT_TRUE(est.converged);
    EXPECT_LE(est.rel_residual, kDefaultSpectralTol);
    EXPECT_NEAR(est.value, expected, 1e-12);
    EXPECT_NEAR(est.value, 5.46499, 1e-4);
}

TEST(SpectralNorm, ZeroMatrixAndStartInNullSpace) {
    EXPECT_EQ(spectral_norm(DenseMatrix(3, 3)).value, 0.0);
    // All-ones start is in the null space of [[1,-1],[1,-1]]; the e₁ restart finds norm 2.
    const auto est = spectral_norm(DenseMatrix(2, 2, {1, -1, 1, -1}));
    EXPECT_TRUE(est.converged);
    EXPECT_NEAR(est.value, 2.0, 1e-12);
}

TEST(SpectralNorm, PreconditionsAndNonConvergence) {
    EXPECT_THROW(spectral_norm(DenseMatrix()), DimensionError);
    EXPECT_THROW(spectral_norm(DenseMatrix::identity(2), 0.0), DomainError);
    // Two-iteration budget on a matrix with a small spectral gap cannot converge.
    const auto est = spectral_norm(random_matrix(4, 40, 40), 1e-14, 2);
    EXPECT_FALSE(est.converged);
    EXPECT_GT(est.value, 0.0);
}

TEST(SpectralNorm, Homogeneity) {
    const auto a = random_matrix(5, 20, 20);
    const double base = spectral_norm(a).value;
    EXPECT_EQ(spectral_norm(scaled(a, 0.0)).value, 0.0);
    EXPECT_NEAR(spectral_norm(scaled(a, -2.0)).value, 2.0 * base, 1e-9 * base);
    EXPECT_NEAR(spectral_norm(scaled(a, 1e6)).value, 1e6 * base, 1e-9 * 1e6 * base);
}

TEST(SpectralNorm, SubmultiplicativeAndTransposeInvariant) {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto a = random_matrix(100 + s, 15, 12);
        const auto b = random_matrix(200 + s, 12, 18);
        const double na = spectral_norm(a).value;
        const double nb = spectral_norm(b).value;
        EXPECT_LE(spectral_norm(matmul(a, b)).value, na * nb * (1 + 1e-12));
        EXPECT_LT(rel_diff(na, spectral_norm(transpose(a)).value), 1e-10);
    }
}

TEST(SvdReference, DiagonalAndOrthogonal) {
    const std::vector<double> d = {1.0, -2.0, 3.0};
    const auto sv = svd_reference(DenseMatrix::diagonal(d));
    ASSERT_EQ(sv.size(), 3u);
    EXPECT_NEAR(sv[0], 3.0, 1e-14);
    EXPECT_NEAR(sv[1], 2.0, 1e-14);
    EXPECT_NEAR(sv[2], 1.0, 1e-14);

    const auto q = matmul(householder(1, 30), householder(2, 30));
    for (double s : svd_reference(q)) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(SvdReference, RectangularMatchesSquaredFrobenius) {
    const auto a = random_matrix(9, 17, 6);
    const auto sv = svd_reference(a);
    ASSERT_EQ(sv.size(), 6u);
    double sum = 0.0;
    for (double s : sv) sum += s * s;
    const double f = frobenius_norm(a);
    EXPECT_NEAR(sum, f * f, 1e-10 * f * f);
    EXPECT_TRUE(std::is_sorted(sv.rbegin(), sv.rend()));
    EXPECT_THROW(svd_reference(DenseMatrix(513, 2)), DimensionError);
}

TEST(SvdReference, AgreesWithPowerIterationOnGaussian) {
    const auto a = random_matrix(11, 50, 50);
    const double oracle = svd_reference(a).front();
    EXPECT_LT(rel_diff(spectral_norm(a).value, oracle), 1e-8);
}

TEST(AccumulateProduct, SingleFactor) {
    const auto a = random_matrix(21, 6, 6);
    const std::vector<DenseMatrix> f = {a};
    const auto p = accumulate_product(f);
    EXPECT_DOUBLE_EQ(p.log_scale(), std::log(frobenius_norm(a)));
    EXPECT_LT(max_abs_difference(p.unit(), scaled(a, 1.0 / frobenius_norm(a))), 1e-15);
    EXPECT_NEAR(frobenius_norm(p.unit()), 1.0, 1e-14);
}

TEST(AccumulateProduct, ScalarChainDeepEnoughToOverflowDoubles) {
    // 2000 factors of 3·I: 3^2000 is far beyond double range.
    const std::size_t depth = 2000;
    std::vector<DenseMatrix> f(depth, scaled(DenseMatrix::identity(4), 3.0));
    const auto p = accumulate_product(f);
    EXPECT_NEAR(p.log_spectral_norm().log_norm, depth * std::log(3.0), 1e-9 * depth);
}

TEST(AccumulateProduct, MatchesNaiveTripleProduct) {
    const std::vector<DenseMatrix> f = {random_matrix(31, 8, 8), random_matrix(32, 8, 8),
                                        random_matrix(33, 8, 8)};
    const auto naive = naive_product(f[2], naive_product(f[1], f[0]));
    const auto p = accumulate_product(f);
    EXPECT_LT(rel_diff(std::exp(p.log_spectral_norm().log_norm), spectral_norm(naive).value), 1e-10);
    EXPECT_LT(max_abs_difference(p.to_dense(), naive), 1e-10 * frobenius_norm(naive));
}

TEST(AccumulateProduct, LogNormMatchesNaiveOverRandomStreams) {
    for (std::uint64_t s = 0; s < 20; ++s) {
        std::vector<DenseMatrix> f;
        for (std::uint64_t k = 0; k < 12; ++k) f.push_back(random_matrix(1000 * s + k, 10, 10, 0.2));
        DenseMatrix naive = f[0];
        for (std::size_t k = 1; k < f.size(); ++k) naive = matmul(f[k], naive);
        const double direct = std::log(spectral_norm(naive).value);
        EXPECT_NEAR(accumulate_product(f).log_spectral_norm().log_norm, direct, 1e-9);
    }
}

TEST(AccumulateProduct, ZeroProductSentinelAndErrors) {
    const std::vector<DenseMatrix> f = {DenseMatrix(DenseMatrix::identity(3)), DenseMatrix(3, 3),
                                        DenseMatrix::identity(3)};
    const auto p = accumulate_product(f);
    EXPECT_TRUE(p.is_zero());
    EXPECT_EQ(p.log_spectral_norm().log_norm, kNegInf);

    EXPECT_THROW(accumulate_product(std::span<const DenseMatrix>{}), DimensionError);
    const std::vector<DenseMatrix> bad = {DenseMatrix::identity(3), DenseMatrix::identity(4)};
    EXPECT_THROW(accumulate_product(bad), DimensionError);
}

TEST(MatrixIo, TextAndBinaryRoundTripExactly) {
    auto a = random_matrix(41, 4, 3, 1e-3);
    a(0, 0) = 1e300;
    a(1, 1) = -0.0;
    a(2, 2) = 5e-324;
    for (auto fmt : {MatrixFormat::Text, MatrixFormat::Binary}) {
        std::stringstream buf;
        fmt == MatrixFormat::Text ? write_matrix_text(buf, a) : write_matrix_binary(buf, a);
        const auto back = fmt == MatrixFormat::Text ? read_matrix_text(buf) : read_matrix_binary(buf);
        ASSERT_EQ(back.rows(), a.rows());
        for (std::size_t i = 0; i < a.size(); ++i) {
            EXPECT_EQ(std::bit_cast<std::uint64_t>(back.values()[i]),
                      std::bit_cast<std::uint64_t>(a.values()[i]));
        }
    }
}

TEST(MatrixIo, BinaryLayoutIsLittleEndian) {
    std::stringstream buf;
    write_matrix_binary(buf, DenseMatrix(1, 2, {1.0, -2.0}));
    const std::string bytes = buf.str();
    ASSERT_EQ(bytes.size(), 8u + 16u + 16u);
    EXPECT_EQ(bytes.substr(0, 8), "DMATv001");
    EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1);   // rows, LSB first
    EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 2);  // cols
    // 1.0 = 0x3FF0000000000000 -> last byte 0x3F
    EXPECT_EQ(static_cast<unsigned char>(bytes[31]), 0x3F);
    EXPECT_EQ(static_cast<unsigned char>(bytes[39]), 0xC0);
}

TEST(MatrixIo, TextHeaderAndMalformedInput) {
    std::stringstream ok("dmat 2 2\n1 2\n3 4.5\n");
    EXPECT_EQ(read_matrix_text(ok), DenseMatrix(2, 2, {1, 2, 3, 4.5}));
    std::stringstream short_row("dmat 2 2\n1 2\n3\n");
    EXPECT_THROW(read_matrix_text(short_row), IoError);
    std::stringstream bad_tag("mat 1 1\n1\n");
    EXPECT_THROW(read_matrix_text(bad_tag), IoError);
}
