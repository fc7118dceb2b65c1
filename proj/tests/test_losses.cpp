#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "abrnet/losses.hpp"
#include "abrnet/rng.hpp"
#include "gradcheck.hpp"

using abrnet::ContractViolation;
using abrnet::Rng;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace losses = abrnet::losses;

namespace {

// Independent scalar oracle for the soft similarity: plain loops, term by
// term, no shared code with the implementation.
double soft_similarity_oracle(const MatrixXd& a, const MatrixXd& b) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        double num = 0.0, den = 0.0;
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            num += a(i, j) * b(i, j);
            den += a(i, j) + b(i, j) - a(i, j) * b(i, j);
        }
        if (den < 1e-8) den = 1e-8;
        acc += num / den;
    }
    return acc / static_cast<double>(a.rows());
}

double regression_oracle(const MatrixXd& ph, const MatrixXd& pt, const MatrixXd& y) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        for (Eigen::Index j = 0; j < y.cols(); ++j) {
            const double rh = ph(i, j) - y(i, j);
            const double rt = pt(i, j) - y(i, j);
            acc += rh * rh + rt * rt;
        }
    }
    return acc / static_cast<double>(y.size());
}

double adversarial_oracle(const VectorXd& ps, const VectorXd& pt) {
    double s = 0.0, t = 0.0;
    for (Eigen::Index i = 0; i < ps.size(); ++i) s += std::log(ps(i));
    for (Eigen::Index i = 0; i < pt.size(); ++i) t += std::log(1.0 - pt(i));
    return s / static_cast<double>(ps.size()) + t / static_cast<double>(pt.size());
}

MatrixXd random_unit_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform();
    }
    return m;
}

} // namespace

TEST_CASE("soft_similarity fixed examples") {
    MatrixXd ones = MatrixXd::Ones(1, 2);
    CHECK(losses::soft_similarity(ones, ones) == doctest::Approx(1.0).epsilon(1e-12));

    MatrixXd a(1, 2), b(1, 2);
    a << 1, 0;
    b << 0, 1;
    CHECK(losses::soft_similarity(a, b) == doctest::Approx(0.0).epsilon(1e-12));

    a << 1, 1;
    b << 1, 0;
    // numerator 1, denominator (1+1-1) + (1+0-0) = 2
    CHECK(losses::soft_similarity(a, b) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("soft_similarity all-zero batch hits the denominator guard") {
    MatrixXd z = MatrixXd::Zero(3, 4);
    MatrixXd da, db;
    CHECK(losses::soft_similarity(z, z, &da, &db) == doctest::Approx(0.0));
    CHECK(da.norm() == 0.0);
    CHECK(db.norm() == 0.0);
}

TEST_CASE("soft_similarity matches the scalar oracle on 1000 random inputs") {
    Rng rng(42);
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index batch = 1 + static_cast<Eigen::Index>(rng.index(8));
        const Eigen::Index dim = 1 + static_cast<Eigen::Index>(rng.index(66));
        MatrixXd a = random_unit_matrix(rng, batch, dim);
        MatrixXd b = random_unit_matrix(rng, batch, dim);
        const double got = losses::soft_similarity(a, b);
        const double want = soft_similarity_oracle(a, b);
        CHECK(std::abs(got - want) <= 1e-6 * std::max(1.0, std::abs(want)));
        // Symmetry is exact: both orders evaluate the same sums.
        CHECK(losses::soft_similarity(b, a) == got);
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
    }
}

TEST_CASE("soft_similarity self-similarity") {
    MatrixXd a(1, 4);
    a << 1, 0, 1, 1; // binary with at least one nonzero entry -> exactly 1
    CHECK(losses::soft_similarity(a, a) == doctest::Approx(1.0).epsilon(1e-12));

    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        MatrixXd x = random_unit_matrix(rng, 1, 6);
        x.array() += 1e-3; // keep entries in (0, 1]
        x = x.cwiseMin(1.0);
        double num = x.row(0).dot(x.row(0));
        double den = (2.0 * x.row(0).array() - x.row(0).array().square()).sum();
        CHECK(losses::soft_similarity(x, x) == doctest::Approx(num / den).epsilon(1e-12));
        CHECK(losses::soft_similarity(x, x) <= 1.0);
    }
}

TEST_CASE("soft_similarity gradients match central differences") {
    Rng rng(123);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::Index batch = 1 + static_cast<Eigen::Index>(rng.index(6));
        const Eigen::Index dim = 2 + static_cast<Eigen::Index>(rng.index(16));
        MatrixXd a = random_unit_matrix(rng, batch, dim);
        MatrixXd b = random_unit_matrix(rng, batch, dim);
        MatrixXd da, db;
        losses::soft_similarity(a, b, &da, &db);
        MatrixXd na = gradcheck::numeric_grad([&] { return losses::soft_similarity(a, b); }, a);
        MatrixXd nb = gradcheck::numeric_grad([&] { return losses::soft_similarity(a, b); }, b);
        worst = std::max(worst, gradcheck::max_rel_error(da, na));
        worst = std::max(worst, gradcheck::max_rel_error(db, nb));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("soft_similarity contract errors") {
    MatrixXd a = MatrixXd::Ones(2, 3), b = MatrixXd::Ones(2, 4);
    CHECK_THROWS_AS(losses::soft_similarity(a, b), ContractViolation);
    MatrixXd empty;
    CHECK_THROWS_AS(losses::soft_similarity(empty, empty), ContractViolation);
}

TEST_CASE("regression_loss fixed examples") {
    MatrixXd y(1, 2);
    y << 3.0, -2.0;
    CHECK(losses::regression_loss(y, y, y) == doctest::Approx(0.0));

    MatrixXd shifted = y;
    shifted(0, 0) += 1.0; // label + (1, 0)
    CHECK(losses::regression_loss(shifted, y, y) == doctest::Approx(0.5).epsilon(1e-12));

    MatrixXd both = y;
    both.array() += 1.0; // label + (1, 1) through both heads
    CHECK(losses::regression_loss(both, both, y) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("regression_loss quadratic shift identity at pred == label") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::Index batch = 1 + static_cast<Eigen::Index>(rng.index(16));
        MatrixXd y(batch, 2);
        for (Eigen::Index i = 0; i < batch; ++i) {
            y(i, 0) = rng.uniform(-10, 10);
            y(i, 1) = rng.uniform(-10, 10);
        }
        Eigen::RowVector2d c(rng.uniform(-2, 2), rng.uniform(-2, 2));
        MatrixXd pred = y.rowwise() + c;
        const double loss = losses::regression_loss(pred, pred, y);
        CHECK(loss == doctest::Approx(c.squaredNorm()).epsilon(1e-10));
        CHECK(loss >= 0.0);
    }
}

TEST_CASE("regression_loss matches oracle and gradients on random input") {
    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index batch = 1 + static_cast<Eigen::Index>(rng.index(8));
        MatrixXd ph(batch, 2), pt(batch, 2), y(batch, 2);
        for (Eigen::Index i = 0; i < batch; ++i) {
            for (int j = 0; j < 2; ++j) {
                ph(i, j) = rng.uniform(-5, 5);
                pt(i, j) = rng.uniform(-5, 5);
                y(i, j) = rng.uniform(-5, 5);
            }
        }
        const double got = losses::regression_loss(ph, pt, y);
        const double want = regression_oracle(ph, pt, y);
        CHECK(std::abs(got - want) <= 1e-6 * std::max(1.0, std::abs(want)));
    }

    MatrixXd ph(3, 2), pt(3, 2), y(3, 2);
    Rng r2(3);
    for (Eigen::Index i = 0; i < 3; ++i) {
        for (int j = 0; j < 2; ++j) {
            ph(i, j) = r2.uniform(-2, 2);
            pt(i, j) = r2.uniform(-2, 2);
            y(i, j) = r2.uniform(-2, 2);
        }
    }
    MatrixXd dh, dt;
    losses::regression_loss(ph, pt, y, &dh, &dt);
    MatrixXd nh = gradcheck::numeric_grad([&] { return losses::regression_loss(ph, pt, y); }, ph);
    MatrixXd nt = gradcheck::numeric_grad([&] { return losses::regression_loss(ph, pt, y); }, pt);
    CHECK(gradcheck::max_rel_error(dh, nh) < 1e-6);
    CHECK(gradcheck::max_rel_error(dt, nt) < 1e-6);

    MatrixXd bad = MatrixXd::Zero(2, 3);
    CHECK_THROWS_AS(losses::regression_loss(bad, pt, y), ContractViolation);
}

TEST_CASE("adversarial_loss fixed examples and bounds") {
    VectorXd half = VectorXd::Constant(1, 0.5);
    CHECK(losses::adversarial_loss(half, half) ==
          doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));

    VectorXd ps = VectorXd::Constant(1, 0.9);
    VectorXd pt = VectorXd::Constant(1, 0.2);
    CHECK(losses::adversarial_loss(ps, pt) ==
          doctest::Approx(std::log(0.9) + std::log(0.8)).epsilon(1e-12));

    // Perfect discriminator approaches 0 from below.
    VectorXd near1 = VectorXd::Constant(4, 1.0 - 1e-7);
    VectorXd near0 = VectorXd::Constant(4, 1e-7);
    const double near_perfect = losses::adversarial_loss(near1, near0);
    CHECK(near_perfect < 0.0);
    CHECK(near_perfect > -1e-5);

    Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const Eigen::Index ns = 1 + static_cast<Eigen::Index>(rng.index(6));
        const Eigen::Index nt = 1 + static_cast<Eigen::Index>(rng.index(6));
        VectorXd s(ns), t(nt);
        for (Eigen::Index i = 0; i < ns; ++i) s(i) = rng.uniform(1e-6, 1.0 - 1e-6);
        for (Eigen::Index i = 0; i < nt; ++i) t(i) = rng.uniform(1e-6, 1.0 - 1e-6);
        const double got = losses::adversarial_loss(s, t);
        CHECK(got <= 0.0);
        CHECK(std::abs(got - adversarial_oracle(s, t)) <=
              1e-6 * std::max(1.0, std::abs(got)));
    }
}

TEST_CASE("adversarial_loss gradient and contract") {
    Rng rng(17);
    VectorXd s(5), t(4);
    for (Eigen::Index i = 0; i < 5; ++i) s(i) = rng.uniform(0.1, 0.9);
    for (Eigen::Index i = 0; i < 4; ++i) t(i) = rng.uniform(0.1, 0.9);
    VectorXd gs, gt;
    losses::adversarial_loss(s, t, &gs, &gt);
    MatrixXd sm = s, tm = t;
    MatrixXd ns = gradcheck::numeric_grad(
        [&] { return losses::adversarial_loss(sm.col(0), tm.col(0)); }, sm);
    MatrixXd nt = gradcheck::numeric_grad(
        [&] { return losses::adversarial_loss(sm.col(0), tm.col(0)); }, tm);
    CHECK(gradcheck::max_rel_error(MatrixXd(gs), ns) < 1e-6);
    CHECK(gradcheck::max_rel_error(MatrixXd(gt), nt) < 1e-6);

    VectorXd bad = VectorXd::Constant(1, 1.0);
    CHECK_THROWS_AS(losses::adversarial_loss(bad, t), ContractViolation);
    bad(0) = 0.0;
    CHECK_THROWS_AS(losses::adversarial_loss(s, bad), ContractViolation);
    bad(0) = std::nan("");
    CHECK_THROWS_AS(losses::adversarial_loss(bad, t), ContractViolation);
}

TEST_CASE("loss call counters accumulate and reset") {
    losses::reset_call_counters();
    MatrixXd a = MatrixXd::Constant(1, 2, 0.5);
    losses::soft_similarity(a, a);
    losses::soft_similarity(a, a);
    MatrixXd y = MatrixXd::Zero(1, 2);
    losses::regression_loss(y, y, y);
    auto counts = losses::call_counters();
    CHECK(counts.soft_similarity == 2);
    CHECK(counts.regression_loss == 1);
    CHECK(counts.adversarial_loss == 0);
    losses::reset_call_counters();
    CHECK(losses::call_counters().soft_similarity == 0);
}
