#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cyclevib/data/levelset.hpp"
#include "cyclevib/ndmath/ops.hpp"
#include "cyclevib/objectives/objectives.hpp"
#include "support/gradient_suite.hpp"
#include "support/oracles.hpp"

using namespace cyclevib;
using namespace cyclevib::objectives;
using nd::Tape;
using nd::Tensor;
using nd::Var;

namespace {

double value_of(const Var& v) { return v.value().item(); }

oracle::Matrix rows_of(const Tensor& t) {
  oracle::Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  return m;
}

}  // namespace

TEST_SUITE("objectives") {
  TEST_CASE("compression of zero means is zero") {
    Tape tape;
    CHECK(value_of(sparse_compression(tape.constant(Tensor({6, 4})))) == 0.0);
  }

  TEST_CASE("compression of the alternating two-dim batch") {
    const Tensor mu = Tensor::matrix(4, 2, {1, 0, -1, 0, 1, 0, -1, 0});
    Tape tape;
    const double got = value_of(sparse_compression(tape.constant(mu)));
    CHECK(got == doctest::Approx(oracle::compression_by_determinant(rows_of(mu))).epsilon(1e-14));
    CHECK(got == doctest::Approx(0.346574).epsilon(1e-6));
  }

  TEST_CASE("compression of an empty batch is a contract error") {
    Tape tape;
    CHECK_THROWS_AS(sparse_compression(tape.constant(Tensor({0, 3}))), nd::ContractError);
  }

  TEST_CASE("standard KL at the prior is zero") {
    Tape tape;
    CHECK(value_of(standard_kl(tape.constant(Tensor({5, 3})), tape.constant(Tensor({3})))) == doctest::Approx(0.0));
  }

  TEST_CASE("standard KL of a unit shift") {
    Tape tape;
    const Tensor mu = Tensor::matrix(1, 3, {1, 0, 0});
    CHECK(value_of(standard_kl(tape.constant(mu), tape.constant(Tensor({3})))) == doctest::Approx(0.5));
  }

  TEST_CASE("standard KL is non-negative") {
    std::mt19937_64 gen(4);
    for (int i = 0; i < 50; ++i) {
      Tape tape;
      const double kl = value_of(standard_kl(tape.constant(oracle::away_from_zero(gen, 7, 4)),
                                             tape.constant(oracle::away_from_zero(gen, 1, 4, 0.0, 2.0))));
      CHECK(kl >= 0.0);
    }
  }

  TEST_CASE("gaussian NLL examples") {
    Tape tape;
    const Var t = tape.constant(Tensor::matrix(1, 2, {0, 0}));
    CHECK(value_of(gaussian_nll(t, t)) == 0.0);
    CHECK(value_of(gaussian_nll(t, tape.constant(Tensor::matrix(1, 2, {3, 4})))) == doctest::Approx(12.5));
    std::mt19937_64 gen(1);
    const Tensor a = oracle::away_from_zero(gen, 5, 3);
    const Tensor b = oracle::away_from_zero(gen, 5, 3);
    Tensor doubled = b;
    for (std::size_t i = 0; i < b.size(); ++i) doubled[i] = a[i] + 2.0 * (b[i] - a[i]);
    const double base = value_of(gaussian_nll(tape.constant(a), tape.constant(b)));
    CHECK(value_of(gaussian_nll(tape.constant(a), tape.constant(doubled))) == doctest::Approx(4.0 * base));
    CHECK(base > 0.0);
    CHECK_THROWS_AS(gaussian_nll(t, tape.constant(Tensor({1, 3}))), nd::DimensionError);
  }

  TEST_CASE("cycle terms vanish for equal pairs") {
    std::mt19937_64 gen(2);
    const Tensor y = oracle::away_from_zero(gen, 4, 3);
    Tape tape;
    const Var v = tape.constant(y);
    const CycleTerms c = cycle_loss(v, v, v, v, v, v);
    CHECK(value_of(c.recon) == 0.0);
    CHECK(value_of(c.sample) == 0.0);
    CHECK(value_of(c.fixed) == 0.0);
  }

  TEST_CASE("cycle terms on a single 3-4-5 row") {
    Tape tape;
    const Var a = tape.constant(Tensor::matrix(1, 3, {1, 1, 1}));
    const Var b = tape.constant(Tensor::matrix(1, 3, {4, 5, 1}));
    const CycleTerms c = cycle_loss(a, b, a, a, a, a);
    CHECK(value_of(c.recon) == doctest::Approx(5.0));
    CHECK(value_of(c.sample) == 0.0);
    CHECK(value_of(c.fixed) == 0.0);
  }

  TEST_CASE("cycle terms are symmetric within each pair") {
    std::mt19937_64 gen(3);
    std::vector<Tensor> ts;
    for (int i = 0; i < 6; ++i) ts.push_back(oracle::away_from_zero(gen, 5, 3));
    Tape tape;
    std::vector<Var> v;
    for (const auto& t : ts) v.push_back(tape.constant(t));
    const CycleTerms a = cycle_loss(v[0], v[1], v[2], v[3], v[4], v[5]);
    const CycleTerms b = cycle_loss(v[1], v[0], v[3], v[2], v[5], v[4]);
    CHECK(value_of(a.recon) == value_of(b.recon));
    CHECK(value_of(a.sample) == value_of(b.sample));
    CHECK(value_of(a.fixed) == value_of(b.fixed));
  }

  TEST_CASE("cycle pair shape mismatch") {
    Tape tape;
    const Var a = tape.constant(Tensor({2, 3}));
    const Var b = tape.constant(Tensor({3, 3}));
    CHECK_THROWS_AS(cycle_loss(a, b, a, a, a, a), nd::DimensionError);
  }

  TEST_CASE("total of zero terms is zero") {
    Tape tape;
    const Var z = tape.constant(Tensor::scalar(0.0));
    LossComponents parts{z, z, z, std::nullopt};
    CHECK(value_of(total_loss(parts, LossWeights{1.0, 0.0})) == 0.0);
  }

  TEST_CASE("total increases strictly with the fixed-Z0 term when beta > 0") {
    LossReport r{0.3, 0.2, 0.1, 0.05, 0.04, 0.0, 0.0};
    const LossWeights w{2.0, 0.5};
    double prev = total_loss(r, w);
    for (int i = 1; i <= 5; ++i) {
      r.cycle_fixed = 0.1 * i;
      const double now = total_loss(r, w);
      CHECK(now > prev);
      prev = now;
    }
  }

  TEST_CASE("assembled total matches a single-expression evaluation") {
    std::mt19937_64 gen(10);
    const Tensor mu = oracle::away_from_zero(gen, 6, 8);
    const Tensor x = oracle::away_from_zero(gen, 6, 5), xh = oracle::away_from_zero(gen, 6, 5);
    const Tensor y = oracle::away_from_zero(gen, 6, 3), yh = oracle::away_from_zero(gen, 6, 3);
    std::vector<Tensor> c;
    for (int i = 0; i < 6; ++i) c.push_back(oracle::away_from_zero(gen, 6, 3));
    const double lambda = 3.0, beta = 0.7;

    Tape tape;
    LossComponents parts;
    parts.compression = sparse_compression(tape.constant(mu));
    parts.nll_x = gaussian_nll(tape.constant(x), tape.constant(xh));
    parts.nll_y = gaussian_nll(tape.constant(y), tape.constant(yh));
    parts.cycle = cycle_loss(tape.constant(c[0]), tape.constant(c[1]), tape.constant(c[2]), tape.constant(c[3]),
                             tape.constant(c[4]), tape.constant(c[5]));
    const double got = value_of(total_loss(parts, LossWeights{lambda, beta}));

    // straight-line evaluation
    const double n = 6.0;
    double comp = 0.0;
    for (std::size_t j = 0; j < 8; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < 6; ++i) m += mu(i, j) * mu(i, j);
      comp += 0.5 * std::log(1.0 + m / n);
    }
    auto nll = [&](const Tensor& a, const Tensor& b) {
      double s = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) s += 0.5 * (a[i] - b[i]) * (a[i] - b[i]);
      return s / n;
    };
    auto dist = [&](const Tensor& a, const Tensor& b) {
      double s = 0.0;
      for (std::size_t i = 0; i < 6; ++i) {
        double r = 0.0;
        for (std::size_t k = 0; k < 3; ++k) r += (a(i, k) - b(i, k)) * (a(i, k) - b(i, k));
        s += std::sqrt(r);
      }
      return s / n;
    };
    const double expected =
        comp - lambda * (-nll(x, xh) - nll(y, yh) - beta * (dist(c[0], c[1]) + dist(c[2], c[3]) + dist(c[4], c[5])));
    CHECK(got == doctest::Approx(expected).epsilon(1e-12));
    const LossReport rep = make_report(parts, total_loss(parts, LossWeights{lambda, beta}));
    CHECK(total_loss(rep, LossWeights{lambda, beta}) == doctest::Approx(rep.total).epsilon(1e-12));
  }

  TEST_CASE("non-finite components name the term") {
    LossReport r;
    r.nll_y = std::nan("");
    try {
      total_loss(r, LossWeights{});
      FAIL("expected NumericError");
    } catch (const nd::NumericError& e) {
      CHECK(std::string(e.what()).find("nll_y") != std::string::npos);
    }
    Tape tape;
    const Var big = tape.constant(Tensor::scalar(1e308));
    LossComponents parts{big, big, big, std::nullopt};
    CHECK_THROWS_AS(total_loss(parts, LossWeights{10.0, 0.0}), nd::NumericError);
  }

  TEST_CASE("weights validation") {
    CHECK_THROWS_AS((LossWeights{0.0, 1.0}).validate(), data::ConfigError);
    CHECK_THROWS_AS((LossWeights{1.0, -0.1}).validate(), data::ConfigError);
    CHECK_NOTHROW((LossWeights{1.0, 0.0}).validate());
  }

  TEST_CASE("training-curve row layout") {
    const auto& h = loss_csv_header();
    REQUIRE(h.size() == 8);
    CHECK(h.front() == "step");
    CHECK(h.back() == "total");
    const LossReport r{1, 2, 3, 4, 5, 6, 7};
    CHECK(loss_csv_row(12, r) == "12,1,2,3,4,5,6,7");
  }
}

TEST_SUITE("properties") {
  TEST_CASE("objectives: compression equals half log det over 100 random batches") {
    std::mt19937_64 gen(2024);
    std::uniform_int_distribution<std::size_t> dims(1, 8), rows(1, 40);
    std::normal_distribution<double> nrm(0.0, 2.0);
    for (int b = 0; b < 100; ++b) {
      const std::size_t d = dims(gen), n = rows(gen);
      Tensor mu({n, d});
      for (auto& v : mu.data()) v = nrm(gen);
      Tape tape;
      const double got = value_of(sparse_compression(tape.constant(mu)));
      CHECK(std::abs(got - oracle::compression_by_determinant(rows_of(mu))) < 1e-10);
    }
  }

  TEST_CASE("objectives: every term matches central differences") {
    for (const auto& r : gradsuite::run_cases(gradsuite::objective_cases(), 50)) {
      INFO(r.name);
      CHECK(r.worst < 1e-4);
    }
  }

  TEST_CASE("objectives: beta = 0 with standard KL is the beta-VAE objective") {
    std::mt19937_64 gen(77);
    const Tensor mu = oracle::away_from_zero(gen, 6, 8);
    const Tensor ln = oracle::away_from_zero(gen, 1, 8, 0.0, 0.5);
    const Tensor x = oracle::away_from_zero(gen, 6, 5), xh = oracle::away_from_zero(gen, 6, 5);
    const Tensor y = oracle::away_from_zero(gen, 6, 3), yh = oracle::away_from_zero(gen, 6, 3);
    Tape tape;
    LossComponents parts;
    parts.compression = standard_kl(tape.constant(mu), tape.constant(ln));
    parts.nll_x = gaussian_nll(tape.constant(x), tape.constant(xh));
    parts.nll_y = gaussian_nll(tape.constant(y), tape.constant(yh));
    const Var c = tape.constant(oracle::away_from_zero(gen, 6, 3));
    const Var d = tape.constant(oracle::away_from_zero(gen, 6, 3));
    parts.cycle = cycle_loss(c, d, c, d, c, d);
    const double lambda = 4.0;
    const double total = value_of(total_loss(parts, LossWeights{lambda, 0.0}));

    // beta-VAE: KL + lambda * (reconstruction + prediction NLL), coded directly
    double kl = 0.0;
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 8; ++j) {
        const double s = std::exp(ln[j]);
        kl += 0.5 * (mu(i, j) * mu(i, j) + s * s - 1.0 - 2.0 * ln[j]);
      }
    }
    kl /= 6.0;
    double nx = 0.0, ny = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) nx += 0.5 * (x[i] - xh[i]) * (x[i] - xh[i]);
    for (std::size_t i = 0; i < y.size(); ++i) ny += 0.5 * (y[i] - yh[i]) * (y[i] - yh[i]);
    nx /= 6.0;
    ny /= 6.0;
    CHECK(value_of(parts.compression) == doctest::Approx(kl).epsilon(1e-12));
    CHECK(value_of(parts.nll_x) == doctest::Approx(nx).epsilon(1e-12));
    CHECK(value_of(parts.nll_y) == doctest::Approx(ny).epsilon(1e-12));
    CHECK(total == doctest::Approx(kl + lambda * (nx + ny)).epsilon(1e-12));
  }

  TEST_CASE("objectives: terms are invariant under batch row permutation") {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor mu = oracle::away_from_zero(gen, 9, 4);
      const Tensor ln = oracle::away_from_zero(gen, 1, 4, 0.0, 0.5);
      const Tensor a = oracle::away_from_zero(gen, 9, 3), b = oracle::away_from_zero(gen, 9, 3);
      std::vector<std::size_t> idx(9);
      for (std::size_t i = 0; i < 9; ++i) idx[i] = i;
      std::shuffle(idx.begin(), idx.end(), gen);
      const Tensor mup = nd::take_rows(mu, idx), ap = nd::take_rows(a, idx), bp = nd::take_rows(b, idx);
      Tape tape;
      CHECK(value_of(sparse_compression(tape.constant(mu))) ==
            doctest::Approx(value_of(sparse_compression(tape.constant(mup)))).epsilon(1e-14));
      CHECK(value_of(standard_kl(tape.constant(mu), tape.constant(ln))) ==
            doctest::Approx(value_of(standard_kl(tape.constant(mup), tape.constant(ln)))).epsilon(1e-14));
      CHECK(value_of(gaussian_nll(tape.constant(a), tape.constant(b))) ==
            doctest::Approx(value_of(gaussian_nll(tape.constant(ap), tape.constant(bp)))).epsilon(1e-14));
      CHECK(value_of(mean_row_distance(tape.constant(a), tape.constant(b))) ==
            doctest::Approx(value_of(mean_row_distance(tape.constant(ap), tape.constant(bp)))).epsilon(1e-14));
    }
  }

  TEST_CASE("objectives: reported totals follow the sign convention") {
    std::mt19937_64 gen(6);
    for (int i = 0; i < 20; ++i) {
      std::uniform_real_distribution<double> u(0.0, 3.0);
      const LossReport r{u(gen), u(gen), u(gen), u(gen), u(gen), u(gen), 0.0};
      const LossWeights w{u(gen) + 0.1, u(gen)};
      const double expected =
          r.compression - w.lambda * (-r.nll_x - r.nll_y - w.beta * (r.cycle_recon + r.cycle_sample + r.cycle_fixed));
      CHECK(total_loss(r, w) == doctest::Approx(expected).epsilon(1e-14));
    }
  }
}
