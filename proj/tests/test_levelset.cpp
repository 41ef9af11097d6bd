#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "cyclevib/data/levelset.hpp"
#include "support/oracles.hpp"

using namespace cyclevib;
using nd::Tensor;

namespace {

data::LevelSetSpec small_spec(std::size_t n = 500, std::uint64_t seed = 4) {
  data::LevelSetSpec s;
  s.n_points = n;
  s.seed = seed;
  return s;
}

// Independent evaluation of the rotated quadratic form.
double reference_property(const std::vector<double>& p, double a, double b, double c, double deg) {
  const double t = deg * M_PI / 180.0;
  const double r1 = std::cos(t) * p[0] + std::sin(t) * p[1];
  const double r2 = -std::sin(t) * p[0] + std::cos(t) * p[1];
  double v = r1 * r1 / (a * a) + r2 * r2 / (b * b);
  if (p.size() == 3) v += p[2] * p[2] / (c * c);
  return v;
}

// Least squares min |M x - (p - b)| through the normal equations, solved by
// Gaussian elimination.
std::vector<double> least_squares(const Tensor& m, const std::vector<double>& rhs) {
  const std::size_t d = m.cols();
  oracle::Matrix a(d, std::vector<double>(d + 1, 0.0));
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j)
      for (std::size_t r = 0; r < m.rows(); ++r) a[i][j] += m(r, i) * m(r, j);
    for (std::size_t r = 0; r < m.rows(); ++r) a[i][d] += m(r, i) * rhs[r];
  }
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t r = c + 1; r < d; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k <= d; ++k) a[r][k] -= f * a[c][k];
    }
  }
  std::vector<double> x(d);
  for (std::size_t c = d; c-- > 0;) {
    double s = a[c][d];
    for (std::size_t k = c + 1; k < d; ++k) s -= a[c][k] * x[k];
    x[c] = s / a[c][c];
  }
  return x;
}

}  // namespace

TEST_SUITE("levelset") {
  TEST_CASE("property at the origin is zero") {
    const double o[] = {0.0, 0.0};
    CHECK(data::property_value(o, data::LevelSetSpec::ellipse()) == 0.0);
  }

  TEST_CASE("diagonal point rotates onto the major axis endpoint") {
    const double p[] = {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)};
    const double hand = reference_property({p[0], p[1]}, 1.0, 0.5, 0.75, 45.0);
    CHECK(hand == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(data::property_value(p, data::LevelSetSpec::ellipse()) == doctest::Approx(hand).epsilon(1e-14));
  }

  TEST_CASE("unrotated circle is rotation invariant") {
    data::LevelSetSpec s;
    s.rotation_deg = 0.0;
    s.semi_axes = {0.8, 0.8};
    std::mt19937_64 gen(2);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 20; ++i) {
      const double p[] = {u(gen), u(gen)};
      CHECK(data::property_value(p, s) == doctest::Approx((p[0] * p[0] + p[1] * p[1]) / 0.64).epsilon(1e-13));
    }
  }

  TEST_CASE("property dimension mismatch") {
    const double p[] = {0.1, 0.2, 0.3};
    CHECK_THROWS_AS(data::property_value(p, data::LevelSetSpec::ellipse()), nd::DimensionError);
  }

  TEST_CASE("ellipsoid property matches the reference form") {
    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 20; ++i) {
      const std::vector<double> p = {u(gen), u(gen), u(gen)};
      CHECK(data::property_value(p, data::LevelSetSpec::ellipsoid()) ==
            doctest::Approx(reference_property(p, 1.0, 0.5, 0.75, 45.0)).epsilon(1e-13));
    }
  }

  TEST_CASE("zero property noise gives the exact property") {
    auto s = small_spec();
    s.property_noise_std = 0.0;
    const auto ds = data::generate(s);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      CHECK(ds.Y_original(i, 0) == data::property_value(ds.X_original.row(i), s));
    }
  }

  TEST_CASE("original inputs lie in the unit box") {
    for (int dim : {2, 3}) {
      auto s = small_spec(2000);
      s.dim = dim;
      const auto ds = data::generate(s);
      CHECK(ds.X_original.cols() == static_cast<std::size_t>(dim));
      for (double v : ds.X_original.values()) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
      }
    }
  }

  TEST_CASE("property mean agrees with an independent Monte Carlo estimate") {
    data::LevelSetSpec s;
    s.n_points = 10000;
    const auto ds = data::generate(s);
    std::vector<double> y(ds.Y_original.values());
    const double n = static_cast<double>(y.size());
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    const double se_data = oracle::sample_std(y) / std::sqrt(n);

    std::mt19937_64 gen(12345);
    std::uniform_real_distribution<double> u(-1, 1);
    const std::size_t m = 2'000'000;
    double mc = 0.0, mc2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double v = reference_property({u(gen), u(gen)}, 1.0, 0.5, 0.75, 45.0);
      mc += v;
      mc2 += v * v;
    }
    mc /= static_cast<double>(m);
    const double se_mc = std::sqrt((mc2 / static_cast<double>(m) - mc * mc) / static_cast<double>(m));
    CHECK(std::abs(mean - mc) <= 3.0 * std::sqrt(se_data * se_data + se_mc * se_mc));
    // closed form over the square: (1/3)/a^2 + (1/3)/b^2
    CHECK(mc == doctest::Approx(5.0 / 3.0).epsilon(2e-3));
  }

  TEST_CASE("too few points is a configuration error") {
    auto s = small_spec(9);
    CHECK_THROWS_AS(data::generate(s), data::ConfigError);
    s = small_spec();
    s.dim = 4;
    CHECK_THROWS_AS(data::generate(s), data::ConfigError);
    s = small_spec();
    s.semi_axes = {1.0, -0.5};
    CHECK_THROWS_AS(data::generate(s), data::ConfigError);
  }

  TEST_CASE("unlift inverts lift") {
    const auto lift = data::make_lift_maps(3, 17);
    std::mt19937_64 gen(1);
    const Tensor x = oracle::away_from_zero(gen, 20, 3);
    const Tensor back = data::unlift(data::lift_x(x, lift), lift);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-10);
  }

  TEST_CASE("unlift of the bias alone is the origin") {
    const auto lift = data::make_lift_maps(2, 5);
    const Tensor origin = data::unlift(lift.x_bias.reshaped({1, 5}), lift);
    CHECK(std::abs(origin[0]) < 1e-14);
    CHECK(std::abs(origin[1]) < 1e-14);
  }

  TEST_CASE("unlift discards components orthogonal to the column space") {
    const auto lift = data::make_lift_maps(2, 23);
    const Tensor& m = lift.x_matrix;
    const std::vector<double> x = {0.4, -0.7};
    // v = e0 minus its projection onto the columns
    std::vector<double> v(5, 0.0);
    v[0] = 1.0;
    for (std::size_t c = 0; c < 2; ++c) {
      for (std::size_t r = 0; r < 5; ++r) v[r] -= m(0, c) * m(r, c);
    }
    Tensor p({1, 5});
    for (std::size_t r = 0; r < 5; ++r) p[r] = m(r, 0) * x[0] + m(r, 1) * x[1] + lift.x_bias[r] + v[r];
    const Tensor got = data::unlift(p, lift);
    std::vector<double> rhs(5);
    for (std::size_t r = 0; r < 5; ++r) rhs[r] = p[r] - lift.x_bias[r];
    const auto ls = least_squares(m, rhs);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(got[i] == doctest::Approx(ls[i]).epsilon(1e-10));
      CHECK(got[i] == doctest::Approx(x[i]).epsilon(1e-10));
    }
  }

  TEST_CASE("lift columns are orthonormal") {
    for (int dim : {1, 2, 3}) {
      const auto lift = data::make_lift_maps(dim, 99);
      const Tensor& m = dim == 1 ? lift.y_matrix : lift.x_matrix;
      for (std::size_t i = 0; i < m.cols(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
          double dot = 0.0;
          for (std::size_t r = 0; r < m.rows(); ++r) dot += m(r, i) * m(r, j);
          CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-12);
        }
      }
    }
  }

  TEST_CASE("y unlift inverts y lift") {
    const auto lift = data::make_lift_maps(2, 3);
    const Tensor y = Tensor::matrix(3, 1, {0.1, 1.7, 4.2});
    const Tensor back = data::unlift_y(data::lift_y(y, lift), lift);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(back[i] - y[i]) < 1e-10);
  }

  TEST_CASE("dataset arrays are consistent") {
    const auto ds = data::generate(small_spec(1000));
    CHECK(ds.X.rows() == 1000);
    CHECK(ds.Y.rows() == 1000);
    CHECK(ds.X_original.rows() == 1000);
    CHECK(ds.Y_original.rows() == 1000);
    CHECK(ds.X.cols() == data::kLiftedXDim);
    CHECK(ds.Y.cols() == data::kLiftedYDim);
    CHECK(ds.train_index.size() == 900);
    CHECK(ds.test_index.size() == 100);
    std::set<std::size_t> all(ds.train_index.begin(), ds.train_index.end());
    all.insert(ds.test_index.begin(), ds.test_index.end());
    CHECK(all.size() == 1000);
    CHECK(*all.rbegin() == 999);
  }

  TEST_CASE("X rows are the lift of the original rows") {
    const auto ds = data::generate(small_spec(200));
    CHECK(ds.X == data::lift_x(ds.X_original, ds.lift));
    for (std::size_t i = 0; i < 200; ++i) {
      for (std::size_t r = 0; r < 5; ++r) {
        double v = ds.lift.x_bias[r];
        for (std::size_t c = 0; c < 2; ++c) v += ds.lift.x_matrix(r, c) * ds.X_original(i, c);
        CHECK(ds.X(i, r) == doctest::Approx(v).epsilon(1e-14));
      }
    }
  }

  TEST_CASE("save and load round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "cyclevib_levelset_test";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    auto s = small_spec(50);
    s.dim = 3;
    const auto ds = data::generate(s);
    data::save_dataset(ds, dir / "d");
    std::ifstream csv(dir / "d.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "x0,x1,x2,x3,x4,y0,y1,y2,xo0,xo1,xo2,yo0");
    for (const char* name : {"d", "d.csv", "d.json"}) {
      const auto back = data::load_dataset(dir / name);
      CHECK(back.X == ds.X);
      CHECK(back.Y == ds.Y);
      CHECK(back.X_original == ds.X_original);
      CHECK(back.Y_original == ds.Y_original);
      CHECK(back.lift.x_matrix == ds.lift.x_matrix);
      CHECK(back.lift.y_bias == ds.lift.y_bias);
      CHECK(back.train_index == ds.train_index);
      CHECK(back.test_index == ds.test_index);
      CHECK(back.spec.dim == 3);
    }
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("unwritable and missing paths are I/O errors naming the path") {
    const auto ds = data::generate(small_spec(20));
    try {
      data::save_dataset(ds, "/proc/definitely/not/here/d");
      FAIL("expected IoError");
    } catch (const data::IoError& e) {
      CHECK(std::string(e.what()).find("/proc/definitely/not/here") != std::string::npos);
    }
    CHECK_THROWS_AS(data::load_dataset("/nonexistent/dataset"), data::IoError);
  }
}

TEST_SUITE("properties") {
  TEST_CASE("levelset: lifting preserves pairwise distances") {
    for (int dim : {2, 3}) {
      const auto lift = data::make_lift_maps(dim, 31);
      std::mt19937_64 gen(dim);
      const Tensor x = oracle::away_from_zero(gen, 30, static_cast<std::size_t>(dim));
      const Tensor lx = data::lift_x(x, lift);
      for (std::size_t i = 0; i < 30; ++i) {
        for (std::size_t j = i + 1; j < 30; ++j) {
          double d0 = 0.0, d1 = 0.0;
          for (std::size_t c = 0; c < x.cols(); ++c) d0 += std::pow(x(i, c) - x(j, c), 2);
          for (std::size_t c = 0; c < 5; ++c) d1 += std::pow(lx(i, c) - lx(j, c), 2);
          CHECK(std::abs(std::sqrt(d0) - std::sqrt(d1)) < 1e-10);
        }
      }
    }
  }

  TEST_CASE("levelset: same spec and seed give a bit-identical dataset") {
    const auto a = data::generate(small_spec(300, 8));
    const auto b = data::generate(small_spec(300, 8));
    CHECK(a.X == b.X);
    CHECK(a.Y == b.Y);
    CHECK(a.X_original == b.X_original);
    CHECK(a.train_index == b.train_index);
    CHECK_FALSE(a.X == data::generate(small_spec(300, 9)).X);
  }

  TEST_CASE("levelset: noiseless property is re-derivable from the inputs") {
    for (int dim : {2, 3}) {
      auto s = small_spec(300);
      s.dim = dim;
      s.property_noise_std = 0.0;
      const auto ds = data::generate(s);
      for (std::size_t i = 0; i < ds.size(); ++i) {
        CHECK(ds.Y_original(i, 0) == data::property_value(ds.X_original.row(i), s));
      }
    }
  }

  TEST_CASE("levelset: pseudo-inverse reconstructs arbitrary points") {
    const auto lift = data::make_lift_maps(2, 77);
    std::mt19937_64 gen(77);
    const Tensor x = oracle::away_from_zero(gen, 100, 2, 0.0, 25.0);
    const Tensor back = data::unlift(data::lift_x(x, lift), lift);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-10);
  }
}
