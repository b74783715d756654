#include <doctest.h>

#include <cmath>
#include <limits>

#include "cif/alignment.hpp"
#include "cif/training.hpp"
#include "helpers.hpp"

using namespace cif;

namespace {

double sphere(std::span<const double> x) {
  double s = 0;
  for (double v : x) s += v * v;
  return s;
}

double rosenbrock(std::span<const double> x) {
  return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
}

void check_monotone(const CmaResult& r) {
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i].best_value <= r.history[i - 1].best_value);
}

}  // namespace

TEST_SUITE("cmaes") {
  TEST_CASE("sphere") {
    std::vector<double> x0{1.0, -2.0, 0.5, 3.0};
    CmaConfig c;
    c.max_generations = 200;
    c.tol_fun = 0;
    c.tol_x = 0;
    auto r = cma_es_minimize(sphere, x0, 1.0, c);
    CHECK(r.best_value < 1e-8);
    CHECK(r.best_value == sphere(r.best_x));
    check_monotone(r);
  }

  TEST_CASE("Rosenbrock") {
    std::vector<double> x0{-1.2, 1.0};
    CmaConfig c;
    c.max_generations = 500;
    auto r = cma_es_minimize(rosenbrock, x0, 0.5, c);
    CHECK(r.best_value < 1e-4);
    CHECK(r.best_x[0] == doctest::Approx(1.0).epsilon(1e-2));
    check_monotone(r);
  }

  TEST_CASE("default population size") {
    std::vector<double> x0(3, 0.0);
    std::size_t lambda = 0;
    CmaConfig c;
    c.max_generations = 1;
    cma_es_minimize(sphere, x0, 1.0, c, [&](const CmaState& s) { lambda = s.lambda; });
    CHECK(lambda == 7);
  }

  TEST_CASE("seeded runs are identical") {
    std::vector<double> x0{0.3, 0.3};
    CmaConfig c;
    c.seed = 11;
    c.max_generations = 40;
    auto a = cma_es_minimize(rosenbrock, x0, 0.3, c);
    auto b = cma_es_minimize(rosenbrock, x0, 0.3, c);
    CHECK(a.best_x == b.best_x);
    CHECK(a.history.size() == b.history.size());
  }

  TEST_CASE("non-finite values rank last") {
    std::vector<double> x0{2.0, 2.0};
    auto f = [](std::span<const double> x) {
      return x[0] < 0 ? std::numeric_limits<double>::quiet_NaN() : sphere(x);
    };
    CmaConfig c;
    c.max_generations = 100;
    auto r = cma_es_minimize(f, x0, 0.5, c);
    CHECK(std::isfinite(r.best_value));
    CHECK(r.best_x[0] >= 0);
    check_monotone(r);
  }

  TEST_CASE("stopping rules") {
    std::vector<double> x0{1.0, 1.0};
    CmaConfig c;
    c.tol_x = 1e-3;
    auto r = cma_es_minimize(sphere, x0, 1.0, c);
    CHECK(r.stop == CmaStop::TolX);
    auto flat = cma_es_minimize([](std::span<const double>) { return 1.0; }, x0, 1.0, CmaConfig{});
    CHECK(flat.stop == CmaStop::TolFun);
    CHECK(to_string(CmaStop::MaxGenerations) == "max_generations");
  }

  TEST_CASE("covariance stays symmetric positive definite") {
    std::vector<double> x0{-1.2, 1.0};
    CmaConfig c;
    c.max_generations = 60;
    bool ok = true;
    cma_es_minimize(rosenbrock, x0, 0.5, c, [&](const CmaState& s) {
      const double a = s.covariance[0], b = s.covariance[1], d = s.covariance[3];
      ok = ok && b == s.covariance[2] && a > 0 && a * d - b * b > 0;
    });
    CHECK(ok);
  }

  TEST_CASE("argument validation") {
    std::vector<double> empty;
    std::vector<double> x0{1.0};
    CHECK_THROWS_AS(cma_es_minimize(sphere, empty, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(cma_es_minimize(sphere, x0, 0.0), std::invalid_argument);
  }
}

TEST_SUITE("alignment") {
  TEST_CASE("geodesic angle") {
    const Matrix3 id = rotation_matrix({0, 0, 0});
    CHECK(geodesic_angle(id, rotation_matrix({0.3, 0, 0})) == doctest::Approx(0.3));
    CHECK(geodesic_angle(rotation_matrix({0, 0.2, 0}), rotation_matrix({0, -0.5, 0})) == doctest::Approx(0.7));
    CHECK(geodesic_angle(id, rotation_matrix({0, 0, 3.0})) == doctest::Approx(3.0));
  }

  TEST_CASE("uniform random rotations have zero mean trace") {
    Rng rng(1);
    double trace = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      Matrix3 r = rotation_matrix(random_rotation(rng));
      trace += r[0][0] + r[1][1] + r[2][2];
    }
    CHECK(std::abs(trace / n) < 0.03);
  }

  TEST_CASE("rotate_cloud applies R to every point") {
    PointCloud c;
    c.points = {{1, 0, 0}, {0, 1, 0}};
    auto r = rotate_cloud(c, std::array<double, 3>{0, 0, std::acos(-1.0) / 2});
    CHECK(r.points[0][1] == doctest::Approx(1.0));
    CHECK(r.points[1][0] == doctest::Approx(-1.0));
  }

  TEST_CASE("pose objective equals the null-embedding likelihood of the rotated cloud") {
    CifModel<double> model(toy_model_config(2));
    Rng rng(2);
    PointCloud c = testing::random_cloud(30, rng);
    const std::array<double, 3> a{0.4, -1.1, 0.2};
    const double direct = -model.point_loglik(to_tensor<double>(rotate_cloud(c, a)), model.null_embedding()).total.item();
    CHECK(pose_nll(model, c, a) == doctest::Approx(direct).epsilon(1e-12));
  }

  TEST_CASE("align_pose never ends worse than the identity and is reproducible") {
    CifModel<float> model(toy_model_config(3));
    Rng rng(3);
    PointCloud c = testing::random_cloud(40, rng);
    AlignConfig ac;
    ac.restarts = 2;
    ac.max_generations = 30;
    ac.seed = 9;
    auto a = align_pose(c, model, ac);
    auto b = align_pose(c, model, ac);
    CHECK(a.nll <= a.initial_nll);
    CHECK(a.angles == b.angles);
    CHECK(a.restarts.size() == 2);
    CHECK(a.restarts[0].start == std::array<double, 3>{0, 0, 0});
    CHECK(a.aligned.points == rotate_cloud(c, a.angles).points);
    for (const auto& r : a.restarts)
      for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i].best_value <= r.history[i - 1].best_value);
  }

  TEST_CASE("align_pose rejects empty input") {
    CifModel<float> model(toy_model_config(3));
    CHECK_THROWS_AS(align_pose(PointCloud{}, model), DataError);
  }
}
