#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "iqscc/barrier.hpp"
#include "test_support.hpp"

using namespace iqscc;
namespace bar = iqscc::barrier;

namespace {

// maximize log(1 + tr(G V)) subject to tr(V) <= P, V >= 0.
// Functionals: w0 = tr V, w1 = tr(G V). Optimum log(1 + P lambda_max(G)).
struct LogGain {
  double power = 1.0;
  double objective(const Eigen::VectorXd& w) const { return -std::log1p(w(1)); }
  void objective_derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
    g(1) += -1.0 / (1.0 + w(1));
    h(1, 1) += 1.0 / ((1.0 + w(1)) * (1.0 + w(1)));
  }
  double barrier(const Eigen::VectorXd& w) const {
    const double s = power - w(0);
    return s > 0.0 ? -std::log(s) : std::numeric_limits<double>::infinity();
  }
  void barrier_derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
    const double s = power - w(0);
    g(0) += 1.0 / s;
    h(0, 0) += 1.0 / (s * s);
  }
  double barrier_degree() const { return 1.0; }
};

// One PSD block plus a free scalar x in (0, 5): minimize (x - 3)^2 - tr(C V), tr V <= 1.
struct Mixed {
  double objective(const Eigen::VectorXd& w) const { return (w(2) - 3.0) * (w(2) - 3.0) - w(1); }
  void objective_derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
    g(1) += -1.0;
    g(2) += 2.0 * (w(2) - 3.0);
    h(2, 2) += 2.0;
  }
  double barrier(const Eigen::VectorXd& w) const {
    if (!(w(0) < 1.0 && w(2) > 0.0 && w(2) < 5.0)) return std::numeric_limits<double>::infinity();
    return -std::log(1.0 - w(0)) - std::log(w(2)) - std::log(5.0 - w(2));
  }
  void barrier_derivatives(const Eigen::VectorXd& w, Eigen::VectorXd& g, Eigen::MatrixXd& h) const {
    const double s = 1.0 - w(0), x = w(2), r = 5.0 - x;
    g(0) += 1.0 / s;
    h(0, 0) += 1.0 / (s * s);
    g(2) += -1.0 / x + 1.0 / r;
    h(2, 2) += 1.0 / (x * x) + 1.0 / (r * r);
  }
  double barrier_degree() const { return 3.0; }
};

static_assert(bar::Problem<LogGain>);
static_assert(bar::Problem<Mixed>);

CMatrix random_hermitian_psd(std::mt19937_64& rng, int n) {
  const CMatrix a = testing_support::random_cmatrix(rng, n, n);
  return a * a.adjoint();
}

}  // namespace

TEST(Barrier, LogGainReachesPrincipalEigenvalue) {
  std::mt19937_64 rng(1);
  for (int n : {2, 4, 8}) {
    const CMatrix g = random_hermitian_psd(rng, n);
    const double lmax = principal_eigenpair(g).value;
    LogGain prob;
    prob.power = 2.0;
    bar::Functionals f{{CMatrix::Identity(n, n), g}};
    bar::Point start{{CMatrix::Identity(n, n) * (0.5 / n)}, Eigen::VectorXd(0)};
    bar::Options opt;
    const bar::Result r = bar::minimize(prob, f, start, opt);
    ASSERT_EQ(r.status, bar::Status::optimal);
    const double best = -std::log1p(prob.power * lmax);
    const double got = prob.objective(r.w);
    EXPECT_GE(got, best - 1e-12);
    EXPECT_LE(got - best, r.gap + 1e-12);  // reported gap bounds the suboptimality
    EXPECT_LE(r.gap, opt.gap_tol);
    // the optimizer concentrates power on the principal direction
    const Eigenpair ep = principal_eigenpair(r.point.blocks[0]);
    EXPECT_NEAR(ep.value, prob.power, 1e-6);
  }
}

TEST(Barrier, MixedBlockAndScalar) {
  std::mt19937_64 rng(2);
  const int n = 3;
  const CMatrix c = random_hermitian_psd(rng, n);
  Mixed prob;
  bar::Functionals f{{CMatrix::Identity(n, n), c}};
  Eigen::VectorXd s(1);
  s << 0.5;
  bar::Point start{{CMatrix::Identity(n, n) * 0.1}, s};
  bar::Options opt;
  opt.relative_gap = true;
  opt.gap_tol = 1e-6;  // 1e-8 needs tr V within ~1e-9 of the cap, where the budget slack loses all digits
  const bar::Result r = bar::minimize(prob, f, start, opt);
  ASSERT_EQ(r.status, bar::Status::optimal);
  EXPECT_NEAR(r.point.scalars(0), 3.0, 1e-5);
  EXPECT_NEAR(r.w(1), principal_eigenpair(c).value, 1e-6 * principal_eigenpair(c).value);
  EXPECT_LE(r.gap, opt.gap_tol * std::max(1.0, std::abs(prob.objective(r.w))));
}

TEST(Barrier, InfeasibleStartIsReported) {
  LogGain prob;
  bar::Functionals f{{CMatrix::Identity(2, 2), CMatrix::Identity(2, 2)}};
  bar::Point start{{CMatrix::Identity(2, 2)}, Eigen::VectorXd(0)};  // trace 2 > power 1
  const bar::Result r = bar::minimize(prob, f, start, bar::Options{});
  EXPECT_EQ(r.status, bar::Status::line_search_failed);
  EXPECT_EQ(r.newton_steps, 0);
}

TEST(Barrier, EarlyExitAndNewtonLimit) {
  LogGain prob;
  CMatrix g = CMatrix::Zero(2, 2);
  g(0, 0) = 4.0;
  bar::Functionals f{{CMatrix::Identity(2, 2), g}};
  const bar::Point start{{CMatrix::Identity(2, 2) * 0.25}, Eigen::VectorXd(0)};
  const bar::Result early =
      bar::minimize(prob, f, start, bar::Options{}, [](const Eigen::VectorXd& w) { return w(1) > 2.0; });
  EXPECT_EQ(early.status, bar::Status::early_exit);
  EXPECT_GT(early.w(1), 2.0);

  bar::Options tight;
  tight.max_newton = 2;
  EXPECT_EQ(bar::minimize(prob, f, start, tight).status, bar::Status::newton_limit);
}

TEST(Barrier, IteratesStayStrictlyFeasibleAndDeterministic) {
  std::mt19937_64 rng(3);
  const CMatrix g = random_hermitian_psd(rng, 5);
  LogGain prob;
  bar::Functionals f{{CMatrix::Identity(5, 5), g}};
  const bar::Point start{{CMatrix::Identity(5, 5) * 0.1}, Eigen::VectorXd(0)};
  int calls = 0;
  bar::Options opt;
  opt.on_newton = [&](double, double) { ++calls; };
  const bar::Result a = bar::minimize(prob, f, start, opt);
  const bar::Result b = bar::minimize(prob, f, start, opt);
  EXPECT_GT(calls, 0);
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.point.blocks[0], b.point.blocks[0]);
  EXPECT_LT(a.w(0), prob.power);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<CMatrix>(a.point.blocks[0]).eigenvalues().minCoeff(), 0.0);
}
