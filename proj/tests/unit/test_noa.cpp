#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "bagopf/casedata.hpp"
#include "bagopf/decomp.hpp"
#include "bagopf/error.hpp"
#include "bagopf/noa.hpp"
#include "bagopf/sdr.hpp"

using namespace bagopf;

namespace {

const std::string kData = BAGOPF_DATA_DIR;
const std::string kTestData = BAGOPF_TEST_DATA_DIR;

Eigen::MatrixXcd random_hermitian(std::mt19937& rng, Eigen::Index n) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex(nd(rng), nd(rng));
  return 0.5 * (a + a.adjoint());
}

Eigen::MatrixXcd random_psd(std::mt19937& rng, Eigen::Index n) {
  const Eigen::MatrixXcd a = random_hermitian(rng, n);
  return a * a.adjoint();
}

double lambda_max(const Eigen::MatrixXcd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (m + m.adjoint()));
  return es.eigenvalues().maxCoeff();
}

Iterate iterate_of(std::vector<Eigen::MatrixXcd> blocks) {
  Iterate it;
  for (const auto& b : blocks) {
    EigPair p = max_eigpair(b);
    it.rank_gaps.push_back(b.trace().real() - p.lambda_max);
    it.eigpairs.push_back(p);
  }
  it.blocks = std::move(blocks);
  return it;
}

struct Case {
  Network net;
  AdmittanceModel adm;
  Decomposition decomp;
  SdrProgram sdr;
};

Case load_case(const std::string& path) {
  Case c;
  c.net = aggregate_generators(load_network(path));
  c.adm = build_admittance(c.net);
  c.decomp = decompose(c.net, c.adm);
  c.sdr = assemble(c.net, c.adm, c.decomp);
  return c;
}

}  // namespace

TEST_CASE("top eigenpair examples") {
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  const EigPair p = max_eigpair(d);
  CHECK(p.lambda_max == doctest::Approx(3.0));
  CHECK(std::abs(p.w_max(0) - 1.0) < 1e-12);
  CHECK(std::abs(p.w_max(1)) < 1e-12);

  Eigen::VectorXcd v(3);
  v << Complex(1, 1), Complex(0, 1), Complex(1, -1);  // |v|^2 = 5
  const EigPair q = max_eigpair(v * v.adjoint());
  CHECK(q.lambda_max == doctest::Approx(5.0));
  CHECK(std::abs(std::abs(q.w_max.dot(v)) - std::sqrt(5.0)) < 1e-10);
  CHECK(q.w_max.norm() == doctest::Approx(1.0));

  // Ties: first eigenvector of the top eigenspace, deterministically.
  const EigPair e = max_eigpair(Eigen::MatrixXcd::Identity(3, 3));
  CHECK(e.lambda_max == doctest::Approx(1.0));
  CHECK(max_eigpair(Eigen::MatrixXcd::Identity(3, 3)).w_max.isApprox(e.w_max));
}

TEST_CASE("top eigenpair matches the full spectrum") {
  std::mt19937 rng(17);
  for (int t = 0; t < 20; ++t) {
    const Eigen::MatrixXcd b = random_hermitian(rng, 10);
    const EigPair p = max_eigpair(b);
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> full(b);
    double top = -INFINITY;
    for (Eigen::Index i = 0; i < 10; ++i) top = std::max(top, full.eigenvalues()(i).real());
    CHECK(std::abs(p.lambda_max - top) <= 1e-10 * std::max(1.0, std::abs(top)));
    CHECK((b * p.w_max - p.lambda_max * p.w_max).norm() <= 1e-9 * std::max(1.0, b.norm()));
    // No Rayleigh quotient of random probes exceeds lambda_max.
    for (int k = 0; k < 10; ++k) {
      Eigen::VectorXcd w = random_hermitian(rng, 10).col(0);
      w.normalize();
      CHECK((w.adjoint() * b * w)(0).real() <= p.lambda_max + 1e-12);
    }
  }
}

TEST_CASE("rank-one membership rule") {
  Eigen::VectorXcd v(2);
  v << Complex(1, 0), Complex(0.3, 0.4);
  Eigen::MatrixXcd near = Eigen::MatrixXcd::Zero(2, 2);
  near(0, 0) = 1.0;
  near(1, 1) = 9e-6;
  Eigen::MatrixXcd one(1, 1);
  one(0, 0) = 4.0;
  const Iterate it = iterate_of({v * v.adjoint(), Eigen::MatrixXcd::Identity(2, 2), near, one});
  CHECK(rank_one_set(it, 1e-5) == std::vector<std::size_t>{0, 2, 3});
  CHECK(it.rank_gaps[1] == doctest::Approx(1.0));
}

TEST_CASE("penalty linearization is mu (I - w w^H) under the trace inner product") {
  std::mt19937 rng(23);
  const Case c = load_case(kTestData + "/wb5.m");
  const BagLayout& lay = c.sdr.layout;
  for (int t = 0; t < 10; ++t) {
    std::vector<Eigen::MatrixXcd> blocks;
    for (const Bag& b : c.decomp.bags) blocks.push_back(random_psd(rng, static_cast<Eigen::Index>(b.size())));
    std::vector<double> x(c.sdr.program.num_vars, 0.0);
    encode_blocks(lay, blocks, x);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      Eigen::VectorXcd w = random_hermitian(rng, static_cast<Eigen::Index>(blocks[b].rows())).col(0);
      w.normalize();
      const double mu = 7.5;
      const Affine a = rank_gap_linearization(lay, b, w, mu);
      const Eigen::MatrixXcd m =
          Eigen::MatrixXcd::Identity(blocks[b].rows(), blocks[b].rows()) - w * w.adjoint();
      const double inner = (m * blocks[b]).trace().real();
      CHECK(a.eval(x) == doctest::Approx(mu * inner).epsilon(1e-12));
      // Finite differences of mu (Trace - Rayleigh) in each coordinate.
      auto f = [&](const std::vector<double>& y) {
        const Eigen::MatrixXcd wb = decode_blocks(lay, y)[b];
        return mu * (wb.trace().real() - (w.adjoint() * wb * w)(0).real());
      };
      for (const auto& [var, coef] : a.terms) {
        std::vector<double> xp = x, xm = x;
        xp[var] += 1e-6;
        xm[var] -= 1e-6;
        CHECK((f(xp) - f(xm)) / 2e-6 == doctest::Approx(coef).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("linearization is a subgradient of mu (Trace - lambda_max)") {
  std::mt19937 rng(29);
  std::normal_distribution<double> nd;
  for (int blk = 0; blk < 10; ++blk) {
    const Eigen::Index n = 2 + blk % 5;
    // PSD block with a clear gap below the top eigenvalue.
    Eigen::MatrixXcd q = random_hermitian(rng, n);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(q);
    const Eigen::MatrixXcd u = qr.householderQ();
    Eigen::VectorXd ev(n);
    for (Eigen::Index i = 0; i < n; ++i) ev(i) = 0.1 + 0.2 * static_cast<double>(i);
    ev(n - 1) = 3.0;
    const Eigen::MatrixXcd w = u * ev.cast<Complex>().asDiagonal() * u.adjoint();
    const EigPair p = max_eigpair(w);
    const double mu = 1e6;
    for (int d = 0; d < 20; ++d) {
      const Eigen::MatrixXcd dir = random_hermitian(rng, n);
      const double h = 1e-6;
      auto g = [&](const Eigen::MatrixXcd& m) { return mu * (m.trace().real() - lambda_max(m)); };
      const double fd = (g(w + h * dir) - g(w - h * dir)) / (2 * h);
      const double lin = mu * (dir.trace().real() - (p.w_max.adjoint() * dir * p.w_max)(0).real());
      CHECK(std::abs(fd - lin) <= 1e-4 * std::max(1.0, std::abs(lin)));
    }
  }
}

TEST_CASE("iteration program bounds F_mu from above") {
  std::mt19937 rng(31);
  const Case c = load_case(kTestData + "/wb5.m");
  std::vector<Eigen::MatrixXcd> blocks;
  for (const Bag& b : c.decomp.bags) blocks.push_back(random_psd(rng, static_cast<Eigen::Index>(b.size())));
  std::vector<double> x(c.sdr.program.num_vars, 0.0);
  encode_blocks(c.sdr.layout, blocks, x);
  const double mu = 1e3;
  const Iterate it = make_iterate(c.sdr, x, mu, 1e-5);
  const ConicProgram prog = build_iteration_program(c.sdr, it, {}, mu, 1e-5);
  CHECK(prog.equalities == c.sdr.program.equalities);
  CHECK(prog.inequalities == c.sdr.program.inequalities);
  CHECK(prog.socs == c.sdr.program.socs);
  CHECK(prog.objective_value(x) == doctest::Approx(it.f_mu).epsilon(1e-10));
  for (int t = 0; t < 20; ++t) {
    std::vector<Eigen::MatrixXcd> pert = blocks;
    for (auto& b : pert) b += 0.3 * random_psd(rng, b.rows());
    std::vector<double> y = x;
    encode_blocks(c.sdr.layout, pert, y);
    const Iterate py = make_iterate(c.sdr, y, mu, 1e-5);
    CHECK(prog.objective_value(y) >= py.f_mu - 1e-9 * std::abs(py.f_mu));
  }
  // Lock rows: one per locked bag, zero at a rank-one block.
  const ConicProgram locked = build_iteration_program(c.sdr, it, {0, 2}, mu, 1e-5);
  CHECK(locked.inequalities.size() == c.sdr.program.inequalities.size() + 2);
  Eigen::VectorXcd v = random_hermitian(rng, 4).col(0);
  std::vector<Eigen::MatrixXcd> r1 = blocks;
  r1[0] = v * v.adjoint();
  std::vector<double> z = x;
  encode_blocks(c.sdr.layout, r1, z);
  const Iterate iz = make_iterate(c.sdr, z, mu, 1e-5);
  const Affine pen = rank_gap_linearization(c.sdr.layout, 0, iz.eigpairs[0].w_max, 1.0);
  CHECK(std::abs(pen.eval(z)) < 1e-10);
}

TEST_CASE("optimality gap arithmetic") {
  CHECK(got(1.3042e6, 1.3041e6) == doctest::Approx(7.668e-05).epsilon(1e-3));
  CHECK(got(5.0, 5.0) == 0.0);
  CHECK(got(2.1391e6, 2.1314e6) == doctest::Approx(3.6e-3).epsilon(0.02));
  CHECK_THROWS_AS(got(1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(got(1.0, -2.0), ValidationError);
}

TEST_CASE("options must be positive") {
  NoaOptions o;
  CHECK_NOTHROW(o.validate());
  o.eps_tol = 0.0;
  CHECK_THROWS_AS(o.validate(), ValidationError);
  o = NoaOptions{};
  o.max_iters = 0;
  CHECK_THROWS_AS(o.validate(), ValidationError);
}

TEST_CASE("tight relaxation stops at initialization") {
  const Case c = load_case(kTestData + "/two_bus.m");
  const NoaResult r = run(c.sdr, NoaOptions{}, InteriorPointBackend{});
  CHECK(r.status == NoaStatus::converged);
  CHECK(r.iterations == 0);
  REQUIRE(r.got.has_value());
  CHECK(*r.got == doctest::Approx(0.0));
  CHECK(r.trace.size() == 1);
}

TEST_CASE("infeasible demand propagates") {
  const Case c = load_case(kTestData + "/two_bus_infeasible.m");
  const NoaResult r = run(c.sdr, NoaOptions{}, InteriorPointBackend{});
  CHECK(r.status == NoaStatus::infeasible);
}

TEST_CASE("case9 descends and keeps locked bags rank-one") {
  const Case c = load_case(kData + "/case9.m");
  const NoaOptions opt;
  const BackendOptions bo;
  const NoaResult r = run(c.sdr, opt, InteriorPointBackend{}, bo);
  REQUIRE(r.status == NoaStatus::converged);
  CHECK(r.trace.size() == static_cast<std::size_t>(r.iterations) + 1);
  CHECK(r.found_value >= r.lower_bound - 1e-6 * r.lower_bound);
  REQUIRE(r.got.has_value());
  CHECK(*r.got <= 1e-3);
  for (std::size_t k = 1; k < r.trace.size(); ++k) {
    const double prev = r.trace[k - 1].f_mu;
    CHECK(r.trace[k].f_mu <= prev + 10 * bo.rel_gap_tol * std::abs(prev));
  }
  for (double g : r.final.rank_gaps) CHECK(g >= -1e-9);
  CHECK(r.final.rank_one_set.size() == c.decomp.bags.size());
}

TEST_CASE("a rank-one iterate stays rank-one under a locked step") {
  const Case c = load_case(kData + "/case9.m");
  const NoaResult r = run(c.sdr, NoaOptions{}, InteriorPointBackend{});
  REQUIRE(r.status == NoaStatus::converged);
  std::vector<std::size_t> all(c.decomp.bags.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const StepResult s =
      step(c.sdr, r.final, all, r.mu, NoaOptions{}, InteriorPointBackend{}, BackendOptions{});
  REQUIRE(s.ok);
  CHECK(s.next.rank_one_set.size() == all.size());
  CHECK(s.next.f_mu <= r.final.f_mu + 1e-7 * std::abs(r.final.f_mu));
}
