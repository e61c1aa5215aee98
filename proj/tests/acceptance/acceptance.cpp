// Acceptance suite: one line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "generators.hpp"
#include "oracles.hpp"
#include "volbound/bound_engine.hpp"
#include "volbound/phi_engine.hpp"
#include "volbound/pricing.hpp"
#include "volbound/scenario_lab.hpp"
#include "volbound/special_functions.hpp"

using namespace volbound;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && failures_.size() < 4) failures_.push_back(what);
    if (!ok) ++n_failed_;
    ++n_checks_;
  }
  Outcome outcome(const std::string& summary) const {
    Outcome o;
    o.pass = n_failed_ == 0;
    std::ostringstream os;
    os << summary << " [" << (n_checks_ - n_failed_) << "/" << n_checks_ << " checks]";
    for (const auto& f : failures_) os << "; " << f;
    o.detail = os.str();
    return o;
  }

 private:
  std::size_t n_checks_ = 0;
  std::size_t n_failed_ = 0;
  std::vector<std::string> failures_;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome phi_ode_suite() {
  Checker ck;
  const auto r_gbm = verify_phi(builtin_model("gbm"), interior_grid(0.05, 10.0, 200), 1e-10);
  const auto r_log = verify_phi(builtin_model("logdiff"), interior_grid(0.005, 0.995, 200), 1e-10);
  const auto r_bes = verify_phi(builtin_model("bessel0"), interior_grid(0.05, 10.0, 200), 1e-8);
  ck.expect(r_gbm.passed, fmt("gbm residual %.2e", r_gbm.max_abs));
  ck.expect(r_log.passed, fmt("logdiff residual %.2e", r_log.max_abs));
  ck.expect(r_bes.passed, fmt("bessel0 residual %.2e", r_bes.max_abs));
  return ck.outcome(fmt("max residual gbm %.1e logdiff %.1e bessel0 %.1e", r_gbm.max_abs,
                        r_log.max_abs, r_bes.max_abs));
}

Outcome bessel_oracle() {
  Checker ck;
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double x = 0.1 + (20.0 - 0.1) * i / 49.0;
    for (int nu : {0, 1}) {
      const double ref = oracle::bessel_k(nu, x);
      const double rel = std::abs(bessel_k(nu, x) - ref) / ref;
      worst = std::max(worst, rel);
      ck.expect(rel <= 1e-10, fmt("K%.0f(%.3f) rel err %.2e", nu, x, rel));
    }
  }
  return ck.outcome(fmt("max relative error %.2e over 50 points", worst));
}

Outcome pricing_oracle() {
  Checker ck;
  const ReferenceModel m = builtin_model("gbm");
  SimConfig cfg;
  cfg.n_paths = 100000;
  cfg.seed = 31337;
  cfg.scheme = Scheme::exact_gbm;
  double worst_z = 0.0;
  double worst_quad = 0.0;
  for (double T : {0.5, 1.0, 2.0}) {
    cfg.dt = T;
    for (double K : {0.8, 0.9, 1.0, 1.1, 1.2}) {
      const double bs = bs_call_price(0.0, T, K, 0.2, 1.0).value;
      const PriceQuote mc = mc_call_price(m, 0.2, 0.0, T, K, 1.0, cfg);
      const double z = std::abs(mc.value - bs) / mc.se;
      worst_z = std::max(worst_z, z);
      ck.expect(z <= 3.0, fmt("mc T=%.1f K=%.1f z=%.2f", T, K, z));
      const double dq = std::abs(quad_call_price(m, 0.2, 0.0, T, K, 1.0).value - bs);
      worst_quad = std::max(worst_quad, dq);
      ck.expect(dq <= 1e-9, fmt("quad T=%.1f K=%.1f err %.2e", T, K, dq));
    }
  }
  return ck.outcome(fmt("max |z| %.2f, max quad error %.1e", worst_z, worst_quad));
}

Outcome implied_vol_round_trip() {
  Checker ck;
  const ReferenceModel m = builtin_model("gbm");
  const double T = 10.0;
  double worst = 0.0;
  for (double sigma : {0.05, 0.2, 0.5, 1.0}) {
    for (double k : {0.5, 1.0, 1.5}) {
      const double price = bs_call_price(0.0, T, k, sigma, 1.0).value;
      try {
        const double got = implied_vol(m, price, 0.0, T, k, 1.0).sigma;
        worst = std::max(worst, std::abs(got - sigma));
        ck.expect(std::abs(got - sigma) <= 1e-8, fmt("sigma=%.2f K/z=%.1f error %.2e", sigma, k, got - sigma));
      } catch (const std::exception& e) {
        ck.expect(false, fmt("sigma=%.2f K/z=%.1f threw", sigma, k) + ": " + e.what());
      }
    }
  }
  return ck.outcome(fmt("max |sigma error| %.2e (T = %.0f)", worst, T));
}

Outcome q_polynomial_suite() {
  Checker ck;
  gen::Gen g(20240611);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t q = g.index(3, 7);
    const MaturityGrid mats(g.maturities(q));
    const WeightVector w(g.weights(q - 2));
    const double sigma = g.uniform(0.05, 1.0);
    const double x0 = x_value(sigma, mats, TimeWeight::constant());
    const QPolynomial Q = build_q(w, compute_alphas(mats, TimeWeight::constant()), x0);
    const double scale = std::max(1.0, Q.abs_coeff_sum());
    worst = std::max({worst, std::abs(Q(x0)), std::abs(Q.deriv1(x0)) / scale});
    ck.expect(std::abs(Q(x0)) <= 1e-10, fmt("trial %.0f Q(X0) = %.2e", trial, Q(x0)));
    ck.expect(std::abs(Q.deriv1(x0)) <= 1e-10 * scale, fmt("trial %.0f Q'(X0) = %.2e", trial, Q.deriv1(x0)));
    bool nonneg = true;
    bool convex = true;
    for (int i = 0; i <= 100; ++i) {
      const double x = 4.0 * x0 * std::pow(1e-4, 1.0 - i / 100.0);
      nonneg = nonneg && Q(x) >= 0.0;
      convex = convex && Q.deriv2(x) >= 0.0;
    }
    ck.expect(nonneg, fmt("trial %.0f Q < 0 on grid", trial));
    ck.expect(convex, fmt("trial %.0f Q'' < 0 on grid", trial));
  }
  const MaturityGrid eq({1.0, 2.0, 3.0});
  const double x0 = x_value(0.3, eq, TimeWeight::constant());
  const QPolynomial Q = build_q(WeightVector::unweighted(3), compute_alphas(eq, TimeWeight::constant()), x0);
  const double expect[3] = {x0 * x0, -2.0 * x0, 1.0};
  for (int k = 0; k < 3; ++k) {
    ck.expect(std::abs(Q.coeffs[k] - expect[k]) <= 1e-12, fmt("q=3 coefficient %.0f off by %.2e", k, Q.coeffs[k] - expect[k]));
  }
  return ck.outcome(fmt("100 draws, worst |Q(X0)|,|Q'(X0)| %.1e", worst));
}

Outcome martingale_suite() {
  Checker ck;
  SimConfig cfg;
  cfg.n_paths = 100000;
  cfg.dt = 0.01;
  cfg.seed = 777;
  const std::vector<double> times{0.25, 0.5, 1.0};
  double worst = 0.0;
  for (const char* name : {"gbm", "bessel0", "logdiff"}) {
    const ReferenceModel m = builtin_model(name);
    for (double sigma : {0.2, 0.5}) {
      const auto [u, v] = martingale_check_UV(m, sigma, times, cfg);
      for (const auto* r : {&u, &v}) {
        for (std::size_t i = 0; i < times.size(); ++i) {
          worst = std::max(worst, std::abs(r->z_scores[i]));
          ck.expect(std::abs(r->z_scores[i]) <= kZScoreBand,
                    std::string(name) + " " + r->process + fmt(" sigma=%.1f t=%.2f z=%.2f", sigma, times[i], r->z_scores[i]));
        }
      }
    }
  }
  for (const char* name : {"gbm", "bessel0"}) {
    for (double sigma : {0.2, 0.5}) {
      const auto r = semigroup_check(builtin_model(name), sigma, times, cfg);
      for (double z : r.z_scores) worst = std::max(worst, std::abs(z));
      ck.expect(r.verdict, std::string("semigroup ") + name + fmt(" sigma=%.1f", sigma));
    }
  }
  return ck.outcome(fmt("max |z| %.2f", worst));
}

Outcome integral_check() {
  Checker ck;
  SimConfig cfg;
  cfg.n_paths = 100000;
  cfg.dt = 0.01;
  cfg.seed = 4242;
  const std::vector<double> times{0.5, 1.0};
  double worst = 0.0;
  for (const auto& g : {linear_function(), abs_centered(1.0), call_payoff(1.2)}) {
    const auto r = martingale_check_integral(builtin_model("gbm"), g, 0.3, times, cfg);
    for (double z : r.z_scores) worst = std::max(worst, std::abs(z));
    ck.expect(r.verdict, g.name);
  }
  return ck.outcome(fmt("max |z| %.2f", worst));
}

const MaturityGrid kMats({1.0, 2.0, 3.0});
const StrikeGrid kStrikes({0.0, 0.5, 1.0, 1.5, 2.0});

Outcome bound_self_consistency() {
  Checker ck;
  Scenario s;
  s.reference = builtin_model("gbm");
  s.sigma = 0.2;
  SimConfig cfg;
  cfg.n_paths = 100000;
  cfg.dt = 0.01;
  cfg.seed = 8;
  const BoundReport r = check_bound(s, kMats, kStrikes, WeightVector::unweighted(3), 0.5, cfg);
  ck.expect(r.enq == 0.0, fmt("E[N Q(X)] = %.3e", r.enq));
  ck.expect(std::abs(r.g_correction) <= 3.0 * r.g_correction_se,
            fmt("G-correction %.3e, se %.3e", r.g_correction, r.g_correction_se));
  const double x0 = std::exp(0.2 * 0.2);
  double inner = 0.0;
  const auto& K = kStrikes.strikes();
  for (std::size_t j = 0; j + 1 < K.size(); ++j) inner += (K[j + 1] - K[j]) * 2.0 * (K[j + 1] - K[j]);
  const double hand = 2.0 * (x0 + 1.0) * (x0 + 1.0) * inner;
  ck.expect(std::abs(r.rhs.value - hand) <= 1e-12 * hand, fmt("RHS %.15g vs %.15g", r.rhs.value, hand));
  ck.expect(r.satisfied, "bound not satisfied");
  return ck.outcome(fmt("lhs %.2e (se %.1e), rhs %.6f", r.lhs, r.lhs_se, r.rhs.value));
}

Outcome decomposition_identity() {
  Checker ck;
  const ReferenceModel m = builtin_model("gbm");
  const double sigma = 0.2;
  double worst = 0.0;
  for (double t : {0.0, 0.25, 0.5}) {
    for (double T : kMats.times()) {
      for (double s : {0.6, 1.0, 1.4}) {
        const double var = sigma * sigma * m.h.sq_integral(t, T);
        const ConditionalLaw law = lognormal_law(s, var);
        const double n = n_value(t, T, sigma, s, m);
        const DecompositionTerms d = decompose(law, law, n, kStrikes, m.phi);
        const double gap = std::abs((d.h - d.l - d.g) - (d.m - d.n));
        worst = std::max(worst, gap);
        ck.expect(gap <= 1e-6, fmt("t=%.2f T=%.0f s=%.1f", t, T, s) + fmt(" gap %.2e", gap));
      }
    }
  }
  return ck.outcome(fmt("max |H-L-G-(M-N)| %.2e", worst));
}

Outcome l_band() {
  Checker ck;
  gen::Gen g(99);
  SimConfig cfg;
  cfg.dt = 0.02;
  cfg.inner_paths = 500;
  std::size_t count = 0;
  for (int i = 0; i < 300; ++i) {
    const char* name = i % 3 == 0 ? "gbm" : (i % 3 == 1 ? "bessel0" : "logdiff");
    const ReferenceModel m = builtin_model(name);
    const double k_max = m.kind == ModelKind::logdiff ? g.uniform(0.3, 0.95) : g.uniform(0.5, 3.0);
    const StrikeGrid k(g.strikes(g.index(1, 10), k_max));
    const double s = m.kind == ModelKind::logdiff ? g.uniform(0.05, 0.95) : g.uniform(0.02, 2.5);
    const double t = g.uniform(0.0, 1.0);
    const double T = t + g.uniform(0.0, 2.0);
    RngStream rng(123, static_cast<std::uint64_t>(i));
    const LValue l = l_value(t, T, g.uniform(0.0, 0.8), s, k, m, cfg, &rng);
    ck.expect(l.value <= 0.0 && l.value >= -l.band,
              std::string(name) + fmt(" draw %.0f L=%.3e band %.3e", i, l.value, l.band));
    ++count;
  }
  return ck.outcome(std::to_string(count) + " draws across gbm, bessel0, logdiff");
}

Outcome densification() {
  Checker ck;
  const ReferenceModel m = builtin_model("gbm");
  const std::vector<std::size_t> ns{4, 16, 64, 256};
  const auto schedule = uniform_schedule(ns, 0.25);
  const DensifyReport r = densification_study(m, 0.2, kMats, WeightVector::unweighted(3), schedule);
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double expect = 2.0 / std::sqrt(static_cast<double>(ns[i]));
    const double err = std::abs(r.rows[i].diagnostic - expect);
    ck.expect(err <= 1e-12, fmt("n=%.0f diagnostic error %.2e", ns[i], err));
    if (i > 0) {
      ck.expect(r.rows[i].diagnostic < r.rows[i - 1].diagnostic, fmt("diagnostic not decreasing at n=%.0f", ns[i]));
      ck.expect(r.rows[i].rhs < r.rows[i - 1].rhs, fmt("rhs not decreasing at n=%.0f", ns[i]));
    }
  }
  ck.expect(r.condition_satisfied, "condition flag not set");
  return ck.outcome(fmt("diagnostic %.4f -> %.4f, rhs %.4f -> ", r.rows.front().diagnostic,
                        r.rows.back().diagnostic, r.rows.front().rhs) +
                    fmt("%.4f", r.rows.back().rhs));
}

Outcome impossible_conjunction() {
  Checker ck;
  SimConfig cfg;
  cfg.n_paths = 100000;
  cfg.dt = 0.01;
  cfg.seed = 2718;
  BoundOptions opts;
  opts.residual_times = {0.0, 0.5};
  opts.l_diagnostic_paths = 0;
  std::ostringstream summary;
  for (double jump : {0.0, 0.1, 0.3, 0.5}) {
    Scenario s;
    s.reference = builtin_model("gbm");
    s.sigma = 0.2;
    s.generator = Generator::step_vol;
    s.jump_time = 0.25;
    s.jump_size = jump;
    const BoundReport r = check_bound(s, kMats, kStrikes, WeightVector::unweighted(3), 0.5, cfg, opts);
    ck.expect(!r.impossible_conjunction, fmt("jump %.1f: residuals consistent and bound violated", jump));
    if (jump == 0.0) {
      ck.expect(r.residuals.consistent, fmt("jump 0: max |z| %.2f", r.residuals.max_abs_z));
      ck.expect(r.satisfied, "jump 0: bound violated");
    }
    summary << "J=" << jump << ": z " << fmt("%.1f", r.residuals.max_abs_z) << (r.satisfied ? " ok" : " viol") << "; ";
  }
  return ck.outcome(summary.str());
}

Outcome reproducibility() {
  Checker ck;
  lab::RunConfig rc;
  rc.command = "check-bound";
  rc.config_text =
      "scenario:\n  sigma: 0.2\n  generator: meanrev-vol\n  vol_of_vol: 0.25\n  rho: -0.5\n"
      "sim:\n  paths: 50000\n  dt: 0.01\n  seed: 1618\n  l_diagnostic_paths: 50\n";
  std::vector<std::string> dumps;
  std::vector<std::string> digests;
  for (unsigned w : {1u, 8u, 1u, 8u}) {
    rc.workers = w;
    lab::RunOutcome out = lab::run(rc);
    ck.expect(out.error.empty(), "run failed: " + out.error);
    digests.push_back(out.report.value("digest", ""));
    out.report.erase("runtime");
    dumps.push_back(out.report.dump(2));
  }
  for (std::size_t i = 1; i < dumps.size(); ++i) {
    ck.expect(dumps[i] == dumps[0], "report differs from the first run (run " + std::to_string(i) + ")");
  }
  return ck.outcome("4 runs at workers {1, 8, 1, 8}, digest " + digests.front());
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria = {
      {1, "phi-ODE suite", 1.0, phi_ode_suite},
      {2, "special-function oracle", 5.0, bessel_oracle},
      {3, "pricing oracle", 30.0, pricing_oracle},
      {4, "implied-vol round trip", 1.0, implied_vol_round_trip},
      {5, "Q-polynomial suite", 1.0, q_polynomial_suite},
      {6, "martingale suite", 120.0, martingale_suite},
      {7, "stochastic-integral check", 60.0, integral_check},
      {8, "bound self-consistency", 120.0, bound_self_consistency},
      {9, "decomposition identity", 60.0, decomposition_identity},
      {10, "L-band", 60.0, l_band},
      {11, "densification", 10.0, densification},
      {12, "impossible-conjunction check", 300.0, impossible_conjunction},
      {13, "reproducibility", 300.0, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs <= c.budget_seconds;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failed;
    std::printf("%s  %2d  %-30s %7.2fs / %5.0fs  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                c.budget_seconds, o.detail.c_str(), in_budget ? "" : " (over runtime budget)");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
