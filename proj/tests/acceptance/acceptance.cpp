// One PASS/FAIL line per acceptance criterion; exit status is nonzero if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "../support/oracles.hpp"
#include "dlsn/dlsn.hpp"

using namespace dlsn;
using namespace oracles;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail, double seconds) {
  char buf[64];
  std::snprintf(buf, sizeof buf, " (%.1f s)", seconds);
  if (pass) {
    std::cout << "[PASS] " << id << " " << name << ": " << detail << buf << std::endl;
  } else {
    ++failures;
    std::cout << "[FAIL] " << id << " " << name << ": " << detail << buf << std::endl;
  }
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng.engine()); }

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---------------------------------------------------------------------------

void pg_moments() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string detail;
  Rng rng(101);
  const int n = 100000;
  for (double z : {0.0, 0.5, 1.0, 2.5, 5.0}) {
    double s = 0.0, ss = 0.0;
    for (int k = 0; k < n; ++k) {
      const double w = sample_pg1(z, rng);
      s += w;
      ss += w * w;
    }
    const double m = s / n;
    const double se = std::sqrt((ss / n - m * m) / n);
    const double want = z == 0.0 ? 0.25 : std::tanh(z / 2.0) / (2.0 * z);
    const double dev = std::abs(m - want) / se;
    ok = ok && dev <= 3.0;
    detail += fmt("z=%g ", z) + fmt("%.2f SE; ", dev);
  }
  report(1, "PG moments", ok, detail, since(t0));
}

// ---------------------------------------------------------------------------

double rel_err(const GaussianMoments& got, const GaussianMoments& want) {
  const double m = (got.mean - want.mean).cwiseAbs().maxCoeff() / std::max(want.mean.cwiseAbs().maxCoeff(), 1e-300);
  const double c = (got.cov - want.cov).cwiseAbs().maxCoeff() / std::max(want.cov.cwiseAbs().maxCoeff(), 1e-300);
  return std::max(m, c);
}

void conditional_oracles() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  double worst_rate = 0.0;
  std::uint64_t seed = 200;
  for (auto policy : {MissingPolicy::impute, MissingPolicy::marginalize})
    for (std::size_t v : {2u, 3u})
      for (const auto& times : {std::vector<double>{0.0}, std::vector<double>{0.0, 1.4}}) {
        auto in = make_instance(v, times, 2, 1, policy, ++seed);
        const GibbsContext ctx(in.data, in.cov, in.cfg);
        const auto& g = in.data.grid();
        worst = std::max(worst, rel_err(mu_conditional(in.state, ctx).moments(),
                                        brute_conditional(in.state, ctx, temporal_cov(g, in.cfg.k_mu), mu_setter())));
        for (std::size_t p = 0; p < 2; ++p)
          worst = std::max(worst, rel_err(beta_conditional(in.state, ctx, p).moments(),
                                          brute_conditional(in.state, ctx, temporal_cov(g, in.cfg.k_beta), beta_setter(p))));
        const MatrixXd px = role_cov(g, in.cfg.k_x, in.cfg.rho_x, in.state.tau.cwiseInverse());
        const MatrixXd pab = role_cov(g, in.cfg.k_ab, in.cfg.rho_ab, VectorXd::Ones(1));
        for (std::size_t i = 0; i < v; ++i) {
          worst = std::max(worst, rel_err(latent_conditional(in.state, ctx, i).moments(),
                                          brute_conditional(in.state, ctx, px, latent_setter(i))));
          worst = std::max(worst, rel_err(additive_conditional(in.state, ctx, i).moments(),
                                          brute_conditional(in.state, ctx, pab, additive_setter(i))));
        }
      }

  // shrinkage rate against a scalar loop, several dimensions
  for (std::size_t hd : {1u, 3u}) {
    auto in = make_instance(3, {0.0, 0.8}, 0, hd, MissingPolicy::impute, ++seed);
    const GibbsContext ctx(in.data, in.cov, in.cfg);
    const auto& s = in.state;
    const auto n = static_cast<Eigen::Index>(in.data.times());
    const MatrixXd binv = role_cov(in.data.grid(), in.cfg.k_x, in.cfg.rho_x, VectorXd::Ones(1)).inverse();
    std::vector<double> q(hd, 0.0);
    for (std::size_t h = 0; h < hd; ++h)
      for (std::size_t i = 0; i < 3; ++i) {
        VectorXd x(2 * n);
        for (Eigen::Index t = 0; t < n; ++t) {
          x(t) = s.xs[i](static_cast<Eigen::Index>(h), t);
          x(n + t) = s.xr[i](static_cast<Eigen::Index>(h), t);
        }
        for (Eigen::Index r = 0; r < 2 * n; ++r)
          for (Eigen::Index c = 0; c < 2 * n; ++c) q[h] += x(r) * binv(r, c) * x(c);
      }
    const VectorXd qa = shrinkage_quadratic_forms(s, ctx);
    for (std::size_t l = 0; l < hd; ++l) {
      double rate = 1.0;
      for (std::size_t h = l; h < hd; ++h) {
        double prod = 1.0;
        for (std::size_t m = 0; m <= h; ++m)
          if (m != l) prod *= s.nu(static_cast<Eigen::Index>(m));
        rate += 0.5 * prod * q[h];
      }
      worst_rate = std::max(worst_rate, std::abs(shrinkage_rate(qa, s.nu, l) - rate) / rate);
    }
  }
  const bool ok = worst <= 1e-8 && worst_rate <= 1e-10;
  report(2, "conditional oracles", ok,
         fmt("steps 2/3/4/6 max rel err %.2e <= 1e-8; ", worst) + fmt("step 5 rate rel err %.2e <= 1e-10", worst_rate),
         since(t0));
}

// ---------------------------------------------------------------------------

struct BatchMeans {
  double mean;
  double se;
};

BatchMeans batch_means(const std::vector<double>& x, std::size_t batches) {
  const std::size_t len = x.size() / batches;
  std::vector<double> bm(batches, 0.0);
  double m = 0.0;
  for (std::size_t b = 0; b < batches; ++b) {
    for (std::size_t k = b * len; k < (b + 1) * len; ++k) bm[b] += x[k];
    bm[b] /= static_cast<double>(len);
    m += bm[b] / static_cast<double>(batches);
  }
  double s = 0.0;
  for (double e : bm) s += (e - m) * (e - m);
  return {m, std::sqrt(s / static_cast<double>(batches - 1) / static_cast<double>(batches))};
}

void geweke() {
  const auto t0 = Clock::now();
  const std::size_t v = 4, n = 5;
  NetworkSeries data({"a", "b", "c", "d"}, TimeGrid::integers(n));  // nothing observed
  CovariateSet cov;
  {
    Rng zr(300);
    Cube<double> z(v, n);
    for (auto& x : z.raw()) x = zr.normal(0.0, 0.5);
    cov.z.push_back(z);
    cov.labels.push_back("z");
  }
  HyperConfig cfg;
  cfg.h_star = 2;
  cfg.k_mu = cfg.k_beta = cfg.k_ab = cfg.k_x = 0.1;
  cfg.rho_ab = cfg.rho_x = 0.5;
  cfg.shrink_a = 2.0;
  cfg.missing = MissingPolicy::impute;
  cfg.iterations = 2;
  cfg.burn_in = 0;
  cfg.seed = 31;
  const GibbsContext ctx(data, cov, cfg);

  const long sweeps = 50000;
  std::vector<double> cmu, ca, cnu;
  ModelState s = initial_state(ctx);
  Rng rng(cfg.seed, 2);
  for (long it = 1; it <= sweeps; ++it) {
    gibbs_sweep(s, ctx, rng, it);
    cmu.push_back(s.mu(0));
    ca.push_back(s.a(0, 0));
    cnu.push_back(s.nu(0));
  }
  std::vector<double> fmu, fa, fnu;
  Rng frng(32);
  ModelState f = ModelState::zeros(v, n, 1, cfg.h_star, Variant::dlsn);
  for (long k = 0; k < sweeps; ++k) {
    draw_from_prior(f, ctx, frng);
    fmu.push_back(f.mu(0));
    fa.push_back(f.a(0, 0));
    fnu.push_back(frng.gamma(cfg.shrink_a, 1.0));
  }
  bool ok = true;
  std::string detail;
  auto check = [&](const char* name, const std::vector<double>& c, const std::vector<double>& p) {
    const auto bc = batch_means(c, 50);
    const auto bp = batch_means(p, 50);
    const double z = std::abs(bc.mean - bp.mean) / std::hypot(bc.se, bp.se);
    ok = ok && z <= 3.0;
    detail += std::string(name) + fmt(" %.3f", bc.mean) + fmt(" vs %.3f", bp.mean) + fmt(" (%.2f SE); ", z);
  };
  check("mu(t1)", cmu, fmu);
  check("a1(t1)", ca, fa);
  check("nu1", cnu, fnu);
  report(3, "Geweke 5e4 sweeps", ok, detail, since(t0));
}

// ---------------------------------------------------------------------------

std::string config_dir() { return DLSN_CONFIG_DIR; }

ProgressFn progress_line(const std::string& what, long total) {
  return [what, total](long it, const ModelState&) {
    if (it % (total / 10) == 0) std::cerr << "  " << what << " " << it << "/" << total << std::endl;
  };
}

double metric(const ExperimentResult& r, const std::string& name) {
  const auto m = r.metric(name);
  return m ? *m : std::nan("");
}

void validation_and_shrinkage_and_gap() {
  const auto t0 = Clock::now();
  ExperimentResult r;
  try {
    const auto spec = load_config(config_dir() + "/validation.cfg");
    r = run_experiment(spec, {.keep_trace = false,
                              .progress = progress_line("validation", static_cast<long>(spec.hyper.iterations))});
  } catch (const std::exception& e) {
    report(4, "validation replication", false, e.what(), since(t0));
    report(5, "shrinkage pattern", false, "no run", 0.0);
    report(6, "misspecification gap", false, "no run", 0.0);
    return;
  }
  const double secs = since(t0);
  const double fit = metric(r, "fit_auc"), pred = metric(r, "pred_auc");
  report(4, "validation replication", fit >= 0.85 && pred >= 0.70,
         fmt("fit AUC %.4f >= 0.85, ", fit) + fmt("pred AUC %.4f >= 0.70", pred), secs);

  std::string taus = "tau^-1 =";
  for (int h = 1; h <= 10; ++h) taus += fmt(" %.3f", metric(r, "tau_inv_" + std::to_string(h)));
  const double top = metric(r, "tau_inv_min_to_2"), rest = metric(r, "tau_inv_max_from_4");
  const double tail = metric(r, "tau_inv_max_from_3");
  report(5, "shrinkage pattern", top > rest && tail < 0.3,
         fmt("min(h<=2) %.3f > ", top) + fmt("max(h>=4) %.3f, ", rest) + fmt("max(h>=3) %.3f < 0.3; ", tail) + taus,
         0.0);

  const double gap = metric(r, "fit_auc_gap");
  double lsmdn_fit = std::nan("");
  const auto t1 = Clock::now();
  std::string err;
  try {
    const auto spec = load_config(config_dir() + "/misspec_lsmdn.cfg");
    lsmdn_fit = metric(run_experiment(spec, {.keep_trace = false,
                                             .progress = progress_line("lsmdn", static_cast<long>(spec.hyper.iterations))}),
                       "fit_auc");
  } catch (const std::exception& e) {
    err = std::string("; lsmdn run failed: ") + e.what();
  }
  report(6, "misspecification gap", gap >= 0.1 && lsmdn_fit >= 0.9,
         fmt("dlsn - naive fit AUC %.4f >= 0.1 ", gap) + fmt("(naive %.4f), ", metric(r, "compare_fit_auc")) +
             fmt("dlsn fit on lsmdn data AUC %.4f >= 0.9", lsmdn_fit) + err,
         since(t1));
}

// ---------------------------------------------------------------------------

void svd_property() {
  const auto t0 = Clock::now();
  Rng rng(700);
  double worst = 0.0, worst_pi = 0.0;
  for (int k = 0; k < 100; ++k) {
    const auto rows = static_cast<Eigen::Index>(1 + pick(rng, 20));
    const auto cols = static_cast<Eigen::Index>(1 + pick(rng, 20));
    MatrixXd s(rows, cols);
    for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = rng.normal(0.0, 3.0);
    const auto sp = svd_split(s);
    const double norm = s.cwiseAbs().rowwise().sum().maxCoeff();
    worst = std::max(worst, (sp.xs * sp.xr.transpose() - s).cwiseAbs().maxCoeff() / norm);

    // target probabilities -> logits -> split -> link
    MatrixXd pi(rows, cols);
    for (Eigen::Index i = 0; i < pi.size(); ++i) pi.data()[i] = 0.01 + 0.98 * rng.uniform();
    const MatrixXd logit = pi.unaryExpr([](double p) { return std::log(p / (1.0 - p)); });
    const auto lp = svd_split(logit);
    const MatrixXd back = (lp.xs * lp.xr.transpose()).unaryExpr([](double x) { return link_probability(x); });
    worst_pi = std::max(worst_pi, (back - pi).cwiseAbs().maxCoeff());
  }
  report(7, "svd split", worst <= 1e-10 && worst_pi <= 1e-10,
         fmt("max err / |S|_inf %.2e <= 1e-10, ", worst) + fmt("max pi err %.2e <= 1e-10", worst_pi), since(t0));
}

// ---------------------------------------------------------------------------

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  long num = 0, pairs = 0;  // twice the concordance count, to stay integral
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b) {
      if (y[a] != 1 || y[b] != 0) continue;
      ++pairs;
      num += s[a] > s[b] ? 2 : s[a] == s[b] ? 1 : 0;
    }
  return static_cast<double>(num) / static_cast<double>(2 * pairs);
}

void evaluators() {
  const auto t0 = Clock::now();
  Rng rng(800);
  int auc_mismatch = 0;
  for (int k = 0; k < 200; ++k) {
    const std::size_t n = 2 + pick(rng, 60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool ties = k % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = ties ? static_cast<double>(pick(rng, 5)) : rng.normal();
      y[i] = rng.bernoulli(0.4) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    if (auc(s, y) != brute_auc(s, y)) ++auc_mismatch;
  }

  std::vector<double> x(100000);
  for (auto& e : x) e = rng.normal();
  const auto h = hpd(x, 0.95);
  const bool hpd_ok = std::abs(h.lo + 1.96) <= 0.05 && std::abs(h.hi - 1.96) <= 0.05;

  double worst_ess = 0.0;
  for (double rho : {0.5, 0.9}) {
    const std::size_t n = 10000;
    std::vector<double> c(n);
    c[0] = rng.normal() / std::sqrt(1.0 - rho * rho);
    for (std::size_t t = 1; t < n; ++t) c[t] = rho * c[t - 1] + rng.normal();
    const double want = static_cast<double>(n) * (1.0 - rho) / (1.0 + rho);
    worst_ess = std::max(worst_ess, std::abs(ess(c) / want - 1.0));
  }
  report(8, "evaluator oracles", auc_mismatch == 0 && hpd_ok && worst_ess <= 0.2,
         std::to_string(auc_mismatch) + "/200 AUC mismatches, " + fmt("HPD [%.3f, ", h.lo) + fmt("%.3f], ", h.hi) +
             fmt("worst AR(1) ESS rel err %.3f <= 0.2", worst_ess),
         since(t0));
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), dir).string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

void determinism() {
  const auto t0 = Clock::now();
  const fs::path root = fs::temp_directory_path() / "dlsn_acceptance_determinism";
  fs::remove_all(root);
  std::map<std::string, std::string> runs[2];
  std::string err;
  for (int r = 0; r < 2 && err.empty(); ++r) {
    const fs::path dir = root / ("run" + std::to_string(r));
    fs::create_directories(dir);
    std::ofstream(dir / "run.cfg") << "dgp.nodes = 8\ndgp.times = 8\ndgp.k_all = 0.05\ndgp.seed = 4\n"
                                      "h_star = 3\niterations = 300\nburn_in = 100\nthin = 2\nseed = 9\n";
    for (const char* step : {"simulate --config run.cfg --out data", "fit --config run.cfg --data data --out trace",
                             "summarize --trace trace --data data --out report"}) {
      const std::string cmd =
          "cd '" + dir.string() + "' && '" DLSN_CLI_PATH "' " + step + " >> stdout.txt 2>> stderr.txt";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        err = std::string("'") + step + "' failed";
        break;
      }
    }
    fs::remove(dir / "stderr.txt");  // timing lives here
    if (err.empty()) runs[r] = snapshot(dir);
  }
  std::size_t differ = 0;
  for (const auto& [name, bytes] : runs[0]) {
    const auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != bytes) ++differ;
  }
  const bool ok = err.empty() && !runs[0].empty() && runs[0].size() == runs[1].size() && differ == 0;
  report(9, "determinism", ok,
         err.empty() ? std::to_string(runs[0].size()) + " files, " + std::to_string(differ) + " differ" : err, since(t0));
  fs::remove_all(root);
}

}  // namespace

int main() {
  pg_moments();
  conditional_oracles();
  geweke();
  validation_and_shrinkage_and_gap();
  svd_property();
  evaluators();
  determinism();
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
