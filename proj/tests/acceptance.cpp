// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Usage: upsilon_acceptance <configs-dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "upsilon/classifier.hpp"
#include "upsilon/experiment.hpp"
#include "upsilon/pseudo_labeling.hpp"
#include "upsilon/sec_clustering.hpp"
#include "upsilon/trainer.hpp"
#include "upsilon/worker_pool.hpp"

using namespace upsilon;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

Matrix random_columns(std::size_t k, std::size_t m, std::mt19937_64& rng) {
  const Matrix t = oracle::random_stochastic(m, k, rng);
  Matrix out(k, m);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < m; ++j) out(i, j) = t(j, i);
  return out;
}

// (row_type, series, x, metric) -> value for the summary rows.
class Summary {
 public:
  explicit Summary(const std::vector<ResultRow>& rows) {
    for (const auto& r : rows)
      if (r.row_type != "cell") values_[{r.row_type, r.series, r.x, r.metric}] = r.value;
  }
  double mean(const std::string& series, double x, const std::string& metric = "accuracy") const {
    return values_.at({"mean", series, x, metric});
  }
  double std(const std::string& series, double x, const std::string& metric = "accuracy") const {
    return values_.at({"std", series, x, metric});
  }

 private:
  std::map<std::tuple<std::string, std::string, double, std::string>, double> values_;
};

struct Context {
  fs::path configs;
  std::size_t workers;
  ExperimentConfig load(const std::string& name) const { return load_experiment_config(configs / (name + ".ini")); }
};

Outcome sinkhorn_feasibility(const Context&) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> kd(1, 8);
  double worst = 0.0;
  double elapsed = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t k = kd(rng);
    const std::size_t m = std::uniform_int_distribution<std::size_t>(k, 256)(rng);
    const Matrix p = random_columns(k, m, rng);
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = sinkhorn_assign(p, {});
    elapsed += seconds_since(t0);
    worst = std::max(worst, max_marginal_violation(r.q.matrix()));
  }
  return {worst < 1e-6 && elapsed < 10.0, "max violation " + num(worst) + ", " + num(elapsed) + " s"};
}

Outcome sinkhorn_optimality(const Context&) {
  std::mt19937_64 rng(202);
  SinkhornConfig converged;
  converged.max_iters = 5000;
  converged.marginal_tol = 1e-10;
  double worst = 0.0;
  int bad = 0;
  for (std::size_t k = 1; k <= 3; ++k) {
    for (std::size_t m = 1; m <= 3; ++m) {
      for (int t = 0; t < 100; ++t) {
        const Matrix p = random_columns(k, m, rng);
        Matrix cost(k, m);
        for (std::size_t i = 0; i < k * m; ++i) cost.data()[i] = -std::log(std::max(p.data()[i], kExtraProbabilityFloor));
        const double opt = oracle::transport_lp_optimum(cost);
        const double got = transport_cost(harden_to_vertex(sinkhorn_assign(p, converged).q), p);
        const double gap = (got - opt) / std::max(opt, 1e-12);
        worst = std::max(worst, gap);
        bad += got > opt * 1.05 + 1e-12;
      }
    }
  }
  return {bad == 0, std::to_string(bad) + "/900 over 5%, worst relative gap " + num(worst)};
}

Outcome rpl_balance(const Context&) {
  std::mt19937_64 rng(303);
  const double taus[] = {0.5, 0.6, 0.7, 0.8, 0.9, 0.95};
  int unbalanced = 0, non_monotone = 0;
  for (int t = 0; t < 500; ++t) {
    const std::size_t k_id = 2 + t % 5, k_extra = t % 3;
    const std::size_t n = 20 + static_cast<std::size_t>(t % 7) * 30;
    const LabelSpace ls(k_id, k_extra);
    const PredictionMatrix p(oracle::random_stochastic(n, ls.total(), rng, 2.0 + (t % 4)));
    std::size_t prev = SIZE_MAX;
    for (double tau : taus) {
      // Quota straight from the column counts above tau.
      std::size_t quota = SIZE_MAX;
      for (std::size_t c = 0; c < k_id; ++c) {
        std::size_t above = 0;
        for (std::size_t i = 0; i < n; ++i) above += p(i, c) > tau;
        quota = std::min(quota, above);
      }
      const auto counts = rebalanced_pl(p, ls, tau).class_counts();
      for (std::size_t c = 0; c < ls.total(); ++c) unbalanced += counts[c] != (c < k_id ? quota : 0);
      non_monotone += quota > prev;
      prev = quota;
    }
  }
  return {unbalanced == 0 && non_monotone == 0,
          std::to_string(unbalanced) + " class counts off quota, " + std::to_string(non_monotone) + " tau-grid increases"};
}

Outcome ramp_values(const Context&) {
  const double h = 40000.0;
  const double at0 = lambda_ramp(0.0, h);
  const double at_h = lambda_ramp(h, h);
  return {std::abs(at0 - std::exp(-5.0)) <= 1e-9 && at_h == 1.0, "ramp(0)=" + num(at0, 10) + ", ramp(h)=" + num(at_h)};
}

Outcome gradient_check(const Context&) {
  double worst = 0.0;
  for (std::size_t hidden : {std::size_t{0}, std::size_t{7}}) {
    for (std::uint64_t s = 0; s < 10; ++s) {
      std::mt19937_64 rng(400 + s);
      std::normal_distribution<double> g;
      const std::size_t d = 5, out = 4;
      auto params = ClassifierParams::initialized(d, hidden, out, s);
      for (auto& v : params.flat()) v += 0.3 * g(rng);
      Matrix lx(4, d), px(3, d);
      for (auto& v : lx.data()) v = g(rng);
      for (auto& v : px.data()) v = g(rng);
      const std::vector<std::size_t> ly{0, 1, 2, 3}, py{3, 0, 1};
      std::vector<double> analytic(params.size());
      loss_and_gradient(params, lx, ly, px, py, 0.5, analytic);
      const auto f = [&](const std::vector<double>& flat) {
        ClassifierParams q = params;
        std::copy(flat.begin(), flat.end(), q.flat().begin());
        return loss_only(q, lx, ly, px, py, 0.5).total;
      };
      const std::vector<double> x(params.flat().begin(), params.flat().end());
      worst = std::max(worst, oracle::max_relative_error(analytic, oracle::central_difference(f, x)));
    }
  }
  return {worst < 1e-4, "max relative error " + num(worst)};
}

Outcome imbalance(const Context& ctx) {
  const auto cfg = ctx.load("imbalance");
  const auto t0 = std::chrono::steady_clock::now();
  const auto out = run_experiment(cfg, ctx.workers);
  const double elapsed = seconds_since(t0);
  std::size_t wins = 0;
  for (const auto& t : out.imbalance) wins += t.kl_ood && *t.kl_ood > t.kl_id;
  return {out.imbalance.size() == 20 && wins >= 18 && elapsed < 300.0,
          "kl_ood > kl_id in " + std::to_string(wins) + "/" + std::to_string(out.imbalance.size()) + " trials, " +
              num(elapsed) + " s"};
}

Outcome strategy_ordering(const Context& ctx) {
  const Summary s(run_experiment(ctx.load("strategies"), ctx.workers).rows);
  const double oracle = s.mean("Oracle", 1), open = s.mean("OpenSet", 1), base = s.mean("Baseline", 1),
               re = s.mean("ReAssigned", 1), sd = s.std("Baseline", 1);
  return {oracle > open && open >= base && base > re && oracle - base > sd,
          "Oracle " + num(oracle) + ", OpenSet " + num(open) + ", Baseline " + num(base) + " (std " + num(sd) +
              "), ReAssigned " + num(re)};
}

Outcome degradation_rescue(const Context& ctx) {
  const auto cfg = ctx.load("sweep");
  const Summary s(run_experiment(cfg, ctx.workers).rows);
  bool ok = s.mean("VanillaPL", 1) < s.mean("Baseline", 1);
  std::string detail = "VanillaPL@1 " + num(s.mean("VanillaPL", 1)) + " vs Baseline " + num(s.mean("Baseline", 1)) + ";";
  for (double r : cfg.ratios) {
    ok = ok && s.mean("Upsilon", r) >= s.mean("Baseline", r);
    detail += " Upsilon@" + num(r) + " " + num(s.mean("Upsilon", r)) + "/" + num(s.mean("Baseline", r));
  }
  return {ok, detail};
}

Outcome contamination(const Context& ctx) {
  const auto out = run_experiment(ctx.load("contamination"), ctx.workers);
  std::map<std::string, std::map<int, std::pair<double, int>>> per;  // series -> epoch -> (sum, n)
  for (const auto& r : out.rounds) {
    auto& cell = per[r.series][r.round.epoch];
    cell.first += r.round.ood_as_id_prop;
    cell.second += 1;
  }
  const auto curve = [&](const std::string& series) {
    std::vector<double> v;
    for (const auto& [epoch, sn] : per[series]) v.push_back(sn.first / sn.second);
    return v;
  };
  const auto vanilla = curve("VanillaPL"), rpl = curve("RPLOnly"), ups = curve("Upsilon");
  if (vanilla.empty() || rpl.empty()) return {false, "no pseudo-labeling rounds"};
  bool rising = true;
  for (std::size_t i = vanilla.size() / 2 + 1; i < vanilla.size(); ++i) rising = rising && vanilla[i] >= vanilla[i - 1] - 0.05;
  return {rising && rpl.back() < 0.05,
          "VanillaPL " + num(vanilla[vanilla.size() / 2]) + " -> " + num(vanilla.back()) + ", RPL final " +
              num(rpl.back()) + ", Upsilon final " + (ups.empty() ? "n/a" : num(ups.back()))};
}

Outcome k_sweep(const Context& ctx) {
  const auto cfg = ctx.load("ksweep");
  const Summary s(run_experiment(cfg, ctx.workers).rows);
  const double base = s.mean("Baseline", 0);
  const std::size_t k_ood = cfg.benchmark.k_ood;
  bool ok = s.mean("Upsilon", 0) < base;
  std::string detail = "Baseline " + num(base) + "; K=0 " + num(s.mean("Upsilon", 0));
  for (std::size_t k : {std::size_t{1}, k_ood, 2 * k_ood}) {
    const double v = s.mean("Upsilon", static_cast<double>(k));
    ok = ok && v >= base;
    detail += ", K=" + std::to_string(k) + " " + num(v);
  }
  return {ok, detail};
}

Outcome sinkhorn_runtime(const Context& ctx) {
  const auto cfg = ctx.load("sinkhorn_bench");
  const auto out = run_experiment(cfg, 1);
  const Summary rows(out.rows), times(out.timings);
  const double t1 = times.mean("Sinkhorn", 1, "round_ms");
  bool ok = true;
  double prev = INFINITY;
  std::string detail = "T(1)=" + num(t1) + " ms";
  for (std::size_t step = 1; step < cfg.sinkhorn_iters.size(); ++step) {
    const double it = cfg.sinkhorn_iters[step];
    const double k = std::log2(it);
    const double t = times.mean("Sinkhorn", it, "round_ms");
    ok = ok && t < t1 * (1.0 + 2.0 * k);
    detail += " T(" + num(it) + ")=" + num(t);
  }
  for (int it : cfg.sinkhorn_iters) {
    const double r = rows.mean("Sinkhorn", it, "residual");
    ok = ok && r <= prev;
    prev = r;
  }
  detail += "; residual " + num(rows.mean("Sinkhorn", cfg.sinkhorn_iters.front(), "residual"), 10) + " -> " + num(prev, 10);
  return {ok, detail};
}

Outcome determinism(const Context& ctx) {
  // Full run, then single cells rerun on their own with a different worker count.
  auto cfg = ctx.load("ablation");
  cfg.ratios = {1.0};
  cfg.n_seeds = 3;
  cfg.variants.clear();
  for (const char* name : {"Baseline", "VanillaPL", "RPLOnly", "Upsilon"}) cfg.variants.push_back(parse_variant(name));
  const auto full = run_experiment(cfg, ctx.workers);
  std::ostringstream a, b;
  std::size_t compared = 0;
  for (const auto& v : cfg.variants) {
    auto one = cfg;
    one.variants = {v};
    const auto rerun = run_experiment(one, 1);
    for (const auto& r : rerun.rows) {
      if (r.row_type != "cell") continue;
      for (const auto& f : full.rows) {
        if (f.row_type == "cell" && f.series == r.series && f.seed_index == r.seed_index && f.metric == r.metric) {
          write_results_csv(a, {f});
          write_results_csv(b, {r});
          ++compared;
        }
      }
    }
  }
  return {compared > 0 && a.str() == b.str(), std::to_string(compared) + " cell rows compared"};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: %s <configs-dir>\n", argv[0]);
    return 2;
  }
  const Context ctx{argv[1], resolve_workers(0)};
  const std::vector<std::pair<std::string, std::function<Outcome(const Context&)>>> criteria{
      {"sinkhorn feasibility", sinkhorn_feasibility},
      {"sinkhorn optimality", sinkhorn_optimality},
      {"rpl exact balance", rpl_balance},
      {"lambda ramp values", ramp_values},
      {"gradient check", gradient_check},
      {"imbalance reproduction", imbalance},
      {"strategy ordering", strategy_ordering},
      {"degradation vs rescue", degradation_rescue},
      {"ood contamination dynamics", contamination},
      {"k sweep", k_sweep},
      {"sinkhorn iteration runtime", sinkhorn_runtime},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o{false, ""};
    try {
      o = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
