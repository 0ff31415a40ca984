// Acceptance checks, one PASS/FAIL line per criterion. The CLI binary is the
// single argument; it is driven for the determinism check.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "instances.hpp"
#include "tgrpo/budget_allocator.hpp"
#include "tgrpo/grpo_core.hpp"
#include "tgrpo/report.hpp"
#include "tgrpo/rng.hpp"
#include "tgrpo/softmax_entropy.hpp"
#include "tgrpo/temp_scheduler.hpp"
#include "tgrpo/trainer.hpp"

using namespace tgrpo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

const std::vector<std::uint64_t> kSeeds = {1, 2, 3, 4, 5};

Outcome fidelity() {
  const std::vector<std::int64_t> vocabs = {1000, 32000, 152064};
  const std::vector<double> entropies = {0.05, 0.1, 0.2, 0.5};
  const std::vector<double> alphas = {0.90, 0.95, 1.05, 1.10};
  const auto rows = run_fidelity_sweep(vocabs, entropies, alphas);
  double ratio_err = 0, tau_err = 0;
  for (const auto& r : rows) {
    ratio_err = std::max(ratio_err, r.ratio_error);
    tau_err = std::max(tau_err, r.tau_rel_error);
  }
  const bool ok = rows.size() == 48 && ratio_err <= 0.05 && tau_err <= 0.10;
  return {ok, "48 cells, max |ratio - alpha| " + fmt("%.4f", ratio_err) +
                  ", max tau rel. error vs bisection " + fmt("%.4f", tau_err)};
}

Outcome annealing() {
  SchedulerConfig c;
  c.annealing_enabled = true;
  c.t_max = 480;
  c.t_anneal = 288;
  const double h = 1.37;
  const double e1 = std::abs(target_entropy(c, h, c.t_anneal) - h);
  const double e2 = std::abs(target_entropy(c, h, c.t_max) - c.eta * h);
  const double e3 = std::abs(target_entropy(c, h, (c.t_anneal + c.t_max) / 2) -
                             h * (1 + c.eta) / 2);
  const double worst = std::max({e1, e2, e3});
  return {worst <= 1e-12, "max deviation " + fmt("%.3g", worst)};
}

Outcome allocation() {
  auto limits = [](int g, int lo, int hi) {
    BudgetLimits l;
    l.g_default = g;
    l.g_min = lo;
    l.g_max = hi;
    return l;
  };
  const bool example =
      allocate_budgets(std::vector<double>{0.25, 0.5, 0.75, 1.0}, limits(8, 6, 12)) ==
      std::vector<int>{6, 7, 9, 10};

  Rng rng = make_stream(3, Stream::test);
  int bad = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int b = testing::uniform_int(rng, 1, 128);
    const int g = testing::uniform_int(rng, 2, 16);
    const int lo = testing::uniform_int(rng, 1, g);
    const int hi = testing::uniform_int(rng, g, 3 * g);
    std::vector<double> ks(static_cast<std::size_t>(b));
    for (auto& k : ks) k = (1 + testing::uniform_int(rng, 0, 2 * b)) / (2.0 * b + 1);
    const auto out = allocate_budgets(ks, limits(g, lo, hi));
    bool ok = std::accumulate(out.begin(), out.end(), 0) == b * g;
    for (std::size_t i = 0; i < out.size(); ++i) {
      ok &= out[i] >= lo && out[i] <= hi;
      for (std::size_t j = 0; j < out.size(); ++j)
        if (ks[i] < ks[j]) ok &= out[i] <= out[j];
    }
    bad += !ok;
  }
  return {example && bad == 0, std::string("worked example ") +
                                   (example ? "(6,7,9,10)" : "wrong") + ", " +
                                   std::to_string(bad) + "/10000 random instances violate"};
}

Outcome advantages() {
  Rng rng = make_stream(4, Stream::test);
  double worst = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int g = testing::uniform_int(rng, 2, 64);
    std::vector<double> r(static_cast<std::size_t>(g));
    for (auto& v : r) v = uniform01(rng);
    const auto a = group_advantages(r);
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / g;
    double ss = 0;
    for (double v : a) ss += (v - mean) * (v - mean);
    worst = std::max({worst, std::abs(mean), std::abs(std::sqrt(ss / g) - 1)});
  }
  bool zeros = true;
  for (double level : {0.0, 1.0, 0.3})
    for (double v : group_advantages(std::vector<double>(8, level))) zeros &= v == 0.0;
  const auto ex = group_advantages(std::vector<double>{1, 0, 0, 0});
  bool example = std::abs(ex[0] - 1.732051) <= 1e-6;
  for (int i = 1; i < 4; ++i) example &= std::abs(ex[i] + 0.577350) <= 1e-6;
  return {worst <= 1e-9 && zeros && example,
          "max moment error " + fmt("%.2g", worst) + ", uniform groups " +
              (zeros ? "zero" : "nonzero") + ", (1,0,0,0) " + (example ? "matches" : "differs")};
}

Outcome gradients() {
  Rng rng = make_stream(5, Stream::test);
  double worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto in = testing::random_instance(rng, trial % 2 == 1);
    worst = std::max(worst, testing::gradient_error(in));
  }
  return {worst <= 1e-5, "100 instances, max relative error " + fmt("%.2g", worst)};
}

std::vector<TrainResult> runs_for(Mode mode, bool dynamic = false) {
  std::vector<TrainResult> out;
  for (auto seed : kSeeds) {
    TrainConfig c;
    c.mode = mode;
    c.dynamic_rollout = dynamic;
    c.seed = seed;
    out.push_back(run(c));
  }
  return out;
}

double final_third_entropy(const TrainResult& r) {
  const std::size_t from = r.trace.size() - r.trace.size() / 3;
  double s = 0;
  for (std::size_t i = from; i < r.trace.size(); ++i) s += r.trace[i].entropy;
  return s / static_cast<double>(r.trace.size() - from);
}

double first_entropy(const TrainResult& r) { return r.trace.front().entropy; }

Outcome entropy_stability() {
  std::string detail;
  bool ok = true;
  auto part = [&](const char* label, Mode mode, auto ratio_of, double lo, double hi) {
    detail += std::string(detail.empty() ? "" : "; ") + label;
    for (const auto& r : runs_for(mode)) {
      const double x = ratio_of(r);
      ok &= x >= lo && x <= hi;
      detail += " " + fmt("%.3f", x);
    }
  };
  part("(a) grpo+ts final-third/H_init", Mode::grpo_ts,
       [](const TrainResult& r) { return final_third_entropy(r) / first_entropy(r); }, 0.9, 1.1);
  part("(b) grpo final-third/H_init", Mode::grpo,
       [](const TrainResult& r) { return final_third_entropy(r) / first_entropy(r); }, 0.0, 0.7);
  const double eta = TrainConfig{}.eta;
  part("(c) grpo+ts+an final/(eta*H_init)", Mode::grpo_ts_an,
       [&](const TrainResult& r) { return r.trace.back().entropy / (eta * *r.h_init); }, 0.9,
       1.1);
  return {ok, detail};
}

double incorrect_after_first_epoch(const TrainResult& r) {
  double s = 0;
  int n = 0;
  for (const auto& row : r.trace)
    if (row.epoch >= 2) {
      s += row.frac_all_incorrect;
      ++n;
    }
  return s / n;
}

Outcome dynamic_rollout() {
  const auto off = runs_for(Mode::grpo_ts_an, false);
  const auto on = runs_for(Mode::grpo_ts_an, true);
  int wins = 0;
  double gap = 0;
  std::string detail;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const double a = incorrect_after_first_epoch(off[i]);
    const double b = incorrect_after_first_epoch(on[i]);
    wins += b < a;
    gap += (a - b) / static_cast<double>(kSeeds.size());
    detail += " " + fmt("%.3f", a) + "->" + fmt("%.3f", b);
  }
  return {wins >= 4, std::to_string(wins) + "/5 seeds lower with dynamic rollout;" + detail +
                         "; mean reduction " + fmt("%.2f", 100 * gap) + " points"};
}

Outcome exploration() {
  const auto base = runs_for(Mode::grpo);
  const auto ts = runs_for(Mode::grpo_ts);
  const auto er = runs_for(Mode::grpo_er);
  int wins = 0, er_wins = 0;
  double ts_gap = 0, er_gap = 0;
  for (std::size_t i = 0; i < kSeeds.size(); ++i) {
    const double p = base[i].evals.back().at(16);
    wins += ts[i].evals.back().at(16) >= p;
    er_wins += er[i].evals.back().at(16) >= p;
    ts_gap += (ts[i].evals.back().at(16) - p) / 5;
    er_gap += (er[i].evals.back().at(16) - p) / 5;
  }
  return {wins >= 3, "grpo+ts pass@16 >= grpo in " + std::to_string(wins) +
                         "/5 seeds (mean diff " + fmt("%+.4f", ts_gap) +
                         "); grpo+er, not gated: " + std::to_string(er_wins) +
                         "/5 (mean diff " + fmt("%+.4f", er_gap) + ")"};
}

Outcome enumeration() {
  int bad = 0, cases = 0;
  for (int n = 1; n <= 10; ++n)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k <= n; ++k, ++cases)
        bad += pass_at_k(n, c, k) != testing::pass_by_enumeration(n, c, k);
  return {bad == 0, std::to_string(cases) + " (n, c, k) cases, " + std::to_string(bad) +
                        " differ from enumeration"};
}

Outcome determinism(const std::string& cli) {
  const fs::path root = fs::temp_directory_path() / "tgrpo_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path config = root / "config.json";
  write_atomically(config, R"({"method": {"mode": "grpo+ts+an", "dynamic_rollout": true}})");
  bool ok = true;
  for (const char* out : {"a", "b"}) {
    const std::string cmd = "\"" + cli + "\" train --config \"" + config.string() +
                            "\" --seed 7 --out \"" + (root / out).string() + "\" > /dev/null";
    ok &= std::system(cmd.c_str()) == 0;
  }
  std::string detail;
  for (const char* name : {"trace.jsonl", "trace.csv", "trace_policy.json"}) {
    bool same = false;
    try {
      same = read_file(root / "a" / name) == read_file(root / "b" / name);
    } catch (const std::exception&) {
    }
    ok &= same;
    detail += std::string(detail.empty() ? "" : ", ") + name + (same ? " identical" : " differ");
  }
  fs::remove_all(root);
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: acceptance <path to tgrpo>\n");
    return 2;
  }
  const std::string cli = argv[1];
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"temperature update fidelity", fidelity},
      {"annealed target endpoints", annealing},
      {"budget allocation", allocation},
      {"group advantages", advantages},
      {"analytic gradients", gradients},
      {"entropy stability", entropy_stability},
      {"dynamic rollout", dynamic_rollout},
      {"exploration retention", exploration},
      {"pass@k enumeration", enumeration},
      {"determinism", [&] { return determinism(cli); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("criterion %zu %s: %s (%s) [%.2fs]\n", i + 1, criteria[i].first,
                o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
  }
  return failed == 0 ? 0 : 1;
}
