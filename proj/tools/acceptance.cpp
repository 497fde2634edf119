// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// --known-red NAME (repeatable) instead exits 0 only when exactly the named
// criteria fail; their FAIL lines are still printed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "srosr/all.hpp"

using namespace srosr;

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kSweepSeed = 1;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::vector<std::string> failed;

void report(const char* name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  if (!o.pass) failed.push_back(name);
  std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const LabeledDataset& mnist() {
  static const auto data = load_idx(std::string(SROSR_DATA_DIR) + "/mnist3k-images-idx3-ubyte",
                                    std::string(SROSR_DATA_DIR) + "/mnist3k-labels-idx1-ubyte");
  return data;
}

Outcome l1_oracle() {
  std::ifstream in(std::string(SROSR_FIXTURE_DIR) + "/l1_oracle.json");
  const auto j = Json::parse(in);
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t bad = 0;
  for (const auto& e : j) {
    const auto m = e["rows"].get<Eigen::Index>();
    const auto n = e["cols"].get<Eigen::Index>();
    const auto flat = e["atoms_row_major"].get<std::vector<double>>();
    Eigen::MatrixXd a(m, n);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index k = 0; k < n; ++k) a(i, k) = flat[static_cast<std::size_t>(i * n + k)];
    }
    const auto yv = e["y"].get<std::vector<double>>();
    const Dictionary dict(a, e["labels"].get<std::vector<ClassId>>());
    const auto code = solve_l1(dict, Eigen::Map<const Eigen::VectorXd>(yv.data(), m), e["epsilon"].get<double>());
    const double err = std::abs(code.coefficients.lpNorm<1>() - e["objective"].get<double>());
    worst = std::max(worst, err);
    if (err > 1e-4 || !code.constraint_met) ++bad;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 30.0,
          fmt("%zu instances, worst |objective - oracle| %.2e, %zu outside 1e-4, %.2f s", j.size(), worst, bad, secs)};
}

Outcome gpd_recovery() {
  const std::array<std::pair<double, double>, 3> truths = {{{1.0, 0.0}, {1.0, 0.2}, {2.0, -0.2}}};
  const auto t0 = Clock::now();
  std::string detail;
  bool ok = true;
  for (std::size_t s = 0; s < truths.size(); ++s) {
    const auto [sigma, xi] = truths[s];
    int hits = 0;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
      Engine eng(derive_seed(1000 + s, rep));
      std::vector<double> z(10000);
      for (auto& v : z) {
        const double u = uniform01(eng);
        v = xi == 0.0 ? -sigma * std::log1p(-u) : sigma / xi * (std::pow(1.0 - u, -xi) - 1.0);
      }
      const auto fit = fit_gpd_exceedances(z);
      if (std::abs(fit.model.sigma - sigma) <= 0.1 && std::abs(fit.model.xi - xi) <= 0.1) ++hits;
    }
    ok = ok && hits >= 48;
    detail += fmt("(%g,%g) %d/50; ", sigma, xi, hits);
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 10.0, detail + fmt("%.2f s", secs)};
}

Outcome gpd_cdf_values() {
  const double a = gpd_cdf(1.0, 0.0, 0.0);
  const double b = gpd_cdf(1.0, 0.0, 1.0);
  const double c = gpd_cdf(1.0, 0.5, 1.0);
  double worst = 0.0;
  for (const double sigma : {0.5, 1.0, 2.0, 5.0}) {
    for (double z = 0.0; z <= 20.0 * sigma; z += 0.01 * sigma) {
      for (const double eps : {1e-9, -1e-9, 1e-7, -1e-7}) {
        worst = std::max(worst, std::abs(gpd_cdf(sigma, eps, z) - gpd_cdf(sigma, 0.0, z)));
      }
    }
  }
  const bool ok = std::abs(a) <= 1e-4 && std::abs(b - 0.6321) <= 1e-4 && std::abs(c - 0.5556) <= 1e-4 && worst <= 1e-6;
  return {ok, fmt("G(0)=%.4f G(1;1,0)=%.4f G(1;1,0.5)=%.4f, max |G(xi->0) - G(0)| %.2e", a, b, c, worst)};
}

Outcome openness_weight() {
  const double o = openness(6, 6, 10);
  const double w0 = fusion_weight(0.0);
  const double w = fusion_weight(0.1340);
  const bool ok = std::abs(o - 0.1340) <= 1e-4 && w0 == 1.0 / 3.0 && std::abs(w - 0.2887) <= 1e-4;
  return {ok, fmt("openness(6,6,10)=%.6f w(0)=%.17g w(0.1340)=%.6f", o, w0, w)};
}

Outcome closed_set() {
  const auto t0 = Clock::now();
  const auto groups = mnist().index_by_class();
  std::vector<std::size_t> train_idx, test_idx;
  Engine eng(derive_seed(kSweepSeed, 77));
  std::size_t taken = 0;
  for (auto [cls, idx] : groups) {
    if (taken++ == 6) break;
    shuffle(std::span<std::size_t>(idx), eng);
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + 50);
    test_idx.insert(test_idx.end(), idx.begin() + 50, idx.begin() + 150);
  }
  const auto train_set = mnist().select(train_idx);
  const auto test_set = normalize_columns(mnist().select(test_idx));
  SrosrParams p;
  p.openness_est = 0.0;
  p.delta_t = 1.0 + fusion_weight(0.0);
  const auto model = train(train_set, p, derive_seed(kSweepSeed, 78));
  std::size_t correct = 0, agree = 0;
  for (std::size_t j = 0; j < test_set.size(); ++j) {
    const auto y = test_set.features.col(static_cast<Eigen::Index>(j));
    const auto src = src_classify(model.dictionary, y, model.epsilon, model.solver);
    correct += src.label == test_set.labels[j] ? 1 : 0;
    const auto d = classify(model, y);
    agree += d.label && *d.label == src.label ? 1 : 0;
  }
  const double n = static_cast<double>(test_set.size());
  const double secs = seconds_since(t0);
  const bool ok = correct / n >= 0.90 && agree == test_set.size() && secs < 300.0;
  return {ok, fmt("SRC accuracy %.4f on %zu samples, agreement %zu/%zu, %.1f s", correct / n, test_set.size(), agree,
                  test_set.size(), secs)};
}

const MethodSummary& summary(const LevelResult& level, std::string_view method) {
  for (const auto& s : level.summaries) {
    if (s.method == method) return s;
  }
  throw ConfigError("method " + std::string(method) + " missing from sweep");
}

SweepResult desk_sweep;
double desk_seconds = 0.0;

Outcome ordering() {
  auto config = load_sweep_config(std::string(SROSR_CONFIG_DIR) + "/mnist_desk.json");
  config.master_seed = kSweepSeed;
  const auto t0 = Clock::now();
  desk_sweep = run_openness_sweep(load_source(config.dataset), config);
  desk_seconds = seconds_since(t0);
  for (const auto& level : desk_sweep.levels) {
    std::printf("  openness %.4f:", level.openness);
    for (const auto& s : level.summaries) {
      std::printf(" %s %.4f+-%.4f (n=%zu)", s.method.c_str(), s.f_measure_mean, s.f_measure_std, s.trials);
    }
    std::printf("\n");
  }
  bool ok = desk_seconds < 1800.0;
  for (const auto& level : desk_sweep.levels) {
    const double f = summary(level, "srosr").f_measure_mean;
    ok = ok && summary(level, "srosr").trials == config.trials;
    ok = ok && f >= summary(level, "naive").f_measure_mean && f >= summary(level, "sci").f_measure_mean;
  }
  const auto& last = desk_sweep.levels.back();
  const double margin = summary(last, "srosr").f_measure_mean - summary(last, "sci").f_measure_mean;
  ok = ok && margin >= 0.02;
  return {ok, fmt("SROSR >= naive and SCI at all %zu levels: %s; margin over SCI at max openness %.4f; %.1f s",
                  desk_sweep.levels.size(), ok ? "yes" : "see table", margin, desk_seconds)};
}

Outcome fusion_ablation() {
  if (desk_sweep.levels.empty()) return {false, "desk sweep did not run"};
  bool ok = true;
  std::string detail;
  for (const auto& level : desk_sweep.levels) {
    const double full = summary(level, "srosr").f_measure_mean;
    const double matched = summary(level, "srosr_matched_only").f_measure_mean;
    ok = ok && full >= matched;
    detail += fmt("%.4f: %.4f vs %.4f; ", level.openness, full, matched);
  }
  return {ok, detail + fmt("T=%zu", desk_sweep.config.trials)};
}

Outcome invariants() {
  std::size_t checks = 0;
  auto require = [&](bool cond, const char* what) {
    ++checks;
    if (!cond) throw NumericalError(std::string("invariant violated: ") + what);
  };

  Engine eng(derive_seed(kSweepSeed, 99));
  for (int t = 0; t < 200; ++t) {
    const auto m = static_cast<Eigen::Index>(4 + uniform_below(eng, 8));
    const auto n = static_cast<Eigen::Index>(4 + uniform_below(eng, 16));
    const auto k = 2 + uniform_below(eng, 3);
    Eigen::MatrixXd a(m, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) a(i, j) = uniform01(eng) - 0.5;
      a.col(j).normalize();
    }
    std::vector<ClassId> labels;
    for (Eigen::Index j = 0; j < n; ++j) labels.push_back(std::to_string(static_cast<std::uint64_t>(j) % k));
    const Dictionary dict(a, labels);
    SparseCode code;
    code.coefficients.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) code.coefficients[j] = uniform01(eng) < 0.5 ? 0.0 : uniform01(eng) - 0.5;
    const double s = sci(code, dict).value;
    require(s >= 0.0 && s <= 1.0, "SCI in [0, 1]");
    SparseCode scaled = code;
    scaled.coefficients *= 0.1 + 10.0 * uniform01(eng);
    require(std::abs(sci(scaled, dict).value - s) <= 1e-12, "SCI scale invariance");
  }

  for (double sm = 0.0; sm <= 1.0; sm += 0.01) {
    for (double snm = 0.0; snm <= 1.0; snm += 0.01) {
      for (const double w : {0.0, 0.1, 0.2887, 1.0 / 3.0}) {
        const double f = fuse_scores(sm, snm, w);
        require(f >= 0.0 && f <= 1.0 + w + 1e-15, "fused score bounds");
      }
    }
  }

  for (const double xi : {-0.4, -0.1, 0.0, 0.1, 0.4}) {
    const GpdModel g{0.7, xi, 0.3, 0.14, 30};
    double prev = 0.0;
    for (double x = -5.0; x <= 10.0; x += 0.005) {
      const double p = tail_probability(g, x);
      require(p >= prev && p <= 1.0, "tail probability monotone");
      prev = p;
    }
  }

  const std::vector<Label> pool = {"a", "b", "c", std::nullopt};
  for (int t = 0; t < 500; ++t) {
    const auto n = 1 + uniform_below(eng, 50);
    std::vector<Label> truth, pred;
    for (std::uint64_t i = 0; i < n; ++i) {
      truth.push_back(pool[uniform_below(eng, 4)]);
      pred.push_back(pool[uniform_below(eng, 4)]);
    }
    const auto c = score_predictions(pred, truth);
    require(c.total() == n, "count conservation");
    require(f_measure(c) >= 0.0 && f_measure(c) <= 1.0 && accuracy(c) >= 0.0 && accuracy(c) <= 1.0, "metric bounds");
  }

  auto config = load_sweep_config(std::string(SROSR_CONFIG_DIR) + "/mnist_desk.json");
  config.master_seed = kSweepSeed;
  config.trials = 2;
  config.max_per_class = 50;
  config.levels = {{6, 2}};
  const auto data = load_source(config.dataset);
  const auto first = report_json(run_openness_sweep(data, config));
  const auto second = report_json(run_openness_sweep(data, config));
  require(first == second, "bit-identical sweep reports");

  return {true, fmt("%zu checks, repeated sweep report %zu bytes identical", checks, first.size())};
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> known_red;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--known-red" && i + 1 < argc) {
      known_red.push_back(argv[++i]);
    } else {
      std::fprintf(stderr, "usage: acceptance [--known-red NAME]...\n");
      return 2;
    }
  }
  report("l1-oracle-equivalence", l1_oracle);
  report("gpd-recovery", gpd_recovery);
  report("gpd-cdf", gpd_cdf_values);
  report("openness-weight", openness_weight);
  report("closed-set-sanity", closed_set);
  report("openness-ordering", ordering);
  report("fusion-ablation", fusion_ablation);
  report("invariants", invariants);
  std::printf("%s: %zu criteria failed\n", failed.empty() ? "ALL PASS" : "NOT ACCEPTED", failed.size());
  if (known_red.empty()) return failed.empty() ? 0 : 1;
  std::sort(known_red.begin(), known_red.end());
  std::sort(failed.begin(), failed.end());
  if (failed == known_red) {
    std::printf("failures match the documented known-red list\n");
    return 0;
  }
  std::printf("failures differ from the documented known-red list\n");
  return 1;
}
