#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "srosr/all.hpp"

using namespace srosr;
namespace {

struct DataArgs {
  std::string path;
  std::string labels;
  std::string label_column = "label";
  bool no_header = false;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--data", path, "IDX image file or CSV file")->required();
    cmd->add_option("--labels", labels, "IDX label file; selects the IDX loader");
    cmd->add_option("--label-column", label_column, "CSV label column (name, or index with --no-header)");
    cmd->add_flag("--no-header", no_header, "CSV file has no header row");
  }

  DatasetSource source() const {
    DatasetSource s;
    s.loader = labels.empty() ? "csv" : "idx";
    s.path = path;
    s.labels_path = labels;
    s.label_column = label_column;
    s.csv_header = !no_header;
    return s;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw DataError("cannot write " + path);
}

std::vector<double> read_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<double> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    std::istringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      if (b == std::string::npos) continue;
      const auto e = cell.find_last_not_of(" \t\r");
      out.push_back(detail::parse_double(cell.substr(b, e - b + 1), row, 0));
    }
  }
  return out;
}

int cmd_fit_gpd(const std::string& input, double rho, const std::string& output) {
  const auto samples = read_samples(input);
  const auto fit = fit_gpd_tail(samples, rho);
  Json j = fit.model;
  j["log_likelihood"] = fit.log_likelihood;
  j["is_mle"] = fit.is_mle;
  write_text(output, j.dump(2) + "\n");
  if (!fit.is_mle) std::cerr << "warning: optimizer failed, moment estimate returned\n";
  return 0;
}

struct TrainArgs {
  DataArgs data;
  std::string method = "srosr";
  std::string output;
  std::string preset = "mnist";
  double epsilon = 0.001;
  std::size_t rounds = 20;
  std::optional<double> rho;
  double openness_est = 0.0;
  std::optional<double> delta_t;
  double quantile_q = 0.95;
  bool matched_only = false;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
  if (a.method != "srosr" && a.method != "naive") throw ConfigError("train supports srosr and naive");
  const auto data = load_source(a.data.source());
  if (a.method == "naive") {
    save_model(naive_train(data, a.epsilon, a.quantile_q, a.rounds, a.seed), a.output);
    return 0;
  }
  const auto& preset = find_preset(a.preset);
  SrosrParams p;
  p.rho = a.rho.value_or(preset.rho);
  p.epsilon = a.epsilon;
  p.rounds = a.rounds;
  p.openness_est = a.openness_est;
  p.matched_only = a.matched_only;
  p.delta_t = a.delta_t.value_or(preset_delta(preset, a.matched_only ? 0.0 : fusion_weight(a.openness_est)));
  const auto model = train(data, p, a.seed);
  for (const auto& w : model.fit_warnings) std::cerr << "warning: " << w << "\n";
  save_model(model, a.output);
  return 0;
}

int cmd_classify(const std::string& model_path, const DataArgs& data_args, const std::string& output) {
  const auto model = load_model(model_path);
  const auto data = load_source(data_args.source());
  std::ostringstream out;
  const bool is_srosr = std::holds_alternative<SrosrModel>(model);
  out << (is_srosr ? "index,truth,prediction,candidate,s_matched,s_nonmatched,fused\n" : "index,truth,prediction\n");
  for (std::size_t j = 0; j < data.size(); ++j) {
    const auto y = data.features.col(static_cast<Eigen::Index>(j));
    out << j << ',' << data.labels[j] << ',';
    if (is_srosr) {
      const auto d = classify(std::get<SrosrModel>(model), y);
      out << to_string(d.label) << ',' << d.candidate << ',' << detail::format_double(d.s_matched) << ','
          << detail::format_double(d.s_nonmatched) << ',' << detail::format_double(d.fused) << '\n';
    } else {
      out << to_string(naive_classify(std::get<NaiveModel>(model), y)) << '\n';
    }
  }
  write_text(output, out.str());
  return 0;
}

struct SweepArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> max_per_class;
  std::string format = "csv";
  std::string output;
  std::string json_output;
  std::vector<std::string> overrides;
};

int cmd_sweep(const SweepArgs& a) {
  auto config = load_sweep_config(a.config, a.overrides);
  config.master_seed = *a.seed;
  if (a.trials) config.trials = *a.trials;
  if (a.max_per_class) config.max_per_class = *a.max_per_class;
  const auto data = load_source(config.dataset);
  const auto result = run_openness_sweep(data, config);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  const auto text = a.format == "json" ? report_json(result) : report_csv(result);
  write_text(a.output, text);
  if (!a.json_output.empty()) emit_report(result, ReportFormat::Json, a.json_output);
  return 0;
}

int cmd_bench(const DataArgs& data_args, std::size_t atoms, std::size_t samples, double epsilon, std::uint64_t seed) {
  const auto data = normalize_columns(load_source(data_args.source()));
  if (atoms + samples > data.size()) throw ConfigError("dataset has fewer than atoms + samples columns");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Engine eng(seed);
  shuffle(std::span<std::size_t>(order), eng);
  const auto dict = Dictionary::from_dataset(data.select({order.begin(), order.begin() + static_cast<long>(atoms)}));
  double total_ms = 0.0;
  double worst_ms = 0.0;
  int steps = 0;
  std::size_t met = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto y = data.features.col(static_cast<Eigen::Index>(order[atoms + s]));
    const auto t0 = std::chrono::steady_clock::now();
    const auto code = solve_l1(dict, y, epsilon);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    total_ms += ms;
    worst_ms = std::max(worst_ms, ms);
    steps += code.iterations;
    met += code.constraint_met ? 1 : 0;
  }
  std::printf("atoms=%zu dim=%td samples=%zu epsilon=%g\n", atoms, dict.dim(), samples, epsilon);
  std::printf("mean_ms=%.3f max_ms=%.3f mean_steps=%.1f constraint_met=%zu/%zu\n", total_ms / samples, worst_ms,
              static_cast<double>(steps) / static_cast<double>(samples), met, samples);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse-representation open set recognition"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit-gpd", "Fit a GPD to the upper tail of a sample file");
  std::string fit_input, fit_output;
  double fit_rho = 0.14;
  fit->add_option("input", fit_input, "Numbers separated by commas or newlines")->required();
  fit->add_option("--rho", fit_rho, "Tail fraction");
  fit->add_option("-o,--output", fit_output, "Output JSON (default stdout)");

  auto* tr = app.add_subcommand("train", "Train an srosr or naive model");
  TrainArgs ta;
  ta.data.add_to(tr);
  tr->add_option("--method", ta.method)->check(CLI::IsMember({"srosr", "naive"}));
  tr->add_option("-o,--output", ta.output, "Model JSON; the dictionary goes to <output>.dict")->required();
  tr->add_option("--preset", ta.preset);
  tr->add_option("--epsilon", ta.epsilon);
  tr->add_option("--rounds", ta.rounds);
  tr->add_option("--rho", ta.rho);
  tr->add_option("--openness", ta.openness_est, "Openness estimate for the fusion weight");
  tr->add_option("--delta", ta.delta_t, "Rejection threshold (default from preset)");
  tr->add_option("--quantile", ta.quantile_q, "Naive error quantile");
  tr->add_flag("--matched-only", ta.matched_only);
  tr->add_option("--seed", ta.seed)->required();

  auto* cl = app.add_subcommand("classify", "Classify samples with a saved model");
  std::string cl_model, cl_output;
  DataArgs cl_data;
  cl->add_option("--model", cl_model)->required();
  cl_data.add_to(cl);
  cl->add_option("-o,--output", cl_output, "Decisions CSV (default stdout)");

  auto* sw = app.add_subcommand("sweep", "Run an openness sweep from a JSON config");
  SweepArgs sa;
  sw->add_option("config", sa.config)->required();
  sw->add_option("--seed", sa.seed, "Master seed")->required();
  sw->add_option("--trials", sa.trials);
  sw->add_option("--max-per-class", sa.max_per_class);
  sw->add_option("--format", sa.format)->check(CLI::IsMember({"csv", "json"}));
  sw->add_option("-o,--output", sa.output, "Report path (default stdout)");
  sw->add_option("--json", sa.json_output, "Also write the full JSON record here");
  sw->add_option("--set", sa.overrides, "Override a config field, e.g. --set methods/0/rho=0.2 (repeatable)");

  auto* be = app.add_subcommand("bench", "Time the l1 solver on a dataset");
  DataArgs be_data;
  std::size_t be_atoms = 300, be_samples = 50;
  double be_eps = 0.001;
  std::uint64_t be_seed = 0;
  be_data.add_to(be);
  be->add_option("--atoms", be_atoms);
  be->add_option("--samples", be_samples);
  be->add_option("--epsilon", be_eps);
  be->add_option("--seed", be_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Config);
  }

  try {
    if (*fit) return cmd_fit_gpd(fit_input, fit_rho, fit_output);
    if (*tr) return cmd_train(ta);
    if (*cl) return cmd_classify(cl_model, cl_data, cl_output);
    if (*sw) return cmd_sweep(sa);
    if (*be) return cmd_bench(be_data, be_atoms, be_samples, be_eps, be_seed);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
