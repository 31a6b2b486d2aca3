// tabkde command-line front end: fit, sample, evaluate, coreset,
// ablate-boundary, plus the data helpers infer-schema, split and demo-data.

#include "tabkde/fixtures.hpp"
#include "tabkde/tabkde.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using tabkde::Error;
using tabkde::ErrorKind;
using json = nlohmann::ordered_json;

unsigned resolve_threads(unsigned requested) { return requested ? requested : tabkde::default_threads(); }

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path + "'");
  return out;
}

void write_json(const std::string& path, const json& doc) {
  auto out = open_output(path);
  out << doc.dump(2) << '\n';
}

std::string fmt(double v) { return tabkde::csv::format_number(v); }

json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

tabkde::TableSchema schema_for(const std::string& data_path, const std::string& schema_path) {
  return schema_path.empty() ? tabkde::infer_schema(data_path) : tabkde::load_schema(schema_path);
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string data, schema, out, policy = "iterative", encoder = "pge", rounding = "nearer";
  std::uint64_t seed = 0;
  std::size_t dcr_repetitions = 5;
  unsigned threads = 0;
};

int run_fit(const FitArgs& a) {
  tabkde::FitOptions options;
  options.seed = a.seed;
  options.dcr_repetitions = a.dcr_repetitions;
  options.threads = resolve_threads(a.threads);
  auto policy = tabkde::parse_boundary_policy(a.policy);
  auto encoder = tabkde::parse_categorical_encoding(a.encoder);
  if (!policy) throw Error(ErrorKind::Config, "unknown --policy '" + a.policy + "'");
  if (!encoder) throw Error(ErrorKind::Config, "unknown --encoder '" + a.encoder + "'");
  if (a.rounding != "nearer" && a.rounding != "literal") throw Error(ErrorKind::Config, "unknown --rounding '" + a.rounding + "'");
  if (a.dcr_repetitions == 0) throw Error(ErrorKind::Config, "--dcr-repetitions must be positive");
  options.policy = *policy;
  options.categorical = *encoder;
  options.rounding = a.rounding == "literal" ? tabkde::DiscreteRounding::Literal : tabkde::DiscreteRounding::Nearer;

  auto report = [](const tabkde::StageTiming& t) {
    std::cerr << "stage " << t.stage << ' ' << std::fixed << std::setprecision(3) << t.seconds << "s\n";
  };
  const auto start = std::chrono::steady_clock::now();
  const auto schema = schema_for(a.data, a.schema);
  const auto table = tabkde::load_table(a.data, schema);
  report({"load", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
  const auto model = tabkde::fit_model(table, options, report);
  tabkde::save_model(a.out, model);
  std::cerr << "fit total " << std::fixed << std::setprecision(3)
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << "s; "
            << table.rows() << " rows, " << table.cols() << " columns, " << model.radius.k()
            << " radius components\n";
  return 0;
}

// ---------------------------------------------------------------- sample

struct SampleArgs {
  std::string model, out, stats, policy;
  std::size_t rows = 0;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

json stats_json(const std::string& policy, const tabkde::SampleStats& s) {
  json j;
  j["policy"] = policy;
  j["rows"] = s.iterations.size();
  j["mean_iterations"] = s.mean_iterations();
  j["std_iterations"] = s.stddev_iterations();
  j["max_iterations"] = s.max_iterations();
  j["failures"] = s.failures;
  j["failure_percent"] = s.failure_percent();
  return j;
}

int run_sample(const SampleArgs& a) {
  const auto start = std::chrono::steady_clock::now();
  const auto model = tabkde::load_model(a.model);
  auto options = tabkde::generate_options(model);
  options.threads = resolve_threads(a.threads);
  if (a.seed) options.seed = *a.seed;
  if (!a.policy.empty()) {
    auto policy = tabkde::parse_boundary_policy(a.policy);
    if (!policy) throw Error(ErrorKind::Config, "unknown --policy '" + a.policy + "'");
    options.policy = *policy;
  }
  const auto generated = tabkde::generate(model, a.rows, options);
  tabkde::save_table(a.out, generated.table);
  const json stats = stats_json(std::string(tabkde::to_string(options.policy)), generated.stats);
  if (!a.stats.empty()) write_json(a.stats, stats);
  std::cerr << "sample " << a.rows << " rows in " << std::fixed << std::setprecision(3)
            << std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() << "s; "
            << "mean iterations " << generated.stats.mean_iterations() << ", max "
            << generated.stats.max_iterations() << ", failures " << generated.stats.failures << '\n';
  return 0;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string model, synth, train, holdout, out, csv_out, histogram;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

int run_evaluate(const EvaluateArgs& a) {
  const auto model = tabkde::load_model(a.model);
  const auto& schema = model.schema();
  const auto synth = tabkde::load_table(a.synth, schema);
  const auto train = tabkde::load_table(a.train, schema);
  const auto holdout = tabkde::load_table(a.holdout, schema);
  const unsigned threads = resolve_threads(a.threads);

  const auto marginal = tabkde::marginal_error(train, synth);
  const auto pairwise = tabkde::pairwise_error(train, synth);
  const auto c2st = tabkde::c2st(synth, holdout, a.seed);
  const auto dcr = tabkde::dcr_histogram(synth, train, holdout, model, threads);
  const double odds = tabkde::nno(dcr.score_percent);

  json report;
  report["marginal"]["average_percent"] = 100.0 * marginal.average;
  for (std::size_t j = 0; j < schema.size(); ++j) report["marginal"]["columns"][schema.column(j).name()] = marginal.per_column[j];
  report["pairwise"]["average_percent"] = 100.0 * pairwise.average;
  for (const auto& p : pairwise.pairs) {
    report["pairwise"]["pairs"][schema.column(p.first).name() + "|" + schema.column(p.second).name()] = p.value;
  }
  report["c2st"]["score"] = c2st.score;
  report["c2st"]["mean_auc"] = c2st.mean_auc;
  report["dcr_score_percent"] = dcr.score_percent;
  report["nno"] = number_or_string(odds);
  if (a.out.empty()) std::cout << report.dump(2) << '\n';
  else write_json(a.out, report);

  if (!a.csv_out.empty()) {
    auto out = open_output(a.csv_out);
    tabkde::csv::write_record(out, {"metric", "item", "value"});
    tabkde::csv::write_record(out, {"marginal", "average_percent", fmt(100.0 * marginal.average)});
    for (std::size_t j = 0; j < schema.size(); ++j) {
      tabkde::csv::write_record(out, {"marginal", schema.column(j).name(), fmt(marginal.per_column[j])});
    }
    tabkde::csv::write_record(out, {"pairwise", "average_percent", fmt(100.0 * pairwise.average)});
    for (const auto& p : pairwise.pairs) {
      tabkde::csv::write_record(
          out, {"pairwise", schema.column(p.first).name() + "|" + schema.column(p.second).name(), fmt(p.value)});
    }
    tabkde::csv::write_record(out, {"c2st", "score", fmt(c2st.score)});
    tabkde::csv::write_record(out, {"c2st", "mean_auc", fmt(c2st.mean_auc)});
    tabkde::csv::write_record(out, {"dcr", "score_percent", fmt(dcr.score_percent)});
    tabkde::csv::write_record(out, {"dcr", "nno", fmt(odds)});
  }
  if (!a.histogram.empty()) {
    auto out = open_output(a.histogram);
    tabkde::csv::write_record(out, {"dcr_train", "dcr_holdout"});
    for (std::size_t i = 0; i < dcr.to_train.size(); ++i) {
      tabkde::csv::write_record(out, {fmt(dcr.to_train[i]), fmt(dcr.to_holdout[i])});
    }
  }
  return 0;
}

// ---------------------------------------------------------------- coreset

struct CoresetArgs {
  std::string model, out, mode = "random", bandwidth = "0.2";
  std::size_t size = 5000, epochs = 30, batch = 256;
  double lr = 0.01;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

int run_coreset(const CoresetArgs& a) {
  auto model = tabkde::load_model(a.model);
  if (model.latent.rows() == 0) throw Error(ErrorKind::Config, "model already holds a coreset instead of latent rows");
  if (a.mode != "random" && a.mode != "trained") throw Error(ErrorKind::Config, "unknown --mode '" + a.mode + "'");
  tabkde::CoresetTrainOptions options;
  options.epochs = a.epochs;
  options.learning_rate = a.lr;
  options.batch = a.batch;
  options.seed = a.seed;
  options.threads = resolve_threads(a.threads);

  if (a.size > static_cast<std::size_t>(model.latent.rows())) {
    throw Error(ErrorKind::CoresetTooLarge, "coreset size " + std::to_string(a.size) + " exceeds " +
                                                std::to_string(model.latent.rows()) + " training rows");
  }
  double h = 0.2;
  if (a.bandwidth == "auto") {
    const auto selection = tabkde::select_bandwidth(model.latent, a.size, tabkde::default_bandwidth_candidates(), options);
    for (const auto& s : selection.scores) {
      std::cerr << "bandwidth " << s.bandwidth << " initial-loss " << s.initial_loss << " final-loss " << s.final_loss
                << " score " << (s.relative_decrease ? fmt(*s.relative_decrease) : std::string("n/a")) << '\n';
    }
    h = selection.bandwidth;
    std::cerr << "selected bandwidth " << h << '\n';
  } else {
    auto parsed = tabkde::csv::parse_number(a.bandwidth);
    if (!parsed || !(*parsed > 0.0)) throw Error(ErrorKind::Config, "--bandwidth must be positive or 'auto'");
    h = *parsed;
  }

  if (a.mode == "random") {
    model.coreset = tabkde::random_coreset(model.latent, a.size, a.seed, h);
  } else {
    const auto trained = tabkde::train_coreset(model.latent, a.size, h, options, [](std::size_t epoch, double loss) {
      std::cerr << "epoch " << epoch << " loss " << std::setprecision(6) << std::scientific << loss << '\n';
    });
    if (!trained.loss_decreased()) std::cerr << "warning: training loss did not decrease\n";
    model.coreset = trained.model;
  }
  model.latent.resize(0, model.latent.cols());
  tabkde::save_model(a.out, model);
  return 0;
}

// ---------------------------------------------------------------- ablate-boundary

struct AblateArgs {
  std::string model, out, json_out;
  std::size_t rows = 0;
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
};

int run_ablate(const AblateArgs& a) {
  const auto model = tabkde::load_model(a.model);
  auto options = tabkde::generate_options(model);
  options.threads = resolve_threads(a.threads);
  if (a.seed) options.seed = *a.seed;

  std::ostringstream table;
  table << "| Policy | Rows | Features | Correction iterations | Max iterations | Failed | Percentage failed |\n"
        << "|---|---|---|---|---|---|---|\n";
  json doc = json::array();
  for (auto policy : {tabkde::BoundaryPolicy::Iterative, tabkde::BoundaryPolicy::KeepSeed,
                      tabkde::BoundaryPolicy::ChangeSeed}) {
    options.policy = policy;
    const auto batch = tabkde::generate_latent(model, a.rows, options);
    const auto& s = batch.stats;
    table << "| " << tabkde::to_string(policy) << " | " << a.rows << " | " << model.dims() << " | " << std::fixed
          << std::setprecision(2) << s.mean_iterations() << " ± " << s.stddev_iterations() << " | "
          << s.max_iterations() << " | " << s.failures << " | " << s.failure_percent() << "% |\n";
    doc.push_back(stats_json(std::string(tabkde::to_string(policy)), s));
  }
  if (a.out.empty()) std::cout << table.str();
  else open_output(a.out) << table.str();
  if (!a.json_out.empty()) write_json(a.json_out, doc);
  return 0;
}

// ---------------------------------------------------------------- helpers

int run_infer(const std::string& data, const std::vector<std::string>& ordinals, const std::string& out) {
  std::map<std::string, std::vector<std::string>> hints;
  for (const auto& spec : ordinals) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::Config, "--ordinal expects column=level1,level2,...");
    auto records = tabkde::csv::parse(spec.substr(eq + 1));
    hints[spec.substr(0, eq)] = records.empty() ? std::vector<std::string>{} : records.front().fields;
  }
  const auto schema = tabkde::infer_schema(data, hints);
  if (out.empty()) tabkde::write_schema(std::cout, schema);
  else {
    auto f = open_output(out);
    tabkde::write_schema(f, schema);
  }
  return 0;
}

int run_split(const std::string& data, const std::string& schema_path, double fraction, std::uint64_t seed,
              const std::string& train_out, const std::string& holdout_out) {
  const auto table = tabkde::load_table(data, schema_for(data, schema_path));
  const auto parts = tabkde::split(table, fraction, seed);
  tabkde::save_table(train_out, parts.train);
  tabkde::save_table(holdout_out, parts.holdout);
  std::cerr << "train " << parts.train.rows() << " rows, holdout " << parts.holdout.rows() << " rows\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TabKDE: copula-space KDE generator for mixed-type tables"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to a CSV table");
  fit_cmd->add_option("data", fit.data, "Training CSV")->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--schema", fit.schema, "Schema file (inferred from the data if omitted)");
  fit_cmd->add_option("--out,-o", fit.out, "Model file to write")->required();
  fit_cmd->add_option("--seed", fit.seed);
  fit_cmd->add_option("--policy", fit.policy, "iterative | keep_seed | change_seed | none");
  fit_cmd->add_option("--encoder", fit.encoder, "pge | frequency | uniform");
  fit_cmd->add_option("--rounding", fit.rounding, "nearer | literal");
  fit_cmd->add_option("--dcr-repetitions", fit.dcr_repetitions);
  fit_cmd->add_option("--threads", fit.threads, "0 = TABKDE_THREADS or all cores");

  SampleArgs sample;
  auto* sample_cmd = app.add_subcommand("sample", "Generate synthetic rows from a model");
  sample_cmd->add_option("model", sample.model)->required()->check(CLI::ExistingFile);
  sample_cmd->add_option("--rows,-n", sample.rows, "Number of rows")->required();
  sample_cmd->add_option("--out,-o", sample.out, "Synthetic CSV to write")->required();
  sample_cmd->add_option("--stats", sample.stats, "Write boundary-correction statistics (JSON)");
  sample_cmd->add_option("--seed", sample.seed, "Defaults to the seed stored in the model");
  sample_cmd->add_option("--policy", sample.policy, "Override the model's boundary policy");
  sample_cmd->add_option("--threads", sample.threads);

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Fidelity and leakage metrics");
  eval_cmd->add_option("model", eval.model)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("synth", eval.synth)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("train", eval.train)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("holdout", eval.holdout)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--out,-o", eval.out, "JSON report (stdout if omitted)");
  eval_cmd->add_option("--csv", eval.csv_out, "Flat metric,item,value CSV");
  eval_cmd->add_option("--dcr-histogram", eval.histogram, "Export DCR-to-train and DCR-to-holdout sequences");
  eval_cmd->add_option("--seed", eval.seed);
  eval_cmd->add_option("--threads", eval.threads);

  CoresetArgs core;
  auto* core_cmd = app.add_subcommand("coreset", "Replace the latent rows of a model by a coreset");
  core_cmd->add_option("model", core.model)->required()->check(CLI::ExistingFile);
  core_cmd->add_option("--coreset-size,-m", core.size);
  core_cmd->add_option("--mode", core.mode, "random | trained");
  core_cmd->add_option("--bandwidth", core.bandwidth, "Kernel bandwidth, or 'auto'");
  core_cmd->add_option("--epochs", core.epochs);
  core_cmd->add_option("--lr", core.lr);
  core_cmd->add_option("--batch", core.batch);
  core_cmd->add_option("--seed", core.seed);
  core_cmd->add_option("--threads", core.threads);
  core_cmd->add_option("--out,-o", core.out)->required();

  AblateArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate-boundary", "Compare boundary policies on one model");
  ablate_cmd->add_option("model", ablate.model)->required()->check(CLI::ExistingFile);
  ablate_cmd->add_option("--rows,-n", ablate.rows)->required();
  ablate_cmd->add_option("--seed", ablate.seed);
  ablate_cmd->add_option("--threads", ablate.threads);
  ablate_cmd->add_option("--out,-o", ablate.out, "Table file (stdout if omitted)");
  ablate_cmd->add_option("--json", ablate.json_out);

  std::string infer_data, infer_out;
  std::vector<std::string> ordinals;
  auto* infer_cmd = app.add_subcommand("infer-schema", "Write a schema file inferred from a CSV");
  infer_cmd->add_option("data", infer_data)->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--ordinal", ordinals, "column=level1,level2,... (lowest first)");
  infer_cmd->add_option("--out,-o", infer_out);

  std::string split_data, split_schema, split_train, split_holdout;
  double split_fraction = 0.5;
  std::uint64_t split_seed = 0;
  auto* split_cmd = app.add_subcommand("split", "Seeded train/holdout split");
  split_cmd->add_option("data", split_data)->required()->check(CLI::ExistingFile);
  split_cmd->add_option("--schema", split_schema);
  split_cmd->add_option("--holdout-fraction", split_fraction);
  split_cmd->add_option("--seed", split_seed);
  split_cmd->add_option("--train-out", split_train)->required();
  split_cmd->add_option("--holdout-out", split_holdout)->required();

  std::size_t demo_rows = 5000;
  std::uint64_t demo_seed = 0;
  std::string demo_out;
  auto* demo_cmd = app.add_subcommand("demo-data", "Write the built-in mixed-type demo table");
  demo_cmd->add_option("--rows,-n", demo_rows);
  demo_cmd->add_option("--seed", demo_seed);
  demo_cmd->add_option("--out,-o", demo_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: ConfigError: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*fit_cmd) return run_fit(fit);
    if (*sample_cmd) return run_sample(sample);
    if (*eval_cmd) return run_evaluate(eval);
    if (*core_cmd) return run_coreset(core);
    if (*ablate_cmd) return run_ablate(ablate);
    if (*infer_cmd) return run_infer(infer_data, ordinals, infer_out);
    if (*split_cmd) return run_split(split_data, split_schema, split_fraction, split_seed, split_train, split_holdout);
    if (*demo_cmd) {
      tabkde::save_table(demo_out, tabkde::fixtures::desk_table(demo_rows, demo_seed));
      std::ofstream schema(demo_out + ".schema");
      tabkde::write_schema(schema, tabkde::fixtures::desk_schema());
      return 0;
    }
  } catch (const Error& e) {
    std::string message = e.what();
    for (char& c : message) {
      if (c == '\n') c = ' ';
    }
    std::cerr << "error: " << tabkde::to_string(e.kind()) << ": " << message << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
