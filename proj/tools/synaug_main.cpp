#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "synaug/config.hpp"
#include "synaug/csv.hpp"
#include "synaug/diagnostics.hpp"
#include "synaug/error.hpp"
#include "synaug/experiments.hpp"
#include "synaug/generators.hpp"
#include "synaug/metrics.hpp"
#include "synaug/trainer.hpp"
#include "synaug/vtss.hpp"

using namespace synaug;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int exit_code_for(const Error& e) {
  switch (category_of(e.code())) {
    case ErrorCategory::Usage: return kExitUsage;
    case ErrorCategory::Data: return kExitData;
    case ErrorCategory::Numeric: return kExitNumeric;
  }
  return kExitNumeric;
}

// Writes to the file at `path`, or stdout when empty or "-".
template <class F>
void with_output(const std::string& path, F&& write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  write(out);
}

void announce(const std::string& command, const Json& config) {
  std::cerr << "# synaug " << command << "\n# config: " << config.dump() << "\n";
}

struct LossFlags {
  std::string family = "logistic";
  std::string target = "raw";
  bool intercept = false;

  void add(CLI::App* app) {
    app->add_option("--loss", family, "Loss family: logistic, squared, hinge")->capture_default_str();
    app->add_option("--target", target, "Squared-loss target encoding: raw or centered")->capture_default_str();
    app->add_flag("--intercept", intercept, "Fit an unpenalized intercept");
  }

  LossSpec spec() const {
    LossSpec s;
    s.family = parse_loss_family(family);
    s.squared_target = parse_squared_target(target);
    s.fit_intercept = intercept;
    return s;
  }
};

struct FitFlags {
  int max_iters = 500;
  double grad_tol = 1e-8;
  std::optional<double> ridge;
  std::string step_rule = "newton_backtracking";

  void add(CLI::App* app) {
    app->add_option("--max-iters", max_iters, "Optimizer iteration cap")->capture_default_str();
    app->add_option("--grad-tol", grad_tol, "Gradient-norm stopping tolerance")->capture_default_str();
    app->add_option("--ridge", ridge, "l2 penalty (default depends on the loss)");
    app->add_option("--step-rule", step_rule, "newton_backtracking, gradient_backtracking or closed_form")
        ->capture_default_str();
  }

  FitConfig config() const {
    Json j{{"max_iters", max_iters}, {"grad_tol", grad_tol}, {"step_rule", step_rule}};
    if (ridge) j["ridge"] = *ridge;
    return fit_from_json(j);
  }
};

struct GeneratorFlags {
  std::string kind = "smote";
  int k = 5;
  double jitter_sigma = 1.0;
  double ridge = 1e-6;
  std::string model;

  void add(CLI::App* app) {
    app->add_option("--generator", kind, "Synthetic generator kind")->capture_default_str();
    app->add_option("--k", k, "Neighbor count for SMOTE-family generators")->capture_default_str();
    app->add_option("--jitter-sigma", jitter_sigma, "Noise scale for jitter and perturbed sampling")
        ->capture_default_str();
    app->add_option("--gen-ridge", ridge, "Covariance ridge for gaussian_fit")->capture_default_str();
    app->add_option("--model", model, "Model preset for oracle, semi_oracle and model_synthetic generators");
  }

  GeneratorSpec spec() const {
    Json j{{"kind", kind}, {"k", k}, {"jitter_sigma", jitter_sigma}, {"ridge", ridge}};
    SimModelHandle handle;
    if (!model.empty()) handle = load_model(model).model;
    GeneratorSpec s = generator_from_json(j, handle);
    s.validate();
    return s;
  }

  Json describe() const {
    GeneratorSpec s = generator_from_json(Json{{"kind", kind}, {"k", k}, {"jitter_sigma", jitter_sigma}, {"ridge", ridge}});
    Json j = to_json(s);
    if (!model.empty()) j["model"] = model;
    return j;
  }
};

LabeledDataset load_data(const std::string& path) {
  if (path.empty()) throw Error(ErrorCode::InvalidArgument, "--data is required");
  return read_dataset_csv(path);
}

// ---------------------------------------------------------------------------

struct SimulateCmd {
  std::string preset;
  std::optional<Index> n0;
  std::optional<Index> n1;
  std::optional<Index> n;
  std::uint64_t seed = 42;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("simulate", "Draw a labelled dataset from a model preset");
    c->add_option("--preset", preset, "Model preset name or JSON file")->required();
    c->add_option("--n0", n0, "Majority count (default from the preset)");
    c->add_option("--n1", n1, "Minority count (default from the preset)");
    c->add_option("--n", n, "Total count for models that draw (x, y) pairs jointly");
    c->add_option("--seed", seed, "Root seed")->capture_default_str();
    c->add_option("--out", out, "Output CSV (default stdout)");
    c->callback([this] { run(); });
  }

  void run() const {
    const ModelSetup setup = load_model(preset);
    const RngStream stream(seed);
    Json config{{"preset", setup.name}, {"seed", seed}, {"rng_algorithm", RngStream::kAlgorithmId}};
    LabeledDataset data = [&] {
      if (setup.n_iid > 0) {
        const Index total = n ? *n : setup.n_iid;
        config["n"] = total;
        return setup.sample(0, total, stream);
      }
      const Index a = n0.value_or(setup.n0);
      const Index b = n1.value_or(setup.n1);
      config["n0"] = a;
      config["n1"] = b;
      return setup.sample(a, b, stream);
    }();
    config["model"] = setup.document.value("model", Json::object());
    announce("simulate", config);
    with_output(out, [&](std::ostream& os) {
      write_dataset_csv(data, os, {"synaug simulate", "config: " + config.dump()});
    });
  }
};

struct TuneCmd {
  std::string data;
  GeneratorFlags gen;
  LossFlags loss;
  FitFlags fit;
  std::string grid = "0:2:21";
  int folds = 5;
  int repeats = 1;
  std::string objective = "balanced-loss";
  double rho = 0.5;
  std::uint64_t seed = 42;
  bool audit = false;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("tune", "Choose the synthetic size by cross-validation");
    c->alias("vtss");
    c->add_option("--data", data, "Input dataset CSV")->required();
    gen.add(c);
    loss.add(c);
    fit.add(c);
    c->add_option("--grid", grid, "Gamma grid lo:hi:n (inclusive) or a comma list")->capture_default_str();
    c->add_option("--folds", folds, "Fold count K")->capture_default_str();
    c->add_option("--repeats", repeats, "Repeated fold assignments m")->capture_default_str();
    c->add_option("--objective", objective, "balanced-loss, balanced-accuracy or weighted-loss")->capture_default_str();
    c->add_option("--rho", rho, "Class-0 weight for weighted-loss")->capture_default_str();
    c->add_option("--seed", seed, "Root seed")->capture_default_str();
    c->add_flag("--audit", audit, "Record per-fold generator row provenance");
    c->add_option("--out", out, "Output JSON (default stdout)");
    c->callback([this] { run(); });
  }

  void run() const {
    VtssConfig cfg;
    cfg.gamma_grid = parse_grid(grid);
    cfg.folds = folds;
    cfg.repeats = repeats;
    cfg.objective.kind = parse_objective_kind(objective);
    cfg.objective.rho = rho;
    cfg.generator = gen.spec();
    cfg.loss = loss.spec();
    cfg.fit = fit.config();
    cfg.audit = audit;
    Json config = to_json(cfg);
    config["generator"] = gen.describe();
    config["data"] = data;
    config["seed"] = seed;
    announce("tune", config);
    const LabeledDataset d = load_data(data);
    const VtssResult result = vtss_tune(d, cfg, RngStream(seed));
    Json j = to_json(result);
    j["config"] = config;
    with_output(out, [&](std::ostream& os) { os << j.dump(2) << "\n"; });
  }
};

struct DiagnoseCmd {
  std::string data;
  GeneratorFlags gen;
  LossFlags loss;
  FitFlags fit;
  std::string theta_text;
  std::string theta_file;
  std::optional<Index> probe;
  std::optional<Index> target_n0;
  std::optional<Index> target_n1;
  std::uint64_t seed = 42;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("diagnose", "Estimate the bias diagnostics and a synthetic-size recommendation");
    c->add_option("--data", data, "Input dataset CSV")->required();
    gen.add(c);
    loss.add(c);
    fit.add(c);
    c->add_option("--theta", theta_text, "Evaluation point as a comma list");
    c->add_option("--theta-file", theta_file, "JSON with a 'theta' array or a tune result");
    c->add_option("--probe-size", probe, "Synthetic rows drawn for the psi estimate (default max(n0, n1))");
    c->add_option("--target-n0", target_n0, "Majority count of the training problem (default: data n0)");
    c->add_option("--target-n1", target_n1, "Minority count of the training problem (default: data n1)");
    c->add_option("--seed", seed, "Root seed")->capture_default_str();
    c->add_option("--out", out, "Output JSON (default stdout)");
    c->callback([this] { run(); });
  }

  Parameter read_theta(Index expected) const {
    Parameter theta;
    if (!theta_text.empty()) {
      std::vector<double> v;
      std::stringstream ss(theta_text);
      std::string item;
      while (std::getline(ss, item, ',')) {
        try {
          v.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw Error(ErrorCode::InvalidArgument, "bad --theta entry '" + item + "'");
        }
      }
      theta = Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
    } else {
      Json j = load_document(theta_file);
      if (j.contains("final_model")) j = j.at("final_model");
      if (!j.contains("theta")) throw Error(ErrorCode::InvalidArgument, "'" + theta_file + "' has no theta");
      theta = vector_from_json(j.at("theta"));
    }
    if (theta.size() != expected) {
      throw Error(ErrorCode::DimensionMismatch, "theta has " + std::to_string(theta.size()) + " entries, expected " +
                                                    std::to_string(expected));
    }
    return theta;
  }

  int run() const {
    const LossSpec spec = loss.spec();
    const GeneratorSpec gspec = gen.spec();
    const FitConfig fcfg = fit.config();
    Json config{{"data", data},
                {"generator", gen.describe()},
                {"loss", to_json(spec)},
                {"fit", to_json(fcfg)},
                {"seed", seed},
                {"rng_algorithm", RngStream::kAlgorithmId}};
    if (probe) config["probe_size"] = *probe;
    if (target_n0) config["target_n0"] = *target_n0;
    if (target_n1) config["target_n1"] = *target_n1;
    config["theta_source"] = !theta_text.empty() ? "flag" : !theta_file.empty() ? "file" : "balanced_fit";
    announce("diagnose", config);

    const LabeledDataset d = load_data(data);
    const ClassSplit split = split_by_class(d);
    if (split.majority.rows() < 2 || split.minority.rows() < 2) {
      throw Error(ErrorCode::TooFewSamples, "each class needs at least two rows");
    }
    const Parameter theta = (!theta_text.empty() || !theta_file.empty())
                                ? read_theta(spec.parameter_size(d.dim()))
                                : fit_class_weighted_erm(d, spec, fcfg, 0.5).theta;
    const Index n_probe = probe.value_or(std::max(d.n0(), d.n1()));
    const SyntheticBatch batch = generate(gspec, split.minority, &d, n_probe, derive_stream(RngStream(seed), 0));
    const GradientEstimate phi = estimate_phi_gradient(theta, spec, split.majority, split.minority);
    const GradientEstimate psi = estimate_psi_gradient(theta, spec, batch.rows, split.minority);

    const Index n0 = target_n0.value_or(d.n0());
    const Index n1 = target_n1.value_or(d.n1());
    const Regime regime = classify_regime(phi);
    Json result{{"theta", to_json(theta)},
                {"grad_phi", to_json(phi)},
                {"grad_psi", to_json(psi)},
                {"regime", to_string(regime)},
                {"target_n0", n0},
                {"target_n1", n1}};
    if (n0 > n1) result["bias_at_naive_balancing"] = to_json(bias_vector(phi, psi, n0, n1, n0 - n1));

    Json caveats = Json::array();
    caveats.push_back("first-order analysis around theta; validate any size on held-out data");
    caveats.push_back("standard errors treat rows as independent draws");
    for (const auto& w : batch.warnings) caveats.push_back("generator: " + w);

    std::optional<double> multiplier;
    std::string failure;
    try {
      multiplier = bias_canceling_size(phi, psi, 1, 0);
    } catch (const Error& e) {
      failure = e.what();
    }
    Json cancel;
    if (multiplier) {
      cancel["multiplier"] = *multiplier;
      cancel["n_syn"] = n0 > n1 ? Json(*multiplier * static_cast<double>(n0 - n1)) : Json(nullptr);
      if (*multiplier < 0) caveats.push_back("bias-canceling size is negative: no nonnegative size cancels the bias");
    } else {
      cancel["error"] = failure;
    }
    result["bias_canceling"] = cancel;

    std::string recommendation;
    switch (regime) {
      case Regime::LocalSymmetry:
        recommendation = "γ*≈0; synthesis unlikely to help";
        break;
      case Regime::LocalAsymmetry:
        if (multiplier && *multiplier > 0) {
          std::ostringstream os;
          os << "ñ≈" << format_double(*multiplier) << "·(n0−n1)";
          if (n0 > n1) os << " = " << format_double(std::round(*multiplier * static_cast<double>(n0 - n1)));
          recommendation = os.str();
        } else {
          recommendation = "no bias-canceling size; tune γ by validation";
        }
        break;
      case Regime::Inconclusive:
        recommendation = "evidence inconclusive; tune γ by validation";
        break;
    }
    result["recommendation"] = recommendation;
    result["caveats"] = caveats;
    result["config"] = config;
    with_output(out, [&](std::ostream& os) { os << result.dump(2) << "\n"; });
    if (regime == Regime::LocalAsymmetry && !multiplier) {
      std::cerr << "error: " << failure << "\n";
      return kExitNumeric;
    }
    return 0;
  }
};

struct GenerateCmd {
  std::string data;
  GeneratorFlags gen;
  std::optional<Index> count;
  std::optional<double> gamma;
  bool augmented = false;
  std::string audit;
  std::uint64_t seed = 42;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("generate", "Draw synthetic minority rows");
    c->add_option("--data", data, "Input dataset CSV")->required();
    gen.add(c);
    auto* count_opt = c->add_option("--count", count, "Number of synthetic rows");
    c->add_option("--gamma", gamma, "Synthetic size as round(gamma (n0 - n1))")->excludes(count_opt);
    c->add_flag("--augmented", augmented, "Write the input with the synthetic rows appended");
    c->add_option("--audit", audit, "CSV file for per-row provenance (base, neighbor, gamma)");
    c->add_option("--seed", seed, "Root seed")->capture_default_str();
    c->add_option("--out", out, "Output CSV (default stdout)");
    c->callback([this] { run(); });
  }

  void run() const {
    const GeneratorSpec spec = gen.spec();
    Json config{{"data", data}, {"generator", gen.describe()}, {"seed", seed},
                {"rng_algorithm", RngStream::kAlgorithmId}};
    const LabeledDataset d = load_data(data);
    Index n = 0;
    if (count) {
      n = *count;
    } else if (gamma) {
      n = synthetic_count(*gamma, d.n0(), d.n1());
      config["gamma"] = *gamma;
    } else {
      n = std::max<Index>(0, d.n0() - d.n1());
    }
    if (n < 0) throw Error(ErrorCode::InvalidArgument, "count must be nonnegative");
    config["count"] = n;
    config["augmented"] = augmented;
    announce("generate", config);
    const SyntheticBatch batch = generate(spec, split_by_class(d).minority, &d, n, RngStream(seed));
    for (const auto& w : batch.warnings) std::cerr << "warning: " << w << "\n";
    const std::vector<std::string> header{"synaug generate", "config: " + config.dump()};
    with_output(out, [&](std::ostream& os) {
      if (augmented) {
        write_dataset_csv(augment(d, batch), os, header);
      } else {
        write_matrix_csv(batch.rows, os, header);
      }
    });
    if (!audit.empty()) {
      with_output(audit, [&](std::ostream& os) {
        os << "# synaug generate audit\n# config: " << config.dump() << "\nrow,base,neighbor,gamma\n";
        for (std::size_t i = 0; i < batch.audit.size(); ++i) {
          const auto& r = batch.audit[i];
          os << i << ',' << r.base << ',' << r.neighbor << ',' << format_double(r.gamma) << '\n';
        }
      });
    }
  }
};

struct ExperimentCmd {
  std::string preset;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("experiment", "Run a Monte-Carlo experiment preset");
    c->add_option("--preset,--config", preset, "Experiment preset name or JSON file")->required();
    c->add_option("--reps", reps, "Override the repetition count");
    c->add_option("--seed", seed, "Override the base seed");
    c->add_option("--jobs", jobs, "Worker threads (results do not depend on it)");
    c->add_option("--out", out, "Output directory (default <name>-results)");
    c->callback([this] { run(); });
  }

  void run() const {
    ExperimentConfig cfg = load_experiment(preset);
    if (reps) cfg.reps = *reps;
    if (seed) cfg.base_seed = *seed;
    if (jobs) cfg.jobs = *jobs;
    if (!out.empty()) cfg.output_path = out;
    if (cfg.output_path.empty()) cfg.output_path = cfg.name + "-results";
    cfg.validate();
    announce("experiment", to_json(cfg));
    const ResultTable table = run_experiment(cfg);
    write_experiment_outputs(table, cfg.output_path);
    if (cfg.protocol == Protocol::GammaHistogram) {
      std::ofstream h(cfg.output_path + "/histogram.csv");
      h << "# synaug experiment " << cfg.name << "\nmetric,bin_lo,bin_hi,count\n";
      for (const auto& s : table.summary) {
        if (s.metric.size() < 11 || s.metric.compare(s.metric.size() - 11, 11, "/gamma_star") != 0) continue;
        const double hi = cfg.sweep.empty() ? 1.0 : *std::max_element(cfg.sweep.begin(), cfg.sweep.end());
        for (const auto& b : histogram(table, s.metric, 0.0, hi > 0 ? hi : 1.0, 20)) {
          h << s.metric << ',' << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.count << '\n';
        }
      }
    }
    std::cerr << "rows: " << table.rows.size() << ", failures: " << table.failures.size() << ", output: "
              << cfg.output_path << "\n";
  }
};

struct PresetsCmd {
  std::string show;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("presets", "List shipped presets");
    c->add_option("--show", show, "Print one preset document");
    c->callback([this] { run(); });
  }

  void run() const {
    if (!show.empty()) {
      auto doc = find_preset(show);
      if (!doc) (void)load_document(show);  // raises with the list of presets
      std::cout << doc->dump(2) << "\n";
      return;
    }
    for (const auto& name : preset_names()) {
      const Json doc = *find_preset(name);
      std::cout << name << "\t" << doc.value("type", std::string()) << "\t" << doc.value("description", std::string())
                << "\n";
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic minority augmentation for imbalanced binary classification"};
  app.require_subcommand(1);
  SimulateCmd simulate;
  TuneCmd tune;
  DiagnoseCmd diagnose;
  GenerateCmd generate_cmd;
  ExperimentCmd experiment;
  PresetsCmd presets;
  simulate.add(app);
  tune.add(app);
  generate_cmd.add(app);
  experiment.add(app);
  presets.add(app);

  // diagnose returns its own exit code, so it runs after parsing.
  diagnose.add(app);
  auto* diag = app.get_subcommand("diagnose");
  diag->callback(nullptr);

  try {
    app.parse(argc, argv);
    if (diag->parsed()) return diagnose.run();
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
