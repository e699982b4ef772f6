#include "synaug/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

#include "synaug/csv.hpp"
#include "synaug/error.hpp"
#include "synaug/metrics.hpp"

namespace synaug {

std::string_view to_string(Protocol protocol) {
  switch (protocol) {
    case Protocol::FixedSizeRule: return "fixed_size_rule";
    case Protocol::VtssComparison: return "vtss_comparison";
    case Protocol::GammaSweep: return "gamma_sweep";
    case Protocol::GammaHistogram: return "gamma_histogram";
  }
  return "unknown";
}

Protocol parse_protocol(std::string_view text) {
  for (Protocol p : {Protocol::FixedSizeRule, Protocol::VtssComparison, Protocol::GammaSweep, Protocol::GammaHistogram}) {
    if (text == to_string(p)) return p;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown protocol '" + std::string(text) + "'");
}

std::string_view to_string(Evaluation evaluation) {
  switch (evaluation) {
    case Evaluation::ClosedFormExcessRisk: return "closed_form_excess_risk";
    case Evaluation::PlugInExcessRisk: return "plug_in_excess_risk";
    case Evaluation::BalancedLoss: return "balanced_loss";
    case Evaluation::BalancedAccuracy: return "balanced_accuracy";
    case Evaluation::ParamError: return "param_error";
  }
  return "unknown";
}

Evaluation parse_evaluation(std::string_view text) {
  for (Evaluation e : {Evaluation::ClosedFormExcessRisk, Evaluation::PlugInExcessRisk, Evaluation::BalancedLoss,
                       Evaluation::BalancedAccuracy, Evaluation::ParamError}) {
    if (text == to_string(e)) return e;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown evaluation '" + std::string(text) + "'");
}

namespace {

bool sweeps_n1(Protocol p) { return p == Protocol::FixedSizeRule || p == Protocol::VtssComparison; }

bool needs_test(Evaluation e) {
  return e == Evaluation::PlugInExcessRisk || e == Evaluation::BalancedLoss || e == Evaluation::BalancedAccuracy;
}

// Table name of a metric.
std::string metric_name(Evaluation e) {
  switch (e) {
    case Evaluation::ClosedFormExcessRisk: return "excess_risk";
    default: return std::string(to_string(e));
  }
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

DataSource source_from_json(const Json& j, std::size_t index) {
  DataSource src;
  if (j.is_string()) {
    src.reference = j.get<std::string>();
    if (ends_with(src.reference, ".csv")) {
      src.csv = read_dataset_csv(src.reference);
      src.label = std::filesystem::path(src.reference).stem().string();
    } else {
      src.model = load_model(src.reference);
      src.label = src.model->name;
    }
  } else if (j.is_object() && j.contains("label") && (j.contains("csv") || j.contains("model"))) {
    // The shape written to config.json.
    src.label = j.at("label").get<std::string>();
    if (j.contains("csv")) {
      src.reference = j.at("csv").get<std::string>();
      src.csv = read_dataset_csv(src.reference);
    } else {
      src.model = model_from_json(j.at("model"), src.label);
      src.reference = src.label;
    }
  } else if (j.is_object()) {
    src.model = model_from_json(j);
    src.label = j.contains("name") ? j.at("name").get<std::string>() : "model" + std::to_string(index);
    src.reference = src.label;
  } else {
    throw Error(ErrorCode::InvalidArgument, "a data source must be a preset name, a CSV path or a model object");
  }
  return src;
}

NamedGenerator generator_entry(const Json& j) {
  NamedGenerator g;
  g.spec = generator_from_json(j);
  g.label = j.is_object() && j.contains("label") ? j.at("label").get<std::string>() : std::string(to_string(g.spec.kind));
  return g;
}

GeneratorSpec bind_model(GeneratorSpec spec, const SimModelHandle& model) {
  if (requires_model(spec.kind)) spec.model_handle = model;
  return spec;
}

}  // namespace

LossSpec ExperimentConfig::loss_for(const DataSource& source) const {
  if (loss) return *loss;
  if (source.model) return source.model->loss;
  return LossSpec::logistic(true);
}

void ExperimentConfig::validate() const {
  if (reps < 1) throw Error(ErrorCode::InvalidArgument, "reps must be at least 1");
  if (jobs < 1) throw Error(ErrorCode::InvalidArgument, "jobs must be at least 1");
  if (sources.empty()) throw Error(ErrorCode::InvalidArgument, "no data source");
  if (sweep.empty()) throw Error(ErrorCode::InvalidArgument, "empty sweep");
  if (generators.empty()) throw Error(ErrorCode::InvalidArgument, "no generator");
  if (evaluation.empty() && protocol != Protocol::GammaHistogram) {
    throw Error(ErrorCode::InvalidArgument, "no evaluation requested");
  }
  if (theta_star != "model" && theta_star != "test_fit") {
    throw Error(ErrorCode::InvalidArgument, "theta_star must be 'model' or 'test_fit'");
  }
  if (synthetic_mean != "fixed" && synthetic_mean != "inverse_sqrt_log") {
    throw Error(ErrorCode::InvalidArgument, "synthetic_mean must be 'fixed' or 'inverse_sqrt_log'");
  }
  if (sweeps_n1(protocol)) {
    if (sources.size() != 1 || !sources[0].model) {
      throw Error(ErrorCode::InvalidArgument, std::string(to_string(protocol)) + " needs exactly one simulation model");
    }
    for (double n1 : sweep) {
      if (n1 < 2 || n1 != std::floor(n1)) throw Error(ErrorCode::InvalidArgument, "n1 grid values must be integers >= 2");
    }
    if (!(ratio > 1.0)) throw Error(ErrorCode::InvalidArgument, "ratio must exceed 1");
  } else {
    for (double g : sweep) {
      if (!(g >= 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma grid values must be nonnegative");
    }
  }
  if (protocol == Protocol::FixedSizeRule && arms.empty()) throw Error(ErrorCode::InvalidArgument, "no size arm");
  if (protocol == Protocol::VtssComparison && synthetic_mean == "inverse_sqrt_log" &&
      !dynamic_cast<const TwoGaussianModel*>(sources[0].model->model.get())) {
    throw Error(ErrorCode::InvalidArgument, "inverse_sqrt_log synthetic mean needs a two-gaussian model");
  }
  const bool has_test = test_per_class > 0;
  for (const auto& src : sources) {
    const LossSpec spec = loss_for(src);
    for (Evaluation e : evaluation) {
      if (e == Evaluation::ClosedFormExcessRisk) {
        if (!src.model || !src.model->model->has_closed_form_risk()) {
          throw Error(ErrorCode::InvalidArgument, "closed_form_excess_risk needs a model with a closed-form risk (" +
                                                      src.label + ")");
        }
        if (!(spec == src.model->model->natural_loss())) {
          throw Error(ErrorCode::InvalidArgument, "closed_form_excess_risk needs the model's own loss (" + src.label + ")");
        }
      }
      if (needs_test(e) && !has_test && !src.csv) {
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(e)) + " needs test_per_class > 0");
      }
      if (e == Evaluation::ParamError) {
        if (theta_star == "test_fit" && !has_test && !src.csv) {
          throw Error(ErrorCode::InvalidArgument, "theta_star test_fit needs a test set");
        }
        if (theta_star == "model") {
          if (!src.model) throw Error(ErrorCode::InvalidArgument, "param_error on CSV data needs theta_star test_fit");
          try {
            (void)src.model->model->theta_star();
          } catch (const Error&) {
            throw Error(ErrorCode::InvalidArgument, "model " + src.label + " has no closed-form theta*; use test_fit");
          }
        }
      }
    }
    for (const auto& g : generators) {
      if (requires_model(g.spec.kind) && !src.model) {
        throw Error(ErrorCode::InvalidArgument, std::string(to_string(g.spec.kind)) + " needs a simulation source");
      }
      if (g.spec.kind == GeneratorKind::ModelSynthetic && src.model && !src.model->model->has_synthetic()) {
        throw Error(ErrorCode::InvalidArgument, "model " + src.label + " has no synthetic distribution");
      }
      GeneratorSpec bound = bind_model(g.spec, src.model ? src.model->model : nullptr);
      bound.validate();
    }
    if (protocol == Protocol::GammaHistogram && validation_per_class > 0 && !src.model) {
      throw Error(ErrorCode::InvalidArgument, "a validation sample needs a simulation source");
    }
  }
  if (protocol == Protocol::VtssComparison || protocol == Protocol::GammaHistogram || vtss_reference) {
    VtssConfig check = vtss;
    check.generator = GeneratorSpec{};
    check.validate();
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train_fraction must lie in (0, 1)");
  }
}

ExperimentConfig experiment_from_json(const Json& doc) {
  ExperimentConfig cfg;
  try {
    cfg.name = doc.value("name", std::string("experiment"));
    if (!doc.contains("protocol")) throw Error(ErrorCode::InvalidArgument, "missing field 'protocol'");
    cfg.protocol = parse_protocol(doc.at("protocol").get<std::string>());

    Json sources = doc.contains("models") ? doc.at("models") : Json::array();
    if (doc.contains("sources")) {
      for (const auto& s : doc.at("sources")) sources.push_back(s);
    }
    if (doc.contains("model")) sources.push_back(doc.at("model"));
    if (doc.contains("data")) sources.push_back(doc.at("data"));
    for (std::size_t i = 0; i < sources.size(); ++i) cfg.sources.push_back(source_from_json(sources[i], i));

    if (sweeps_n1(cfg.protocol)) {
      if (!doc.contains("n1_grid")) throw Error(ErrorCode::InvalidArgument, "missing field 'n1_grid'");
      cfg.sweep = doc.at("n1_grid").get<std::vector<double>>();
    } else {
      if (!doc.contains("gamma_grid")) throw Error(ErrorCode::InvalidArgument, "missing field 'gamma_grid'");
      const Json& g = doc.at("gamma_grid");
      cfg.sweep = g.is_string() ? parse_grid(g.get<std::string>()) : g.get<std::vector<double>>();
    }
    cfg.reps = doc.value("reps", 100);
    cfg.base_seed = doc.value("base_seed", std::uint64_t{0});
    cfg.jobs = doc.value("jobs", 1);
    cfg.ratio = doc.value("ratio", 20.0);
    cfg.n0 = doc.value("n0", Index{0});
    cfg.n1 = doc.value("n1", Index{0});

    const Json gens = doc.contains("generators") ? doc.at("generators")
                      : doc.contains("generator")
                          ? Json::array({doc.at("generator")})
                          : Json::array({sweeps_n1(cfg.protocol) ? "model_synthetic" : "smote"});
    for (const auto& g : gens) cfg.generators.push_back(generator_entry(g));

    if (doc.contains("arms")) {
      for (const auto& a : doc.at("arms")) cfg.arms.push_back({a.at("label").get<std::string>(), a.at("multiplier").get<double>()});
    } else {
      cfg.arms.push_back({"naive", 1.0});
    }
    if (doc.contains("loss") && doc.at("loss") != "model_default") cfg.loss = loss_from_json(doc.at("loss"));
    if (doc.contains("fit")) cfg.fit = fit_from_json(doc.at("fit"));
    if (doc.contains("vtss")) cfg.vtss = vtss_from_json(doc.at("vtss"));
    cfg.vtss_reference = doc.value("vtss_reference", false);
    if (doc.contains("evaluation")) {
      for (const auto& e : doc.at("evaluation")) cfg.evaluation.push_back(parse_evaluation(e.get<std::string>()));
    } else if (cfg.protocol != Protocol::GammaHistogram) {
      bool closed = true;
      for (const auto& s : cfg.sources) closed = closed && s.model && s.model->model->has_closed_form_risk();
      if (closed) {
        cfg.evaluation = {Evaluation::ClosedFormExcessRisk, Evaluation::ParamError};
      } else {
        cfg.evaluation = {Evaluation::BalancedLoss};
      }
    }
    cfg.test_per_class = doc.value("test_per_class", Index{0});
    cfg.validation_per_class = doc.value("validation_per_class", Index{0});
    cfg.theta_star = doc.value("theta_star", std::string("model"));
    cfg.synthetic_mean = doc.value("synthetic_mean", std::string("fixed"));
    cfg.train_fraction = doc.value("train_fraction", 0.8);
    cfg.output_path = doc.value("output", std::string());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("experiment config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment(const std::string& name_or_path) {
  const Json doc = load_document(name_or_path);
  if (doc.value("type", std::string("experiment")) != "experiment") {
    throw Error(ErrorCode::InvalidArgument, "'" + name_or_path + "' is not an experiment preset");
  }
  return experiment_from_json(doc);
}

Json to_json(const ExperimentConfig& cfg) {
  Json sources = Json::array();
  for (const auto& s : cfg.sources) {
    if (s.csv) {
      sources.push_back(Json{{"label", s.label}, {"csv", s.reference}});
    } else {
      sources.push_back(Json{{"label", s.label}, {"model", s.model->document}});
    }
  }
  Json gens = Json::array();
  for (const auto& g : cfg.generators) {
    Json j = to_json(g.spec);
    j["label"] = g.label;
    gens.push_back(std::move(j));
  }
  Json arms = Json::array();
  for (const auto& a : cfg.arms) arms.push_back(Json{{"label", a.label}, {"multiplier", a.multiplier}});
  Json evals = Json::array();
  for (Evaluation e : cfg.evaluation) evals.push_back(to_string(e));
  Json out{{"type", "experiment"},
           {"name", cfg.name},
           {"protocol", to_string(cfg.protocol)},
           {"sources", std::move(sources)},
           {sweeps_n1(cfg.protocol) ? "n1_grid" : "gamma_grid", cfg.sweep},
           {"reps", cfg.reps},
           {"base_seed", cfg.base_seed},
           {"jobs", cfg.jobs},
           {"generators", std::move(gens)},
           {"loss", cfg.loss ? to_json(*cfg.loss) : Json("model_default")},
           {"fit", to_json(cfg.fit)},
           {"evaluation", std::move(evals)},
           {"theta_star", cfg.theta_star},
           {"rng_algorithm", RngStream::kAlgorithmId}};
  if (sweeps_n1(cfg.protocol)) {
    out["ratio"] = cfg.ratio;
  } else {
    out["n0"] = cfg.n0;
    out["n1"] = cfg.n1;
  }
  if (cfg.protocol == Protocol::FixedSizeRule) out["arms"] = std::move(arms);
  if (cfg.protocol == Protocol::VtssComparison) out["synthetic_mean"] = cfg.synthetic_mean;
  if (cfg.protocol == Protocol::VtssComparison || cfg.protocol == Protocol::GammaHistogram || cfg.vtss_reference) {
    Json v = to_json(cfg.vtss);
    v.erase("generator");
    v.erase("loss");
    v.erase("fit");
    if (cfg.protocol != Protocol::VtssComparison) v.erase("gamma_grid");
    out["vtss"] = std::move(v);
  }
  if (cfg.protocol == Protocol::GammaSweep) out["vtss_reference"] = cfg.vtss_reference;
  if (cfg.test_per_class > 0) out["test_per_class"] = cfg.test_per_class;
  if (cfg.protocol == Protocol::GammaHistogram) out["validation_per_class"] = cfg.validation_per_class;
  bool any_csv = false;
  for (const auto& s : cfg.sources) any_csv = any_csv || s.csv.has_value();
  if (any_csv) out["train_fraction"] = cfg.train_fraction;
  if (!cfg.output_path.empty()) out["output"] = cfg.output_path;
  return out;
}

std::string sweep_label(double value) { return format_double(value); }

const SummaryRow* ResultTable::find(std::string_view sweep, std::string_view metric) const {
  for (const auto& s : summary) {
    if (s.sweep == sweep && s.metric == metric) return &s;
  }
  return nullptr;
}

std::vector<double> ResultTable::values(std::string_view sweep, std::string_view metric) const {
  std::vector<double> out;
  for (const auto& r : rows) {
    if (r.sweep == sweep && r.metric == metric) out.push_back(r.value);
  }
  return out;
}

std::vector<SummaryRow> summarize_rows(const std::vector<ResultRow>& rows) {
  struct Acc {
    SummaryRow row;
    std::vector<double> values;
  };
  std::vector<Acc> acc;
  std::map<std::tuple<std::size_t, std::string, std::string>, std::size_t> index;
  for (const auto& r : rows) {
    const auto key = std::make_tuple(r.sweep_index, r.sweep, r.metric);
    auto it = index.find(key);
    if (it == index.end()) {
      it = index.emplace(key, acc.size()).first;
      Acc a;
      a.row.sweep = r.sweep;
      a.row.sweep_value = r.sweep_value;
      a.row.metric = r.metric;
      acc.push_back(std::move(a));
    }
    acc[it->second].values.push_back(r.value);
  }
  std::vector<SummaryRow> out;
  out.reserve(acc.size());
  for (auto& a : acc) {
    const auto n = static_cast<double>(a.values.size());
    double sum = 0.0;
    for (double v : a.values) sum += v;
    a.row.mean = sum / n;
    double ss = 0.0;
    for (double v : a.values) ss += (v - a.row.mean) * (v - a.row.mean);
    a.row.sd = a.values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    a.row.ci95 = 1.96 * a.row.sd / std::sqrt(n);
    a.row.reps = static_cast<int>(a.values.size());
    out.push_back(std::move(a.row));
  }
  return out;
}

namespace {

struct CellOutput {
  std::vector<ResultRow> rows;
  std::vector<CellFailure> failures;
};

// Row collector bound to one cell.
class Sink {
 public:
  Sink(CellOutput& out, std::uint64_t base_seed, std::string stream, int rep)
      : out_(out), base_seed_(base_seed), stream_(std::move(stream)), rep_(rep) {}

  void at(std::string sweep, double value, std::size_t index) {
    sweep_ = std::move(sweep);
    sweep_value_ = value;
    sweep_index_ = index;
  }

  void add(const std::string& metric, double value) {
    out_.rows.push_back({sweep_, sweep_value_, sweep_index_, rep_, metric, value, base_seed_, stream_});
  }

  void fail(const std::string& scope, const std::string& code, const std::string& message) {
    out_.failures.push_back({sweep_, rep_, scope, code, message});
  }

  void fail(const std::string& scope, const Error& e) { fail(scope, std::string(to_string(e.code())), e.what()); }

 private:
  CellOutput& out_;
  std::uint64_t base_seed_;
  std::string stream_;
  int rep_;
  std::string sweep_;
  double sweep_value_ = 0.0;
  std::size_t sweep_index_ = 0;
};

// Per-source evaluation context shared by all cells of the source.
struct Evaluator {
  const ExperimentConfig* cfg = nullptr;
  LossSpec loss;
  SimModelHandle model;
  std::optional<LabeledDataset> test;
  std::optional<Parameter> theta_star;
  double risk_star = 0.0;
  double test_loss_star = 0.0;

  void prepare(const ExperimentConfig& c, const DataSource& src, std::optional<LabeledDataset> test_data) {
    cfg = &c;
    loss = c.loss_for(src);
    model = src.model ? src.model->model : nullptr;
    test = std::move(test_data);
    const bool closed = std::find(c.evaluation.begin(), c.evaluation.end(), Evaluation::ClosedFormExcessRisk) !=
                        c.evaluation.end();
    const bool param = std::find(c.evaluation.begin(), c.evaluation.end(), Evaluation::ParamError) != c.evaluation.end();
    if (test) {
      Parameter star = plug_in_optimum(loss, *test, c.fit);
      test_loss_star = balanced_empirical_loss(star, loss, *test);
      if (c.theta_star == "test_fit") theta_star = std::move(star);
    }
    if (model && (closed || (param && c.theta_star == "model"))) {
      const Parameter star = model->theta_star();
      if (closed) risk_star = model->balanced_risk(star);
      if (c.theta_star == "model") theta_star = star;
    }
  }

  void emit(const FittedModel& fitted, const std::string& prefix, Sink& sink) const {
    const Parameter& theta = fitted.theta;
    for (Evaluation e : cfg->evaluation) {
      const std::string name = prefix + "/" + metric_name(e);
      try {
        switch (e) {
          case Evaluation::ClosedFormExcessRisk: sink.add(name, model->balanced_risk(theta) - risk_star); break;
          case Evaluation::ParamError: sink.add(name, (theta - *theta_star).norm()); break;
          case Evaluation::PlugInExcessRisk:
            sink.add(name, balanced_empirical_loss(theta, loss, *test) - test_loss_star);
            break;
          case Evaluation::BalancedLoss: sink.add(name, balanced_empirical_loss(theta, loss, *test)); break;
          case Evaluation::BalancedAccuracy: sink.add(name, balanced_accuracy(fitted, *test)); break;
        }
      } catch (const Error& err) {
        sink.fail(name, err);
      }
    }
  }
};

struct FitOutcome {
  std::optional<FittedModel> model;
  std::string code;
  std::string message;
};

FitOutcome failed(const Error& e) { return {std::nullopt, std::string(to_string(e.code())), e.what()}; }

// Fits train augmented with counts[i] synthetic rows for each i. Prefix-stable
// generators draw one batch at the largest count; squared losses reuse
// accumulated normal equations.
std::vector<FitOutcome> fit_over_counts(const LabeledDataset& train, const LossSpec& loss, const FitConfig& fit,
                                        const std::vector<Index>& counts, const GeneratorSpec& gen,
                                        const RngStream& gen_stream) {
  std::vector<FitOutcome> out(counts.size());
  const RowMatrix minority = split_by_class(train).minority;
  const bool shared = is_prefix_stable(gen.kind);
  const Index max_count = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
  RowMatrix batch(0, train.dim());
  std::optional<Error> shared_error;
  if (shared && max_count > 0) {
    try {
      batch = generate(gen, minority, &train, max_count, gen_stream).rows;
    } catch (const Error& e) {
      shared_error = e;
    }
  }
  auto rows_for = [&](Index count) -> RowMatrix {
    if (count == 0) return RowMatrix(0, train.dim());
    if (shared) {
      if (shared_error) throw *shared_error;
      return batch.topRows(count);
    }
    return generate(gen, minority, &train, count, derive_stream(gen_stream, static_cast<std::uint64_t>(count))).rows;
  };

  const bool quadratic = loss.family == LossFamily::Squared && fit.step_rule != StepRule::GradientBacktracking;
  if (quadratic && shared) {
    std::vector<std::size_t> order(counts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] < counts[b]; });
    const ClassSplit split = split_by_class(train);
    QuadraticStats running(loss.parameter_size(train.dim()));
    running.add_rows(loss, split.majority, 0);
    running.add_rows(loss, split.minority, 1);
    Index added = 0;
    const double ridge = fit.resolved_ridge(loss);
    for (std::size_t i : order) {
      try {
        if (counts[i] > added) {
          if (shared_error) throw *shared_error;
          running.add_rows(loss, RowMatrix(batch.middleRows(added, counts[i] - added)), 1);
          added = counts[i];
        }
        out[i].model = solve_quadratic(running, loss, ridge);
      } catch (const Error& e) {
        out[i] = failed(e);
      }
    }
    return out;
  }
  for (std::size_t i = 0; i < counts.size(); ++i) {
    try {
      out[i].model = fit_erm(train.with_rows(rows_for(counts[i]), 1), loss, fit);
    } catch (const Error& e) {
      out[i] = failed(e);
    }
  }
  return out;
}

RngStream cell_stream(const ExperimentConfig& cfg, const CellId& cell) {
  return derive_stream(derive_stream(derive_stream(RngStream(cfg.base_seed), 0), cell.group),
                       static_cast<std::uint64_t>(cell.rep));
}

class Runner {
 public:
  explicit Runner(const ExperimentConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    evaluators_.resize(cfg_.sources.size());
    for (std::size_t s = 0; s < cfg_.sources.size(); ++s) {
      const DataSource& src = cfg_.sources[s];
      if (src.csv) continue;  // evaluated per cell on its own split
      std::optional<LabeledDataset> test;
      if (cfg_.test_per_class > 0) {
        test = src.model->model->sample(cfg_.test_per_class, cfg_.test_per_class,
                                        derive_stream(derive_stream(RngStream(cfg_.base_seed), 1), s));
      }
      evaluators_[s].prepare(cfg_, src, std::move(test));
    }
  }

  CellOutput run(const CellId& cell) const {
    CellOutput out;
    const RngStream stream = cell_stream(cfg_, cell);
    Sink sink(out, cfg_.base_seed, stream.label(), cell.rep);
    try {
      switch (cfg_.protocol) {
        case Protocol::FixedSizeRule: fixed_size_rule(cell, stream, sink); break;
        case Protocol::VtssComparison: vtss_comparison(cell, stream, sink); break;
        case Protocol::GammaSweep: gamma_sweep(cell, stream, sink); break;
        case Protocol::GammaHistogram: gamma_histogram(cell, stream, sink); break;
      }
    } catch (const Error& e) {
      sink.fail("cell", e);
    }
    return out;
  }

 private:
  std::pair<Index, Index> n1_counts(std::size_t group) const {
    const auto n1 = static_cast<Index>(cfg_.sweep[group]);
    return {static_cast<Index>(std::llround(cfg_.ratio * static_cast<double>(n1))), n1};
  }

  void fixed_size_rule(const CellId& cell, const RngStream& stream, Sink& sink) const {
    const auto [n0, n1] = n1_counts(cell.group);
    sink.at(sweep_label(cfg_.sweep[cell.group]), cfg_.sweep[cell.group], cell.group);
    const DataSource& src = cfg_.sources[0];
    const Evaluator& ev = evaluators_[0];
    const LabeledDataset train = src.model->model->sample(n0, n1, derive_stream(stream, 0));
    const GeneratorSpec gen = bind_model(cfg_.generators[0].spec, src.model->model);
    for (std::size_t a = 0; a < cfg_.arms.size(); ++a) {
      const SizeArm& arm = cfg_.arms[a];
      const auto count = static_cast<Index>(std::llround(arm.multiplier * static_cast<double>(n0 - n1)));
      const auto fits = fit_over_counts(train, ev.loss, cfg_.fit, {count}, gen, derive_stream(stream, 2 + a));
      if (fits[0].model) {
        ev.emit(*fits[0].model, arm.label, sink);
      } else {
        sink.fail(arm.label, fits[0].code, fits[0].message);
      }
    }
  }

  void vtss_comparison(const CellId& cell, const RngStream& stream, Sink& sink) const {
    const auto [n0, n1] = n1_counts(cell.group);
    sink.at(sweep_label(cfg_.sweep[cell.group]), cfg_.sweep[cell.group], cell.group);
    const DataSource& src = cfg_.sources[0];
    const Evaluator& ev = evaluators_[0];
    SimModelHandle model = src.model->model;
    if (cfg_.synthetic_mean == "inverse_sqrt_log") {
      const auto& tg = dynamic_cast<const TwoGaussianModel&>(*model);
      const double shrink = 1.0 - 1.0 / std::sqrt(std::log(static_cast<double>(n1)));
      model = std::make_shared<TwoGaussianModel>(tg.mu1(), Vector(shrink * tg.mu1()));
    }
    const LabeledDataset train = model->sample(n0, n1, derive_stream(stream, 0));
    const GeneratorSpec gen = bind_model(cfg_.generators[0].spec, model);

    const auto naive = fit_over_counts(train, ev.loss, cfg_.fit, {n0 - n1}, gen, derive_stream(stream, 2));
    if (naive[0].model) {
      ev.emit(*naive[0].model, "naive", sink);
    } else {
      sink.fail("naive", naive[0].code, naive[0].message);
    }
    VtssConfig vc = cfg_.vtss;
    vc.generator = gen;
    vc.loss = ev.loss;
    vc.fit = cfg_.fit;
    try {
      const VtssResult r = vtss_tune(train, vc, derive_stream(stream, 3));
      ev.emit(r.final_model, "vtss", sink);
      sink.add("vtss/gamma_star", r.gamma_star);
    } catch (const Error& e) {
      sink.fail("vtss", e);
    }
  }

  // Training sample (and, for CSV sources, the evaluator) of a gamma cell.
  std::pair<LabeledDataset, const Evaluator*> gamma_train(const CellId& cell, const RngStream& stream,
                                                          std::optional<Evaluator>& local) const {
    const DataSource& src = cfg_.sources[cell.group];
    if (src.csv) {
      const TrainTestSplit split = train_test_split(*src.csv, cfg_.train_fraction, derive_stream(stream, 0));
      local.emplace();
      local->prepare(cfg_, src, src.csv->subset(split.test));
      return {src.csv->subset(split.train), &*local};
    }
    const ModelSetup& setup = *src.model;
    const Evaluator* ev = &evaluators_[cell.group];
    if (setup.n_iid > 0) {
      return {setup.sample(cfg_.n0, cfg_.n1, derive_stream(stream, 0)), ev};
    }
    const Index n0 = cfg_.n0 > 0 ? cfg_.n0 : setup.n0;
    const Index n1 = cfg_.n1 > 0 ? cfg_.n1 : setup.n1;
    return {setup.sample(n0, n1, derive_stream(stream, 0)), ev};
  }

  void gamma_sweep(const CellId& cell, const RngStream& stream, Sink& sink) const {
    const DataSource& src = cfg_.sources[cell.group];
    sink.at(sweep_label(cfg_.sweep[0]), cfg_.sweep[0], 0);
    std::optional<Evaluator> local;
    const auto [train, ev] = gamma_train(cell, stream, local);
    std::vector<Index> counts;
    for (double g : cfg_.sweep) counts.push_back(synthetic_count(g, train.n0(), train.n1()));
    const SimModelHandle model = src.model ? src.model->model : nullptr;

    for (std::size_t g = 0; g < cfg_.generators.size(); ++g) {
      const std::string prefix = src.label + "/" + cfg_.generators[g].label;
      const GeneratorSpec gen = bind_model(cfg_.generators[g].spec, model);
      const auto fits = fit_over_counts(train, ev->loss, cfg_.fit, counts, gen, derive_stream(stream, 2 + g));
      for (std::size_t i = 0; i < fits.size(); ++i) {
        sink.at(sweep_label(cfg_.sweep[i]), cfg_.sweep[i], i);
        if (fits[i].model) {
          ev->emit(*fits[i].model, prefix, sink);
        } else {
          sink.fail(prefix, fits[i].code, fits[i].message);
        }
      }
      if (cfg_.vtss_reference) {
        sink.at("vtss", 0.0, cfg_.sweep.size());
        VtssConfig vc = cfg_.vtss;
        vc.gamma_grid = cfg_.sweep;
        vc.generator = gen;
        vc.loss = ev->loss;
        vc.fit = cfg_.fit;
        try {
          const VtssResult r = vtss_tune(train, vc, derive_stream(stream, 100 + g));
          ev->emit(r.final_model, prefix + "/vtss", sink);
          sink.add(prefix + "/vtss/gamma_star", r.gamma_star);
        } catch (const Error& e) {
          sink.fail(prefix + "/vtss", e);
        }
      }
    }
  }

  void gamma_histogram(const CellId& cell, const RngStream& stream, Sink& sink) const {
    const DataSource& src = cfg_.sources[cell.group];
    sink.at("all", 0.0, 0);
    std::optional<Evaluator> local;
    const auto [train, ev] = gamma_train(cell, stream, local);
    std::optional<LabeledDataset> validation;
    if (cfg_.validation_per_class > 0) {
      validation = src.model->model->sample(cfg_.validation_per_class, cfg_.validation_per_class,
                                            derive_stream(stream, 1));
    }
    const SimModelHandle model = src.model ? src.model->model : nullptr;
    for (std::size_t g = 0; g < cfg_.generators.size(); ++g) {
      const std::string prefix = src.label + "/" + cfg_.generators[g].label;
      VtssConfig vc = cfg_.vtss;
      vc.gamma_grid = cfg_.sweep;
      vc.generator = bind_model(cfg_.generators[g].spec, model);
      vc.loss = ev->loss;
      vc.fit = cfg_.fit;
      try {
        const RngStream gs = derive_stream(stream, 2 + g);
        const auto curve = validation ? holdout_curve(train, *validation, vc, gs) : cv_curve(train, vc, gs);
        const double gamma = curve[select_gamma(curve, vc.objective)].gamma;
        sink.add(prefix + "/gamma_star", gamma);
        sink.add(prefix + "/gamma_le_0.1", gamma <= 0.1 ? 1.0 : 0.0);
        sink.add(prefix + "/gamma_is_0", gamma == 0.0 ? 1.0 : 0.0);
      } catch (const Error& e) {
        sink.fail(prefix, e);
      }
    }
  }

  const ExperimentConfig& cfg_;
  std::vector<Evaluator> evaluators_;
};

}  // namespace

std::vector<CellId> experiment_cells(const ExperimentConfig& cfg) {
  const std::size_t groups = sweeps_n1(cfg.protocol) ? cfg.sweep.size() : cfg.sources.size();
  std::vector<CellId> out;
  for (std::size_t g = 0; g < groups; ++g) {
    for (int r = 0; r < cfg.reps; ++r) out.push_back({g, r});
  }
  return out;
}

ResultTable run_cells(const ExperimentConfig& cfg, std::span<const CellId> cells) {
  const Runner runner(cfg);
  std::vector<CellOutput> outputs(cells.size());
  const auto workers = static_cast<std::size_t>(std::max(1, cfg.jobs));
  if (workers == 1 || cells.size() < 2) {
    for (std::size_t i = 0; i < cells.size(); ++i) outputs[i] = runner.run(cells[i]);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, cells.size()); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) outputs[i] = runner.run(cells[i]);
      });
    }
    for (auto& t : pool) t.join();
  }

  ResultTable table;
  table.config = to_json(cfg);
  for (auto& o : outputs) {
    table.rows.insert(table.rows.end(), std::make_move_iterator(o.rows.begin()), std::make_move_iterator(o.rows.end()));
    table.failures.insert(table.failures.end(), std::make_move_iterator(o.failures.begin()),
                          std::make_move_iterator(o.failures.end()));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.sweep_index, a.rep) < std::tie(b.sweep_index, b.rep);
  });
  table.summary = summarize_rows(table.rows);
  return table;
}

ResultTable run_experiment(const ExperimentConfig& cfg) {
  const auto cells = experiment_cells(cfg);
  return run_cells(cfg, cells);
}

ResultTable run_vtss_comparison(const ExperimentConfig& cfg) {
  if (cfg.protocol != Protocol::VtssComparison) throw Error(ErrorCode::InvalidArgument, "not a vtss_comparison config");
  return run_experiment(cfg);
}

ResultTable run_gamma_histogram(const ExperimentConfig& cfg) {
  if (cfg.protocol != Protocol::GammaHistogram) throw Error(ErrorCode::InvalidArgument, "not a gamma_histogram config");
  return run_experiment(cfg);
}

std::vector<HistogramBin> histogram(const ResultTable& table, std::string_view metric, double lo, double hi, int bins) {
  if (bins < 1 || !(hi > lo)) throw Error(ErrorCode::InvalidArgument, "histogram needs bins >= 1 and hi > lo");
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  const double width = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) {
    out[static_cast<std::size_t>(b)].lo = lo + b * width;
    out[static_cast<std::size_t>(b)].hi = b + 1 == bins ? hi : lo + (b + 1) * width;
  }
  for (const auto& r : table.rows) {
    if (r.metric != metric || r.value < lo || r.value > hi) continue;
    auto b = static_cast<int>((r.value - lo) / width);
    b = std::min(b, bins - 1);
    ++out[static_cast<std::size_t>(b)].count;
  }
  return out;
}

namespace {

void write_header(const ResultTable& table, std::ostream& out) {
  out << "# synaug experiment " << table.config.value("name", std::string()) << "\n";
  out << "# config: " << table.config.dump() << "\n";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

}  // namespace

void write_raw_csv(const ResultTable& table, std::ostream& out) {
  write_header(table, out);
  out << "sweep,rep,metric,value,base_seed,stream\n";
  for (const auto& r : table.rows) {
    out << r.sweep << ',' << r.rep << ',' << csv_field(r.metric) << ',' << format_double(r.value) << ','
        << r.base_seed << ',' << r.stream << '\n';
  }
}

void write_summary_csv(const ResultTable& table, std::ostream& out) {
  write_header(table, out);
  out << "sweep,metric,mean,sd,ci95,reps\n";
  for (const auto& s : table.summary) {
    out << s.sweep << ',' << csv_field(s.metric) << ',' << format_double(s.mean) << ',' << format_double(s.sd) << ','
        << format_double(s.ci95) << ',' << s.reps << '\n';
  }
}

void write_failures_csv(const ResultTable& table, std::ostream& out) {
  write_header(table, out);
  out << "sweep,rep,scope,code,message\n";
  for (const auto& f : table.failures) {
    out << f.sweep << ',' << f.rep << ',' << csv_field(f.scope) << ',' << f.code << ',' << csv_field(f.message) << '\n';
  }
}

void write_experiment_outputs(const ResultTable& table, const std::string& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create '" + directory + "': " + ec.message());
  const std::filesystem::path dir(directory);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw Error(ErrorCode::IoError, "cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("raw.csv");
    write_raw_csv(table, f);
  }
  {
    auto f = open("summary.csv");
    write_summary_csv(table, f);
  }
  {
    auto f = open("failures.csv");
    write_failures_csv(table, f);
  }
  {
    auto f = open("config.json");
    f << table.config.dump(2) << '\n';
  }
}

}  // namespace synaug
