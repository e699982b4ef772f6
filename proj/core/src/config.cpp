#include "synaug/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "synaug/error.hpp"

namespace synaug {

std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& p : embedded_presets()) out.emplace_back(p.name);
  return out;
}

std::optional<Json> find_preset(std::string_view name) {
  for (const auto& p : embedded_presets()) {
    if (name == p.name) {
      try {
        return Json::parse(p.json);
      } catch (const Json::parse_error& e) {
        throw Error(ErrorCode::ParseError, "preset '" + std::string(name) + "': " + e.what());
      }
    }
  }
  return std::nullopt;
}

Json load_document(const std::string& name_or_path) {
  if (auto preset = find_preset(name_or_path)) return *preset;
  std::error_code ec;
  if (std::filesystem::is_regular_file(name_or_path, ec)) {
    std::ifstream in(name_or_path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + name_or_path + "'");
    try {
      return Json::parse(in);
    } catch (const Json::parse_error& e) {
      throw Error(ErrorCode::ParseError, name_or_path + ": " + e.what());
    }
  }
  std::string known;
  for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw Error(ErrorCode::InvalidArgument, "unknown preset '" + name_or_path + "'; available: " + known);
}

namespace {

template <class T>
T require(const Json& j, const char* key) {
  if (!j.contains(key)) throw Error(ErrorCode::InvalidArgument, std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "': " + e.what());
  }
}

template <class T>
T value_or(const Json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "': " + e.what());
  }
}

Vector axis_vector(Index d, Index axis, double scale) {
  if (d < 1 || axis < 0 || axis >= d) throw Error(ErrorCode::InvalidArgument, "bad dimension or axis");
  Vector v = Vector::Zero(d);
  v(axis) = scale;
  return v;
}

// A vector given either explicitly under `key` or as scale * e_axis.
Vector vector_field(const Json& m, const char* key, Index d, double scale) {
  if (m.contains(key)) return vector_from_json(m.at(key));
  return axis_vector(d, value_or<Index>(m, "axis", 0), scale);
}

}  // namespace

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidArgument, "expected a numeric array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw Error(ErrorCode::InvalidArgument, "expected a numeric array");
    v(static_cast<Index>(i)) = j[i].get<double>();
  }
  return v;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

LabeledDataset ModelSetup::sample(Index n0_override, Index n1_override, const RngStream& stream) const {
  if (n_iid > 0) {
    const auto* sig = dynamic_cast<const SigmoidBernoulliModel*>(model.get());
    if (!sig) throw Error(ErrorCode::Unsupported, "joint sampling needs a sigmoid model");
    return sample_sigmoid_bernoulli(*sig, n0_override + n1_override > 0 ? n0_override + n1_override : n_iid, stream);
  }
  if (n0_override < 1) throw Error(ErrorCode::TooFewSamples, "n0 must be positive");
  if (n1_override < 1) throw Error(ErrorCode::TooFewMinority, "n1 must be positive");
  return model->sample(n0_override, n1_override, stream);
}

ModelSetup model_from_json(const Json& doc, const std::string& name) {
  const Json& m = doc.contains("model") ? doc.at("model") : doc;
  const auto kind = require<std::string>(m, "kind");
  ModelSetup out;
  out.name = !name.empty() ? name : value_or<std::string>(doc, "name", kind);
  out.document = doc;

  if (kind == "two_gaussian") {
    const Index d = value_or<Index>(m, "d", 2);
    Vector mu1 = vector_field(m, "mu1", d, value_or<double>(m, "mu", 1.0));
    std::optional<Vector> mu_syn;
    if (m.contains("mu_syn")) {
      mu_syn = vector_from_json(m.at("mu_syn"));
    } else if (m.contains("a")) {
      mu_syn = m.at("a").get<double>() / mu1.norm() * mu1;
    }
    out.model = std::make_shared<TwoGaussianModel>(std::move(mu1), std::move(mu_syn));
  } else if (kind == "mean_shift") {
    const Index d = value_or<Index>(m, "d", 20);
    Vector mu = vector_field(m, "mu", d, value_or<double>(m, "delta", 1.0));
    out.model = std::make_shared<MeanShiftModel>(std::move(mu), parse_noise_kind(require<std::string>(m, "noise")));
  } else if (kind == "sigmoid_bernoulli") {
    const Index d = value_or<Index>(m, "d", 1);
    Vector v = vector_field(m, "v", d, 1.0);
    const double a = require<double>(m, "a");
    const double b = require<double>(m, "b");
    const double c = value_or<double>(m, "c", 1.0);
    std::optional<double> alpha;
    if (m.contains("alpha") && m.at("alpha").is_number()) alpha = m.at("alpha").get<double>();
    SigmoidNoise noise;
    noise.scale = 0.0;
    if (m.contains("noise")) {
      const Json& nz = m.at("noise");
      noise.scale = value_or<double>(nz, "scale", 1.0);
      if (nz.contains("shift")) noise.shift = vector_from_json(nz.at("shift"));
    }
    out.model = std::make_shared<SigmoidBernoulliModel>(c, std::move(v), a, b, alpha, std::move(noise));
  } else if (kind == "gaussian_mixture") {
    out.model = std::make_shared<GaussianMixtureModel>(require<Index>(m, "d"), require<double>(m, "delta"),
                                                       require<double>(m, "xi"));
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown model kind '" + kind + "'");
  }

  out.loss = doc.contains("loss") ? loss_from_json(doc.at("loss")) : out.model->natural_loss();
  if (doc.contains("sample")) {
    const Json& s = doc.at("sample");
    out.n0 = value_or<Index>(s, "n0", 0);
    out.n1 = value_or<Index>(s, "n1", 0);
    out.n_iid = value_or<Index>(s, "n", 0);
  }
  if (out.n_iid == 0 && (out.n0 == 0 || out.n1 == 0)) {
    if (kind == "sigmoid_bernoulli") {
      out.n_iid = 5000;
    } else {
      out.n0 = out.n0 ? out.n0 : 2000;
      out.n1 = out.n1 ? out.n1 : 100;
    }
  }
  return out;
}

ModelSetup load_model(const std::string& name_or_path) {
  Json doc = load_document(name_or_path);
  if (value_or<std::string>(doc, "type", "model") != "model") {
    throw Error(ErrorCode::InvalidArgument, "'" + name_or_path + "' is not a model preset");
  }
  return model_from_json(doc, find_preset(name_or_path) ? name_or_path : "");
}

LossSpec loss_from_json(const Json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "logistic") return LossSpec::logistic();
    if (s == "hinge") return LossSpec::hinge();
    if (s == "squared" || s == "squared_raw") return LossSpec::squared_raw();
    if (s == "squared_centered") return LossSpec::squared_centered();
    throw Error(ErrorCode::InvalidArgument, "unknown loss '" + s + "'");
  }
  LossSpec spec;
  spec.family = parse_loss_family(require<std::string>(j, "family"));
  spec.squared_target = parse_squared_target(value_or<std::string>(j, "squared_target", "raw"));
  spec.fit_intercept = value_or<bool>(j, "fit_intercept", false);
  return spec;
}

Json to_json(const LossSpec& spec) {
  return Json{{"family", to_string(spec.family)},
              {"squared_target", to_string(spec.squared_target)},
              {"fit_intercept", spec.fit_intercept}};
}

GeneratorSpec generator_from_json(const Json& j, SimModelHandle model) {
  GeneratorSpec spec;
  if (j.is_string()) {
    spec.kind = parse_generator_kind(j.get<std::string>());
  } else {
    spec.kind = parse_generator_kind(require<std::string>(j, "kind"));
    spec.k = value_or<int>(j, "k", spec.k);
    spec.jitter_sigma = value_or<double>(j, "jitter_sigma", spec.jitter_sigma);
    spec.ridge = value_or<double>(j, "ridge", spec.ridge);
  }
  if (requires_model(spec.kind)) spec.model_handle = std::move(model);
  return spec;
}

Json to_json(const GeneratorSpec& spec) {
  return Json{{"kind", to_string(spec.kind)}, {"k", spec.k}, {"jitter_sigma", spec.jitter_sigma}, {"ridge", spec.ridge}};
}

FitConfig fit_from_json(const Json& j) {
  FitConfig cfg;
  cfg.max_iters = value_or<int>(j, "max_iters", cfg.max_iters);
  cfg.grad_tol = value_or<double>(j, "grad_tol", cfg.grad_tol);
  if (j.contains("ridge") && !j.at("ridge").is_null()) cfg.ridge = j.at("ridge").get<double>();
  if (j.contains("step_rule")) cfg.step_rule = parse_step_rule(j.at("step_rule").get<std::string>());
  if (cfg.max_iters < 1) throw Error(ErrorCode::InvalidArgument, "max_iters must be positive");
  if (!(cfg.grad_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "grad_tol must be positive");
  if (cfg.ridge && !(*cfg.ridge >= 0.0)) throw Error(ErrorCode::InvalidArgument, "ridge must be nonnegative");
  return cfg;
}

Json to_json(const FitConfig& cfg) {
  Json out{{"max_iters", cfg.max_iters}, {"grad_tol", cfg.grad_tol}, {"step_rule", to_string(cfg.step_rule)}};
  out["ridge"] = cfg.ridge ? Json(*cfg.ridge) : Json(nullptr);
  return out;
}

VtssConfig vtss_from_json(const Json& j, SimModelHandle model) {
  VtssConfig cfg;
  if (j.contains("gamma_grid")) {
    const Json& g = j.at("gamma_grid");
    cfg.gamma_grid = g.is_string() ? parse_grid(g.get<std::string>()) : g.get<std::vector<double>>();
  }
  cfg.folds = value_or<int>(j, "folds", cfg.folds);
  cfg.repeats = value_or<int>(j, "repeats", cfg.repeats);
  if (j.contains("objective")) {
    const Json& o = j.at("objective");
    if (o.is_string()) {
      cfg.objective.kind = parse_objective_kind(o.get<std::string>());
    } else {
      cfg.objective.kind = parse_objective_kind(require<std::string>(o, "kind"));
      cfg.objective.rho = value_or<double>(o, "rho", 0.5);
    }
  }
  if (j.contains("generator")) cfg.generator = generator_from_json(j.at("generator"), model);
  if (j.contains("loss")) cfg.loss = loss_from_json(j.at("loss"));
  if (j.contains("fit")) cfg.fit = fit_from_json(j.at("fit"));
  cfg.audit = value_or<bool>(j, "audit", false);
  return cfg;
}

Json to_json(const VtssConfig& cfg) {
  return Json{{"gamma_grid", cfg.gamma_grid},
              {"folds", cfg.folds},
              {"repeats", cfg.repeats},
              {"objective", {{"kind", to_string(cfg.objective.kind)}, {"rho", cfg.objective.rho}}},
              {"generator", to_json(cfg.generator)},
              {"loss", to_json(cfg.loss)},
              {"fit", to_json(cfg.fit)},
              {"audit", cfg.audit}};
}

Json to_json(const RngStream& stream) {
  return Json{{"seed", stream.seed}, {"path", stream.path}, {"algorithm_id", stream.algorithm_id()}};
}

Json to_json(const FittedModel& model) {
  return Json{{"theta", to_json(model.theta)},
              {"loss", to_json(model.loss_spec)},
              {"converged", model.converged},
              {"final_grad_norm", model.final_grad_norm},
              {"iterations", model.iterations},
              {"objective", model.objective}};
}

Json to_json(const VtssResult& result) {
  Json curve = Json::array();
  for (const auto& pt : result.cv_curve) {
    Json row{{"gamma", pt.gamma}, {"valid", pt.valid}};
    if (pt.valid) {
      row["mean"] = pt.mean;
      row["stderr"] = pt.standard_error;
      row["evaluations"] = pt.evaluations;
    } else {
      row["failure"] = pt.failure;
    }
    curve.push_back(std::move(row));
  }
  Json out{{"gamma_star", result.gamma_star},
           {"n_syn_star", result.n_syn_star},
           {"cv_curve", std::move(curve)},
           {"final_model", to_json(result.final_model)},
           {"seed_record", to_json(result.seed_record)},
           {"algorithm_id", result.seed_record.algorithm_id()},
           {"warnings", result.warnings}};
  if (!result.audit.empty()) {
    Json audit = Json::array();
    for (const auto& a : result.audit) {
      audit.push_back(Json{{"repeat", a.repeat},
                           {"fold", a.fold},
                           {"validation_rows", a.validation_rows},
                           {"generator_pool_rows", a.generator_pool_rows}});
    }
    out["audit"] = std::move(audit);
  }
  return out;
}

Json to_json(const GradientEstimate& estimate) {
  return Json{{"vector", to_json(estimate.vector)},
              {"standard_error", to_json(estimate.standard_error)},
              {"norm", estimate.vector.norm()},
              {"standard_error_norm", estimate.standard_error.norm()},
              {"n_used", estimate.n_used}};
}

Json to_json(const BiasDiagnostics& d) {
  Json out{{"pi0", d.pi0},         {"pi1", d.pi1},           {"pi_tilde", d.pi_tilde},
           {"rho", d.rho},         {"b", to_json(d.b)},      {"norm_phi", d.norm_phi},
           {"norm_psi", d.norm_psi}, {"regime", to_string(d.regime)}};
  out["cos_angle"] = d.cos_angle ? Json(*d.cos_angle) : Json(nullptr);
  out["sin_angle"] = d.sin_angle ? Json(*d.sin_angle) : Json(nullptr);
  return out;
}

namespace {

double parse_number(std::string_view text) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::InvalidArgument, "bad grid number '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::vector<double> parse_grid(std::string_view text) {
  std::vector<double> out;
  if (text.find(':') != std::string_view::npos) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string_view::npos || text.find(':', c2 + 1) != std::string_view::npos) {
      throw Error(ErrorCode::InvalidArgument, "grid must look like lo:hi:n");
    }
    const double lo = parse_number(text.substr(0, c1));
    const double hi = parse_number(text.substr(c1 + 1, c2 - c1 - 1));
    const double n = parse_number(text.substr(c2 + 1));
    if (n < 1 || n != std::floor(n)) throw Error(ErrorCode::InvalidArgument, "grid count must be a positive integer");
    if (hi < lo) throw Error(ErrorCode::InvalidArgument, "grid upper end is below the lower end");
    out = linspace(lo, hi, static_cast<int>(n));
  } else {
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto comma = text.find(',', start);
      const auto end = comma == std::string_view::npos ? text.size() : comma;
      out.push_back(parse_number(text.substr(start, end - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  }
  for (double g : out) {
    if (!(g >= 0.0)) throw Error(ErrorCode::InvalidArgument, "grid values must be nonnegative");
  }
  return out;
}

}  // namespace synaug
