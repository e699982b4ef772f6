#include "synaug/vtss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "synaug/error.hpp"
#include "synaug/metrics.hpp"

namespace synaug {

std::string_view to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::BalancedLoss: return "balanced-loss";
    case ObjectiveKind::BalancedAccuracy: return "balanced-accuracy";
    case ObjectiveKind::WeightedLoss: return "weighted-loss";
  }
  return "unknown";
}

ObjectiveKind parse_objective_kind(std::string_view text) {
  if (text == "balanced-loss" || text == "balanced_loss" || text == "minimize_balanced_loss") {
    return ObjectiveKind::BalancedLoss;
  }
  if (text == "balanced-accuracy" || text == "balanced_accuracy" || text == "maximize_balanced_accuracy") {
    return ObjectiveKind::BalancedAccuracy;
  }
  if (text == "weighted-loss" || text == "weighted_loss" || text == "minimize_weighted_loss") {
    return ObjectiveKind::WeightedLoss;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown objective '" + std::string(text) + "'");
}

std::vector<double> linspace(double lo, double hi, int count) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "grid needs at least one point");
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < count; ++i) {
    const double v = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    // Snap to 12 decimals so 0.6:1.4:9 yields 0.8 rather than 0.7999999999999999.
    out[static_cast<std::size_t>(i)] = std::abs(v) < 1e3 ? std::round(v * 1e12) / 1e12 : v;
  }
  out.back() = hi;
  return out;
}

void VtssConfig::validate() const {
  if (gamma_grid.empty()) throw Error(ErrorCode::InvalidArgument, "gamma grid is empty");
  for (double g : gamma_grid) {
    if (!(g >= 0.0) || !std::isfinite(g)) {
      throw Error(ErrorCode::InvalidArgument, "gamma grid values must be finite and nonnegative");
    }
  }
  if (folds < 2) throw Error(ErrorCode::InvalidArgument, "fold count must be at least 2");
  if (repeats < 1) throw Error(ErrorCode::InvalidArgument, "repeat count must be at least 1");
  if (objective.kind == ObjectiveKind::WeightedLoss && !(objective.rho >= 0.0 && objective.rho <= 1.0)) {
    throw Error(ErrorCode::InvalidRho, "rho must lie in [0, 1]");
  }
  generator.validate();
}

Index synthetic_count(double gamma, Index n0, Index n1) {
  const Index gap = n0 - n1;
  if (gap <= 0) return 0;
  return std::max<Index>(0, static_cast<Index>(std::llround(gamma * static_cast<double>(gap))));
}

double evaluate_objective(const FittedModel& model, const LabeledDataset& eval_data, const VtssObjective& objective) {
  switch (objective.kind) {
    case ObjectiveKind::BalancedLoss:
      return balanced_empirical_loss(model.theta, model.loss_spec, eval_data);
    case ObjectiveKind::BalancedAccuracy:
      return balanced_accuracy(model, eval_data);
    case ObjectiveKind::WeightedLoss:
      return weighted_empirical_loss(model.theta, model.loss_spec, eval_data, objective.rho);
  }
  return 0.0;
}

namespace {

struct PassResult {
  std::vector<double> value;
  std::vector<std::string> failure;  // empty string: success
};

bool quadratic_fast_path(const VtssConfig& cfg) {
  return cfg.loss.family == LossFamily::Squared && cfg.fit.step_rule != StepRule::GradientBacktracking &&
         cfg.objective.kind != ObjectiveKind::BalancedAccuracy;
}

std::string describe(const Error& e) { return e.what(); }

// Scores every grid value on `eval` after augmenting `train`. Synthetic rows
// come from train's minority only.
PassResult grid_pass(const LabeledDataset& train, const LabeledDataset& eval, const VtssConfig& cfg,
                     const RngStream& gen_stream, std::vector<std::string>* warnings) {
  const std::size_t g_count = cfg.gamma_grid.size();
  PassResult out;
  out.value.assign(g_count, 0.0);
  out.failure.assign(g_count, "");

  std::vector<Index> counts(g_count);
  for (std::size_t g = 0; g < g_count; ++g) counts[g] = synthetic_count(cfg.gamma_grid[g], train.n0(), train.n1());
  const RowMatrix minority = split_by_class(train).minority;

  // Prefix-stable generators draw the largest batch once; smaller sizes use
  // its leading rows. Others draw per size from a size-keyed stream.
  const bool shared = is_prefix_stable(cfg.generator.kind);
  SyntheticBatch batch;
  std::string shared_failure;
  const Index max_count = *std::max_element(counts.begin(), counts.end());
  if (shared && max_count > 0) {
    try {
      batch = generate(cfg.generator, minority, &train, max_count, gen_stream);
      if (warnings) warnings->insert(warnings->end(), batch.warnings.begin(), batch.warnings.end());
    } catch (const Error& e) {
      shared_failure = describe(e);
    }
  }
  auto rows_for = [&](std::size_t g) -> RowMatrix {
    if (counts[g] == 0) return RowMatrix(0, train.dim());
    if (shared) {
      if (!shared_failure.empty()) throw Error(ErrorCode::DegenerateGenerator, shared_failure);
      return batch.rows.topRows(counts[g]);
    }
    SyntheticBatch own = generate(cfg.generator, minority, &train, counts[g],
                                  derive_stream(gen_stream, static_cast<std::uint64_t>(counts[g])));
    if (warnings) warnings->insert(warnings->end(), own.warnings.begin(), own.warnings.end());
    return own.rows;
  };

  if (quadratic_fast_path(cfg)) {
    const Index p = cfg.loss.parameter_size(train.dim());
    const double ridge = cfg.fit.resolved_ridge(cfg.loss);
    const ClassSplit train_split = split_by_class(train);
    QuadraticStats base(p);
    base.add_rows(cfg.loss, train_split.majority, 0);
    base.add_rows(cfg.loss, train_split.minority, 1);
    const ClassSplit eval_split = split_by_class(eval);
    if (eval_split.majority.rows() == 0 || eval_split.minority.rows() == 0) {
      throw Error(ErrorCode::MissingClass, "validation data must contain both classes");
    }
    QuadraticStats e0(p);
    QuadraticStats e1(p);
    e0.add_rows(cfg.loss, eval_split.majority, 0);
    e1.add_rows(cfg.loss, eval_split.minority, 1);
    const double rho = cfg.objective.kind == ObjectiveKind::WeightedLoss ? cfg.objective.rho : 0.5;

    auto score = [&](const QuadraticStats& stats) {
      const FittedModel m = solve_quadratic(stats, cfg.loss, ridge);
      return rho * e0.weighted_loss(m.theta) / e0.weight + (1.0 - rho) * e1.weighted_loss(m.theta) / e1.weight;
    };

    if (shared) {
      std::vector<std::size_t> order(g_count);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return counts[a] < counts[b]; });
      QuadraticStats running = base;
      Index added = 0;
      for (std::size_t g : order) {
        try {
          if (counts[g] > added) {
            if (!shared_failure.empty()) throw Error(ErrorCode::DegenerateGenerator, shared_failure);
            const RowMatrix extra = batch.rows.middleRows(added, counts[g] - added);
            running.add_rows(cfg.loss, extra, 1);
            added = counts[g];
          }
          out.value[g] = score(running);
        } catch (const Error& e) {
          out.failure[g] = describe(e);
        }
      }
    } else {
      for (std::size_t g = 0; g < g_count; ++g) {
        try {
          QuadraticStats stats = base;
          stats.add_rows(cfg.loss, rows_for(g), 1);
          out.value[g] = score(stats);
        } catch (const Error& e) {
          out.failure[g] = describe(e);
        }
      }
    }
    return out;
  }

  for (std::size_t g = 0; g < g_count; ++g) {
    try {
      const LabeledDataset augmented = train.with_rows(rows_for(g), 1);
      const FittedModel model = fit_erm(augmented, cfg.loss, cfg.fit);
      out.value[g] = evaluate_objective(model, eval, cfg.objective);
    } catch (const Error& e) {
      out.failure[g] = describe(e);
    }
  }
  return out;
}

void check_data(const LabeledDataset& data) {
  if (data.n0() <= data.n1()) {
    throw Error(ErrorCode::InvalidArgument, "synthetic-size tuning needs n0 > n1 (n0 = " + std::to_string(data.n0()) +
                                                ", n1 = " + std::to_string(data.n1()) + ")");
  }
}

std::vector<CurvePoint> summarize(const VtssConfig& cfg, const std::vector<std::vector<double>>& values,
                                  const std::vector<std::string>& failures) {
  std::vector<CurvePoint> curve(cfg.gamma_grid.size());
  for (std::size_t g = 0; g < curve.size(); ++g) {
    CurvePoint& pt = curve[g];
    pt.gamma = cfg.gamma_grid[g];
    if (!failures[g].empty()) {
      pt.valid = false;
      pt.failure = failures[g];
      continue;
    }
    const auto& v = values[g];
    pt.evaluations = static_cast<int>(v.size());
    double sum = 0.0;
    for (double x : v) sum += x;
    pt.mean = sum / static_cast<double>(v.size());
    if (v.size() > 1) {
      double ss = 0.0;
      for (double x : v) ss += (x - pt.mean) * (x - pt.mean);
      pt.standard_error = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    }
  }
  return curve;
}

}  // namespace

std::vector<CurvePoint> cv_curve(const LabeledDataset& data, const VtssConfig& cfg, const RngStream& stream,
                                 std::vector<FoldAudit>* audit, std::vector<std::string>* warnings) {
  cfg.validate();
  check_data(data);
  if (data.n1() < cfg.folds) {
    throw Error(ErrorCode::TooFewMinority, "n1 = " + std::to_string(data.n1()) + " is smaller than K = " +
                                               std::to_string(cfg.folds) + "; lower the fold count");
  }
  const std::size_t g_count = cfg.gamma_grid.size();
  std::vector<std::vector<double>> values(g_count);
  std::vector<std::string> failures(g_count);
  const RngStream fold_root = derive_stream(stream, 0);
  const RngStream gen_root = derive_stream(stream, 1);

  for (int r = 0; r < cfg.repeats; ++r) {
    const FoldAssignment folds = stratified_kfold(data, cfg.folds, derive_stream(fold_root, static_cast<std::uint64_t>(r)));
    const RngStream gen_repeat = derive_stream(gen_root, static_cast<std::uint64_t>(r));
    for (int k = 0; k < cfg.folds; ++k) {
      const auto train_idx = folds.training_indices(k);
      const auto val_idx = folds.validation_indices(k);
      const LabeledDataset train = data.subset(train_idx);
      const LabeledDataset val = data.subset(val_idx);
      if (audit) {
        FoldAudit entry;
        entry.repeat = r;
        entry.fold = k;
        entry.validation_rows = val_idx;
        for (std::size_t i : train_idx) {
          if (data.label(static_cast<Index>(i)) == 1) entry.generator_pool_rows.push_back(i);
        }
        audit->push_back(std::move(entry));
      }
      const PassResult pass = grid_pass(train, val, cfg, derive_stream(gen_repeat, static_cast<std::uint64_t>(k)), warnings);
      for (std::size_t g = 0; g < g_count; ++g) {
        if (!pass.failure[g].empty()) {
          if (failures[g].empty()) failures[g] = pass.failure[g];
        } else {
          values[g].push_back(pass.value[g]);
        }
      }
    }
  }
  return summarize(cfg, values, failures);
}

std::vector<CurvePoint> holdout_curve(const LabeledDataset& train, const LabeledDataset& validation,
                                      const VtssConfig& cfg, const RngStream& stream) {
  cfg.validate();
  check_data(train);
  const PassResult pass = grid_pass(train, validation, cfg, derive_stream(stream, 1), nullptr);
  std::vector<std::vector<double>> values(cfg.gamma_grid.size());
  for (std::size_t g = 0; g < values.size(); ++g) {
    if (pass.failure[g].empty()) values[g].push_back(pass.value[g]);
  }
  return summarize(cfg, values, pass.failure);
}

std::size_t select_gamma(const std::vector<CurvePoint>& curve, const VtssObjective& objective) {
  std::vector<std::size_t> order(curve.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return curve[a].gamma < curve[b].gamma; });
  std::size_t best = curve.size();
  for (std::size_t i : order) {
    if (!curve[i].valid) continue;
    if (best == curve.size()) {
      best = i;
      continue;
    }
    const bool better = objective.minimize() ? curve[i].mean < curve[best].mean : curve[i].mean > curve[best].mean;
    if (better) best = i;
  }
  if (best == curve.size()) throw Error(ErrorCode::InvalidArgument, "no grid value could be evaluated");
  return best;
}

VtssResult vtss_tune(const LabeledDataset& data, const VtssConfig& cfg, const RngStream& stream) {
  VtssResult out;
  out.seed_record = stream;
  out.cv_curve = cv_curve(data, cfg, stream, cfg.audit ? &out.audit : nullptr, &out.warnings);
  for (const auto& pt : out.cv_curve) {
    if (!pt.valid) out.warnings.push_back("gamma " + std::to_string(pt.gamma) + " excluded: " + pt.failure);
  }
  const std::size_t best = select_gamma(out.cv_curve, cfg.objective);
  out.gamma_star = out.cv_curve[best].gamma;
  out.n_syn_star = synthetic_count(out.gamma_star, data.n0(), data.n1());

  const RowMatrix minority = split_by_class(data).minority;
  SyntheticBatch batch;
  batch.rows.resize(0, data.dim());
  if (out.n_syn_star > 0) {
    batch = generate(cfg.generator, minority, &data, out.n_syn_star, derive_stream(stream, 2));
    out.warnings.insert(out.warnings.end(), batch.warnings.begin(), batch.warnings.end());
  }
  out.final_model = fit_erm(augment(data, batch), cfg.loss, cfg.fit);
  out.final_theta = out.final_model.theta;
  return out;
}

}  // namespace synaug
