#include "consys/recoverability.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

namespace consys {

using nlohmann::json;

namespace {
constexpr double kProbClamp = 1e-9;
constexpr double kGradTol = 1e-6;
constexpr int kMaxIter = 100;
const double kLog2 = std::log(2.0);
}  // namespace

json RecoverabilityConfig::to_json() const {
  return {{"k_max", k_max},
          {"lambda", lambda},
          {"rare_threshold", rare_threshold},
          {"seed", seed}};
}

double shannon_entropy(const std::vector<int>& labels) {
  if (labels.empty()) throw std::invalid_argument("empty label vector");
  std::map<int, size_t> counts;
  for (int y : labels) ++counts[y];
  const double n = static_cast<double>(labels.size());
  double h = 0;
  for (const auto& [_, c] : counts) {
    const double p = c / n;
    if (p > 0) h -= p * std::log(p) / kLog2;
  }
  return h;
}

Eigen::VectorXd LogisticFit::predict(const Eigen::VectorXd& features) const {
  Eigen::VectorXd x(features.size() + 1);
  x(0) = 1.0;
  x.tail(features.size()) = features;
  Eigen::VectorXd logits = Eigen::VectorXd::Zero(n_classes);
  for (int c = 0; c < n_classes - 1; ++c) logits(c) = weights.row(c).dot(x);
  const double m = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - m).exp();
  return e / e.sum();
}

namespace {

// Penalized NLL (natural log) and gradient for reference-class softmax.
double nll_and_grad(const Eigen::MatrixXd& design, const std::vector<int>& labels,
                    const Eigen::MatrixXd& w, double lambda, int n_classes,
                    Eigen::MatrixXd* grad, Eigen::MatrixXd* probs_out) {
  const int n = design.rows();
  const int p = design.cols();
  Eigen::MatrixXd logits = Eigen::MatrixXd::Zero(n, n_classes);
  logits.leftCols(n_classes - 1) = design * w.transpose();
  Eigen::MatrixXd probs(n, n_classes);
  double nll = 0;
  for (int i = 0; i < n; ++i) {
    const double m = logits.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits.row(i).array() - m).exp();
    const double z = e.sum();
    probs.row(i) = e / z;
    nll -= logits(i, labels[i]) - m - std::log(z);
  }
  for (int c = 0; c < n_classes - 1; ++c)
    nll += 0.5 * lambda * w.row(c).tail(p - 1).squaredNorm();
  if (grad) {
    grad->setZero(n_classes - 1, p);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < n_classes - 1; ++c) {
        const double r = probs(i, c) - (labels[i] == c ? 1.0 : 0.0);
        grad->row(c) += r * design.row(i);
      }
    for (int c = 0; c < n_classes - 1; ++c)
      grad->row(c).tail(p - 1) += lambda * w.row(c).tail(p - 1);
  }
  if (probs_out) *probs_out = std::move(probs);
  return nll;
}

}  // namespace

LogisticFit fit_logistic(const Eigen::MatrixXd& features,
                         const std::vector<int>& labels, double lambda) {
  const int n = features.rows();
  if (n == 0 || static_cast<size_t>(n) != labels.size())
    throw std::invalid_argument("feature/label size mismatch");
  std::set<int> classes(labels.begin(), labels.end());
  if (classes.size() < 2)
    throw std::invalid_argument("labels contain fewer than 2 classes");
  const int n_classes = *classes.rbegin() + 1;
  const int d = features.cols();
  const int p = d + 1;

  Eigen::MatrixXd design(n, p);
  design.col(0).setOnes();
  design.rightCols(d) = features;

  LogisticFit fit;
  fit.n_classes = n_classes;
  fit.weights = Eigen::MatrixXd::Zero(n_classes - 1, p);

  Eigen::MatrixXd grad, probs;
  double nll = nll_and_grad(design, labels, fit.weights, lambda, n_classes,
                            &grad, &probs);
  int iter = 0;
  while (iter < kMaxIter) {
    if (grad.cwiseAbs().maxCoeff() < kGradTol) break;
    ++iter;

    const int dim = (n_classes - 1) * p;
    Eigen::VectorXd g(dim);
    for (int c = 0; c < n_classes - 1; ++c) g.segment(c * p, p) = grad.row(c);

    // Newton step on the full block Hessian; gradient descent when the
    // Cholesky factorization reports non-PD curvature.
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(dim, dim);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < n_classes - 1; ++c) {
        for (int c2 = c; c2 < n_classes - 1; ++c2) {
          const double wcc = probs(i, c) * ((c == c2 ? 1.0 : 0.0) - probs(i, c2));
          if (wcc == 0.0) continue;
          hess.block(c * p, c2 * p, p, p).noalias() +=
              wcc * design.row(i).transpose() * design.row(i);
        }
      }
    }
    for (int c = 0; c < n_classes - 1; ++c)
      for (int c2 = 0; c2 < c; ++c2)
        hess.block(c * p, c2 * p, p, p) =
            hess.block(c2 * p, c * p, p, p).transpose();
    for (int c = 0; c < n_classes - 1; ++c)
      for (int j = 1; j < p; ++j) hess(c * p + j, c * p + j) += lambda;

    Eigen::VectorXd direction;
    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    if (llt.info() == Eigen::Success) {
      direction = -llt.solve(g);
    } else {
      direction = -g;
    }

    // Backtracking line search on the penalized objective.
    double step = 1.0;
    Eigen::MatrixXd candidate = fit.weights;
    double new_nll = nll;
    bool improved = false;
    for (int bt = 0; bt < 40; ++bt) {
      for (int c = 0; c < n_classes - 1; ++c)
        candidate.row(c) = fit.weights.row(c) +
                           step * direction.segment(c * p, p).transpose();
      new_nll = nll_and_grad(design, labels, candidate, lambda, n_classes,
                             nullptr, nullptr);
      if (new_nll <= nll + 1e-12) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    fit.weights = candidate;
    nll = nll_and_grad(design, labels, fit.weights, lambda, n_classes, &grad,
                       &probs);
  }
  fit.iterations = iter;
  fit.converged = grad.cwiseAbs().maxCoeff() < kGradTol;
  return fit;
}

std::optional<FoldPlan> stratified_folds(const std::vector<int>& labels, int k_max,
                                         uint64_t seed) {
  if (labels.empty()) throw std::invalid_argument("empty label vector");
  std::map<int, std::vector<int>> by_class;
  for (size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(static_cast<int>(i));
  size_t minority = labels.size();
  for (const auto& [_, idx] : by_class) minority = std::min(minority, idx.size());
  const int k = std::min<int>(k_max, static_cast<int>(minority));
  if (k < 2) return std::nullopt;

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(labels.size(), 0);
  std::mt19937_64 rng(seed);
  // Class order is deterministic (sorted map); round-robin keeps per-fold
  // class counts within one sample of each other.
  for (auto& [_, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t pos = 0; pos < idx.size(); ++pos)
      plan.assignment[idx[pos]] = static_cast<int>(pos % k);
  }
  return plan;
}

Eigen::MatrixXd out_of_fold_probs(const Eigen::MatrixXd& features,
                                  const std::vector<int>& labels,
                                  const FoldPlan& plan, double lambda) {
  const int n = features.rows();
  if (static_cast<size_t>(n) != labels.size() ||
      static_cast<size_t>(n) != plan.assignment.size())
    throw std::invalid_argument("fold plan does not match data size");
  const int n_classes = *std::max_element(labels.begin(), labels.end()) + 1;
  Eigen::MatrixXd probs = Eigen::MatrixXd::Zero(n, n_classes);
  for (int fold = 0; fold < plan.k; ++fold) {
    std::vector<int> train, held;
    for (int i = 0; i < n; ++i)
      (plan.assignment[i] == fold ? held : train).push_back(i);
    Eigen::MatrixXd x_train(train.size(), features.cols());
    std::vector<int> y_train(train.size());
    for (size_t i = 0; i < train.size(); ++i) {
      x_train.row(i) = features.row(train[i]);
      y_train[i] = labels[train[i]];
    }
    LogisticFit fit = fit_logistic(x_train, y_train, lambda);
    for (int i : held) {
      Eigen::VectorXd p = fit.predict(features.row(i).transpose());
      for (int c = 0; c < n_classes && c < p.size(); ++c) probs(i, c) = p(c);
    }
  }
  probs = probs.cwiseMax(kProbClamp).cwiseMin(1.0 - kProbClamp);
  return probs;
}

std::vector<SlotTask> build_slot_tasks(const ConceptSpec& target_spec,
                                       const AnnotationMatrix& x_target,
                                       const std::vector<size_t>& row_order) {
  const auto expected = enumerate_slot_values(target_spec);
  if (expected != x_target.columns)
    throw std::invalid_argument(
        "target matrix columns do not match the target spec");

  // Topology per slot path.
  std::map<std::string, SlotTopology> topologies;
  std::function<void(const std::string&, const Slot&, std::string)> walk =
      [&](const std::string& pattern_id, const Slot& slot, std::string prefix) {
        topologies[prefix + "|" + slot.name] = slot.topology;
        for (const Slot& c : slot.children)
          walk(pattern_id, c, prefix + "|" + slot.name);
      };
  for (const Pattern& p : target_spec.patterns)
    for (const Slot& s : p.slots) walk(p.id, s, p.id);

  // Columns grouped by owning slot, column order preserved.
  struct Group {
    std::string label;
    SlotTopology topology;
    std::vector<size_t> columns;
  };
  std::vector<Group> groups;
  std::map<std::string, size_t> index;
  for (size_t c = 0; c < x_target.columns.size(); ++c) {
    std::string key = x_target.columns[c].pattern_id;
    for (const std::string& s : x_target.columns[c].slot_path) key += "|" + s;
    auto it = index.find(key);
    if (it == index.end()) {
      index[key] = groups.size();
      groups.push_back({key, topologies.at(key), {c}});
    } else {
      groups[it->second].columns.push_back(c);
    }
  }

  std::vector<SlotTask> tasks;
  for (const Group& g : groups) {
    SlotTask task;
    task.slot_label = g.label;
    if (g.topology == SlotTopology::single_choice) {
      task.kind = SlotTaskKind::multiclass;
      std::vector<int> y(row_order.size());
      bool any_null = false;
      for (size_t r = 0; r < row_order.size(); ++r) {
        const auto& row = x_target.rows[row_order[r]];
        int cls = -1;
        for (size_t vi = 0; vi < g.columns.size(); ++vi)
          if (row[g.columns[vi]]) {
            cls = static_cast<int>(vi);
            break;  // matrix invariant: at most one active
          }
        if (cls < 0) {
          any_null = true;
          cls = static_cast<int>(g.columns.size());
        }
        y[r] = cls;
      }
      for (size_t vi = 0; vi < g.columns.size(); ++vi)
        task.class_names.push_back(x_target.columns[g.columns[vi]].value_name);
      if (any_null) {
        task.class_names.push_back("(null)");
      } else {
        // Null class is added only when observed; compact labels stand.
      }
      task.unit_labels.push_back(g.label);
      task.unit_labelsets.push_back(std::move(y));
    } else {
      task.kind = SlotTaskKind::binary;
      for (size_t c : g.columns) {
        std::vector<int> y(row_order.size());
        for (size_t r = 0; r < row_order.size(); ++r)
          y[r] = x_target.rows[row_order[r]][c];
        task.unit_labels.push_back(x_target.columns[c].label());
        task.unit_labelsets.push_back(std::move(y));
      }
    }
    tasks.push_back(std::move(task));
  }
  return tasks;
}

namespace {

// Remaps sparse class labels (e.g. null observed but a value class absent)
// onto 0..C-1 for the fit.
std::vector<int> compact_labels(const std::vector<int>& y) {
  std::map<int, int> remap;
  for (int v : y) remap.emplace(v, 0);
  int next = 0;
  for (auto& [_, to] : remap) to = next++;
  std::vector<int> out(y.size());
  for (size_t i = 0; i < y.size(); ++i) out[i] = remap.at(y[i]);
  return out;
}

UnitResult evaluate_unit(const Eigen::MatrixXd& features, std::vector<int> y,
                         const std::string& label,
                         std::optional<int> null_class,
                         const RecoverabilityConfig& config) {
  UnitResult unit;
  unit.label = label;
  unit.H = shannon_entropy(y);
  if (unit.H == 0.0) {
    unit.excluded_reason = "zero entropy";
    return unit;
  }

  std::map<int, size_t> counts;
  for (int v : y) ++counts[v];
  // Rare-target rule: minority class for binary, smallest non-null class for
  // multiclass.
  size_t rare_count = y.size();
  for (const auto& [cls, c] : counts) {
    if (null_class && cls == *null_class) continue;
    rare_count = std::min(rare_count, c);
  }
  y = compact_labels(y);
  if (rare_count < static_cast<size_t>(config.rare_threshold)) {
    unit.excluded_reason = "rare target";
    return unit;
  }
  auto plan = stratified_folds(y, config.k_max, config.seed);
  if (!plan) {
    unit.excluded_reason = "insufficient folds";
    return unit;
  }
  const Eigen::MatrixXd probs =
      out_of_fold_probs(features, y, *plan, config.lambda);
  double ce = 0;
  for (size_t i = 0; i < y.size(); ++i)
    ce -= std::log(probs(static_cast<int>(i), y[i])) / kLog2;
  unit.CE = ce / static_cast<double>(y.size());
  return unit;
}

}  // namespace

SlotRecoverability slot_recoverability(const Eigen::MatrixXd& source_features,
                                       const SlotTask& task,
                                       const RecoverabilityConfig& config) {
  SlotRecoverability out;
  out.slot_label = task.slot_label;
  for (size_t u = 0; u < task.unit_labelsets.size(); ++u) {
    if (static_cast<size_t>(source_features.rows()) !=
        task.unit_labelsets[u].size())
      throw std::invalid_argument("sample alignment mismatch for slot " +
                                  task.slot_label);
    std::optional<int> null_class;
    if (task.kind == SlotTaskKind::multiclass && !task.class_names.empty() &&
        task.class_names.back() == "(null)")
      null_class = static_cast<int>(task.class_names.size()) - 1;
    out.units.push_back(evaluate_unit(source_features, task.unit_labelsets[u],
                                      task.unit_labels[u], null_class, config));
  }
  // Bundle: H and CE summed over included value-level tasks before
  // normalization.
  size_t included = 0;
  for (const UnitResult& u : out.units) {
    if (u.excluded_reason) continue;
    out.H += u.H;
    out.CE += u.CE;
    ++included;
  }
  if (included == 0) {
    out.excluded_reason = out.units.empty() ? "no value tasks"
                                            : *out.units.front().excluded_reason;
    return out;
  }
  out.recoverability = 1.0 - out.CE / out.H;
  return out;
}

RecoverabilityReport compare_specs(const AnnotationMatrix& x_source,
                                   const AnnotationMatrix& x_target,
                                   const ConceptSpec& target_spec,
                                   const RecoverabilityConfig& config) {
  // Pairwise row alignment by sample id, in source row order.
  std::map<std::string, size_t> target_index;
  for (size_t i = 0; i < x_target.sample_ids.size(); ++i)
    target_index[x_target.sample_ids[i]] = i;
  std::vector<size_t> source_rows, target_rows;
  for (size_t i = 0; i < x_source.sample_ids.size(); ++i) {
    auto it = target_index.find(x_source.sample_ids[i]);
    if (it == target_index.end()) continue;
    source_rows.push_back(i);
    target_rows.push_back(it->second);
  }
  if (source_rows.empty())
    throw std::invalid_argument("source and target matrices share no samples");

  RecoverabilityReport report;
  report.source_spec_hash = x_source.spec_hash;
  report.target_spec_hash = x_target.spec_hash;
  report.source_spec_name = x_source.spec_name;
  report.target_spec_name = x_target.spec_name;
  report.n_samples = source_rows.size();
  report.n_dropped_source = x_source.sample_ids.size() - source_rows.size();
  report.n_dropped_target = x_target.sample_ids.size() - target_rows.size();
  report.config = config;

  Eigen::MatrixXd features(source_rows.size(), x_source.columns.size());
  for (size_t r = 0; r < source_rows.size(); ++r)
    for (size_t c = 0; c < x_source.columns.size(); ++c)
      features(static_cast<int>(r), static_cast<int>(c)) =
          x_source.rows[source_rows[r]][c];

  double sum_h = 0, sum_ce = 0;
  size_t included = 0;
  for (const SlotTask& task :
       build_slot_tasks(target_spec, x_target, target_rows)) {
    SlotRecoverability slot = slot_recoverability(features, task, config);
    if (!slot.excluded_reason) {
      sum_h += slot.H;
      sum_ce += slot.CE;
      ++included;
    }
    report.slots.push_back(std::move(slot));
  }
  if (included == 0)
    throw std::runtime_error("no target slots were includable");
  report.aggregate = 1.0 - sum_ce / sum_h;
  return report;
}

json report_to_json(const RecoverabilityReport& r) {
  json slots = json::array();
  for (const SlotRecoverability& s : r.slots) {
    json sj{{"slot", s.slot_label}};
    if (s.excluded_reason) {
      sj["excluded_reason"] = *s.excluded_reason;
    } else {
      sj["H"] = s.H;
      sj["CE"] = s.CE;
      sj["recoverability"] = *s.recoverability;
    }
    json units = json::array();
    for (const UnitResult& u : s.units) {
      json uj{{"label", u.label}, {"H", u.H}};
      if (u.excluded_reason)
        uj["excluded_reason"] = *u.excluded_reason;
      else
        uj["CE"] = u.CE;
      units.push_back(std::move(uj));
    }
    sj["units"] = std::move(units);
    slots.push_back(std::move(sj));
  }
  return {{"source_spec_hash", r.source_spec_hash},
          {"target_spec_hash", r.target_spec_hash},
          {"source_spec_name", r.source_spec_name},
          {"target_spec_name", r.target_spec_name},
          {"slots", slots},
          {"aggregate", r.aggregate},
          {"n_samples", r.n_samples},
          {"n_dropped_source", r.n_dropped_source},
          {"n_dropped_target", r.n_dropped_target},
          {"config", r.config.to_json()}};
}

RecoverabilityReport report_from_json(const json& j) {
  RecoverabilityReport r;
  r.source_spec_hash = j.value("source_spec_hash", "");
  r.target_spec_hash = j.value("target_spec_hash", "");
  r.source_spec_name = j.value("source_spec_name", "");
  r.target_spec_name = j.value("target_spec_name", "");
  r.aggregate = j.at("aggregate").get<double>();
  r.n_samples = j.value("n_samples", 0u);
  r.n_dropped_source = j.value("n_dropped_source", 0u);
  r.n_dropped_target = j.value("n_dropped_target", 0u);
  if (j.contains("config")) {
    const json& c = j.at("config");
    r.config.k_max = c.value("k_max", 5);
    r.config.lambda = c.value("lambda", 1.0);
    r.config.rare_threshold = c.value("rare_threshold", 5);
    r.config.seed = c.value("seed", 0ull);
  }
  for (const auto& sj : j.at("slots")) {
    SlotRecoverability s;
    s.slot_label = sj.at("slot").get<std::string>();
    if (sj.contains("excluded_reason")) {
      s.excluded_reason = sj.at("excluded_reason").get<std::string>();
    } else {
      s.H = sj.at("H").get<double>();
      s.CE = sj.at("CE").get<double>();
      s.recoverability = sj.at("recoverability").get<double>();
    }
    if (sj.contains("units"))
      for (const auto& uj : sj.at("units")) {
        UnitResult u;
        u.label = uj.at("label").get<std::string>();
        u.H = uj.at("H").get<double>();
        if (uj.contains("excluded_reason"))
          u.excluded_reason = uj.at("excluded_reason").get<std::string>();
        else
          u.CE = uj.at("CE").get<double>();
        s.units.push_back(std::move(u));
      }
    r.slots.push_back(std::move(s));
  }
  return r;
}

}  // namespace consys
