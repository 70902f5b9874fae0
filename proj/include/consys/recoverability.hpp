#ifndef CONSYS_RECOVERABILITY_HPP
#define CONSYS_RECOVERABILITY_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "consys/annotator.hpp"
#include "consys/spec_model.hpp"

namespace consys {

struct RecoverabilityConfig {
  int k_max = 5;            // stratified CV folds, reduced on limited support
  double lambda = 1.0;      // l2 strength on weights; intercept unpenalized
  int rare_threshold = 5;   // minority/positive count below this -> excluded
  uint64_t seed = 0;

  nlohmann::json to_json() const;
};

/// Empirical Shannon entropy in bits over class frequencies; 0*log0 := 0.
double shannon_entropy(const std::vector<int>& labels);

struct LogisticFit {
  Eigen::MatrixXd weights;  // (classes-1) x (features+1); column 0 = intercept
  int n_classes = 2;
  bool converged = true;
  int iterations = 0;

  /// Class-probability row for one binary feature vector.
  Eigen::VectorXd predict(const Eigen::VectorXd& features) const;
};

/// l2-regularized logistic regression (softmax for >2 classes): Newton steps
/// with a gradient-descent fallback on non-PD curvature; unpenalized
/// intercept; stops at grad inf-norm < 1e-6 or 100 iterations.
LogisticFit fit_logistic(const Eigen::MatrixXd& features,
                         const std::vector<int>& labels, double lambda);

struct FoldPlan {
  int k = 0;
  std::vector<int> assignment;  // fold index per sample, -1 never occurs
  uint64_t seed = 0;
};

/// k = min(k_max, minority class count); stratified, deterministic by seed.
/// Returns nullopt when fewer than 2 folds are supportable.
std::optional<FoldPlan> stratified_folds(const std::vector<int>& labels, int k_max,
                                         uint64_t seed);

/// Out-of-fold class probabilities, clamped to [1e-9, 1-1e-9].
Eigen::MatrixXd out_of_fold_probs(const Eigen::MatrixXd& features,
                                  const std::vector<int>& labels,
                                  const FoldPlan& plan, double lambda);

enum class SlotTaskKind { binary, multiclass };

/// One prediction task for a target slot. single_choice slots become one
/// multiclass task (null class added when any sample activates no value);
/// multi_label slots become a bundle of binary tasks, one per value.
struct SlotTask {
  std::string slot_label;
  SlotTaskKind kind = SlotTaskKind::binary;
  std::vector<std::string> unit_labels;         // value-level task names
  std::vector<std::vector<int>> unit_labelsets; // one label vector per unit
  std::vector<std::string> class_names;         // multiclass only
};

struct UnitResult {
  std::string label;
  double H = 0;   // bits
  double CE = 0;  // bits
  std::optional<std::string> excluded_reason;
};

struct SlotRecoverability {
  std::string slot_label;
  double H = 0;
  double CE = 0;
  std::optional<double> recoverability;  // 1 - CE/H; absent when excluded
  std::optional<std::string> excluded_reason;
  std::vector<UnitResult> units;  // value-level diagnostics
};

struct RecoverabilityReport {
  std::string source_spec_hash;
  std::string target_spec_hash;
  std::string source_spec_name;
  std::string target_spec_name;
  std::vector<SlotRecoverability> slots;
  double aggregate = 0;  // 1 - sum(CE)/sum(H) over included slots
  size_t n_samples = 0;
  size_t n_dropped_source = 0;
  size_t n_dropped_target = 0;
  RecoverabilityConfig config;
};

/// Builds the per-slot tasks of the target spec from its annotation matrix.
std::vector<SlotTask> build_slot_tasks(const ConceptSpec& target_spec,
                                       const AnnotationMatrix& x_target,
                                       const std::vector<size_t>& row_order);

SlotRecoverability slot_recoverability(const Eigen::MatrixXd& source_features,
                                       const SlotTask& task,
                                       const RecoverabilityConfig& config);

/// Full source->target comparison. Rows are aligned by sample id; rows
/// missing on either side are dropped pairwise.
RecoverabilityReport compare_specs(const AnnotationMatrix& x_source,
                                   const AnnotationMatrix& x_target,
                                   const ConceptSpec& target_spec,
                                   const RecoverabilityConfig& config = {});

nlohmann::json report_to_json(const RecoverabilityReport& r);
RecoverabilityReport report_from_json(const nlohmann::json& j);

}  // namespace consys

#endif
