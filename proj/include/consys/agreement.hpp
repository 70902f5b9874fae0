#ifndef CONSYS_AGREEMENT_HPP
#define CONSYS_AGREEMENT_HPP

#include <string>

#include <json.hpp>

#include "consys/annotator.hpp"

namespace consys {

struct AgreementReport {
  std::string spec_hash;
  std::string annotator_a;
  std::string annotator_b;
  double pooled_kappa = 0;
  double observed_agreement = 0;  // p_o
  double expected_agreement = 0;  // p_e
  size_t n_judgments = 0;
  size_t n_dropped_rows = 0;  // rows present on only one side
  bool undefined = false;     // p_e == 1 (both annotators constant and equal)
};

/// Pooled Cohen's kappa: every (sample, slot value) cell is one binary
/// judgment in a single 2x2 agreement table. Rows are matched by sample id;
/// rows missing on either side are dropped pairwise.
AgreementReport pooled_cohens_kappa(const AnnotationMatrix& x_a,
                                    const AnnotationMatrix& x_b);

nlohmann::json agreement_to_json(const AgreementReport& r);

}  // namespace consys

#endif
