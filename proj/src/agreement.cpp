#include "consys/agreement.hpp"

#include <map>
#include <stdexcept>

namespace consys {

using nlohmann::json;

AgreementReport pooled_cohens_kappa(const AnnotationMatrix& x_a,
                                    const AnnotationMatrix& x_b) {
  if (x_a.spec_hash != x_b.spec_hash)
    throw std::invalid_argument(
        "matrices were produced under different specs (hash mismatch)");
  if (x_a.columns != x_b.columns)
    throw std::invalid_argument("matrices have different column orders");

  std::map<std::string, size_t> b_index;
  for (size_t i = 0; i < x_b.sample_ids.size(); ++i)
    b_index[x_b.sample_ids[i]] = i;

  // One pooled 2x2 table over all binary cells.
  size_t table[2][2] = {{0, 0}, {0, 0}};
  size_t shared = 0;
  for (size_t i = 0; i < x_a.sample_ids.size(); ++i) {
    auto it = b_index.find(x_a.sample_ids[i]);
    if (it == b_index.end()) continue;
    ++shared;
    const auto& ra = x_a.rows[i];
    const auto& rb = x_b.rows[it->second];
    for (size_t c = 0; c < ra.size(); ++c) ++table[ra[c]][rb[c]];
  }
  if (shared == 0)
    throw std::invalid_argument("matrices share no samples");

  AgreementReport r;
  r.spec_hash = x_a.spec_hash;
  r.annotator_a = x_a.annotator_model_id;
  r.annotator_b = x_b.annotator_model_id;
  r.n_judgments = table[0][0] + table[0][1] + table[1][0] + table[1][1];
  r.n_dropped_rows = (x_a.sample_ids.size() - shared) +
                     (x_b.sample_ids.size() - shared);
  const double n = static_cast<double>(r.n_judgments);
  r.observed_agreement = (table[0][0] + table[1][1]) / n;
  const double a1 = (table[1][0] + table[1][1]) / n;  // A's positive rate
  const double b1 = (table[0][1] + table[1][1]) / n;  // B's positive rate
  r.expected_agreement = a1 * b1 + (1 - a1) * (1 - b1);
  if (r.expected_agreement >= 1.0) {
    r.undefined = true;
    r.pooled_kappa = 0;
  } else {
    r.pooled_kappa =
        (r.observed_agreement - r.expected_agreement) / (1 - r.expected_agreement);
  }
  return r;
}

json agreement_to_json(const AgreementReport& r) {
  json j{{"spec_hash", r.spec_hash},
         {"annotator_a", r.annotator_a},
         {"annotator_b", r.annotator_b},
         {"observed_agreement", r.observed_agreement},
         {"expected_agreement", r.expected_agreement},
         {"n_judgments", r.n_judgments},
         {"n_dropped_rows", r.n_dropped_rows}};
  if (r.undefined)
    j["pooled_kappa"] = "undefined";
  else
    j["pooled_kappa"] = r.pooled_kappa;
  return j;
}

}  // namespace consys
