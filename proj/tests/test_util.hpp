#ifndef CONSYS_TESTS_TEST_UTIL_HPP
#define CONSYS_TESTS_TEST_UTIL_HPP

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "consys/spec_model.hpp"

namespace consys::testutil {

inline std::string read_fixture(const std::string& name) {
  const std::string path = std::string(CONSYS_TEST_DIR) + "/fixtures/" + name;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing fixture: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline ConceptSpec fig1_spec() {
  return parse_spec_text(read_fixture("hbr_fig1.json"));
}

/// Random valid spec, fuzzed within the schema invariants.
inline ConceptSpec random_spec(std::mt19937_64& rng) {
  auto word = [&](const std::string& prefix, int i) {
    return prefix + std::to_string(i);
  };
  std::uniform_int_distribution<int> patterns_d(1, 4);
  std::uniform_int_distribution<int> slots_d(1, 3);
  std::uniform_int_distribution<int> values_d(1, 4);
  std::uniform_int_distribution<int> coin(0, 1);

  ConceptSpec spec;
  spec.concept_name = "concept " + std::to_string(rng() % 1000);
  spec.concept_brief = "a randomized background concept";
  spec.metadata = {"manual", "fuzz", "2026-01-01T00:00:00Z"};

  const int n_patterns = patterns_d(rng);
  for (int p = 0; p < n_patterns; ++p) {
    Pattern pattern;
    pattern.id = word("p", p);
    const int n_slots = slots_d(rng);
    std::string templ = "Text that shows";
    for (int s = 0; s < n_slots; ++s) {
      Slot slot;
      slot.name = "SLOT_" + std::to_string(p) + "_" + std::to_string(s);
      slot.definition = "slot definition";
      slot.topology = coin(rng) ? SlotTopology::single_choice
                                : SlotTopology::multi_label;
      if (coin(rng) == 0) {
        const int n_values = values_d(rng);
        for (int v = 0; v < n_values; ++v)
          slot.values.push_back({word("value ", v), "value definition"});
      } else {
        // One level of nesting with leaf values.
        const int n_children = std::uniform_int_distribution<int>(1, 2)(rng);
        for (int c = 0; c < n_children; ++c) {
          Slot child;
          child.name = slot.name + "_CHILD_" + std::to_string(c);
          child.definition = "nested slot definition";
          const int n_values = values_d(rng);
          for (int v = 0; v < n_values; ++v)
            child.values.push_back({word("leaf ", v), "leaf definition"});
          slot.children.push_back(std::move(child));
        }
      }
      templ += " [" + slot.name + "]";
      pattern.slots.push_back(std::move(slot));
    }
    pattern.template_text = templ + ".";
    if (coin(rng))
      pattern.key_terms.push_back({"term", "a defined term"});
    pattern.theories.push_back({"Some theory (2020)", std::nullopt});
    if (coin(rng))
      pattern.theories.push_back(
          {"Anchored theory (2021)", ArtifactAnchor{"report", "Definitions"}});
    spec.patterns.push_back(std::move(pattern));
  }
  return spec;
}

}  // namespace consys::testutil

#endif
