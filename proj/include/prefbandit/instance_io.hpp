#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "prefbandit/instance.hpp"

namespace prefbandit {

// Formats a double with 17 significant digits, enough for an exact
// parse-back of any finite value. Infinities print as "inf"/"-inf".
std::string fmt_double(double v);
double parse_double(const std::string& s);

// Optional regeneration header carried alongside a serialized instance.
struct RecipeHeader {
  std::string kind;  // easy | skewed-p1 | two-coord-p
  int d = 0;
  double R = 0.0;
  double p = 2.0;
  uint64_t seed = 0;
  long n_hint = 0;
};

// Structured-text instance format: a key-value header for the scalars
// followed by dense row-major blocks for the context distribution, base
// policy, features and true parameter. Finite values round-trip bit-exactly.
void save_instance(std::ostream& os, const Instance& inst,
                   const std::optional<RecipeHeader>& recipe = std::nullopt);
Instance load_instance(std::istream& is, std::optional<RecipeHeader>* recipe = nullptr);

void save_instance_file(const std::string& path, const Instance& inst,
                        const std::optional<RecipeHeader>& recipe = std::nullopt);
Instance load_instance_file(const std::string& path,
                            std::optional<RecipeHeader>* recipe = nullptr);

}  // namespace prefbandit
