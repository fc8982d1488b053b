#include "prefbandit/instance_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace prefbandit {

std::string fmt_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("cannot parse number: '" + s + "'");
  }
  if (pos != s.size()) throw std::invalid_argument("trailing characters in number: '" + s + "'");
  return v;
}

namespace {

void write_row(std::ostream& os, const Eigen::VectorXd& row) {
  for (int i = 0; i < row.size(); ++i) {
    if (i) os << ' ';
    os << fmt_double(row[i]);
  }
  os << '\n';
}

Eigen::VectorXd parse_row(const std::string& line, int expect) {
  std::istringstream is(line);
  Eigen::VectorXd out(expect);
  std::string tok;
  for (int i = 0; i < expect; ++i) {
    if (!(is >> tok)) throw std::invalid_argument("instance file: short row");
    out[i] = parse_double(tok);
  }
  if (is >> tok) throw std::invalid_argument("instance file: row has extra values");
  return out;
}

std::string next_content_line(std::istream& is) {
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') return line;
  }
  throw std::invalid_argument("instance file: unexpected end of file");
}

}  // namespace

void save_instance(std::ostream& os, const Instance& inst,
                   const std::optional<RecipeHeader>& recipe) {
  os << "# prefbandit instance v1\n";
  if (recipe) {
    os << "recipe " << recipe->kind << ' ' << recipe->d << ' ' << fmt_double(recipe->R) << ' '
       << fmt_double(recipe->p) << ' ' << recipe->seed << ' ' << recipe->n_hint << '\n';
  }
  os << "num_prompts " << inst.num_prompts << '\n';
  os << "num_responses " << inst.num_responses << '\n';
  os << "dim " << inst.dim << '\n';
  os << "gamma " << fmt_double(inst.gamma) << '\n';
  os << "radius " << fmt_double(inst.radius) << '\n';
  os << "norm_order " << fmt_double(inst.norm_order) << '\n';
  os << "context_dist\n";
  write_row(os, inst.context_dist);
  os << "base_policy\n";
  for (int x = 0; x < inst.num_prompts; ++x) write_row(os, inst.base_policy.row(x));
  os << "features\n";
  for (Eigen::Index r = 0; r < inst.features.rows(); ++r) write_row(os, inst.features.row(r));
  os << "true_param\n";
  write_row(os, inst.true_param);
}

Instance load_instance(std::istream& is, std::optional<RecipeHeader>* recipe) {
  Instance inst;
  if (recipe) recipe->reset();

  auto expect_key = [&](const std::string& line, const std::string& key) -> std::string {
    if (line.rfind(key + " ", 0) != 0)
      throw std::invalid_argument("instance file: expected key '" + key + "', got '" + line + "'");
    return line.substr(key.size() + 1);
  };

  std::string line = next_content_line(is);
  if (line.rfind("recipe ", 0) == 0) {
    std::istringstream rs(line.substr(7));
    RecipeHeader h;
    std::string rtok, ptok;
    if (!(rs >> h.kind >> h.d >> rtok >> ptok >> h.seed >> h.n_hint))
      throw std::invalid_argument("instance file: malformed recipe line");
    h.R = parse_double(rtok);
    h.p = parse_double(ptok);
    if (recipe) *recipe = h;
    line = next_content_line(is);
  }

  inst.num_prompts = std::stoi(expect_key(line, "num_prompts"));
  inst.num_responses = std::stoi(expect_key(next_content_line(is), "num_responses"));
  inst.dim = std::stoi(expect_key(next_content_line(is), "dim"));
  inst.gamma = parse_double(expect_key(next_content_line(is), "gamma"));
  inst.radius = parse_double(expect_key(next_content_line(is), "radius"));
  inst.norm_order = parse_double(expect_key(next_content_line(is), "norm_order"));
  if (inst.num_prompts < 1 || inst.num_responses < 1 || inst.dim < 1)
    throw std::invalid_argument("instance file: bad dimensions");

  if (next_content_line(is) != "context_dist")
    throw std::invalid_argument("instance file: expected context_dist block");
  inst.context_dist = parse_row(next_content_line(is), inst.num_prompts);

  if (next_content_line(is) != "base_policy")
    throw std::invalid_argument("instance file: expected base_policy block");
  inst.base_policy.resize(inst.num_prompts, inst.num_responses);
  for (int x = 0; x < inst.num_prompts; ++x)
    inst.base_policy.row(x) = parse_row(next_content_line(is), inst.num_responses);

  if (next_content_line(is) != "features")
    throw std::invalid_argument("instance file: expected features block");
  inst.features.resize(static_cast<Eigen::Index>(inst.num_prompts) * inst.num_responses, inst.dim);
  for (Eigen::Index r = 0; r < inst.features.rows(); ++r)
    inst.features.row(r) = parse_row(next_content_line(is), inst.dim);

  if (next_content_line(is) != "true_param")
    throw std::invalid_argument("instance file: expected true_param block");
  inst.true_param = parse_row(next_content_line(is), inst.dim);

  inst.validate();
  return inst;
}

void save_instance_file(const std::string& path, const Instance& inst,
                        const std::optional<RecipeHeader>& recipe) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  save_instance(os, inst, recipe);
}

Instance load_instance_file(const std::string& path, std::optional<RecipeHeader>* recipe) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open instance file: " + path);
  return load_instance(is, recipe);
}

}  // namespace prefbandit
