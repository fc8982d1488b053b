#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prefbandit/coverage.hpp"
#include "prefbandit/design.hpp"
#include "prefbandit/harness.hpp"
#include "prefbandit/instance_io.hpp"

namespace pb = prefbandit;

namespace {

pb::Instance instance_from_options(const std::string& config_path,
                                   const std::string& instance_path) {
  if (!instance_path.empty()) return pb::load_instance_file(instance_path);
  if (config_path.empty())
    throw std::runtime_error("need --config or --instance to identify the instance");
  const pb::ExperimentSpec spec = pb::load_config_file(config_path);
  if (!spec.instance_file.empty()) return pb::load_instance_file(spec.instance_file);
  if (!spec.recipe) throw std::runtime_error("config does not name an instance");
  return pb::make_instance(*spec.recipe).instance;
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> out;
  std::istringstream is(csv);
  std::string tok;
  while (std::getline(is, tok, ',')) out.push_back(pb::parse_double(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prefbandit: preference-learning experiments on finite contextual bandits"};
  app.require_subcommand(1);

  std::string config_path, out_path, instance_path, in_path, format = "csv", seed_csv;
  int parallelism = 1;

  auto* run = app.add_subcommand("run", "run an experiment sweep from a config file");
  run->add_option("--config", config_path, "experiment config file")->required();
  run->add_option("--seed", seed_csv, "comma-separated seed list overriding the config");
  run->add_option("--out", out_path, "output CSV path overriding the config");
  run->add_option("--parallelism", parallelism, "worker threads over (sweep, seed) cells");
  run->add_option("--format", format, "output format (csv)");

  auto* design = app.add_subcommand("design", "compute the preferential design for an instance");
  design->add_option("--config", config_path, "experiment config naming an instance");
  design->add_option("--instance", instance_path, "instance file");
  design->add_option("--out", out_path, "output CSV path")->required();
  double design_tol = 1e-2;
  design->add_option("--tol", design_tol, "certificate slack");

  auto* coverage = app.add_subcommand("coverage", "estimate the local coverage curve");
  coverage->add_option("--config", config_path, "experiment config naming an instance");
  coverage->add_option("--instance", instance_path, "instance file");
  coverage->add_option("--out", out_path, "output CSV path")->required();
  std::string radii_csv = "0,0.5,1,1.5,2";
  int budget = 256;
  double cov_p = 2.0;
  uint64_t cov_seed = 1;
  coverage->add_option("--radii", radii_csv, "comma-separated radius grid");
  coverage->add_option("--budget", budget, "ball samples per radius");
  coverage->add_option("--p", cov_p, "ball norm order");
  coverage->add_option("--seed", cov_seed, "sampling seed");

  auto* rep = app.add_subcommand("report", "summarize an experiment CSV");
  rep->add_option("--in", in_path, "records CSV")->required();
  rep->add_option("--out", out_path, "series file prefix");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (format != "csv") throw std::runtime_error("unsupported format: " + format);
      pb::ExperimentSpec spec = pb::load_config_file(config_path);
      if (!seed_csv.empty()) {
        spec.seeds.clear();
        std::istringstream is(seed_csv);
        std::string tok;
        while (std::getline(is, tok, ',')) spec.seeds.push_back(std::stoull(tok));
      }
      if (!out_path.empty()) spec.out_path = out_path;
      if (spec.out_path.empty()) throw std::runtime_error("no output path (config 'out' or --out)");
      const auto records = pb::run_experiment(spec, parallelism);
      std::ofstream os(spec.out_path);
      if (!os) throw std::runtime_error("cannot open for writing: " + spec.out_path);
      pb::write_records_csv(os, records);
      std::cout << records.size() << " rows -> " << spec.out_path << "\n";
    } else if (*design) {
      const pb::Instance inst = instance_from_options(config_path, instance_path);
      const pb::JointDesign d = pb::preferential_design(inst, design_tol);
      std::ofstream os(out_path);
      if (!os) throw std::runtime_error("cannot open for writing: " + out_path);
      pb::write_design_csv(os, inst, d);
      std::cout << "certificate " << pb::fmt_double(d.certificate) << " (centered dim "
                << d.centered_dim << ", certified " << (d.certified ? "yes" : "no") << ") -> "
                << out_path << "\n";
    } else if (*coverage) {
      const pb::Instance inst = instance_from_options(config_path, instance_path);
      pb::Rng rng(cov_seed);
      const auto curve =
          pb::local_coverage_curve(inst, parse_grid(radii_csv), cov_p, budget, rng);
      std::ofstream os(out_path);
      if (!os) throw std::runtime_error("cannot open for writing: " + out_path);
      pb::write_coverage_csv(os, curve);
      std::cout << curve.points.size() << " grid points -> " << out_path << "\n";
    } else if (*rep) {
      std::ifstream is(in_path);
      if (!is) throw std::runtime_error("cannot open records CSV: " + in_path);
      const auto records = pb::read_records_csv(is);
      std::cout << pb::report(records, out_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
