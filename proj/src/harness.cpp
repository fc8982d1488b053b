#include "prefbandit/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "prefbandit/coverage.hpp"
#include "prefbandit/instance_io.hpp"

namespace prefbandit {

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("config: boolean expected for '" + key + "', got '" + v + "'");
}

}  // namespace

ExperimentSpec parse_config(const std::string& text) {
  ExperimentSpec spec;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  bool have_recipe = false;
  RecipeHeader recipe;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto toks = split_ws(line);
    if (toks.empty()) continue;
    const std::string& key = toks[0];
    auto need_value = [&]() -> const std::string& {
      if (toks.size() < 2) {
        std::ostringstream os;
        os << "config line " << lineno << ": key '" << key << "' needs a value";
        throw std::invalid_argument(os.str());
      }
      return toks[1];
    };

    if (key == "method") spec.method = need_value();
    else if (key == "instance.kind") { recipe.kind = need_value(); have_recipe = true; }
    else if (key == "instance.d") { recipe.d = std::stoi(need_value()); have_recipe = true; }
    else if (key == "instance.R") { recipe.R = parse_double(need_value()); have_recipe = true; }
    else if (key == "instance.p") { recipe.p = parse_double(need_value()); have_recipe = true; }
    else if (key == "instance.seed") { recipe.seed = std::stoull(need_value()); have_recipe = true; }
    else if (key == "instance.n") { recipe.n_hint = std::stol(need_value()); have_recipe = true; }
    else if (key == "instance.file") spec.instance_file = need_value();
    else if (key == "sweep.axis") spec.sweep_axis = need_value();
    else if (key == "sweep.grid") {
      for (size_t i = 1; i < toks.size(); ++i) spec.grid.push_back(parse_double(toks[i]));
    } else if (key == "seeds") {
      for (size_t i = 1; i < toks.size(); ++i) spec.seeds.push_back(std::stoull(toks[i]));
    } else if (key == "out") spec.out_path = need_value();
    else if (key == "iterations") spec.iterations = std::stoi(need_value());
    else if (key == "batch") spec.batch = std::stol(need_value());
    else if (key == "schedule") spec.schedule = need_value();
    else if (key == "eta") spec.eta = parse_double(need_value());
    else if (key == "alpha") spec.alpha = parse_double(need_value());
    else if (key == "n_final") spec.n_final = std::stol(need_value());
    else if (key == "epochs") spec.epochs = std::stoi(need_value());
    else if (key == "gamma") spec.gamma = parse_double(need_value());
    else if (key == "grad_tol") spec.grad_tol = parse_double(need_value());
    else if (key == "max_steps") spec.max_steps = std::stoi(need_value());
    else if (key == "gamma_c") spec.gamma_c = parse_double(need_value());
    else if (key == "rd_loss") spec.rd_loss = need_value();
    else if (key == "beta") spec.beta = parse_double(need_value());
    else if (key == "rm_epsilon") spec.rm_epsilon = parse_double(need_value());
    else if (key == "design_weight") spec.design_weight = parse_double(need_value());
    else if (key == "cumulative") spec.cumulative = parse_bool(need_value(), key);
    else if (key == "timing") spec.timing = parse_bool(need_value(), key);
    else {
      std::ostringstream os;
      os << "config line " << lineno << ": unknown key '" << key << "'";
      throw std::invalid_argument(os.str());
    }
  }

  if (have_recipe) spec.recipe = recipe;
  if (spec.method.empty()) throw std::invalid_argument("config: missing 'method'");
  static const char* kMethods[] = {"online-dpo",   "offline-dpo", "two-step-design",
                                   "rd-fixed",     "rd-calibrated", "rebel-legacy"};
  if (std::find_if(std::begin(kMethods), std::end(kMethods),
                   [&](const char* m) { return spec.method == m; }) == std::end(kMethods))
    throw std::invalid_argument("config: unknown method '" + spec.method + "'");
  if (!spec.recipe && spec.instance_file.empty())
    throw std::invalid_argument("config: need instance.kind or instance.file");
  if (spec.sweep_axis != "n" && spec.sweep_axis != "K" && spec.sweep_axis != "R")
    throw std::invalid_argument("config: sweep.axis must be n, K or R");
  if (spec.grid.empty()) spec.grid.push_back(spec.sweep_axis == "n"
                                                 ? static_cast<double>(spec.batch)
                                                 : static_cast<double>(spec.iterations));
  for (size_t i = 1; i < spec.grid.size(); ++i)
    if (!(spec.grid[i] > spec.grid[i - 1]))
      throw std::invalid_argument("config: sweep.grid must be strictly increasing");
  if (spec.seeds.empty()) throw std::invalid_argument("config: seed list must be nonempty");
  if (spec.rd_loss != "squared" && spec.rd_loss != "binary-kl")
    throw std::invalid_argument("config: rd_loss must be squared or binary-kl");
  return spec;
}

ExperimentSpec load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

void write_records_csv(std::ostream& os, const std::vector<RunRecord>& records) {
  os << "method,sweep,seed,round,err_p,err_2,kl_fwd,kl_rev,coverage,mad_err,seconds,note\n";
  for (const auto& r : records) {
    os << r.method << ',' << fmt_double(r.sweep) << ',' << r.seed << ',' << r.round << ','
       << fmt_double(r.err_p) << ',' << fmt_double(r.err_2) << ',' << fmt_double(r.kl_fwd) << ','
       << fmt_double(r.kl_rev) << ',' << fmt_double(r.coverage) << ',' << fmt_double(r.mad_err)
       << ',' << fmt_double(r.seconds) << ',' << r.note << '\n';
  }
}

std::vector<RunRecord> read_records_csv(std::istream& is) {
  std::vector<RunRecord> out;
  std::string line;
  if (!std::getline(is, line) ||
      line != "method,sweep,seed,round,err_p,err_2,kl_fwd,kl_rev,coverage,mad_err,seconds,note")
    throw std::invalid_argument("records csv: missing or malformed header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    auto next = [&]() {
      if (!std::getline(ls, tok, ',')) throw std::invalid_argument("records csv: short row");
      return tok;
    };
    RunRecord r;
    r.method = next();
    r.sweep = parse_double(next());
    r.seed = std::stoull(next());
    r.round = std::stoi(next());
    r.err_p = parse_double(next());
    r.err_2 = parse_double(next());
    r.kl_fwd = parse_double(next());
    r.kl_rev = parse_double(next());
    r.coverage = parse_double(next());
    r.mad_err = parse_double(next());
    r.seconds = parse_double(next());
    std::getline(ls, r.note);
    out.push_back(std::move(r));
  }
  return out;
}

void parallel_for_indexed(int count, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

namespace {

struct Cell {
  size_t sweep_index;
  size_t seed_index;
};

Instance build_instance(const ExperimentSpec& spec, double sweep_value) {
  if (!spec.instance_file.empty()) {
    if (spec.sweep_axis == "R")
      throw std::invalid_argument("run_experiment: R sweep needs a regenerable recipe");
    return load_instance_file(spec.instance_file);
  }
  RecipeHeader recipe = *spec.recipe;
  if (spec.sweep_axis == "R") {
    if (recipe.kind == "easy")
      throw std::invalid_argument("run_experiment: the easy recipe has a fixed radius");
    recipe.R = sweep_value;
  }
  GeneratedInstance gen = make_instance(recipe);
  Instance inst = std::move(gen.instance);
  if (spec.gamma > 0.0) inst.gamma = spec.gamma;
  return inst;
}

std::vector<RunRecord> run_cell(const ExperimentSpec& spec, double sweep_value, uint64_t seed) {
  Instance inst = build_instance(spec, sweep_value);

  long batch = spec.batch;
  int iterations = spec.iterations;
  if (spec.sweep_axis == "n") batch = static_cast<long>(sweep_value);
  if (spec.sweep_axis == "K") iterations = static_cast<int>(sweep_value);

  DpoConfig config;
  config.opt.max_steps = spec.max_steps;
  config.opt.grad_tol_per_sample = spec.grad_tol;
  config.cumulative = spec.cumulative;
  const BatchScheduleKind kind = spec.schedule == "exp-decay" ? BatchScheduleKind::kExpDecay
                                                              : BatchScheduleKind::kConstant;
  config.batch_schedule = make_batch_schedule(kind, batch, spec.n_final > 0 ? spec.n_final : batch,
                                              spec.eta, spec.alpha, iterations);

  Rng rng(seed);
  Trajectory traj;
  if (spec.method == "online-dpo") {
    traj = run_online_dpo(inst, config, rng, seed);
  } else if (spec.method == "offline-dpo") {
    const SoftmaxPolicy base(inst, Eigen::VectorXd::Zero(inst.dim));
    PolicyPairSampler sampler(base, "offline-dpo");
    const RewardFunction oracle = RewardFunction::true_reward(inst);
    const PreferenceDataset data = collect_dataset(sampler, batch, oracle, rng, 0, seed);
    traj = run_offline_dpo(inst, data, spec.epochs, config);
    traj.seed = seed;
  } else if (spec.method == "two-step-design") {
    traj = run_two_step_dpo(inst, batch, config, rng, spec.design_weight, seed).trajectory;
  } else {
    RdMode mode = RdMode::kFixedRegularization;
    if (spec.method == "rd-calibrated") mode = RdMode::kRewardCalibration;
    if (spec.method == "rebel-legacy") mode = RdMode::kRebelLegacy;
    RdConfig rd;
    rd.base = config;
    rd.loss.kind = spec.rd_loss == "binary-kl" ? DistillLoss::kBinaryKl : DistillLoss::kSquared;
    rd.loss.beta = spec.beta;
    rd.gamma_c = spec.gamma_c >= 0.0 ? spec.gamma_c : inst.gamma;
    Rng corruption_rng = Rng(seed).split(0x524d);
    const RewardModel rm = spec.rm_epsilon > 0.0
                               ? RewardModel::corrupted(inst, spec.rm_epsilon, corruption_rng)
                               : RewardModel::exact(inst);
    traj = run_onpolicy_rd(inst, rm, mode, rd, rng, seed);
  }

  std::vector<RunRecord> out;
  out.reserve(traj.rounds.size());
  for (const auto& round : traj.rounds) {
    RunRecord rec;
    rec.method = spec.method;
    rec.sweep = sweep_value;
    rec.seed = seed;
    rec.round = round.round;
    rec.err_p = round.err_p;
    rec.err_2 = round.err_2;
    rec.kl_fwd = round.kl_fwd;
    rec.kl_rev = round.kl_rev;
    rec.coverage = round.coverage;
    rec.mad_err = round.mad_err;
    rec.seconds = spec.timing ? round.seconds : 0.0;
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace

std::vector<RunRecord> run_experiment(const ExperimentSpec& spec, int parallelism) {
  std::vector<Cell> cells;
  for (size_t si = 0; si < spec.grid.size(); ++si)
    for (size_t gi = 0; gi < spec.seeds.size(); ++gi) cells.push_back({si, gi});

  std::vector<std::vector<RunRecord>> results(cells.size());
  parallel_for_indexed(static_cast<int>(cells.size()), parallelism, [&](int i) {
    const Cell& cell = cells[static_cast<size_t>(i)];
    const double sweep_value = spec.grid[cell.sweep_index];
    const uint64_t seed = spec.seeds[cell.seed_index];
    try {
      results[static_cast<size_t>(i)] = run_cell(spec, sweep_value, seed);
    } catch (const std::exception& e) {
      RunRecord err;
      err.method = spec.method;
      err.sweep = sweep_value;
      err.seed = seed;
      err.round = -1;
      std::string reason = e.what();
      for (auto& ch : reason)
        if (ch == ',' || ch == '\n') ch = ';';
      err.note = "error: " + reason;
      results[static_cast<size_t>(i)] = {err};
    }
  });

  std::vector<RunRecord> merged;
  for (auto& part : results)
    for (auto& rec : part) merged.push_back(std::move(rec));
  return merged;
}

double record_column(const RunRecord& r, const std::string& name) {
  if (name == "sweep" || name == "n" || name == "K" || name == "R") return r.sweep;
  if (name == "round") return static_cast<double>(r.round);
  if (name == "err_p") return r.err_p;
  if (name == "err_2") return r.err_2;
  if (name == "kl_fwd") return r.kl_fwd;
  if (name == "kl_rev") return r.kl_rev;
  if (name == "coverage") return r.coverage;
  if (name == "mad_err") return r.mad_err;
  if (name == "seconds") return r.seconds;
  throw std::invalid_argument("unknown record column: " + name);
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median: empty input");
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

SlopeFit fit_loglog_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 3)
    throw std::invalid_argument("slope fit: need at least three (x, y) points");
  const auto n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::vector<double> lx(xs.size()), ly(ys.size());
  for (size_t i = 0; i < xs.size(); ++i) {
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw std::invalid_argument("slope fit: x and y must be positive");
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  SlopeFit fit;
  const double denom = n * sxx - sx * sx;
  if (denom <= 0.0) throw std::invalid_argument("slope fit: need distinct x values");
  fit.slope = (n * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / n;
  double ss = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double r = ly[i] - (fit.intercept + fit.slope * lx[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

namespace {

// Final-round rows per (method, sweep, seed).
std::vector<RunRecord> final_rounds(const std::vector<RunRecord>& records) {
  std::map<std::tuple<std::string, double, uint64_t>, RunRecord> last;
  for (const auto& r : records) {
    if (!r.note.empty()) continue;
    auto key = std::make_tuple(r.method, r.sweep, r.seed);
    auto it = last.find(key);
    if (it == last.end() || r.round > it->second.round) last[key] = r;
  }
  std::vector<RunRecord> out;
  out.reserve(last.size());
  for (auto& [k, v] : last) out.push_back(std::move(v));
  return out;
}

}  // namespace

SlopeFit fit_loglog_slope(const std::vector<RunRecord>& records, const std::string& x_column,
                          const std::string& y_column) {
  std::map<double, std::vector<double>> grouped;
  for (const auto& r : final_rounds(records))
    grouped[record_column(r, x_column)].push_back(record_column(r, y_column));
  std::vector<double> xs, ys;
  for (auto& [x, vals] : grouped) {
    xs.push_back(x);
    ys.push_back(median(vals));
  }
  return fit_loglog_slope(xs, ys);
}

std::string report(const std::vector<RunRecord>& records, const std::string& series_prefix) {
  if (records.empty()) throw std::invalid_argument("report: no records");
  const auto finals = final_rounds(records);

  std::map<std::string, std::map<double, std::vector<double>>> err2, mad;
  for (const auto& r : finals) {
    err2[r.method][r.sweep].push_back(r.err_2);
    mad[r.method][r.sweep].push_back(r.mad_err);
  }

  std::ostringstream os;
  os << "method            sweep        median_err2         iqr_err2      median_mad\n";
  for (auto& [method, by_sweep] : err2) {
    for (auto& [sweep, vals] : by_sweep) {
      std::vector<double> sorted = vals;
      std::sort(sorted.begin(), sorted.end());
      const double q1 = sorted[sorted.size() / 4];
      const double q3 = sorted[(3 * sorted.size()) / 4];
      os << method;
      for (size_t i = method.size(); i < 18; ++i) os << ' ';
      os << fmt_double(sweep) << "  " << fmt_double(median(vals)) << "  " << fmt_double(q3 - q1)
         << "  " << fmt_double(median(mad[method][sweep])) << '\n';
    }
  }

  // Pairwise final-error comparison across methods sharing a sweep point.
  std::vector<std::string> methods;
  for (auto& [m, _] : err2) methods.push_back(m);
  for (size_t i = 0; i < methods.size(); ++i) {
    for (size_t j = 0; j < methods.size(); ++j) {
      if (i == j) continue;
      for (auto& [sweep, vals] : err2[methods[i]]) {
        auto it = err2[methods[j]].find(sweep);
        if (it == err2[methods[j]].end()) continue;
        const double mi = median(vals), mj = median(it->second);
        if (mj <= 0.0) continue;
        const double ratio = mi / mj;
        os << "ratio " << methods[i] << "/" << methods[j] << " at sweep " << fmt_double(sweep)
           << ": " << fmt_double(ratio);
        if (ratio < 0.5) os << "  [separation]";
        os << '\n';
      }
    }
  }

  if (!series_prefix.empty()) {
    for (auto& [method, by_sweep] : err2) {
      std::ofstream f(series_prefix + "_" + method + "_err2.tsv");
      for (auto& [sweep, vals] : by_sweep)
        f << fmt_double(sweep) << '\t' << fmt_double(median(vals)) << '\n';
    }
  }
  return os.str();
}

}  // namespace prefbandit
