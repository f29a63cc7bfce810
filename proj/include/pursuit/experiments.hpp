#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <functional>
#include <initializer_list>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "csv.hpp"
#include "dictionary.hpp"
#include "engines.hpp"
#include "learn.hpp"
#include "rng.hpp"
#include "space.hpp"

namespace pursuit {

struct RunReport {
  int violations = 0;
  std::string summary;
  std::vector<std::pair<std::string, std::string>> outputs;  // filename -> content
  std::vector<std::pair<std::string, double>> metrics;       // named scalar results

  double metric(const std::string& name, double fallback) const {
    for (const auto& [k, v] : metrics)
      if (k == name) return v;
    return fallback;
  }
};

// Reads config keys with defaults while recording the fully resolved values,
// so every report embeds the exact settings the run used.  finish() rejects
// keys the experiment never asked for (usually typos).
class ConfigResolver {
 public:
  explicit ConfigResolver(const Config& src) : src_(src) {}

  double num(const std::string& key, double fallback) {
    const double v = src_.get_double(key, fallback);
    resolved_.set(key, format_double(v));
    return v;
  }

  int integer(const std::string& key, int fallback) {
    const int v = src_.get_int(key, fallback);
    resolved_.set(key, std::to_string(v));
    return v;
  }

  bool flag(const std::string& key, bool fallback) {
    const bool v = src_.get_bool(key, fallback);
    resolved_.set(key, v ? "true" : "false");
    return v;
  }

  std::string text(const std::string& key, const std::string& fallback) {
    const std::string v = src_.get_string(key, fallback);
    resolved_.set(key, v);
    return v;
  }

  std::string choice(const std::string& key, const std::string& fallback,
                     std::initializer_list<const char*> allowed) {
    const std::string v = text(key, fallback);
    for (const char* a : allowed)
      if (v == a) return v;
    std::string msg = "config key '" + key + "': unsupported value '" + v + "' (expected";
    for (const char* a : allowed) msg += std::string(" ") + a;
    throw ConfigError(msg + ")");
  }

  std::vector<double> num_list(const std::string& key, const std::string& fallback) {
    std::vector<double> out;
    std::string canonical;
    for (const std::string& item : split_list(src_.get_string(key, fallback), key)) {
      try {
        std::size_t pos = 0;
        out.push_back(std::stod(item, &pos));
        if (pos != item.size()) throw std::invalid_argument("junk");
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad number '" + item + "'");
      }
      if (!canonical.empty()) canonical += ",";
      canonical += format_double(out.back());
    }
    resolved_.set(key, canonical);
    return out;
  }

  std::vector<int> int_list(const std::string& key, const std::string& fallback) {
    std::vector<int> out;
    std::string canonical;
    for (const std::string& item : split_list(src_.get_string(key, fallback), key)) {
      try {
        std::size_t pos = 0;
        const long v = std::stol(item, &pos);
        if (pos != item.size() || v != static_cast<int>(v))
          throw std::invalid_argument("junk");
        out.push_back(static_cast<int>(v));
      } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': bad integer '" + item + "'");
      }
      if (!canonical.empty()) canonical += ",";
      canonical += std::to_string(out.back());
    }
    resolved_.set(key, canonical);
    return out;
  }

  void note(const std::string& key, const std::string& value) {
    resolved_.set(key, value);
  }

  void finish() const {
    const auto unknown = src_.unknown_keys();
    if (!unknown.empty()) {
      std::string msg = "unknown config keys:";
      for (const auto& k : unknown) msg += " " + k;
      throw ConfigError(msg);
    }
  }

  const Config& resolved() const { return resolved_; }

 private:
  static std::vector<std::string> split_list(const std::string& raw,
                                             const std::string& key) {
    std::vector<std::string> items;
    std::string cur;
    for (char c : raw + ",") {
      if (c == ',') {
        const std::string t = detail::trim(cur);
        if (!t.empty()) items.push_back(t);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (items.empty()) throw ConfigError("config key '" + key + "': empty list");
    return items;
  }

  const Config& src_;
  Config resolved_;
};

// Resolved config rendered as comment lines for embedding at the top of CSVs.
inline std::string provenance_block(const Config& resolved) {
  std::istringstream is(resolved.dump());
  std::ostringstream os;
  std::string line;
  while (std::getline(is, line)) os << "# " << line << "\n";
  return os.str();
}

// Runs body(0..count-1) on up to `jobs` threads.  Writers own disjoint slots,
// so results land in deterministic positions regardless of scheduling.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  jobs = std::min(std::max(jobs, 1), std::max(count, 1));
  if (jobs <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex guard;
  std::exception_ptr failure;
  auto worker = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace detail {

inline Algorithm algorithm_from_string(const std::string& s, const std::string& where) {
  if (s == "pga") return Algorithm::pga;
  if (s == "oga") return Algorithm::oga;
  if (s == "rga") return Algorithm::rga;
  if (s == "spa") return Algorithm::spa;
  throw ConfigError("config key '" + where + "': unknown algorithm '" + s + "'");
}

inline AlphaSchedule schedule_from_string(const std::string& s, const std::string& where) {
  if (s == "harmonic") return AlphaSchedule::harmonic;
  if (s == "two_over_k") return AlphaSchedule::two_over_k;
  if (s == "lambda_over_k") return AlphaSchedule::lambda_over_k;
  throw ConfigError("config key '" + where + "': unknown schedule '" + s + "'");
}

inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace detail

struct DictionaryDefaults {
  std::string kind = "orthonormal_canonical";
  int grid_size = 256;
  int feature_dim = 1;
  int directions = 2;
  int thresholds = 128;
  double threshold_lo = -1.0;
  double threshold_hi = 1.0;
  std::string activation = "heaviside";
};

inline Dictionary dictionary_from_config(ConfigResolver& r,
                                         const DictionaryDefaults& dd = {}) {
  const std::string kind = r.choice("dictionary.kind", dd.kind,
                                    {"orthonormal_canonical", "union_of_bases", "ridge"});
  if (kind == "ridge") {
    const int dim = r.integer("dictionary.feature_dim", dd.feature_dim);
    const int nd = r.integer("dictionary.directions", dd.directions);
    const int nt = r.integer("dictionary.thresholds", dd.thresholds);
    const double lo = r.num("dictionary.threshold_lo", dd.threshold_lo);
    const double hi = r.num("dictionary.threshold_hi", dd.threshold_hi);
    const std::string act = r.choice("dictionary.activation", dd.activation,
                                     {"heaviside", "logistic"});
    if (dim < 1 || nd < 1 || nt < 1)
      throw ConfigError("dictionary: ridge sizes must be positive");
    if (!(hi > lo)) throw ConfigError("dictionary: threshold_hi must exceed threshold_lo");
    return Dictionary::ridge(dim, nd, nt, lo, hi,
                             act == "heaviside" ? Activation::heaviside
                                                : Activation::logistic);
  }
  const int m = r.integer("dictionary.grid_size", dd.grid_size);
  if (m < 1) throw ConfigError("dictionary: grid_size must be positive");
  return kind == "orthonormal_canonical" ? Dictionary::canonical(m)
                                         : Dictionary::union_of_bases(m);
}

// Midpoint lattice on [0,1]^dim, lexicographic row order.
inline Eigen::MatrixXd tensor_midpoint_grid(int dim, int points_per_dim) {
  if (dim < 1 || points_per_dim < 2)
    throw ConfigError("grid: need dim >= 1 and >= 2 points per dimension");
  double total_d = 1.0;
  for (int d = 0; d < dim; ++d) total_d *= points_per_dim;
  if (total_d > 65536.0) throw ConfigError("grid: more than 65536 points");
  const int total = static_cast<int>(total_d);
  Eigen::MatrixXd g(total, dim);
  for (int i = 0; i < total; ++i) {
    int rem = i;
    for (int d = dim - 1; d >= 0; --d) {
      g(i, d) = ((rem % points_per_dim) + 0.5) / points_per_dim;
      rem /= points_per_dim;
    }
  }
  return g;
}

struct ExperimentSpace {
  Eigen::MatrixXd grid;
  SpaceContext ctx;
};

// Basis dictionaries live on their own reference grid under the counting
// measure (atoms are exactly unit-norm there); ridge dictionaries are
// evaluated on a uniform-probability midpoint lattice.
inline ExperimentSpace deterministic_space(const Dictionary& d, ConfigResolver& r) {
  if (d.kind == DictKind::ridge) {
    const int pts = r.integer("space.points", 256);
    Eigen::MatrixXd grid = tensor_midpoint_grid(d.feature_dim(), pts);
    const int g = static_cast<int>(grid.rows());
    return {std::move(grid),
            SpaceContext(Eigen::VectorXd::Constant(g, 1.0 / g))};
  }
  return {Dictionary::grid_points(d.grid_size), SpaceContext::unit(d.grid_size)};
}

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
  bool has_fit = false;
  SlopeFit fit{};
};

// Self-contained log-log scatter with optional fitted power laws.  Cosmetic
// companion to the CSVs; gated behind --svg.
inline std::string svg_loglog(const std::vector<PlotSeries>& series,
                              const std::string& x_label,
                              const std::string& y_label) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                                  "#9467bd", "#ff7f0e", "#8c564b"};
  const int w = 640, h = 460, ml = 64, mr = 150, mt = 20, mb = 48;
  double lx0 = 0, lx1 = 0, ly0 = 0, ly1 = 0;
  bool any = false;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!(x > 0) || !(y > 0)) continue;
      const double lx = std::log10(x), ly = std::log10(y);
      if (!any) {
        lx0 = lx1 = lx;
        ly0 = ly1 = ly;
        any = true;
      }
      lx0 = std::min(lx0, lx);
      lx1 = std::max(lx1, lx);
      ly0 = std::min(ly0, ly);
      ly1 = std::max(ly1, ly);
    }
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
     << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  if (!any) {
    os << "<text x=\"20\" y=\"40\" font-family=\"sans-serif\">no positive data</text>\n</svg>\n";
    return os.str();
  }
  if (lx1 - lx0 < 1e-12) {
    lx0 -= 0.5;
    lx1 += 0.5;
  }
  if (ly1 - ly0 < 1e-12) {
    ly0 -= 0.5;
    ly1 += 0.5;
  }
  const double padx = 0.05 * (lx1 - lx0), pady = 0.05 * (ly1 - ly0);
  lx0 -= padx;
  lx1 += padx;
  ly0 -= pady;
  ly1 += pady;
  const double pw = w - ml - mr, ph = h - mt - mb;
  auto px = [&](double lx) { return ml + (lx - lx0) / (lx1 - lx0) * pw; };
  auto py = [&](double ly) { return h - mb - (ly - ly0) / (ly1 - ly0) * ph; };
  os << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double lx = lx0 + i * (lx1 - lx0) / 4;
    const double ly = ly0 + i * (ly1 - ly0) / 4;
    os << "<line x1=\"" << detail::fmt6(px(lx)) << "\" y1=\"" << mt << "\" x2=\""
       << detail::fmt6(px(lx)) << "\" y2=\"" << (h - mb)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << detail::fmt6(py(ly)) << "\" x2=\""
       << (w - mr) << "\" y2=\"" << detail::fmt6(py(ly))
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << detail::fmt6(px(lx)) << "\" y=\"" << (h - mb + 16)
       << "\" text-anchor=\"middle\">" << detail::fmt6(std::pow(10.0, lx))
       << "</text>\n";
    os << "<text x=\"" << (ml - 6) << "\" y=\"" << detail::fmt6(py(ly) + 4)
       << "\" text-anchor=\"end\">" << detail::fmt6(std::pow(10.0, ly))
       << "</text>\n";
  }
  os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << detail::fmt6(pw)
     << "\" height=\"" << detail::fmt6(ph)
     << "\" fill=\"none\" stroke=\"#333\"/>\n";
  os << "<text x=\"" << detail::fmt6(ml + pw / 2) << "\" y=\"" << (h - 10)
     << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  os << "<text x=\"16\" y=\"" << detail::fmt6(mt + ph / 2)
     << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << detail::fmt6(mt + ph / 2) << ")\">" << y_label << "</text>\n";
  int ci = 0;
  for (const auto& s : series) {
    const char* color = kColors[ci % 6];
    double sx0 = 0, sx1 = 0;
    bool first = true;
    for (const auto& [x, y] : s.points) {
      if (!(x > 0) || !(y > 0)) continue;
      if (first) {
        sx0 = sx1 = x;
        first = false;
      }
      sx0 = std::min(sx0, x);
      sx1 = std::max(sx1, x);
      os << "<circle cx=\"" << detail::fmt6(px(std::log10(x))) << "\" cy=\""
         << detail::fmt6(py(std::log10(y))) << "\" r=\"3.5\" fill=\"" << color
         << "\"/>\n";
    }
    if (s.has_fit && !first && sx1 > sx0) {
      const double y0 = std::exp(s.fit.intercept) * std::pow(sx0, s.fit.slope);
      const double y1 = std::exp(s.fit.intercept) * std::pow(sx1, s.fit.slope);
      if (y0 > 0 && y1 > 0)
        os << "<line x1=\"" << detail::fmt6(px(std::log10(sx0))) << "\" y1=\""
           << detail::fmt6(py(std::log10(y0))) << "\" x2=\""
           << detail::fmt6(px(std::log10(sx1))) << "\" y2=\""
           << detail::fmt6(py(std::log10(y1))) << "\" stroke=\"" << color
           << "\" stroke-dasharray=\"5 3\"/>\n";
    }
    os << "<rect x=\"" << (w - mr + 10) << "\" y=\"" << (mt + 6 + 16 * ci)
       << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << (w - mr + 24) << "\" y=\"" << (mt + 15 + 16 * ci)
       << "\">" << s.name << "</text>\n";
    ++ci;
  }
  os << "</g>\n</svg>\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// approx-rate: deterministic decay study for the greedy family.

inline RunReport run_approx_rate(const Config& cfg, std::uint64_t seed, int jobs,
                                 bool svg) {
  (void)jobs;  // individual runs are cheap; kept single-threaded
  ConfigResolver r(cfg);
  r.note("experiment", "approx_rate");
  r.note("seed", std::to_string(seed));

  const Dictionary dict = dictionary_from_config(r);
  ExperimentSpace sp = deterministic_space(dict, r);
  const int prefix = r.integer("run.prefix", -1);
  const MaterializedDictionary md = materialize(dict, sp.ctx, sp.grid, prefix);
  const int m = md.size();
  if (md.live_count() == 0) throw ConfigError("approx_rate: dictionary is dead on the grid");

  const std::string tkind =
      r.choice("target.kind", "power_decay", {"power_decay", "l1_random", "zero"});
  Rng trng(derive_seed(seed, 0));
  Representation target;
  if (tkind == "power_decay") {
    const double p = r.num("target.p", 1.0);
    if (!(p > 0)) throw ConfigError("target.p must be positive");
    const int terms = std::min(m, std::max(1, r.integer("target.terms", m)));
    try {
      target = synth_power_decay(md, terms, p, trng);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("target synthesis failed: ") + e.what());
    }
  } else if (tkind == "l1_random") {
    std::vector<int> live;
    for (int j = 0; j < m; ++j)
      if (!md.dead[j]) live.push_back(j);
    const int terms = std::min<int>(static_cast<int>(live.size()),
                                    std::max(1, r.integer("target.terms", 8)));
    for (int i = 0; i < terms; ++i) {
      const int j = i + static_cast<int>(trng.below(live.size() - i));
      std::swap(live[i], live[j]);
    }
    std::vector<int> atoms(live.begin(), live.begin() + terms);
    std::sort(atoms.begin(), atoms.end());
    std::vector<double> coeffs;
    double total = 0.0;
    for (int i = 0; i < terms; ++i) {
      coeffs.push_back(trng.sign() * trng.uniform(0.5, 1.5));
      total += std::abs(coeffs.back());
    }
    for (double& c : coeffs) c /= total;
    target = make_representation(md, std::move(atoms), std::move(coeffs));
  } else {
    target.values = VectorF::Zero(sp.ctx.dim());
  }

  std::vector<std::string> algo_names;
  const std::string algos_raw = r.text("run.algorithms", "oga");
  std::vector<Algorithm> algos;
  {
    std::string cur;
    std::string canonical;
    for (char c : algos_raw + ",") {
      if (c == ',') {
        const std::string t = detail::trim(cur);
        cur.clear();
        if (t.empty()) continue;
        algos.push_back(detail::algorithm_from_string(t, "run.algorithms"));
        algo_names.push_back(t);
        if (!canonical.empty()) canonical += ",";
        canonical += t;
      } else {
        cur += c;
      }
    }
    if (algos.empty()) throw ConfigError("run.algorithms: empty list");
    r.note("run.algorithms", canonical);
  }

  const int steps = r.integer("run.steps", 64);
  if (steps < 1) throw ConfigError("run.steps must be positive");
  const AlphaSchedule sched = detail::schedule_from_string(
      r.choice("run.rga_schedule", "harmonic",
               {"harmonic", "two_over_k", "lambda_over_k"}),
      "run.rga_schedule");
  const double lambda = r.num("run.rga_lambda", 2.0);
  const bool check_bounds = r.flag("check.bounds", true);
  const double slope_max = r.num("check.slope_max", -0.45);
  r.finish();

  const double l1 = target.l1();
  const double f_norm = sp.ctx.norm(target.values);

  RunReport report;
  std::ostringstream csv, summary;
  csv << provenance_block(r.resolved());
  csv << "algorithm,N,residual,bound_rhs,bound_ok\n";
  summary << provenance_block(r.resolved()) << "\n";
  summary << "experiment = approx_rate\n";
  summary << "target_l1 = " << format_double(l1) << "\n";
  summary << "target_norm = " << format_double(f_norm) << "\n";

  std::vector<PlotSeries> plot;
  for (std::size_t ai = 0; ai < algos.size(); ++ai) {
    GreedyConfig g;
    g.algorithm = algos[ai];
    g.max_steps = steps;
    if (g.algorithm == Algorithm::rga) {
      g.alpha_schedule = sched;
      g.lambda = lambda;
    }
    const GreedyTrace trace = run_greedy(sp.ctx, md, target.values, g);

    bool has_bound = false;
    BoundCheck bc;
    std::string bound_name = "none";
    if (check_bounds && g.algorithm != Algorithm::pga) {
      BoundKind kind = BoundKind::oga_l1;
      if (g.algorithm == Algorithm::rga) {
        if (sched == AlphaSchedule::harmonic) {
          kind = BoundKind::rga_l1;
        } else if (sched == AlphaSchedule::two_over_k) {
          kind = BoundKind::rga_surrogate;
        } else {
          kind = BoundKind::rga_surrogate_lambda;
        }
      }
      bc = residual_bound_check(trace, l1, 0.0, kind, lambda, f_norm);
      has_bound = true;
      bound_name = to_string(kind);
      if (!bc.passed) ++report.violations;
    }

    std::vector<std::pair<double, double>> pts;
    const auto norms = trace.residual_norms();
    for (std::size_t k = 1; k < norms.size(); ++k) {
      if (norms[k] > 1e-13) pts.emplace_back(static_cast<double>(k), norms[k]);
      csv << algo_names[ai] << "," << k << "," << format_double(norms[k]) << ",";
      if (has_bound) {
        const double rhs = bc.rhs[k - 1];
        csv << format_double(rhs) << "," << (norms[k] <= rhs ? 1 : 0) << "\n";
      } else {
        csv << "-1,1\n";
      }
    }

    summary << "algorithm = " << algo_names[ai] << "\n";
    summary << "  steps_run = " << trace.steps.size() << "\n";
    summary << "  stop = " << to_string(trace.stopped_reason) << "\n";
    summary << "  bound = " << bound_name << "\n";
    if (has_bound)
      summary << "  bound_first_violation = " << bc.first_violation << "\n";
    PlotSeries series;
    series.name = algo_names[ai];
    series.points = pts;
    if (pts.size() >= 3) {
      const SlopeFit fit = rate_slope(pts);
      series.has_fit = true;
      series.fit = fit;
      summary << "  slope = " << format_double(fit.slope) << "\n";
      summary << "  intercept = " << format_double(fit.intercept) << "\n";
      summary << "  r_squared = " << format_double(fit.r_squared) << "\n";
      summary << "  slope_ok = " << (fit.slope <= slope_max ? "true" : "false")
              << "\n";
      report.metrics.emplace_back(algo_names[ai] + ".slope", fit.slope);
      if (fit.slope > slope_max) ++report.violations;
    } else {
      summary << "  exact_recovery = true\n";
    }
    if (has_bound)
      report.metrics.emplace_back(algo_names[ai] + ".bound_first_violation",
                                  bc.first_violation);
    plot.push_back(std::move(series));
  }

  summary << "violations = " << report.violations << "\n";
  summary << "result = " << (report.violations == 0 ? "PASS" : "FAIL") << "\n";
  report.summary = summary.str();
  report.outputs.emplace_back("rates.csv", csv.str());
  report.outputs.emplace_back("summary.txt", report.summary);
  if (svg)
    report.outputs.emplace_back("rates.svg",
                                svg_loglog(plot, "steps N", "residual norm"));
  return report;
}

// ---------------------------------------------------------------------------
// learn-rate / consistency: Monte Carlo risk studies over a synthetic truth.

namespace detail {

struct TruthDefaults {
  std::string kind = "atoms";
  std::string atoms = "3,4,8";
  std::string coeffs = "0.5,-0.3,0.2";
  double amplitude = 0.25;
  double decay = 0.75;
  double noise = 0.25;
  int grid_points = 256;
};

inline SyntheticModel synthetic_model_from_config(ConfigResolver& r,
                                                  const Dictionary& dict,
                                                  const TruthDefaults& td) {
  const std::string kind = r.choice("truth.kind", td.kind, {"atoms", "decay"});
  const double noise = r.num("truth.noise", td.noise);
  if (noise < 0) throw ConfigError("truth.noise must be nonnegative");

  Eigen::MatrixXd grid;
  if (dict.kind == DictKind::ridge) {
    const int g = r.integer("truth.grid_points", td.grid_points);
    grid = tensor_midpoint_grid(dict.feature_dim(), g);
  } else {
    grid = Dictionary::grid_points(dict.grid_size);
  }
  const int g = static_cast<int>(grid.rows());
  Eigen::VectorXd weights = Eigen::VectorXd::Constant(g, 1.0 / g);

  std::vector<int> atoms;
  std::vector<double> coeffs;
  if (kind == "atoms") {
    atoms = r.int_list("truth.atoms", td.atoms);
    const std::vector<double> cs = r.num_list("truth.coeffs", td.coeffs);
    if (atoms.size() != cs.size())
      throw ConfigError("truth.atoms and truth.coeffs differ in length");
    for (int a : atoms)
      if (a < 0 || a >= dict.total_atoms())
        throw ConfigError("truth.atoms: index " + std::to_string(a) +
                          " out of range");
    coeffs = cs;
  } else {
    const double amp = r.num("truth.amplitude", td.amplitude);
    const double decay = r.num("truth.decay", td.decay);
    int terms = r.integer("truth.terms", -1);
    if (terms < 0 || terms > dict.total_atoms()) terms = dict.total_atoms();
    if (terms < 1) throw ConfigError("truth.terms must be positive");
    for (int j = 0; j < terms; ++j) {
      atoms.push_back(j);
      coeffs.push_back(amp * std::pow(static_cast<double>(j + 1), -decay));
    }
  }
  try {
    return make_synthetic_model(dict, std::move(grid), std::move(weights),
                                std::move(atoms), std::move(coeffs), noise);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("truth: ") + e.what());
  }
}

inline LearnConfig learn_config_from_config(ConfigResolver& r) {
  LearnConfig lc;
  lc.kappa = r.num("fit.kappa", 1.0);
  if (!(lc.kappa > 0)) throw ConfigError("fit.kappa must be positive");
  lc.a_exp = r.num("fit.a_exp", 1.0);
  if (!(lc.a_exp > 0)) throw ConfigError("fit.a_exp must be positive");
  lc.algorithm.algorithm = algorithm_from_string(
      r.choice("fit.algorithm", "oga", {"oga", "rga", "spa"}), "fit.algorithm");
  lc.k_cap = r.integer("fit.k_cap", 64);
  if (lc.k_cap < 1) throw ConfigError("fit.k_cap must be positive");
  const std::string sel =
      r.choice("fit.selection", "penalized", {"penalized", "holdout"});
  lc.selection = sel == "penalized" ? SelectionRule::penalized : SelectionRule::holdout;
  lc.holdout_fraction = r.num("fit.holdout_fraction", 0.5);
  return lc;
}

}  // namespace detail

// Shared driver: sample -> fit -> exact excess risk, one cell per (n, rep).
// Cell seeds derive from the master seed by the documented two-level rule, so
// results do not depend on scheduling or on which n values share a run.
inline RunReport run_risk_experiment(const Config& cfg, std::uint64_t seed, int jobs,
                                     bool svg, bool learn_mode) {
  ConfigResolver r(cfg);
  const std::string exp_name = learn_mode ? "learn_rate" : "consistency";
  r.note("experiment", exp_name);
  r.note("seed", std::to_string(seed));

  DictionaryDefaults dd;
  detail::TruthDefaults td;
  if (learn_mode) {
    dd.kind = "ridge";
  } else {
    dd.kind = "orthonormal_canonical";
    dd.grid_size = 64;
    td.kind = "decay";
  }
  const Dictionary dict = dictionary_from_config(r, dd);
  const SyntheticModel truth = detail::synthetic_model_from_config(r, dict, td);
  const LearnConfig lc = detail::learn_config_from_config(r);

  std::vector<int> n_values =
      r.int_list("sample.n_values", learn_mode ? "64,256,1024,4096" : "128,4096");
  std::sort(n_values.begin(), n_values.end());
  n_values.erase(std::unique(n_values.begin(), n_values.end()), n_values.end());
  for (int n : n_values)
    if (n < 4) throw ConfigError("sample.n_values: need n >= 4");
  const int reps = r.integer("sample.reps", 50);
  if (reps < 1) throw ConfigError("sample.reps must be positive");

  const double ratio_max = r.num("check.ratio_max", learn_mode ? 0.25 : 0.5);
  double slope_max = 0.0;
  if (learn_mode) slope_max = r.num("check.slope_max", -0.35);
  r.finish();

  struct Cell {
    std::uint64_t seed = 0;
    int k_star = 0;
    double risk = 0.0;
  };
  const int total = static_cast<int>(n_values.size()) * reps;
  std::vector<Cell> cells(total);
  parallel_for(total, jobs, [&](int idx) {
    const int n = n_values[idx / reps];
    const int rep = idx % reps;
    const std::uint64_t cell_seed =
        derive_seed(derive_seed(seed, static_cast<std::uint64_t>(n)),
                    static_cast<std::uint64_t>(rep));
    Rng rng(cell_seed);
    const SampleSet s = truth.sample(n, rng);
    const FitResult fr = lc.selection == SelectionRule::holdout
                             ? holdout_fit(s, truth.dict, lc)
                             : fit(s, truth.dict, lc);
    cells[idx] = {cell_seed, fr.k_star, excess_risk(truth.dict, fr, truth).value};
  });

  std::vector<double> means, errs;
  for (std::size_t ni = 0; ni < n_values.size(); ++ni) {
    double sum = 0.0;
    for (int rep = 0; rep < reps; ++rep) sum += cells[ni * reps + rep].risk;
    const double mean = sum / reps;
    double ss = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
      const double d = cells[ni * reps + rep].risk - mean;
      ss += d * d;
    }
    means.push_back(mean);
    errs.push_back(reps > 1 ? std::sqrt(ss / (reps - 1) / reps) : 0.0);
  }

  RunReport report;
  std::ostringstream cells_csv, means_csv, summary;
  cells_csv << provenance_block(r.resolved());
  cells_csv << "n,rep,cell_seed,k_star,excess_risk\n";
  for (std::size_t ni = 0; ni < n_values.size(); ++ni)
    for (int rep = 0; rep < reps; ++rep) {
      const Cell& c = cells[ni * reps + rep];
      cells_csv << n_values[ni] << "," << rep << "," << c.seed << "," << c.k_star
                << "," << format_double(c.risk) << "\n";
    }
  means_csv << provenance_block(r.resolved());
  means_csv << "n,mean_excess_risk,std_error\n";
  for (std::size_t ni = 0; ni < n_values.size(); ++ni)
    means_csv << n_values[ni] << "," << format_double(means[ni]) << ","
              << format_double(errs[ni]) << "\n";

  summary << provenance_block(r.resolved()) << "\n";
  summary << "experiment = " << exp_name << "\n";
  for (std::size_t ni = 0; ni < n_values.size(); ++ni)
    summary << "n = " << n_values[ni]
            << ": mean_excess_risk = " << format_double(means[ni])
            << ", std_error = " << format_double(errs[ni]) << "\n";

  std::vector<std::pair<double, double>> pts;
  for (std::size_t ni = 0; ni < n_values.size(); ++ni) {
    const double x = n_values[ni] / std::log(static_cast<double>(n_values[ni]));
    if (means[ni] > 0) pts.emplace_back(x, means[ni]);
  }
  PlotSeries series;
  series.name = "mean excess risk";
  series.points = pts;
  for (std::size_t ni = 0; ni < n_values.size(); ++ni)
    report.metrics.emplace_back("mean." + std::to_string(n_values[ni]), means[ni]);
  if (learn_mode) {
    if (pts.size() >= 3) {
      const SlopeFit fit = rate_slope(pts);
      series.has_fit = true;
      series.fit = fit;
      summary << "slope_vs_n_over_log_n = " << format_double(fit.slope)
              << " (max allowed " << format_double(slope_max) << ")\n";
      report.metrics.emplace_back("slope", fit.slope);
      if (!(fit.slope <= slope_max)) ++report.violations;
    } else {
      summary << "slope_vs_n_over_log_n = skipped (fewer than 3 positive means)\n";
    }
  }
  if (means.front() > 0) {
    const double ratio = means.back() / means.front();
    summary << "ratio_largest_vs_smallest_n = " << format_double(ratio)
            << " (max allowed " << format_double(ratio_max) << ")\n";
    report.metrics.emplace_back("ratio", ratio);
    if (!(ratio < ratio_max)) ++report.violations;
  } else {
    summary << "ratio_largest_vs_smallest_n = skipped (exact fit at smallest n)\n";
  }

  summary << "violations = " << report.violations << "\n";
  summary << "result = " << (report.violations == 0 ? "PASS" : "FAIL") << "\n";
  report.summary = summary.str();
  const std::string base = learn_mode ? "learn" : "consistency";
  report.outputs.emplace_back(base + ".csv", cells_csv.str());
  report.outputs.emplace_back(base + "_means.csv", means_csv.str());
  report.outputs.emplace_back("summary.txt", report.summary);
  if (svg)
    report.outputs.emplace_back(
        base + ".svg", svg_loglog({series}, "n / log n", "mean excess risk"));
  return report;
}

inline RunReport run_learn_rate(const Config& cfg, std::uint64_t seed, int jobs,
                                bool svg) {
  return run_risk_experiment(cfg, seed, jobs, svg, true);
}

inline RunReport run_consistency(const Config& cfg, std::uint64_t seed, int jobs,
                                 bool svg) {
  return run_risk_experiment(cfg, seed, jobs, svg, false);
}

// ---------------------------------------------------------------------------
// oracle-compare: greedy residuals against brute-force oracles and the
// guaranteed decay envelopes on small instances.

inline RunReport run_oracle_compare(const Config& cfg, std::uint64_t seed, int jobs,
                                    bool svg) {
  (void)jobs;
  (void)svg;
  ConfigResolver r(cfg);
  r.note("experiment", "oracle_compare");
  r.note("seed", std::to_string(seed));

  RunReport report;
  std::ostringstream summary;

  const int esize = r.integer("exact.size", 12);
  const int en = r.integer("exact.n_max", 4);
  if (esize < 2 || esize > 64 || en < 1 || en > esize)
    throw ConfigError("exact: need 2 <= size <= 64 and 1 <= n_max <= size");
  const int cdirs = r.integer("coherent.directions", 2);
  const int cths = r.integer("coherent.thresholds", 6);
  const int cpts = r.integer("coherent.points", 24);
  const int cterms = r.integer("coherent.terms", 3);
  const int cn = r.integer("coherent.n_max", 4);
  if (cdirs < 1 || cths < 1 || cpts < 2 || cterms < 1 || cn < 1)
    throw ConfigError("coherent: sizes must be positive");
  const int tdirs = r.integer("truncated.directions", 2);
  const int tths = r.integer("truncated.thresholds", 128);
  const int tpts = r.integer("truncated.points", 256);
  const double amp = r.num("truncated.amplitude", 1.0);
  const double tail_r = r.num("truncated.tail_exponent", 1.0);
  std::vector<int> m_values = r.int_list("truncated.m_values", "16,32,64,128");
  const int tsteps = r.integer("truncated.steps", 16);
  if (tdirs < 1 || tths < 1 || tpts < 2 || tsteps < 1)
    throw ConfigError("truncated: sizes must be positive");
  if (!(tail_r > 0)) throw ConfigError("truncated.tail_exponent must be positive");
  r.finish();

  // Orthonormal instance: the orthogonal algorithm matches the best N-term
  // oracle exactly.
  std::ostringstream exact_csv;
  {
    const Dictionary dict = Dictionary::canonical(esize);
    const SpaceContext ctx = SpaceContext::unit(esize);
    const MaterializedDictionary md =
        materialize(dict, ctx, Dictionary::grid_points(esize));
    Rng rng(derive_seed(seed, 1));
    VectorF f(esize);
    for (int i = 0; i < esize; ++i) f(i) = rng.uniform(-1.0, 1.0);
    GreedyConfig g;
    g.algorithm = Algorithm::oga;
    g.max_steps = en;
    const GreedyTrace trace = run_greedy(ctx, md, f, g);
    const auto norms = trace.residual_norms();
    exact_csv << provenance_block(r.resolved());
    exact_csv << "N,sigma,residual,abs_diff,ok\n";
    int fails = 0;
    for (int n = 1; n <= en; ++n) {
      const double sigma = best_n_term_bruteforce(ctx, md, esize, n, f).error;
      const double res = n < static_cast<int>(norms.size()) ? norms[n] : norms.back();
      const double diff = std::abs(res - sigma);
      const bool ok = diff <= 1e-10;
      if (!ok) {
        ++fails;
        ++report.violations;
      }
      exact_csv << n << "," << format_double(sigma) << "," << format_double(res)
                << "," << format_double(diff) << "," << (ok ? 1 : 0) << "\n";
    }
    summary << "orthonormal_instance: size = " << esize << ", failures = " << fails
            << "\n";
  }

  // Coherent instance: oracle domination plus the per-algorithm error bounds.
  std::ostringstream greedy_csv;
  {
    const Dictionary dict =
        Dictionary::ridge(1, cdirs, cths, -1.0, 1.0, Activation::heaviside);
    Eigen::MatrixXd grid = tensor_midpoint_grid(1, cpts);
    const SpaceContext ctx(Eigen::VectorXd::Constant(cpts, 1.0 / cpts));
    const MaterializedDictionary md = materialize(dict, ctx, grid);
    const int m = md.size();
    std::vector<int> live;
    for (int j = 0; j < m; ++j)
      if (!md.dead[j]) live.push_back(j);
    if (static_cast<int>(live.size()) < cterms)
      throw ConfigError("coherent: fewer live atoms than coherent.terms");
    Rng rng(derive_seed(seed, 2));
    std::vector<int> atoms(live.begin(), live.begin() + cterms);
    std::vector<double> coeffs;
    double total = 0.0;
    for (int i = 0; i < cterms; ++i) {
      coeffs.push_back(rng.sign() * rng.uniform(0.5, 1.5));
      total += std::abs(coeffs.back());
    }
    for (double& c : coeffs) c /= total;
    const Representation target = make_representation(md, atoms, coeffs);
    const double l1 = target.l1();
    const double f_norm = ctx.norm(target.values);

    std::vector<double> sigma;
    for (int n = 1; n <= cn; ++n)
      sigma.push_back(best_n_term_bruteforce(ctx, md, m, n, target.values).error);

    struct AlgoSpec {
      const char* name;
      Algorithm algo;
      AlphaSchedule sched;
      bool has_bound;
      BoundKind kind;
    };
    const AlgoSpec specs[] = {
        {"pga", Algorithm::pga, AlphaSchedule::harmonic, false, BoundKind::oga_l1},
        {"oga", Algorithm::oga, AlphaSchedule::harmonic, true, BoundKind::oga_l1},
        {"spa", Algorithm::spa, AlphaSchedule::harmonic, true, BoundKind::oga_l1},
        {"rga_harmonic", Algorithm::rga, AlphaSchedule::harmonic, true,
         BoundKind::rga_l1},
        {"rga_two_over_k", Algorithm::rga, AlphaSchedule::two_over_k, true,
         BoundKind::rga_surrogate},
    };
    greedy_csv << provenance_block(r.resolved());
    greedy_csv << "algorithm,N,sigma,residual,bound_rhs,sigma_ok,bound_ok\n";
    int fails = 0;
    for (const AlgoSpec& spec : specs) {
      GreedyConfig g;
      g.algorithm = spec.algo;
      g.alpha_schedule = spec.sched;
      g.max_steps = cn;
      g.residual_stop_tol = 0.0;
      const GreedyTrace trace = run_greedy(ctx, md, target.values, g);
      BoundCheck bc;
      if (spec.has_bound)
        bc = residual_bound_check(trace, l1, 0.0, spec.kind, 2.0, f_norm);
      const auto norms = trace.residual_norms();
      for (int n = 1; n <= cn; ++n) {
        const double res =
            n < static_cast<int>(norms.size()) ? norms[n] : norms.back();
        const bool sigma_ok = res >= sigma[n - 1] - 1e-10;
        double rhs = -1.0;
        bool bound_ok = true;
        if (spec.has_bound && n - 1 < static_cast<int>(bc.rhs.size())) {
          rhs = bc.rhs[n - 1];
          bound_ok = res <= rhs;
        }
        if (!sigma_ok || !bound_ok) {
          ++fails;
          ++report.violations;
        }
        greedy_csv << spec.name << "," << n << "," << format_double(sigma[n - 1])
                   << "," << format_double(res) << "," << format_double(rhs) << ","
                   << (sigma_ok ? 1 : 0) << "," << (bound_ok ? 1 : 0) << "\n";
      }
    }
    summary << "coherent_instance: atoms = " << m << ", failures = " << fails
            << "\n";
  }

  // Truncated-dictionary study: run on an m-atom prefix of the exhaustion and
  // compare against C0 * C_hat * (k^{-1/2} + m^{-r}).
  std::ostringstream trunc_csv;
  {
    const Dictionary dict =
        Dictionary::ridge(1, tdirs, tths, -1.0, 1.0, Activation::heaviside);
    Eigen::MatrixXd grid = tensor_midpoint_grid(1, tpts);
    const SpaceContext ctx(Eigen::VectorXd::Constant(tpts, 1.0 / tpts));
    const MaterializedDictionary md = materialize(dict, ctx, grid);
    const int total = md.size();
    std::sort(m_values.begin(), m_values.end());
    for (int m : m_values)
      if (m < 2 || m > total)
        throw ConfigError("truncated.m_values: entries must lie in [2, total atoms]");

    // Coefficients decay along the exhaustion order; dead atoms get none.
    std::vector<double> coeffs(total, 0.0);
    VectorF f = VectorF::Zero(ctx.dim());
    for (int j = 0; j < total; ++j) {
      if (md.dead[j]) continue;
      coeffs[j] = amp * std::pow(static_cast<double>(j + 1), -(tail_r + 1.0));
      f += coeffs[j] * md.atoms.col(j);
    }

    // C_hat = sup_m max(prefix l1, m^r * tail error) over every prefix.
    double c_hat = 0.0;
    {
      VectorF partial = VectorF::Zero(ctx.dim());
      double prefix_l1 = 0.0;
      for (int m = 1; m <= total; ++m) {
        if (!md.dead[m - 1] && coeffs[m - 1] != 0.0) {
          partial += coeffs[m - 1] * md.atoms.col(m - 1);
          prefix_l1 += std::abs(coeffs[m - 1]);
        }
        const double tail = ctx.norm(f - partial);
        c_hat = std::max(c_hat,
                         std::max(prefix_l1, std::pow(static_cast<double>(m), tail_r) * tail));
      }
    }

    trunc_csv << provenance_block(r.resolved());
    trunc_csv << "algorithm,m,k,residual,rhs,ok\n";
    int fails = 0;
    for (const int m : m_values) {
      for (const bool use_rga : {false, true}) {
        GreedyConfig g;
        g.algorithm = use_rga ? Algorithm::rga : Algorithm::oga;
        g.alpha_schedule = AlphaSchedule::harmonic;
        g.max_steps = std::min(tsteps, m);
        g.truncation = m;
        g.residual_stop_tol = 0.0;
        const double c0 = use_rga ? 1.0 : 2.0;
        const GreedyTrace trace = run_greedy(ctx, md, f, g);
        const auto norms = trace.residual_norms();
        for (std::size_t k = 1; k < norms.size(); ++k) {
          const double rhs =
              c0 * c_hat *
              (1.0 / std::sqrt(static_cast<double>(k)) +
               std::pow(static_cast<double>(m), -tail_r));
          const bool ok = norms[k] <= rhs;
          if (!ok) {
            ++fails;
            ++report.violations;
          }
          trunc_csv << (use_rga ? "rga_harmonic" : "oga") << "," << m << "," << k
                    << "," << format_double(norms[k]) << "," << format_double(rhs)
                    << "," << (ok ? 1 : 0) << "\n";
        }
      }
    }
    summary << "truncated_study: C_hat = " << format_double(c_hat)
            << ", failures = " << fails << "\n";
    report.metrics.emplace_back("c_hat", c_hat);
  }

  std::ostringstream full;
  full << provenance_block(r.resolved()) << "\n";
  full << "experiment = oracle_compare\n";
  full << summary.str();
  full << "violations = " << report.violations << "\n";
  full << "result = " << (report.violations == 0 ? "PASS" : "FAIL") << "\n";
  report.summary = full.str();
  report.outputs.emplace_back("oracle_exact.csv", exact_csv.str());
  report.outputs.emplace_back("oracle_greedy.csv", greedy_csv.str());
  report.outputs.emplace_back("oracle_truncated.csv", trunc_csv.str());
  report.outputs.emplace_back("summary.txt", report.summary);
  return report;
}

}  // namespace pursuit
