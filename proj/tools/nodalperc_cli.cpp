#include <boost/version.hpp>
#include <fftw3.h>

#include <Eigen/Core>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nodalperc/constants.hpp"
#include "nodalperc/coupling.hpp"
#include "nodalperc/experiments.hpp"
#include "nodalperc/nodal.hpp"
#include "nodalperc/sampler.hpp"

using namespace nodalperc;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct KeySpec {
  std::string name;
  std::string fallback;  // empty and required => must be given
  std::string help;
  bool required = false;
};

std::vector<KeySpec> common_keys() {
  return {{"seed", "1", "master seed"},
          {"out", "-", "CSV output path, '-' for stdout"},
          {"meta", "", "JSON metadata path (default: <out>.json when out is a file)"},
          {"threads", "1", "worker threads for replicates"},
          {"memory-cap-gib", "8", "field storage cap in GiB"}};
}

std::map<std::string, std::vector<KeySpec>> command_table() {
  const KeySpec kernel{"kernel", "", "bf | bessel | kostlan:<d> | table:<path>", true};
  const KeySpec lattice{"lattice", "fcs", "fcs | tri"};
  const KeySpec confidence{"confidence", "0.95", "Wilson interval confidence"};
  std::map<std::string, std::vector<KeySpec>> t;
  t["sample"] = {kernel, lattice, {"s", "4", "half side of B_s"}, {"eps", "0.5", "lattice mesh"},
                 {"method", "circulant", "circulant | cholesky"}};
  t["cross"] = {kernel, lattice, confidence, {"s", "", "scale list, e.g. 4,8,16", true},
                {"rho", "1", "aspect ratio"}, {"eps", "0.5", "lattice mesh"}, {"reps", "1000", "replicates per scale"},
                {"side", "lr", "lr | tb"}, {"color", "black", "black | white"}};
  t["rsw"] = {kernel, lattice, confidence, {"s", "4,8,16,32", "scale list"}, {"rho", "2", "aspect ratio"},
              {"eps", "0.25", "lattice mesh"}, {"reps", "400", "replicates per scale"}};
  t["circuit"] = {kernel, lattice, confidence, {"s", "", "outer scale list", true},
                  {"inner", "0.5", "inner radius as a fraction of s"}, {"eps", "0.5", "lattice mesh"},
                  {"reps", "1000", "replicates per scale"}, {"color", "black", "black | white"}};
  t["onearm"] = {kernel, confidence, {"s", "2", "inner radius"}, {"t", "4,8,16,32", "outer radius list"},
                 {"eps", "0.25", "lattice mesh"}, {"reps", "1000", "replicates"},
                 {"bootstrap", "2000", "bootstrap resamples for the exponent"}};
  t["nodal-census"] = {kernel, lattice, confidence, {"s", "5", "half side of B_s"},
                       {"eps", "0.5,0.25,0.125", "mesh list"}, {"k", "8", "subsample points per edge"},
                       {"reps", "100", "replicates per mesh"}};
  t["tv"] = {{"m", "1", "block 1 size"},
             {"n", "1", "block 2 size"},
             {"within", "0.5", "within-block correlation"},
             {"eta", "0.3", "cross-block correlation"},
             {"method", "exact", "exact | mc | both"},
             {"samples", "100000", "Monte Carlo samples"},
             {"tolerance", "1e-3", "quadrature tolerance"}};
  t["constants"] = {{"c0", "0.5", "crossing probability of the square"},
                    {"nu", "0.25", "exponent parameter in (0, 1/2)"},
                    {"alpha-lower", "0.0625", "lower bound on alpha(Omega, s)"}};
  t["calibrate"] = {kernel, confidence, {"lambda", "0.05,0.1,0.25,0.5,1", "box radii in (0, 1]"},
                    {"eps", "0.125", "lattice mesh"}, {"reps", "2000", "replicates"},
                    {"delta", "0.1", "tolerance below 1/2"}, {"calib", "", "key-value calibration output path"}};
  for (auto& [name, keys] : t)
    for (auto& k : common_keys()) keys.push_back(k);
  return t;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string normalize_key(std::string k) {
  for (auto& c : k)
    if (c == '_') c = '-';
  return k;
}

/// Resolved key/value configuration for one subcommand.
class Params {
 public:
  Params(std::string command, const std::vector<KeySpec>& keys) : command_(std::move(command)), keys_(keys) {
    for (const auto& k : keys_) values_[k.name] = k.fallback;
  }

  bool known(const std::string& key) const { return values_.count(key) > 0; }

  void set(const std::string& key, const std::string& value, const std::string& where) {
    if (!known(key)) throw ValidationError(where + ": unknown key '" + key + "' for command '" + command_ + "'");
    values_[key] = value;
    given_.insert(key);
  }

  /// Flat "key = value" file; [section] headers and # or ; comments are ignored.
  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot read '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find_first_of("#;");
      line = trim(hash == std::string::npos ? line : line.substr(0, hash));
      if (line.empty() || (line.front() == '[' && line.back() == ']')) continue;
      const auto eq = line.find('=');
      const std::string where = path + ":" + std::to_string(lineno);
      if (eq == std::string::npos) throw ValidationError(where + ": expected 'key = value'");
      set(normalize_key(trim(line.substr(0, eq))), trim(line.substr(eq + 1)), where);
    }
  }

  void check_required() const {
    for (const auto& k : keys_)
      if (k.required && values_.at(k.name).empty())
        throw ValidationError("missing required key '" + k.name + "' for command '" + command_ + "'");
  }

  const std::string& str(const std::string& key) const { return values_.at(key); }

  double num(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ValidationError(key + ": expected a number, got '" + v + "'");
    }
  }

  long long integer(const std::string& key) const {
    const std::string& v = str(key);
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ValidationError(key + ": expected an integer, got '" + v + "'");
    }
  }

  double positive(const std::string& key) const {
    const double x = num(key);
    if (!(x > 0.0)) throw ValidationError(key + ": must be positive");
    return x;
  }

  int count(const std::string& key, long long lo = 1) const {
    const long long x = integer(key);
    if (x < lo || x > 2'000'000'000LL) throw ValidationError(key + ": must be an integer >= " + std::to_string(lo));
    return static_cast<int>(x);
  }

  /// Comma-separated numbers; strictly increasing unless `increasing` is false, then merely distinct.
  std::vector<double> list(const std::string& key, bool increasing = true) const {
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      try {
        std::size_t used = 0;
        out.push_back(std::stod(item, &used));
        if (used != item.size()) throw std::invalid_argument(item);
      } catch (const std::exception&) {
        throw ValidationError(key + ": bad list entry '" + item + "'");
      }
    }
    if (out.empty()) throw ValidationError(key + ": empty list");
    for (std::size_t i = 1; i < out.size(); ++i) {
      if (increasing && !(out[i] > out[i - 1])) throw ValidationError(key + ": list must be strictly increasing");
      for (std::size_t j = 0; j < i; ++j)
        if (out[i] == out[j]) throw ValidationError(key + ": repeated value in list");
    }
    return out;
  }

  std::string choice(const std::string& key, std::initializer_list<const char*> options) const {
    for (const char* o : options)
      if (str(key) == o) return str(key);
    std::string msg = key + ": expected one of";
    for (const char* o : options) msg += std::string(" ") + o;
    throw ValidationError(msg + ", got '" + str(key) + "'");
  }

  Kernel kernel() const {
    try {
      return parse_kernel(str("kernel"));
    } catch (const ValidationError& e) {
      const std::string what = e.what();
      throw ValidationError(what.rfind("kernel", 0) == 0 ? what : "kernel: " + what);
    }
  }

  LatticeFamily family() const {
    return choice("lattice", {"fcs", "tri"}) == "fcs" ? LatticeFamily::FaceCenteredSquare : LatticeFamily::Triangular;
  }

  Lattice lattice(double eps) const {
    return family() == LatticeFamily::FaceCenteredSquare ? Lattice::face_centered_square(eps)
                                                         : Lattice::triangular(eps);
  }

  std::uint64_t seed() const {
    const std::string& v = str("seed");
    try {
      std::size_t used = 0;
      const unsigned long long x = std::stoull(v, &used, 0);
      if (used != v.size() || v.front() == '-') throw std::invalid_argument(v);
      return x;
    } catch (const std::exception&) {
      throw ValidationError("seed: expected a non-negative integer, got '" + v + "'");
    }
  }

  std::size_t memory_cap() const {
    return static_cast<std::size_t>(positive("memory-cap-gib") * static_cast<double>(std::size_t{1} << 30));
  }

  /// FNV-1a over the command and every key that affects the output.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](const std::string& s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    };
    feed(command_);
    for (const auto& [k, v] : values_) {
      if (k == "out" || k == "meta" || k == "threads" || k == "calib") continue;
      feed("\n" + k + "=" + v);
    }
    return h;
  }

  std::string hash_hex() const {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << hash();
    return os.str();
  }

  json to_json() const {
    json j;
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

  const std::string& command() const { return command_; }

 private:
  std::string command_;
  std::vector<KeySpec> keys_;
  std::map<std::string, std::string> values_;
  std::set<std::string> given_;
};

/// CSV sink that starts with the reproducibility header.
class Output {
 public:
  explicit Output(const Params& p) {
    if (p.str("out") != "-") {
      file_.open(p.str("out"));
      if (!file_) throw ValidationError("out: cannot write '" + p.str("out") + "'");
    }
    stream() << std::setprecision(12);
    stream() << "# nodalperc " << kVersion << " " << p.command() << "\n";
    stream() << "# config_hash=" << p.hash_hex() << "\n";
    stream() << "# seed=" << p.str("seed") << "\n";
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

json versions() {
  return {{"nodalperc", std::string(kVersion)},
          {"compiler", __VERSION__},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", BOOST_LIB_VERSION},
          {"fftw", std::string(fftw_version)}};
}

void write_meta(const Params& p, double seconds, const json& summary) {
  std::string path = p.str("meta");
  if (path.empty()) {
    if (p.str("out") == "-") return;
    path = p.str("out") + ".json";
  }
  std::ofstream out(path);
  if (!out) throw ValidationError("meta: cannot write '" + path + "'");
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  json j{{"command", p.command()},   {"config", p.to_json()}, {"config_hash", p.hash_hex()},
         {"seed", p.str("seed")},    {"versions", versions()}, {"runtime_seconds", seconds},
         {"finished_at", stamp},     {"summary", summary}};
  out << j.dump(2) << "\n";
}

Color parse_color(const Params& p) {
  return p.choice("color", {"black", "white"}) == "black" ? Color::Black : Color::White;
}

void write_estimates(std::ostream& os, const EstimateTable& t, double eps, const std::string& extra_name,
                     double extra) {
  os << "s,eps," << extra_name << ",successes,replicates,p_hat,wilson_lo,wilson_hi\n";
  for (const auto& r : t.rows)
    os << r.scale << ',' << eps << ',' << extra << ',' << r.successes << ',' << r.replicates << ',' << r.p_hat << ','
       << r.wilson.lo << ',' << r.wilson.hi << '\n';
}

json timings(const EstimateTable& t) {
  json j = json::array();
  for (const auto& r : t.rows) j.push_back({{"s", r.scale}, {"wall_time", r.wall_time}});
  return j;
}

Experiment base_experiment(const Params& p) {
  Experiment ex;
  ex.kernel = p.kernel();
  ex.family = p.family();
  ex.eps = p.positive("eps");
  ex.scales = p.list("s");
  ex.replicates = p.count("reps", 100);
  ex.seed = p.seed();
  ex.threads = p.count("threads");
  ex.memory_cap = p.memory_cap();
  ex.confidence = p.num("confidence");
  if (!(ex.confidence > 0.0 && ex.confidence < 1.0)) throw ValidationError("confidence: must lie in (0, 1)");
  return ex;
}

json cmd_cross(const Params& p, bool rsw) {
  Experiment ex = base_experiment(p);
  ex.event.type = EventType::Crossing;
  ex.event.rho = p.positive("rho");
  if (!rsw) {
    ex.event.side = p.choice("side", {"lr", "tb"}) == "lr" ? SidePair::LeftRight : SidePair::TopBottom;
    ex.event.color = parse_color(p);
  }
  const auto t = run(ex);
  Output out(p);
  write_estimates(out.stream(), t, ex.eps, "rho", ex.event.rho);
  json summary{{"timings", timings(t)}};
  if (rsw) {
    double min_lo = 1.0;
    for (const auto& r : t.rows) min_lo = std::min(min_lo, r.wilson.lo);
    summary["min_wilson_lo"] = min_lo;
    summary["largest_over_smallest"] = t.rows.back().p_hat / std::max(t.rows.front().p_hat, 1e-300);
    std::cerr << "min wilson_lo = " << min_lo << "\n";
  }
  return summary;
}

json cmd_circuit(const Params& p) {
  Experiment ex = base_experiment(p);
  ex.event.type = EventType::Circuit;
  ex.event.inner = p.positive("inner");
  if (!(ex.event.inner < 1.0)) throw ValidationError("inner: must be below 1");
  ex.event.color = parse_color(p);
  const auto t = run(ex);
  Output out(p);
  write_estimates(out.stream(), t, ex.eps, "inner", ex.event.inner);
  return {{"timings", timings(t)}};
}

json cmd_onearm(const Params& p) {
  const double s = p.positive("s");
  const auto ts = p.list("t");
  if (ts.front() <= s) throw ValidationError("t: every outer radius must exceed s");
  const double eps = p.positive("eps");
  const int reps = p.count("reps", 100);
  SamplingOptions opt;
  opt.seed = p.seed();
  opt.threads = p.count("threads");
  opt.memory_cap = p.memory_cap();
  const auto t = one_arm_table(p.kernel(), eps, s, ts, reps, opt, p.num("confidence"));
  Output out(p);
  auto& os = out.stream();
  os << "s,t,ratio,eps,successes,replicates,p_hat,wilson_lo,wilson_hi\n";
  for (const auto& r : t.rows)
    os << s << ',' << r.scale << ',' << s / r.scale << ',' << eps << ',' << r.successes << ',' << r.replicates << ','
       << r.p_hat << ',' << r.wilson.lo << ',' << r.wilson.hi << '\n';
  json summary{{"timings", timings(t)}};
  if (ts.size() >= 4) {
    const auto fit = fit_one_arm(arm_points(t, s), p.count("bootstrap"), p.seed());
    summary["eta_hat"] = fit.eta_hat;
    summary["eta_ci"] = {fit.ci.lo, fit.ci.hi};
    summary["warnings"] = fit.warnings;
    for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
    std::cerr << "eta_hat = " << fit.eta_hat << "  95% CI [" << fit.ci.lo << ", " << fit.ci.hi << "]\n";
  }
  return summary;
}

json cmd_census(const Params& p) {
  const Kernel kernel = p.kernel();
  const double s = p.positive("s");
  const auto eps_list = p.list("eps", false);
  for (double e : eps_list)
    if (!(e > 0.0)) throw ValidationError("eps: must be positive");
  const int k = p.count("k", 4);
  const int reps = p.count("reps");
  const double conf = p.num("confidence");
  std::vector<EdgeCrossingReport> reports;
  for (std::size_t i = 0; i < eps_list.size(); ++i)
    reports.push_back(double_crossing_census(kernel, p.lattice(eps_list[i]), s, k, reps, stream_seed(p.seed(), i),
                                             conf, p.memory_cap()));
  Output out(p);
  auto& os = out.stream();
  os << "s,eps,k,edges,replicates,flagged_fraction,fraction_se,p_clean,wilson_lo,wilson_hi\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    os << s << ',' << eps_list[i] << ',' << k << ',' << r.edges_total << ',' << r.replicates << ','
       << r.flagged_fraction << ',' << r.fraction_se << ',' << r.p_clean << ',' << r.p_clean_interval.lo << ','
       << r.p_clean_interval.hi << '\n';
  }
  return {{"lower_bound_note", "subsampled edges only reveal sign changes between sample points"}};
}

json cmd_tv(const Params& p) {
  const int m = p.count("m"), n = p.count("n");
  const double within = p.num("within"), eta = p.num("eta");
  if (!(eta >= 0.0 && eta <= 1.0)) throw ValidationError("eta: must lie in [0, 1]");
  if (!(within > -1.0 && within < 1.0)) throw ValidationError("within: must lie in (-1, 1)");
  const std::string method = p.choice("method", {"exact", "mc", "both"});
  const auto bg = BlockGaussian::equicorrelated(m, n, within, eta);
  Output out(p);
  auto& os = out.stream();
  os << "m,n,within,eta,method,tv,error,bound\n";
  const double bound = bakounine_bound(m, n, eta);
  if (method != "mc") {
    const auto r = tv_exact(bg, p.positive("tolerance"));
    os << m << ',' << n << ',' << within << ',' << eta << ",exact," << r.tv << ',' << r.error << ',' << bound << '\n';
  }
  if (method != "exact") {
    const auto r = tv_monte_carlo(bg, p.count("samples"), p.seed());
    os << m << ',' << n << ',' << within << ',' << eta << ",mc," << r.estimate << ',' << r.std_error << ',' << bound
       << '\n';
  }
  return json::object();
}

json cmd_constants(const Params& p) {
  PipelineOptions opt;
  opt.alpha_lower = p.positive("alpha-lower");
  const double c0 = p.num("c0"), nu = p.num("nu");
  if (!(c0 > 0.0 && c0 < 1.0)) throw ValidationError("c0: must lie in (0, 1)");
  if (!(nu > 0.0 && nu < 0.5)) throw ValidationError("nu: must lie in (0, 1/2)");
  const RswConstants r = pipeline(c0, nu, opt);
  Output out(p);
  auto& os = out.stream();
  os << std::setprecision(17);
  os << "c0,nu,logQ1,logq2,logq2_tilde,logQ2,logQ3,log_tau1,gamma_nu,log_s_omega,s_nu_floor,log_s_nu,alpha_lower,"
        "log_t_nu\n";
  os << r.c0 << ',' << r.nu << ',' << r.log_Q1 << ',' << r.log_q2 << ',' << r.log_q2_tilde << ',' << r.log_Q2 << ','
     << r.log_Q3 << ',' << r.log_tau1.str() << ',' << r.gamma_nu << ',' << r.log_s_omega.str() << ',' << r.s_nu_floor
     << ',' << r.log_s_nu.str() << ',' << r.alpha_lower << ',' << r.log_t_nu.str() << '\n';
  return json::object();
}

json cmd_sample(const Params& p) {
  const Kernel kernel = p.kernel();
  const double s = p.positive("s"), eps = p.positive("eps");
  check_memory(sampling_grid(p.lattice(eps), centered_box(s).rect()), p.memory_cap());
  const Patch patch = enumerate(p.lattice(eps), centered_box(s));
  std::vector<double> values(patch.num_vertices());
  if (p.choice("method", {"circulant", "cholesky"}) == "circulant") {
    const auto sample = make_circulant(kernel, patch.grid).sample(p.seed());
    for (std::size_t v = 0; v < values.size(); ++v) values[v] = sample.values[patch.grid_index[v]];
  } else {
    values = sample_cholesky(kernel, patch.positions, p.seed()).values;
  }
  Output out(p);
  auto& os = out.stream();
  os << std::setprecision(17) << "x,y,value,black\n";
  for (std::size_t v = 0; v < values.size(); ++v)
    os << patch.positions[v].x << ',' << patch.positions[v].y << ',' << values[v] << ',' << (values[v] > 0.0) << '\n';
  return {{"vertices", values.size()}};
}

json cmd_calibrate(const Params& p) {
  const Kernel kernel = p.kernel();
  const auto lambdas = p.list("lambda");
  const double delta = p.positive("delta");
  SamplingOptions opt;
  opt.seed = p.seed();
  opt.threads = p.count("threads");
  opt.memory_cap = p.memory_cap();
  const double eps = p.positive("eps");
  const auto t = small_box_positivity(kernel, lambdas, eps, p.count("reps", 100), opt, p.num("confidence"));
  const auto mom = spectral_moments(kernel);
  Output out(p);
  auto& os = out.stream();
  os << "lambda,eps,vertices,successes,replicates,p_hat,wilson_lo,wilson_hi\n";
  for (const auto& r : t.rows)
    os << r.lambda << ',' << eps << ',' << r.vertices << ',' << r.successes << ',' << p.str("reps") << ',' << r.p_hat
       << ',' << r.wilson.lo << ',' << r.wilson.hi << '\n';
  const double lam = t.lambda_calibrated(delta);
  if (!p.str("calib").empty()) {
    std::ofstream kv(p.str("calib"));
    if (!kv) throw ValidationError("calib: cannot write '" + p.str("calib") + "'");
    kv << std::setprecision(17) << "# nodalperc calibration\n"
       << "format_version = 1\n"
       << "config_hash = " << p.hash_hex() << "\n"
       << "seed = " << p.str("seed") << "\n"
       << "kernel = " << p.str("kernel") << "\n"
       << "eps = " << eps << "\n"
       << "delta = " << delta << "\n"
       << "lambda_calibrated = " << lam << "\n"
       << "alpha_lower = " << lam / 4.0 << "\n"
       << "lambda2 = " << mom.lambda2 << "\n"
       << "lambda4 = " << mom.lambda4 << "\n"
       << "tangency_density = " << tangency_density(mom) << "\n";
  }
  std::cerr << "lambda_calibrated = " << lam << "\n";
  return {{"lambda_calibrated", lam}, {"alpha_lower", lam / 4.0}};
}

}  // namespace

int main(int argc, char** argv) {
  const auto table = command_table();
  CLI::App app{"nodalperc: Monte Carlo experiments on nodal percolation of planar Gaussian fields"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::string> config_files;
  for (const auto& [name, keys] : table) {
    auto* sub = app.add_subcommand(name, "run the " + name + " command");
    sub->add_option("--config", config_files[name], "flat key = value config file");
    for (const auto& k : keys) {
      std::string help = k.help;
      if (!k.fallback.empty()) help += " [" + k.fallback + "]";
      if (k.required) help += " (required)";
      sub->add_option("--" + k.name, raw[name][k.name], help);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string cmd = sub->get_name();
  const auto t0 = std::chrono::steady_clock::now();
  try {
    Params params(cmd, table.at(cmd));
    if (!config_files[cmd].empty()) params.load_file(config_files[cmd]);
    for (const auto& k : table.at(cmd))
      if (sub->get_option("--" + k.name)->count() > 0) params.set(k.name, raw[cmd][k.name], "command line");
    params.check_required();

    json summary;
    if (cmd == "cross") summary = cmd_cross(params, false);
    else if (cmd == "rsw") summary = cmd_cross(params, true);
    else if (cmd == "circuit") summary = cmd_circuit(params);
    else if (cmd == "onearm") summary = cmd_onearm(params);
    else if (cmd == "nodal-census") summary = cmd_census(params);
    else if (cmd == "tv") summary = cmd_tv(params);
    else if (cmd == "constants") summary = cmd_constants(params);
    else if (cmd == "sample") summary = cmd_sample(params);
    else if (cmd == "calibrate") summary = cmd_calibrate(params);
    write_meta(params, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(), summary);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
