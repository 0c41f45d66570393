#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <sstream>

#include "hrlab/harness.hpp"
#include "hrlab/numerics.hpp"
#include "hrlab/wavepacket.hpp"

namespace hrlab::harness {

namespace {

json band(double center, double half_width, int smoothness) {
  return {{"center", center}, {"half_width", half_width}, {"smoothness", smoothness}};
}

json packet(double k0, double radius, int smoothness = 4) {
  return {{"k0", k0}, {"radius", radius}, {"smoothness", smoothness}};
}

json log_grid(double lo, double hi, int points) { return {{"min", lo}, {"max", hi}, {"points", points}}; }

// Model, local field, damped family and time smearing shared by the creation-operator experiments.
json creation_base(int n, double amplitude, double gamma, bool wide_band, double window = 120.0) {
  json c;
  c["model"] = {{"n", n}, {"dk", 4.0 / n}, {"mass", 1.0}};
  c["local"] = {{"radius", 1.0}, {"smoothness", 4}, {"amplitude", amplitude}};
  c["rs"] = {{"gamma", gamma}, {"degree", 7}};
  c["chi"] = {{"energy", wide_band ? band(2.2, 1.45, 4) : band(1.2, 0.45, 4)},
              {"momentum", band(0.0, 1.0, 4)},
              {"window_radius", window},
              {"ramp_fraction", 0.5},
              {"window_smoothness", 4},
              {"t_step", 0.25},
              {"x_step", 0.25},
              {"leakage_budget", 1e-3}};
  c["seed"] = 1;
  return c;
}

json make_defaults(const std::string& e) {
  if (e == "decay") {
    return {{"d1", {{"mass", 1.0}, {"k0", 0.0}, {"radius", 2.0}, {"smoothness", 8}, {"n", 8192}, {"box", 1000.0}}},
            {"d3_massive", {{"mass", 1.0}, {"radius", 2.0}, {"smoothness", 8}, {"radial_n", 16384}, {"radial_dk", 0.005}}},
            {"d3_massless",
             {{"shell", 2.0}, {"radius", 1.0}, {"smoothness", 8}, {"radial_n", 16384}, {"radial_dk", 0.005}}},
            {"lattice3d", {{"n", 64}, {"dk", 0.1}, {"k0", 0.3}, {"radius", 1.0}, {"times", {1.0, 2.0, 4.0, 8.0}}}},
            {"plancherel_times", log_grid(1.0, 200.0, 12)},
            {"fit_times", log_grid(20.0, 200.0, 11)},
            {"seed", 1},
            {"thresholds",
             {{"plancherel_rel", 1e-6}, {"sup_slope_tol", 0.1}, {"massless_sup_slope_tol", 0.1}, {"l1_slope_tol", 0.15}}}};
  }
  if (e == "velocity") {
    return {{"packet", {{"mass", 1.0}, {"k0", 0.0}, {"radius", 2.0}, {"smoothness", 8}}},
            {"deltas", {0.25, 0.3, 0.5}},
            {"times", log_grid(20.0, 200.0, 11)},
            {"massless", {{"shell", 2.0}, {"radius", 1.0}, {"smoothness", 8}, {"n", 32}, {"dk", 0.25}, {"probe_speed", 0.3}}},
            {"cone", {{"radius", 0.5}, {"smoothness", 8}, {"n", 16384}, {"box", 4000.0}, {"margin", 0.2}}},
            {"seed", 1},
            {"thresholds", {{"exterior_slope", -6.0}, {"interior_slope", -6.0}, {"cone_tail_slope", -4.0}}}};
  }
  if (e == "rsdegree") {
    return {{"lattice", {{"n", 64}, {"dk", 0.25}}},
            {"local", {{"radius", 0.5}, {"smoothness", 8}}},
            {"gammas", {0.5, 1.0, 2.0}},
            {"degree", 7},
            {"betas", log_grid(1e-3, 1e-1, 8)},
            {"seed", 1},
            {"thresholds", {{"gamma_tol", 0.15}}}};
  }
  if (e == "altproj") {
    return {{"measure", {{"mass", 1.0}, {"eps", 0.5}, {"alpha", 0}}},
            {"lattice", {{"n", 128}, {"dk", 0.2}, {"shift", 0.5}}},
            {"target", {{"radius", 0.5}, {"smoothness", 8}}},
            {"dictionary",
             {{"radius", 1.0}, {"x_bumps", 5}, {"bump_fraction", 0.6}, {"s_bumps", 16}, {"s_extent", 20.0}, {"smoothness", 8}}},
            {"iterations", 50},
            {"seed", 1},
            {"thresholds", {{"final_residual", 0.1}, {"max_iterations", 50}}}};
  }
  if (e == "engine") {
    return {{"scenarios", 9},
            {"lattice", {{"n", 16}, {"dk", 0.5}}},
            {"n_max", 4},
            {"seed", 9},
            {"thresholds", {{"matrix_element", 1e-8}, {"identity", 1e-10}}}};
  }
  if (e == "singleparticle") {
    json c = creation_base(128, 0.02, 1.0, false);
    c["packet"] = packet(0.0, 1.0);
    c["mu"] = 0.5;
    c["taus"] = log_grid(10.0, 100.0, 6);
    c["annihilation_windows"] = {120.0, 240.0};
    c["probe_tau"] = 30.0;
    c["thresholds"] = {{"slope_tol", 0.15},
                       {"final_relative_error", 1e-2},
                       {"convolution", 1e-8},
                       {"annihilation", 1e-3},
                       {"window_halving", 0.5}};
    return c;
  }
  if (e == "energybound") {
    json c = creation_base(64, 0.005, 1.0, true);
    c["packet"] = packet(0.0, 0.5);
    c["mu"] = 0.3;
    c["taus"] = log_grid(20.0, 200.0, 6);
    c["energy_max"] = 1.5;
    c["thresholds"] = {{"ratio_spread", 10.0}, {"unfiltered_growth", 10.0}};
    return c;
  }
  if (e == "almostlocal") {
    json c = creation_base(64, 0.1, 1.0, false);
    c["radii"] = log_grid(6.0, 60.0, 8);
    c["betas"] = log_grid(1e-2, 1.0, 5);
    c["thresholds"] = {{"tail_slope", -4.0}, {"constant_spread", 3.0}};
    return c;
  }
  if (e == "commutator" || e == "doublecommutator") {
    json c = creation_base(2048, 1.0, 1.0, true, 40.0);
    c["local"] = {{"radius", 8.0}, {"smoothness", 8}, {"amplitude", 1.0}};
    c["chi"]["x_step"] = "packet";
    c["mu"] = 0.5;
    if (e == "commutator") {
      c["packets"] = {packet(1.0, 0.5), packet(-1.0, 0.5)};
      c["control_packets"] = {packet(0.5, 0.5), packet(0.5, 0.5)};
      c["taus"] = log_grid(40.0, 400.0, 6);
      c["tau2_fractions"] = {0.0, 1.0};
      c["c_geo"] = "calibrate";
      c["thresholds"] = {{"slope", -4.0}, {"control_slope", -2.0}, {"floor_factor", 10.0}};
    } else {
      c["packets"] = {packet(0.0, 0.5), packet(1.0, 0.5), packet(-1.0, 0.5)};
      c["taus"] = log_grid(25.0, 200.0, 7);
      // B sharing the packet of B_1 decays slower and meets the rounding floor earlier
      c["variant_taus"] = log_grid(20.0, 80.0, 7);
      c["thresholds"] = {{"slope", -4.0}, {"floor_factor", 10.0}};
    }
    return c;
  }
  if (e == "cluster") {
    json c = creation_base(128, 0.01, 0.5, true);
    c["packets_equal"] = {packet(0.0, 1.0), packet(0.0, 1.0)};
    c["packets_disjoint"] = {packet(1.0, 0.8), packet(-1.0, 0.8)};
    c["mu"] = 0.1;
    c["taus"] = log_grid(20.0, 200.0, 9);
    c["thresholds"] = {{"slope_margin", 0.2}};
    return c;
  }
  if (e == "multicluster") {
    json c = creation_base(128, 0.1, 0.5, true);
    c["packets"] = {packet(0.0, 1.0), packet(1.0, 0.8), packet(-1.0, 0.8)};
    c["pair_counts"] = {2, 3};
    c["mu"] = 0.1;
    c["taus"] = log_grid(10.0, 80.0, 6);
    c["thresholds"] = {{"slope_margin", 0.3}};
    return c;
  }
  if (e == "converge") {
    json c = creation_base(128, 0.1, 0.5, true);
    c["packets"] = {packet(1.0, 0.8), packet(-1.0, 0.8)};
    c["mus"] = {0.05, 0.03};
    c["tau0"] = 40.0;
    c["rho"] = "separation";
    c["c_geo"] = "calibrate";
    c["steps"] = 8;
    c["thresholds"] = {{"norm_spread", 3.0}, {"ratio_tol", 0.2}, {"tail_fraction", 0.05}};
    return c;
  }
  if (e == "fock") {
    json c = creation_base(128, 0.1, 0.5, true);
    c["packets"] = {packet(1.0, 0.8), packet(-1.0, 0.8)};
    c["packets_prime"] = {packet(0.9, 0.8), packet(-0.8, 0.7)};
    c["packets_single"] = {packet(0.95, 0.8)};
    c["mu"] = 0.1;
    c["taus"] = log_grid(40.0, 320.0, 5);
    c["thresholds"] = {{"gap", 1e-2}, {"cross_sector", 1e-2}, {"single", 1e-2}, {"permanent", 1e-10}};
    return c;
  }
  throw ConfigError("unknown experiment '" + e + "'");
}

void append_hex(std::string& out, unsigned char b) {
  static const char* digits = "0123456789abcdef";
  out.push_back(digits[b >> 4]);
  out.push_back(digits[b & 15]);
}

bool compare(double v, const std::string& rel, double t) {
  if (!std::isfinite(v)) return false;
  if (rel == "<=") return v <= t;
  if (rel == "<") return v < t;
  if (rel == ">=") return v >= t;
  if (rel == ">") return v > t;
  throw ConfigError("unknown relation " + rel);
}

// Worst share of a signal its own discarded norm could account for.
double ledger_ratio(const Record& r) {
  double worst = 0.0;
  for (const LedgerItem& l : r.ledger) {
    if (l.discarded == 0.0) continue;
    worst = std::max(worst, l.signal > 0 ? l.discarded / l.signal : std::numeric_limits<double>::infinity());
  }
  return worst;
}

}  // namespace

Check& Record::check(std::string name, double value, std::string relation, double threshold) {
  const bool ok = compare(value, relation, threshold);
  checks.push_back({std::move(name), value, std::move(relation), threshold, ok});
  return checks.back();
}

Series& Record::add_series(std::string name) {
  series.push_back({std::move(name), {}});
  return series.back();
}

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"decay",       "velocity",   "rsdegree",   "singleparticle",
                                              "energybound", "almostlocal", "commutator", "doublecommutator",
                                              "cluster",     "multicluster", "converge",  "fock",
                                              "altproj",     "engine"};
  return names;
}

json default_config(const std::string& experiment) {
  json c = make_defaults(experiment);
  c["experiment"] = experiment;
  return c;
}

json merge_config(const json& defaults, const json& user, bool strict, const std::string& where) {
  if (!user.is_object()) throw ConfigError("config" + where + ": expected an object");
  json out = defaults;
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string path = where + "." + it.key();
    if (!defaults.contains(it.key())) {
      if (strict) throw ConfigError("unknown config key " + path);
      continue;
    }
    const json& d = defaults[it.key()];
    if (d.is_object() && it.value().is_object())
      out[it.key()] = merge_config(d, it.value(), strict, path);
    else if (d.is_object() != it.value().is_object())
      throw ConfigError("config key " + path + ": object expected to match the default");
    else
      out[it.key()] = it.value();
  }
  return out;
}

json load_config(const std::filesystem::path& path, const std::string& experiment, bool strict) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  const json defaults = default_config(experiment);
  json block = doc;
  if (doc.contains(experiment) && doc[experiment].is_object() && !defaults.contains(experiment)) block = doc[experiment];
  if (block.contains("experiment") && block["experiment"] != experiment)
    throw ConfigError("config is for experiment " + block["experiment"].dump() + ", not " + experiment);
  return merge_config(defaults, block, strict);
}

std::string canonical_json(const json& j) { return j.dump(); }

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string out;
  for (unsigned int i = 0; i < len; ++i) append_hex(out, md[i]);
  return out;
}

std::string config_hash(const json& config) { return sha256_hex(canonical_json(config)); }

Fit fit_series(const std::string& name, const Series& s, double x_lo, double x_hi) {
  RVec x, y;
  for (const Point& p : s.points)
    if (p.x >= x_lo && p.x <= x_hi) {
      x.push_back(p.x);
      y.push_back(p.y);
    }
  const num::LogLogFit f = num::fit_loglog(x, y);
  return {name, f.slope, f.intercept, f.ci, f.residual};
}

std::string decide_verdict(const Record& r) {
  if (ledger_ratio(r) > r.ledger_limit) return "inconclusive";
  if (!r.claims_verdict) return "inconclusive";
  for (const Check& c : r.checks)
    if (!c.pass) return "fail";
  return "pass";
}

json ledger_json(const Record& r) {
  double disc = 0, sig = std::numeric_limits<double>::infinity();
  json items = json::array();
  for (const LedgerItem& l : r.ledger) {
    disc = std::max(disc, l.discarded);
    sig = std::min(sig, l.signal);
    items.push_back({{"source", l.source}, {"discarded", l.discarded}, {"signal", l.signal}});
  }
  return {{"total_discarded", disc},
          {"smallest_signal", r.ledger.empty() ? json(nullptr) : json(sig)},
          {"ratio", ledger_ratio(r)},
          {"ratio_definition", "max over items of discarded / signal"},
          {"limit", r.ledger_limit},
          {"items", items}};
}

nlohmann::ordered_json to_json(const Record& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["experiment"] = r.experiment;
  j["config_hash"] = r.config_hash;
  j["series"] = nlohmann::ordered_json::array();
  for (const Series& s : r.series) {
    nlohmann::ordered_json pts = nlohmann::ordered_json::array();
    for (const Point& p : s.points) pts.push_back({{"x", p.x}, {"y", p.y}, {"err", p.err}});
    j["series"].push_back({{"name", s.name}, {"points", pts}});
  }
  j["fits"] = nlohmann::ordered_json::array();
  for (const Fit& f : r.fits)
    j["fits"].push_back({{"name", f.name}, {"slope", f.slope}, {"intercept", f.intercept}, {"ci", f.ci}});
  nlohmann::ordered_json pred = r.predicted;
  pred["checks"] = nlohmann::ordered_json::array();
  for (const Check& c : r.checks)
    pred["checks"].push_back(
        {{"name", c.name}, {"value", c.value}, {"relation", c.relation}, {"threshold", c.threshold}, {"pass", c.pass}});
  pred["claims_verdict"] = r.claims_verdict;
  j["predicted"] = pred;
  j["verdict"] = r.verdict;
  j["truncation_ledger"] = ledger_json(r);
  j["runtime_s"] = r.runtime_s;
  return j;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string series_csv(const Series& s) {
  std::string out = "x,y,err\n";
  for (const Point& p : s.points) out += format_double(p.x) + "," + format_double(p.y) + "," + format_double(p.err) + "\n";
  return out;
}

std::filesystem::path write_record(const Record& r, const std::filesystem::path& out) {
  const std::filesystem::path dir = out / (r.experiment + "-" + r.config_hash.substr(0, 8));
  std::filesystem::create_directories(dir);
  for (const Series& s : r.series) write_atomic(dir / ("series-" + s.name + ".csv"), series_csv(s));
  write_atomic(dir / "record.json", to_json(r).dump(2) + "\n");
  return dir;
}

Record run_experiment(const std::string& experiment, const json& config) {
  static const std::map<std::string, std::function<Record(const json&)>> table{
      {"decay", exp_decay},
      {"velocity", exp_velocity},
      {"rsdegree", exp_rsdegree},
      {"altproj", exp_altproj},
      {"engine", exp_engine},
      {"singleparticle", exp_singleparticle},
      {"energybound", exp_energybound},
      {"almostlocal", exp_almostlocal},
      {"commutator", exp_commutator},
      {"doublecommutator", exp_doublecommutator},
      {"cluster", exp_cluster},
      {"multicluster", exp_multicluster},
      {"converge", exp_converge},
      {"fock", exp_fock}};
  const auto it = table.find(experiment);
  if (it == table.end()) throw ConfigError("unknown experiment '" + experiment + "'");
  const auto t0 = std::chrono::steady_clock::now();
  Record r = it->second(config);
  r.experiment = experiment;
  r.config_hash = config_hash(config);
  if (config.contains("thresholds")) r.predicted["thresholds"] = config["thresholds"];
  r.verdict = decide_verdict(r);
  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

int exit_code(const std::vector<std::string>& verdicts) {
  bool inconclusive = false;
  for (const std::string& v : verdicts) {
    if (v == "fail") return 2;
    if (v == "inconclusive") inconclusive = true;
  }
  return inconclusive ? 3 : 0;
}

double measured_kappa(double mass, double k0, double radius, int smoothness, double tau_lo, double tau_hi) {
  static std::mutex mu;
  static std::map<std::string, double> cache;
  const std::string key = sha256_hex(json{mass, k0, radius, smoothness, tau_lo, tau_hi}.dump());
  {
    std::lock_guard<std::mutex> lock(mu);
    const auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  // box wide enough for the spreading packet, lattice fine enough for the support
  const double box = std::max(1000.0, 4.0 * tau_hi);
  const double dk = 2.0 * kPi / box;
  const double k_max = std::abs(k0) + radius;
  const int n = static_cast<int>(num::next_pow2(static_cast<std::size_t>(std::max(8192.0, 4.0 * k_max / dk))));
  const auto wp = wavepacket::make_bump_packet(1, mass, {k0}, radius, smoothness, wavepacket::Lattice{1, n, dk});
  RVec t, y;
  constexpr int kPoints = 9;
  for (int i = 0; i < kPoints; ++i) {
    const double tau = tau_lo * std::pow(tau_hi / tau_lo, static_cast<double>(i) / (kPoints - 1));
    t.push_back(tau);
    y.push_back(wavepacket::lp_norm(wavepacket::evaluate_snapshot(wp, tau), INFINITY));
  }
  const double kappa = -num::fit_loglog(t, y).slope;
  std::lock_guard<std::mutex> lock(mu);
  cache[key] = kappa;
  return kappa;
}

}  // namespace hrlab::harness
