#pragma once

#include <filesystem>
#include <limits>
#include <json.hpp>
#include <string>
#include <vector>

#include "hrlab/common.hpp"

namespace hrlab::harness {

using json = nlohmann::json;

struct Point {
  double x = 0, y = 0, err = 0;
};

struct Series {
  std::string name;
  std::vector<Point> points;
};

struct Fit {
  std::string name;
  double slope = 0, intercept = 0, ci = 0, residual = 0;
};

// One verdict ingredient: `value` compared against `threshold` by `relation` ("<=", ">=", "<", ">").
struct Check {
  std::string name;
  double value = 0;
  std::string relation;
  double threshold = 0;
  bool pass = false;
};

// Discarded norm of one measured quantity next to the signal it perturbs.
struct LedgerItem {
  std::string source;
  double discarded = 0;
  double signal = 0;
};

struct Record {
  std::string experiment;
  std::string config_hash;
  std::vector<Series> series;
  std::vector<Fit> fits;
  json predicted = json::object();
  std::vector<Check> checks;
  std::vector<LedgerItem> ledger;
  double ledger_limit = 0.1;  // share of the smallest signal the ledger may reach
  bool claims_verdict = true;  // false for boundary probes outside the hypotheses
  std::string verdict;
  double runtime_s = 0;

  Check& check(std::string name, double value, std::string relation, double threshold);
  Series& add_series(std::string name);
};

const std::vector<std::string>& experiment_names();

// Shipped defaults of one experiment; every threshold lives under "thresholds".
json default_config(const std::string& experiment);
// Overlay `user` on `defaults`. Strict mode rejects keys absent from the defaults.
json merge_config(const json& defaults, const json& user, bool strict, const std::string& where = "");
// Config of `experiment` from a file: either the experiment block itself or, for a document
// with per-experiment blocks (as used by `all`), the block under the experiment name.
json load_config(const std::filesystem::path& path, const std::string& experiment, bool strict);

std::string canonical_json(const json& j);
std::string sha256_hex(const std::string& data);
std::string config_hash(const json& config);

// Log-log least squares over the points with x in [x_lo, x_hi].
Fit fit_series(const std::string& name, const Series& s, double x_lo = 0.0,
               double x_hi = std::numeric_limits<double>::infinity());

// pass / fail / inconclusive from the checks, the ledger and the claim flag.
std::string decide_verdict(const Record& r);
json ledger_json(const Record& r);
nlohmann::ordered_json to_json(const Record& r);

// Locale-independent shortest round-trip decimal.
std::string format_double(double x);
void write_atomic(const std::filesystem::path& path, const std::string& content);
std::string series_csv(const Series& s);
// <out>/<experiment>-<hash8>/record.json plus one CSV per series; returns the directory.
std::filesystem::path write_record(const Record& r, const std::filesystem::path& out);

// Runs one experiment on a merged config; stamps hash, verdict and runtime.
Record run_experiment(const std::string& experiment, const json& config);

// 0 all pass, 2 any fail, 3 inconclusive only.
int exit_code(const std::vector<std::string>& verdicts);

// Wave-packet decay exponent kappa_eff = -(sup-norm slope) of a d = 1 packet over [tau_lo, tau_hi],
// measured once per packet and range.
double measured_kappa(double mass, double k0, double radius, int smoothness, double tau_lo, double tau_hi);

// Experiment bodies (config already merged).
Record exp_decay(const json& c);
Record exp_velocity(const json& c);
Record exp_rsdegree(const json& c);
Record exp_altproj(const json& c);
Record exp_engine(const json& c);
Record exp_singleparticle(const json& c);
Record exp_energybound(const json& c);
Record exp_almostlocal(const json& c);
Record exp_commutator(const json& c);
Record exp_doublecommutator(const json& c);
Record exp_cluster(const json& c);
Record exp_multicluster(const json& c);
Record exp_converge(const json& c);
Record exp_fock(const json& c);

}  // namespace hrlab::harness
