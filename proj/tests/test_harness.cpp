#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hrlab/harness.hpp"

using namespace hrlab;
using namespace hrlab::harness;

namespace {

Series power_law(double amp, double slope, int n, double noise = 0.0, unsigned seed = 1) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> eps(0.0, noise);
  Series s{"s", {}};
  for (int i = 0; i < n; ++i) {
    const double x = 10.0 * std::pow(10.0, static_cast<double>(i) / (n - 1));
    s.points.push_back({x, amp * std::pow(x, slope) * std::exp(noise > 0 ? eps(rng) : 0.0), 0.0});
  }
  return s;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hrlab-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("log-log fit recovers an exact power law") {
  const Fit f = fit_series("p", power_law(3.0, -1.25, 9));
  CHECK(f.slope == doctest::Approx(-1.25).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(f.ci < 1e-10);
}

TEST_CASE("log-log fit of a constant series has zero slope") {
  const Fit f = fit_series("c", power_law(0.7, 0.0, 6));
  CHECK(std::abs(f.slope) < 1e-12);
}

TEST_CASE("seeded noisy power law: slope within its confidence interval") {
  const Fit f = fit_series("n", power_law(1.0, -0.5, 40, 0.05, 7));
  CHECK(f.ci > 0);
  CHECK(std::abs(f.slope + 0.5) <= f.ci);
  // same seed, same fit
  const Fit g = fit_series("n", power_law(1.0, -0.5, 40, 0.05, 7));
  CHECK(f.slope == g.slope);
}

TEST_CASE("fit window restricts the points") {
  Series s = power_law(1.0, -2.0, 10);
  s.points.back().y = 1.0;  // outlier outside the window
  const Fit f = fit_series("w", s, 0.0, 90.0);
  CHECK(f.slope == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("canonical json hash ignores key order and whitespace") {
  const json a = json::parse(R"({"b": 1, "a": {"y": [1, 2.5], "x": "s"}})");
  const json b = json::parse(R"({"a":{"x":"s","y":[1,2.5]},"b":1})");
  CHECK(canonical_json(a) == canonical_json(b));
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 64);
  const json c = json::parse(R"({"a":{"x":"s","y":[1,2.5]},"b":2})");
  CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("sha256 of known inputs") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("strict merge rejects unknown keys; lenient merge drops them") {
  const json d = default_config("decay");
  const json user = json::parse(R"({"no_such_key": 1})");
  CHECK_THROWS_AS(merge_config(d, user, true), ConfigError);
  CHECK(merge_config(d, user, false) == d);
  const json nested = json::parse(R"({"thresholds": {"bogus": 1}})");
  CHECK_THROWS_AS(merge_config(d, nested, true), ConfigError);
}

TEST_CASE("merge overrides nested values and keeps the rest") {
  const json d = default_config("cluster");
  json user = json::object();
  user["local"] = {{"amplitude", 0.5}};
  const json m = merge_config(d, user, true);
  CHECK(m["local"]["amplitude"] == 0.5);
  CHECK(m["local"]["radius"] == d["local"]["radius"]);
  CHECK(config_hash(m) != config_hash(d));
}

TEST_CASE("every experiment has defaults with thresholds and a stable hash") {
  for (const std::string& e : experiment_names()) {
    const json c = default_config(e);
    CHECK(c.at("experiment") == e);
    CHECK(c.contains("thresholds"));
    CHECK(config_hash(c) == config_hash(default_config(e)));
  }
  CHECK_THROWS_AS(default_config("nonsense"), ConfigError);
}

TEST_CASE("load_config accepts a bare block and a per-experiment document") {
  const auto dir = scratch_dir("load");
  {
    std::ofstream(dir / "bare.json") << R"({"threads_hint": 1})";
    std::ofstream(dir / "doc.json") << R"({"decay": {"thresholds": {"plancherel_rel": 1e-5}}})";
    std::ofstream(dir / "bad.json") << "{ not json";
  }
  CHECK_THROWS_AS(load_config(dir / "bare.json", "decay", true), ConfigError);
  CHECK(load_config(dir / "bare.json", "decay", false) == default_config("decay"));
  const json c = load_config(dir / "doc.json", "decay", true);
  CHECK(c["thresholds"]["plancherel_rel"] == 1e-5);
  CHECK_THROWS_AS(load_config(dir / "bad.json", "decay", false), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "missing.json", "decay", false), ConfigError);
}

TEST_CASE("check relations") {
  Record r;
  CHECK(r.check("a", 1.0, "<", 2.0).pass);
  CHECK_FALSE(r.check("b", 2.0, "<", 2.0).pass);
  CHECK(r.check("c", 2.0, "<=", 2.0).pass);
  CHECK(r.check("d", 3.0, ">", 2.0).pass);
  CHECK(r.check("e", 2.0, ">=", 2.0).pass);
  CHECK_FALSE(r.check("f", std::nan(""), "<=", 2.0).pass);
}

TEST_CASE("verdict logic") {
  Record r;
  r.check("ok", 1.0, "<", 2.0);
  CHECK(decide_verdict(r) == "pass");

  r.ledger.push_back({"small", 1e-3, 1.0});
  CHECK(decide_verdict(r) == "pass");

  Record f = r;
  f.check("bad", 3.0, "<", 2.0);
  CHECK(decide_verdict(f) == "fail");

  // the ledger exceeding 10% of the signal overrides both pass and fail
  Record big = f;
  big.ledger.push_back({"large", 0.2, 1.0});
  CHECK(decide_verdict(big) == "inconclusive");

  // the ratio is per item: a large absolute discard next to a larger signal is fine
  Record per = r;
  per.ledger.push_back({"big but resolved", 5.0, 100.0});
  CHECK(decide_verdict(per) == "pass");
  CHECK(ledger_json(per)["ratio"].get<double>() == doctest::Approx(0.05));

  Record probe = r;
  probe.claims_verdict = false;
  CHECK(decide_verdict(probe) == "inconclusive");
}

TEST_CASE("exit codes") {
  CHECK(exit_code({"pass", "pass"}) == 0);
  CHECK(exit_code({}) == 0);
  CHECK(exit_code({"pass", "inconclusive"}) == 3);
  CHECK(exit_code({"inconclusive", "fail", "pass"}) == 2);
}

TEST_CASE("double formatting round-trips and ignores locale") {
  for (double x : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(INFINITY) == "inf");
}

TEST_CASE("series csv format") {
  Series s{"t", {{1.0, 0.5, 0.0}, {2.0, 0.25, 1e-9}}};
  CHECK(series_csv(s) == "x,y,err\n1,0.5,0\n2,0.25,1e-09\n");
}

TEST_CASE("record layout, schema and atomic writes") {
  const auto out = scratch_dir("record");
  Record r;
  r.experiment = "decay";
  r.config_hash = config_hash(default_config("decay"));
  Series& s = r.add_series("sup_d1");
  s.points = {{10, 1, 0}, {20, 0.5, 0}, {40, 0.25, 0}, {80, 0.125, 0}, {160, 0.0625, 0}};
  r.fits.push_back(fit_series("sup_d1", s));
  r.check("slope", -1.0, "<=", 0.0);
  r.verdict = decide_verdict(r);

  const auto dir = write_record(r, out);
  CHECK(dir == out / ("decay-" + r.config_hash.substr(0, 8)));
  CHECK(std::filesystem::exists(dir / "series-sup_d1.csv"));
  for (const auto& entry : std::filesystem::directory_iterator(dir)) CHECK(entry.path().extension() != ".tmp");

  const json j = json::parse(slurp(dir / "record.json"));
  for (const char* key : {"schema_version", "experiment", "config_hash", "series", "fits", "predicted", "verdict",
                          "truncation_ledger", "runtime_s"})
    CHECK(j.contains(key));
  CHECK(j["schema_version"] == 1);
  CHECK(j["verdict"] == "pass");
  CHECK(j["fits"][0]["slope"].get<double>() == doctest::Approx(-1.0));

  // rewriting the same record yields identical bytes
  const std::string first = slurp(dir / "record.json");
  write_record(r, out);
  CHECK(slurp(dir / "record.json") == first);

  write_atomic(out / "plain.txt", "abc");
  write_atomic(out / "plain.txt", "xyz");
  CHECK(slurp(out / "plain.txt") == "xyz");
  CHECK_FALSE(std::filesystem::exists(out / "plain.txt.tmp"));
}

TEST_CASE("run_experiment stamps hash and verdict and is deterministic") {
  const json c = default_config("rsdegree");
  const Record a = run_experiment("rsdegree", c);
  const Record b = run_experiment("rsdegree", c);
  CHECK(a.config_hash == config_hash(c));
  CHECK(a.verdict == "pass");
  nlohmann::ordered_json ja = to_json(a), jb = to_json(b);
  ja.erase("runtime_s");
  jb.erase("runtime_s");
  CHECK(ja.dump() == jb.dump());
  CHECK_THROWS_AS(run_experiment("nonsense", c), ConfigError);
}

TEST_CASE("shipped configs equal the defaults and load strictly") {
  const std::filesystem::path dir = std::filesystem::path(HRLAB_SOURCE_DIR) / "configs";
  for (const std::string& e : experiment_names()) {
    CHECK(load_config(dir / (e + ".json"), e, true) == default_config(e));
    CHECK(load_config(dir / "all.json", e, true) == default_config(e));
  }
}
