// Runs the shipped default configs and prints one PASS/FAIL line per acceptance criterion.
#include <cstdio>
#include <functional>
#include <map>
#include <string>

#include "hrlab/harness.hpp"

using namespace hrlab;
using namespace hrlab::harness;

namespace {

struct Criterion {
  const char* id;
  const char* title;
  std::vector<std::string> experiments;
  double budget_s;
  // optional subset of checks (name prefixes) of a single experiment; empty: whole verdicts
  std::vector<std::string> check_prefixes;
};

bool starts_with(const std::string& s, const std::string& p) { return s.compare(0, p.size(), p) == 0; }

}  // namespace

int main(int argc, char** argv) {
  const std::string out = argc > 1 ? argv[1] : "acceptance-runs";
  const std::vector<Criterion> criteria{
      {"AC1", "Plancherel constancy", {"decay"}, 10, {"plancherel"}},
      {"AC2", "dispersive decay slopes", {"decay"}, 120, {"sup_"}},
      {"AC3", "velocity-cone rapid decay", {"velocity"}, 60, {}},
      {"AC4", "damped-family degree recovery", {"rsdegree"}, 60, {}},
      {"AC5", "creation-operator basics", {"singleparticle"}, 180, {}},
      {"AC6", "uniform energy bound with contrast", {"energybound"}, 180, {}},
      {"AC7", "commutator and double-commutator decay", {"commutator", "doublecommutator"}, 300, {}},
      {"AC8", "clustering exponents", {"cluster", "multicluster"}, 300, {}},
      {"AC9", "convergence of scattering states", {"converge"}, 480, {}},
      {"AC10", "Fock structure", {"fock"}, 180, {}},
      {"AC11", "uniform almost-locality", {"almostlocal"}, 120, {}},
      {"AC12", "engine cross-validation", {"engine"}, 60, {}},
      {"AC13", "alternating projections", {"altproj"}, 120, {}}};

  std::map<std::string, Record> done;
  std::map<std::string, std::string> errors;
  auto get = [&](const std::string& e) -> const Record* {
    if (!done.count(e) && !errors.count(e)) {
      try {
        Record r = run_experiment(e, default_config(e));
        write_record(r, out);
        done.emplace(e, std::move(r));
      } catch (const std::exception& ex) {
        errors.emplace(e, ex.what());
      }
    }
    return done.count(e) ? &done.at(e) : nullptr;
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    bool pass = true;
    double runtime = 0;
    std::string detail;
    for (const std::string& e : c.experiments) {
      const Record* r = get(e);
      if (!r) {
        pass = false;
        detail += " " + e + ": error " + errors.at(e);
        continue;
      }
      runtime += r->runtime_s;
      if (c.check_prefixes.empty()) {
        if (r->verdict != "pass") {
          pass = false;
          detail += " " + e + ": " + r->verdict;
          for (const Check& k : r->checks)
            if (!k.pass) detail += " [" + k.name + " = " + format_double(k.value) + " " + k.relation + " " + format_double(k.threshold) + " fails]";
        }
        continue;
      }
      for (const Check& k : r->checks) {
        bool relevant = false;
        for (const std::string& p : c.check_prefixes) relevant = relevant || starts_with(k.name, p);
        if (relevant && !k.pass) {
          pass = false;
          detail += " [" + k.name + " = " + format_double(k.value) + " fails]";
        }
      }
    }
    if (pass && runtime > c.budget_s) detail += " (over the " + format_double(c.budget_s) + " s budget)";
    if (!pass) ++failures;
    std::printf("%s %s %s (%.1f s)%s\n", c.id, pass ? "PASS" : "FAIL", c.title, runtime, detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 2;
}
