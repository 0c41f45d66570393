#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "hrlab/harness.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace hrlab;
using namespace hrlab::harness;

namespace {

json read_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
}

// Per-experiment blocks of an `all` document; a missing block runs the shipped defaults.
std::vector<std::pair<std::string, json>> configs_for_all(const std::string& path, bool strict) {
  json doc = json::object();
  if (!path.empty()) doc = read_document(path);
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  const auto& names = experiment_names();
  if (strict)
    for (auto it = doc.begin(); it != doc.end(); ++it)
      if (std::find(names.begin(), names.end(), it.key()) == names.end())
        throw ConfigError("unknown config key ." + it.key());
  std::vector<std::pair<std::string, json>> out;
  for (const std::string& e : names) {
    const json block = doc.contains(e) ? doc[e] : json::object();
    out.emplace_back(e, merge_config(default_config(e), block, strict, "." + e));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Haag-Ruelle scattering laboratory"};
  std::string experiment, config_path, out_dir = "runs";
  bool strict = false;
  int threads = 0;
  std::string names = "all";
  for (const std::string& e : experiment_names()) names += ", " + e;
  app.add_option("experiment", experiment, "one of: " + names)->required();
  app.add_option("--config", config_path, "JSON config (experiment block, or per-experiment blocks for all)");
  app.add_option("--out", out_dir, "output directory");
  app.add_flag("--strict", strict, "reject unknown config keys");
  app.add_option("--threads", threads, "worker threads (0: runtime default)")->check(CLI::NonNegativeNumber);
  CLI11_PARSE(app, argc, argv);

  try {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif
    std::vector<std::pair<std::string, json>> runs;
    if (experiment == "all") {
      runs = configs_for_all(config_path, strict);
    } else {
      const auto& known = experiment_names();
      if (std::find(known.begin(), known.end(), experiment) == known.end())
        throw ConfigError("unknown experiment '" + experiment + "'");
      runs.emplace_back(experiment, config_path.empty() ? default_config(experiment)
                                                        : load_config(config_path, experiment, strict));
    }
    std::vector<std::string> verdicts;
    for (const auto& [name, config] : runs) {
      const Record r = run_experiment(name, config);
      const auto dir = write_record(r, out_dir);
      write_atomic(dir / "config.json", config.dump(2) + "\n");
      std::cout << name << " " << r.verdict << " " << dir.string() << "\n" << std::flush;
      verdicts.push_back(r.verdict);
    }
    return exit_code(verdicts);
  } catch (const std::exception& e) {
    std::cerr << "hrlab: " << e.what() << "\n";
    return 1;
  }
}
