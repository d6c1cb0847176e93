#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "coopdelay/config.hpp"
#include "coopdelay/errors.hpp"
#include "coopdelay/pipeline.hpp"
#include "coopdelay/presets.hpp"

namespace fs = std::filesystem;
using namespace coopdelay;

namespace {

struct Overrides {
  std::optional<double> dt;
  std::optional<double> horizon;
  std::string out_dir = ".";
};

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

RunConfig load(const fs::path& path, const Overrides& o) {
  ConfigDocument doc = read_document(path);
  if (o.dt) doc.set("numerics", "dt", num(*o.dt), false);
  if (o.horizon) doc.set("numerics", "horizon", num(*o.horizon), false);
  return build_config(doc, path.stem().string());
}

std::string summary(const RunConfig& cfg, const RunResult& r) {
  std::ostringstream os;
  os << cfg.name << ":";
  if (r.analysis) {
    const auto& f = r.analysis->classification.fate;
    os << " fate " << to_string(f.kind);
    if (f.kind == FateKind::ToEquilibrium || f.kind == FateKind::Bistable) os << " K=" << num(f.K);
  }
  if (r.integration) {
    const auto& o = r.integration->outcome;
    os << ", outcome " << to_string(o.status) << " at t=" << num(o.time) << " (" << num(o.x) << ", " << num(o.y)
       << ")";
  }
  if (r.certification) os << ", certification " << to_string(r.certification->status);
  if (r.error) os << ", " << r.error->stage << " failed: " << r.error->message;
  return os.str();
}

// One config end to end; returns the exit code and the line to print.
std::pair<int, std::string> process(const fs::path& path, const Overrides& o, bool integrate) {
  RunConfig cfg = [&] {
    try {
      return load(path, o);
    } catch (const ValidationError& e) {
      throw std::pair<int, std::string>{kExitValidation, path.string() + ": validate: " + e.what()};
    } catch (const std::exception& e) {
      throw std::pair<int, std::string>{kExitValidation, path.string() + ": load: " + e.what()};
    }
  }();
  const RunResult r = run_pipeline(cfg, integrate);
  const OutputPaths out = write_outputs(cfg, r, o.out_dir);
  std::string line = summary(cfg, r) + " -> " + out.report.string();
  return {r.exit_code, line};
}

int guarded(const fs::path& path, const Overrides& o, bool integrate) {
  try {
    const auto [code, line] = process(path, o, integrate);
    (code == kExitOk ? std::cout : std::cerr) << line << '\n';
    return code;
  } catch (const std::pair<int, std::string>& fail) {
    std::cerr << fail.second << '\n';
    return fail.first;
  } catch (const std::exception& e) {
    std::cerr << path.string() << ": " << e.what() << '\n';
    return 1;
  }
}

int batch(const fs::path& dir, const Overrides& o, unsigned jobs) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".cfg") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    std::cerr << "no .cfg files in " << dir.string() << '\n';
    return kExitValidation;
  }

  std::vector<std::pair<int, std::string>> results(files.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < files.size(); i = next++) {
      try {
        results[i] = process(files[i], o, true);
      } catch (const std::pair<int, std::string>& fail) {
        results[i] = fail;
      } catch (const std::exception& e) {
        results[i] = {1, files[i].string() + ": " + e.what()};
      }
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < std::min<std::size_t>(jobs, files.size()); ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int worst = kExitOk;
  for (const auto& [code, line] : results) {
    (code == kExitOk ? std::cout : std::cerr) << line << '\n';
    worst = std::max(worst, code);
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation and analysis of two-component cooperative systems with distributed delays"};
  app.require_subcommand(1);

  Overrides o;
  auto add_overrides = [&o](CLI::App* sub, bool with_dt) {
    if (with_dt) sub->add_option("--dt", o.dt, "step size")->check(CLI::PositiveNumber);
    sub->add_option("--horizon", o.horizon, "integration horizon")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", o.out_dir, "directory for the report and trajectory");
  };

  std::string config;
  auto* run = app.add_subcommand("run", "classify, integrate and certify one config");
  run->add_option("config", config, "config file")->required();
  add_overrides(run, true);

  auto* cls = app.add_subcommand("classify", "analysis only, no integration");
  cls->add_option("config", config, "config file")->required();
  add_overrides(cls, false);

  std::string dir;
  unsigned jobs = 0;
  auto* bat = app.add_subcommand("batch", "run every .cfg in a directory in parallel");
  bat->add_option("dir", dir, "directory of configs")->required();
  bat->add_option("--jobs", jobs, "worker threads (0: one per core)");
  add_overrides(bat, true);

  auto* preset = app.add_subcommand("preset", "preset catalog");
  preset->require_subcommand(1);
  auto* plist = preset->add_subcommand("list", "list presets and their parameters");
  std::string pname;
  std::vector<std::string> params;
  std::string pout;
  auto* pemit = preset->add_subcommand("emit", "write a preset as a config");
  pemit->add_option("name", pname, "preset name")->required();
  pemit->add_option("--param", params, "parameter as key=value (repeatable)");
  pemit->add_option("-o,--output", pout, "output file (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  if (*run) return guarded(config, o, true);
  if (*cls) return guarded(config, o, false);
  if (*bat) return batch(dir, o, jobs);

  if (*plist) {
    for (const auto& p : preset_catalog()) {
      std::cout << p.name << "  " << p.summary << '\n';
      for (const auto& q : p.params) {
        std::cout << "    " << q.name << " = " << q.default_value << "  " << q.meaning << '\n';
      }
    }
    return kExitOk;
  }
  if (*pemit) {
    PresetParams given;
    for (const auto& kv : params) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::cerr << "--param expects key=value, got '" << kv << "'\n";
        return kExitValidation;
      }
      given[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    try {
      const ConfigDocument doc = preset_document(pname, given);
      build_config(doc, pname);  // same gate as hand-written configs
      if (pout.empty()) {
        std::cout << doc.to_text();
      } else {
        std::ofstream os(pout, std::ios::binary);
        if (!os) throw std::runtime_error("cannot write " + pout);
        os << doc.to_text();
      }
    } catch (const ValidationError& e) {
      std::cerr << "preset: " << e.what() << '\n';
      return kExitValidation;
    } catch (const std::exception& e) {
      std::cerr << "preset: " << e.what() << '\n';
      return 1;
    }
    return kExitOk;
  }
  return kExitOk;
}
