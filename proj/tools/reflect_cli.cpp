// Batch front-end: reflect --config run.json --out results/
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "reflect/experiment.hpp"

namespace {

enum Exit { ok = 0, config_error = 2, numerical_failure = 3, precondition_failure = 4 };

int fail(int code, const std::string& kind, const std::string& message) {
  reflect::Json err{{"error", kind}, {"exit_code", code}, {"message", message}};
  std::cerr << err.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reflection-principle controllability experiments"};
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;
  std::optional<std::string> constants;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  app.add_option("--config", config_path, "Experiment configuration (JSON)")->required();
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--format", format, "Tabular output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--constants", constants, "K=<v>,D2=<v>,D3=<v> (D1 also accepted)");
  app.add_option("--seed", seed, "Seed for random datum batches");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail(config_error, "config", e.what());
  }

  try {
    reflect::ExperimentConfig cfg = reflect::load_config(config_path);
    if (out_dir) cfg.out_dir = *out_dir;
    if (format) cfg.format = *format;
    if (constants) reflect::apply_constants_override(cfg.constants, *constants);
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    const reflect::RunResult res = reflect::run(cfg);
    std::cout << reflect::to_string(cfg.command) << ": " << res.summary << " -> " << *cfg.out_dir << '\n';
    return res.status;
  } catch (const reflect::PreconditionViolation& e) {
    return fail(precondition_failure, "precondition-violation", e.relation() + ": " + e.what());
  } catch (const reflect::NumericalFailure& e) {
    return fail(numerical_failure, "numerical-failure", e.what());
  } catch (const reflect::DomainError& e) {
    return fail(numerical_failure, "domain-error", e.what());
  } catch (const reflect::UnsupportedConfiguration& e) {
    return fail(config_error, "unsupported-configuration", e.what());
  } catch (const reflect::InvalidArgument& e) {
    return fail(config_error, "config", e.what());
  } catch (const std::exception& e) {
    return fail(1, "internal", e.what());
  }
}
