#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "qphase/pipeline.hpp"

int main(int argc, char** argv) {
  using namespace qphase;
  CLI::App app{"qphase: tensor-network and variational phase-diagram tools"};
  std::string command, config_path, out;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool resume = false, quiet = false;
  app.add_option("command", command, "dmrg | idmrg | tebd | scan | map | vqe | vqad (must match the config)");
  app.add_option("--config", config_path, "run configuration (YAML)")->required();
  auto* seed_opt = app.add_option("--seed", seed, "override the master seed");
  auto* out_opt = app.add_option("--out", out, "override the output directory");
  app.add_option("--workers", workers, "threads for grid scans")->check(CLI::PositiveNumber);
  app.add_flag("--resume", resume, "keep finished points of an existing scan dataset");
  app.add_flag("-q,--quiet", quiet, "no progress lines on stdout");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    RunOptions opts;
    if (*seed_opt) opts.seed = seed;
    if (*out_opt) opts.out = out;
    opts.workers = workers;
    opts.resume = resume;
    RunConfig cfg = apply_overrides(load_config(config_path), opts);
    if (!command.empty() && command_from_string(command) != cfg.command)
      throw Error(ErrorCode::ValidationError,
                  "command '" + command + "' does not match the config (" + command_name(cfg.command) + ")");
    run_pipeline(cfg, opts, quiet ? nullptr : &std::cout);
    return 0;
  } catch (const ConfigErrors& e) {
    std::cerr << error_code_name(e.code()) << ":\n";
    for (const auto& i : e.issues()) std::cerr << "  " << i << "\n";
    return exit_code_for(e.code());
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "IoError: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "SolverFailure: " << e.what() << "\n";
    return 2;
  }
}
