// bound: command-line front end for the truncation bounds.
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "poisbound/errors.hpp"
#include "poisbound/experiments.hpp"

namespace pb = poisbound;

namespace {

void print_error(const std::string& code, const std::string& message) {
  std::cerr << nlohmann::json{{"error", code}, {"message", message}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-sided truncation bounds for Poisson's equation"};
  app.set_version_flag("--version", std::string(POISBOUND_VERSION));
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool rigorous = false;
  bool no_timestamp = false;

  auto* run = app.add_subcommand("run", "bounds on A with gap metrics over D");
  run->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_flag("--rigorous", rigorous, "monotone iteration for the lower bounds");
  run->add_flag("--no-timestamp", no_timestamp, "omit timestamps so outputs are byte-stable");

  auto* sweep = app.add_subcommand("sweep", "gap metrics along the truncation schedule");
  sweep->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", out_dir, "output directory")->required();
  sweep->add_flag("--rigorous", rigorous, "monotone iteration for the lower bounds");
  sweep->add_flag("--no-timestamp", no_timestamp, "omit timestamps");

  auto* verify = app.add_subcommand("verify-cert", "check the drift inequality on the check set (default A)");
  verify->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);

  auto* orc = app.add_subcommand("oracle", "exact solution on a clipped box");
  orc->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  orc->add_option("--out", out_dir, "output directory")->required();
  orc->add_flag("--no-timestamp", no_timestamp, "omit timestamps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const pb::RunOptions options{rigorous, !no_timestamp};
  try {
    const pb::RunConfig config = pb::load_config(config_path);
    if (run->parsed()) {
      std::cerr << "warning: drift inequality is checked on "
                << (config.certificate.check ? "the configured check set" : "A") << " only\n";
      const pb::RunResult r = pb::run_single(config, options);
      pb::write_run(r, out_dir, options);
      if (r.table.partition_defect > 1e-10)
        std::cerr << "warning: z + G + xi misses 1 by " << r.table.partition_defect << "\n";
      std::cout << r.manifest["gaps"].dump() << "\n";
    } else if (sweep->parsed()) {
      const pb::SweepResult r = pb::run_sweep(config, options);
      pb::write_sweep(r, out_dir, options);
      std::cout << pb::write_sweep_csv(r, {false});
      if (!r.manifest["lower_monotone"].get<bool>()) {
        print_error("LowerNotMonotone", "lower bounds on D decreased along the sweep");
        return 1;
      }
    } else if (verify->parsed()) {
      const pb::ChainCertificates certs = pb::build_certificates(config);
      const pb::StateSet& check = config.certificate.check ? *config.certificate.check : config.A;
      if (check.empty()) throw pb::ConfigError("nothing to check: give certificates.check or partition.A");
      const pb::CertificateCheck c = pb::verify_certificates(config, certs, check);
      auto js = [](const pb::DriftReport& d) {
        nlohmann::json j{{"passed", d.passed},
                         {"max_violation", d.max_violation},
                         {"states_checked", d.states_checked},
                         {"violations", d.violations},
                         {"unverified_region", d.unverified_region}};
        if (d.worst_state) j["worst_state"] = pb::to_string(*d.worst_state);
        return j;
      };
      nlohmann::json out{{"reward", js(c.reward)}, {"unit", js(c.unit)},
                         {"c_reward", certs.reward.c}, {"c_unit", certs.unit.c}};
      std::cout << out.dump(2) << "\n";
      std::cerr << "warning: the inequality is not checked on the " << c.reward.unverified_region << "\n";
      if (!c.passed()) {
        print_error(pb::to_string(pb::ErrorCode::kCertificateFailure), "drift inequality fails");
        return 3;
      }
    } else if (orc->parsed()) {
      const pb::OracleRun r = pb::run_oracle(config, options);
      std::filesystem::create_directories(out_dir);
      pb::write_file_atomic(std::filesystem::path(out_dir) / "oracle.csv", r.csv);
      pb::write_file_atomic(std::filesystem::path(out_dir) / "manifest.json", r.manifest.dump(2) + "\n");
    }
  } catch (const pb::BoundError& e) {
    print_error(pb::to_string(e.code()), e.what());
    return pb::exit_code_for(e.code());
  } catch (const std::exception& e) {
    print_error("Internal", e.what());
    return 1;
  }
  return 0;
}
