// Command-line front end: scenario solving and the experiment studies.

#include <CLI11.hpp>

#include "tsm/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"two-stage electricity market equilibria under market power "
               "mitigation policies"};
  app.require_subcommand(1);

  std::string scenario_path;
  tsm::cli::SolveFlags solve_flags;
  std::string policy_name, behavior_name;

  auto* solve = app.add_subcommand("solve", "solve one scenario file");
  solve->add_option("path", scenario_path, "scenario JSON file")->required();
  solve->add_option("--policy", policy_name,
                    "override policy: standard | rt-mpm | da-mpm");
  solve->add_option("--behavior", behavior_name,
                    "override behavior: price-taking | price-anticipating");
  solve->add_flag("--numeric", solve_flags.numeric,
                  "force the numerical best-response solver");
  solve->add_option("--format", solve_flags.format, "json | text")
      ->check(CLI::IsMember({"json", "text"}));
  solve->add_option("--out", solve_flags.out, "write the report here");
  solve->add_flag("--dump-normalized", solve_flags.dump_normalized,
                  "print the normalized scenario document and exit");

  std::string kind, experiment_path;
  tsm::cli::ExperimentFlags exp_flags;
  int samples = -1;
  std::int64_t seed = -1;

  auto* exp = app.add_subcommand("experiment", "run one of the studies");
  exp->add_option("kind", kind,
                  "ratio-grid | error-sweep | cost-hetero | load-size")
      ->required();
  exp->add_option("path", experiment_path,
                  "optional scenario file providing the base case");
  exp->add_option("--samples", samples, "sample count override");
  exp->add_option("--seed", seed, "seed override");
  exp->add_option("--out", exp_flags.out,
                  "output file (default: $TSM_OUT_DIR/<kind>.<ext>)");
  exp->add_option("--format", exp_flags.format, "csv | jsonl")
      ->check(CLI::IsMember({"csv", "jsonl"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : tsm::cli::kInputError;
  }

  if (solve->parsed()) {
    try {
      if (!policy_name.empty())
        solve_flags.policy = tsm::io_detail::parse_policy(policy_name);
      if (!behavior_name.empty())
        solve_flags.behavior = tsm::io_detail::parse_behavior(behavior_name);
    } catch (const tsm::invalid_input& e) {
      std::cerr << "input error: " << e.what() << '\n';
      return tsm::cli::kInputError;
    }
    return tsm::cli::cmd_solve(scenario_path, solve_flags);
  }

  if (samples >= 0) exp_flags.samples = samples;
  if (seed >= 0) exp_flags.seed = static_cast<std::uint64_t>(seed);
  return tsm::cli::cmd_experiment(kind, experiment_path, exp_flags);
}
