// e4bench: command-line driver for the batched linear bandit harness.
//
//   e4bench run --algo e4 --algo phaelimd --instance endoa:d=2,eps=0.2
//       --horizon 10000 --trials 10 --seed 1 --out results/
//   e4bench sweep --algo phaelimd --eps 0.01,0.1,0.2 --out sweep/
//   e4bench gen-instance --instance random:d=3,k=10,seed=7 --out my.inst

#include <iostream>
#include <string>
#include <vector>

#include "e4bandit/e4bandit.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  e4::CliCommand cmd;
  try {
    cmd = e4::parse_cli(args);
  } catch (const e4::UsageError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  }

  try {
    switch (cmd.kind) {
      case e4::CliCommand::Kind::Help:
        std::cout << cmd.help;
        return 0;
      case e4::CliCommand::Kind::GenInstance: {
        const e4::Instance inst = e4::parse_instance_spec(cmd.config.instance_spec);
        if (cmd.instance_out == "-") {
          e4::write_instance(std::cout, inst);
        } else {
          e4::save_instance(cmd.instance_out, inst);
          std::cout << cmd.instance_out << '\n';
        }
        return 0;
      }
      case e4::CliCommand::Kind::Run:
        for (const auto& p : e4::run_experiment(cmd.config)) std::cout << p.string() << '\n';
        return 0;
      case e4::CliCommand::Kind::Sweep:
        for (const auto& p : e4::sweep_epsilon(cmd.config, cmd.eps_list)) std::cout << p.string() << '\n';
        return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "e4bench: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
