// csm train|sample|eval|check [--config PATH] [--key value ...]
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "csm/cli.hpp"
#include "csm/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Concrete score matching toolkit"};
  std::string command;
  std::string config_path;
  app.add_option("command", command, "train, sample, eval or check")
      ->required()
      ->check(CLI::IsMember({"train", "sample", "eval", "check"}));
  app.add_option("--config", config_path, "key = value configuration file");
  std::map<std::string, std::string> overrides;
  for (const std::string& key : csm::config_keys()) {
    app.add_option("--" + key, overrides[key], "override config key '" + key + "'");
  }
  CLI11_PARSE(app, argc, argv);

  try {
    csm::RunConfig config;
    if (!config_path.empty()) config = csm::load_config(config_path);
    for (const std::string& key : csm::config_keys()) {
      if (app.count("--" + key) > 0) csm::set_config_value(config, key, overrides[key]);
    }
    if (command == "train") {
      const auto outcome = csm::cmd_train(config, std::cout);
      std::cout << "wrote " << outcome.checkpoint_path << " (" << outcome.models << " model(s))\n";
    } else if (command == "sample") {
      csm::cmd_sample(config, std::cout);
    } else if (command == "eval") {
      csm::cmd_eval(config, std::cout);
    } else if (!csm::cmd_check(config, std::cout)) {
      std::cerr << "check: some invariants failed\n";
      return 1;
    }
  } catch (const csm::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
