// Command-line front end over the shared library.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "svassess/svassess.h"

using nlohmann::json;

namespace {

constexpr int kUsage = 1;

bool read_text(const std::string& path, std::string& out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return true;
}

void print_artifact(const json& result, const std::string& name) {
  const std::string dir = result.value("out", "");
  std::string text;
  if (read_text(dir + "/" + name, text)) std::cout << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Software vulnerability assessment workbench", "assess"};
  app.require_subcommand(1, 1);

  std::string config_path, out, granularity, mode, protocol, policy, dataset, model;
  long long seed = -1;
  int workers = 0;

  const char* names[][2] = {
      {"ingest", "Load and validate a dataset"},
      {"featurize", "Fit a feature model and write feature rows"},
      {"train", "Select and fit models on the selection splits"},
      {"evaluate", "Score a trained bundle on the held-out data"},
      {"assess", "Predict labels for new records"},
      {"drift", "Report new terms and out-of-vocabulary coverage per year"},
      {"context", "Extract function contexts or commit views"},
      {"mine", "Filter Q&A posts by keywords and run PU learning"},
      {"gradcheck", "Finite-difference check of the neural model gradients"},
  };
  for (const auto& n : names) {
    auto* sub = app.add_subcommand(n[0], n[1]);
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Random seed");
    sub->add_option("--workers", workers, "Upper bound on worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--granularity", granularity, "report, function or commit");
    sub->add_option("--mode", mode, "Function input mode");
    sub->add_option("--protocol", protocol, "time_kfold, rounds12 or rounds10");
    sub->add_option("--policy", policy, "ch3 or mcc");
    sub->add_option("--dataset", dataset, "Dataset JSONL path");
    sub->add_option("--model", model, "Model bundle path");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }
  const std::string subcommand = app.get_subcommands().front()->get_name();

  json config = json::object();
  if (!config_path.empty()) {
    std::string text;
    if (!read_text(config_path, text)) {
      std::cerr << "error: cannot read config '" << config_path << "'\n";
      return kUsage;
    }
    try {
      config = json::parse(text);
    } catch (const json::exception& e) {
      std::cerr << "error: config '" << config_path << "': " << e.what() << "\n";
      return kUsage;
    }
  }
  if (seed >= 0) config["seed"] = seed;
  if (workers > 0) config["workers"] = workers;
  if (!out.empty()) config["out"] = out;
  if (!granularity.empty()) config["granularity"] = granularity;
  if (!mode.empty()) config["mode"] = mode;
  if (!protocol.empty()) config["protocol"] = protocol;
  if (!policy.empty()) config["policy"] = policy;
  if (!dataset.empty()) config["dataset"] = dataset;
  if (!model.empty()) config["model"] = model;

  sva_context* ctx = nullptr;
  if (sva_context_new(&ctx) != SVA_OK) {
    std::cerr << "error: cannot create library context\n";
    return 2;
  }
  char* result = nullptr;
  const sva_status st = sva_run(ctx, subcommand.c_str(), config.dump().c_str(), &result);
  if (st != SVA_OK) {
    std::cerr << "error: " << sva_status_string(st) << ": " << sva_last_error(ctx) << "\n";
    sva_context_free(ctx);
    return sva_exit_code(st);
  }
  const json r = json::parse(result);
  sva_string_free(result);
  sva_context_free(ctx);

  if (subcommand == "evaluate") print_artifact(r, "metrics.txt");
  else if (subcommand == "drift") print_artifact(r, "drift.txt");
  else if (subcommand == "gradcheck") print_artifact(r, "gradcheck.txt");
  else std::cout << r.dump(2) << "\n";
  return 0;
}
