// catart: command-line driver for the three-stage multi-target transfer
// pipeline and the synthetic world generator.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cmath>
#include <deque>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "catart/config.hpp"
#include "catart/errors.hpp"
#include "catart/pipeline.hpp"
#include "catart/synth.hpp"

namespace fs = std::filesystem;
using namespace catart;

namespace {

// Command-line flags that map onto config keys. Only flags the user passed
// become overrides, so file values survive unless overridden.
struct ConfigFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, CLI::Option*>> flag_options;
  std::deque<std::string> storage;  // stable addresses for CLI11

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    storage.emplace_back();
    flag_options.emplace_back(key, app->add_option(flag, storage.back(), help + " [" + key + "]"));
  }

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_file, "flat 'key = value' config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override any config key: --set key=value (repeatable)");
    add(app, "-o,--out-dir", "out_dir", "run directory");
    add(app, "--scenario", "scenario", "synthetic scenario when no data files are given");
    add(app, "--data", "data", "comma-separated per-domain interaction files");
    add(app, "--format", "format", "tsv or csv");
    add(app, "--seed", "seed", "master seed");
    add(app, "--seeds", "seeds", "number of repeated runs");
    add(app, "--ablation", "ablation", "comma list of smf, autoencoder, contrastive, full, no_attention");
    add(app, "--dim", "dim", "embedding size m");
    add(app, "--threads", "threads", "parallel domain trainings");
    add(app, "--mf-epochs", "mf.epochs", "stage-1 epochs");
    add(app, "--mf-lr", "mf.lr", "stage-1 learning rate");
    add(app, "--cat-epochs", "cat.epochs", "stage-2 epochs");
    add(app, "--cat-batch", "cat.batch", "stage-2 batch size N");
    add(app, "--cat-lr", "cat.lr", "stage-2 learning rate");
    add(app, "--tau", "cat.tau", "contrastive temperature");
    add(app, "--alpha1", "cat.alpha1", "reconstruction weight");
    add(app, "--alpha2", "cat.alpha2", "masked reconstruction weight");
    add(app, "--masked", "cat.masked", "domains masked per user");
    add(app, "--art-epochs", "art.epochs", "stage-3 epochs");
    add(app, "--art-lr", "art.lr", "stage-3 learning rate");
    add(app, "--unfreeze-items", "art.unfreeze_items", "fine-tune item tables in stage 3 (true/false)");
  }

  PipelineConfig resolve() const {
    std::vector<std::pair<std::string, std::string>> overrides;
    std::size_t i = 0;
    for (const auto& [key, opt] : flag_options) {
      if (opt->count() > 0) overrides.emplace_back(key, storage[i]);
      ++i;
    }
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    const fs::path file(config_file);
    return resolve_config(config_file.empty() ? nullptr : &file, overrides);
  }
};

void print_summary(const pipeline::AblationSummary& s, const PipelineConfig& config) {
  std::vector<std::string> names;
  const pipeline::RunLayout layout(config.out_dir);
  if (fs::exists(layout.data_dir(0) / "domains.tsv")) names = pipeline::load_run_data(layout, 0).domain_names;
  std::cout << "\n[" << to_string(s.ablation) << "]\n";
  eval::write_table(s.aggregate, std::cout, names, s.flags);
  if (s.ablation != Ablation::smf) {
    std::cout << (s.flags.empty() ? "no negative transfer against smf\n"
                                  : std::to_string(s.flags.size()) + " cell(s) below smf\n");
  }
}

void print_attention(const nn::Matrix& w, const std::vector<std::string>& names) {
  auto name = [&](Eigen::Index d) {
    return static_cast<std::size_t>(d) < names.size() ? names[static_cast<std::size_t>(d)] : std::to_string(d);
  };
  std::cout << std::left << std::setw(12) << "target";
  for (Eigen::Index c = 0; c < w.cols(); ++c) std::cout << std::setw(12) << name(c);
  std::cout << '\n' << std::fixed << std::setprecision(3);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    std::cout << std::setw(12) << name(r);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      if (std::isnan(w(r, c))) std::cout << std::setw(12) << "-";
      else std::cout << std::setw(12) << w(r, c);
    }
    std::cout << '\n';
  }
}

int run_synth(const std::string& scenario, std::uint64_t seed, const fs::path& out, int users, int items) {
  auto spec = synth::make_scenario(scenario, seed);
  if (users > 0) spec.n_users = users;
  if (items > 0) {
    for (auto& d : spec.domains) d.n_items = items;
  }
  const auto world = synth::generate(spec);
  synth::write_world(world, out);
  std::cout << "scenario " << scenario << ": " << spec.n_users << " users\n";
  for (std::size_t d = 0; d < spec.domains.size(); ++d) {
    std::cout << "  " << std::left << std::setw(10) << spec.domains[d].name << std::right << std::setw(6)
              << spec.domains[d].n_items << " items  density " << std::fixed << std::setprecision(4)
              << world.truth.densities[d] << "  (" << world.raw.domains[d].pairs.size() << " pairs)\n";
  }
  std::cout << "written to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-target cross-domain recommendation: stage-wise training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "debug logging");
  app.add_flag("-q,--quiet", quiet, "warnings and errors only");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic world as tsv files");
  std::string scenario = "correlated-5";
  std::uint64_t synth_seed = 0;
  std::string synth_out = "world";
  int synth_users = 0;
  int synth_items = 0;
  synth_cmd->add_option("--scenario", scenario, "correlated-5, one-noise-domain, sparse-target, unrelated-pair, separable");
  synth_cmd->add_option("--seed", synth_seed, "world seed");
  synth_cmd->add_option("-o,--out", synth_out, "output directory");
  synth_cmd->add_option("--users", synth_users, "override the number of users");
  synth_cmd->add_option("--items", synth_items, "override items per domain");

  struct Command {
    CLI::App* app;
    ConfigFlags flags;
  };
  std::vector<std::unique_ptr<Command>> commands;
  auto add_pipeline_command = [&](const std::string& name, const std::string& help) {
    auto c = std::make_unique<Command>();
    c->app = app.add_subcommand(name, help);
    c->flags.attach(c->app);
    commands.push_back(std::move(c));
    return commands.back().get();
  };
  auto* stage1 = add_pipeline_command("stage1", "train per-domain BPR-MF models");
  auto* stage2 = add_pipeline_command("stage2", "train the contrastive autoencoder on frozen stage-1 users");
  auto* stage3 = add_pipeline_command("stage3", "train the per-domain transfer models and report");
  auto* run_all = add_pipeline_command("run-all", "all three stages for every seed, then reports");
  auto* eval_cmd = add_pipeline_command("eval", "recompute test metrics from checkpoints");
  auto* attention = add_pipeline_command("report-attention", "mean attention weights per target and source");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    if (synth_cmd->parsed()) return run_synth(scenario, synth_seed, synth_out, synth_users, synth_items);
    for (const auto& c : commands) {
      if (!c->app->parsed()) continue;
      const PipelineConfig config = c->flags.resolve();
      if (c.get() == stage1) {
        pipeline::run_stage1(config);
      } else if (c.get() == stage2) {
        pipeline::run_stage2(config);
      } else if (c.get() == stage3) {
        pipeline::run_stage3(config);
        for (const auto a : config.ablations) print_summary(pipeline::summarize(config, a), config);
      } else if (c.get() == run_all) {
        const auto manifest = pipeline::run_all(config);
        for (const auto a : config.ablations) print_summary(pipeline::summarize(config, a), config);
        std::cout << "\nmanifest: " << pipeline::RunLayout(config.out_dir).manifest().string() << " ("
                  << manifest.checkpoints.size() << " hashed artifacts, " << std::fixed << std::setprecision(1)
                  << manifest.wall_time.at("total") << " s)\n";
      } else if (c.get() == eval_cmd) {
        for (const auto a : config.ablations) print_summary(pipeline::summarize(config, a, true), config);
      } else if (c.get() == attention) {
        const pipeline::RunLayout layout(config.out_dir);
        const auto names = pipeline::load_run_data(layout, 0).domain_names;
        for (const auto a : config.ablations) {
          if (fusion_mode(a) == art::FusionMode::global_only) continue;
          const auto w = pipeline::attention_matrix(config, a);
          const auto path = layout.root() / ("attention_" + std::string(to_string(a)) + ".tsv");
          pipeline::write_attention_tsv(w, names, path);
          std::cout << "\n[" << to_string(a) << "] mean attention (rows: target, cols: source)\n";
          print_attention(w, names);
        }
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
