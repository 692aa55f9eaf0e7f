#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "catart/config.hpp"
#include "catart/dataset.hpp"
#include "catart/eval.hpp"

// Three-stage training over every seed of a run, with all artifacts under
// config.out_dir:
//
//   manifest.json                       resolved config, seeds, hashes, timings
//   seed_<k>/data/                      vocabularies and per-domain split files
//   seed_<k>/stage1/                    per-domain MF checkpoints, curves, report.tsv
//   seed_<k>/stage2_<variant>/          cat.ckpt, global.ckpt, curve.tsv
//   seed_<k>/stage3_<ablation>/         art_<d>.ckpt, curves, report.tsv, attention.tsv
//   report_<ablation>.{tsv,std.tsv,txt} mean and std over seeds
//   attention_<ablation>.tsv            mean attention matrix over seeds

namespace catart::pipeline {

class RunLayout {
 public:
  explicit RunLayout(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path manifest() const { return root_ / "manifest.json"; }
  std::filesystem::path seed_dir(int k) const { return root_ / ("seed_" + std::to_string(k)); }
  std::filesystem::path data_dir(int k) const { return seed_dir(k) / "data"; }
  std::filesystem::path stage1_dir(int k) const { return seed_dir(k) / "stage1"; }
  std::filesystem::path stage2_dir(int k, std::string_view variant) const {
    return seed_dir(k) / ("stage2_" + std::string(variant));
  }
  std::filesystem::path stage3_dir(int k, Ablation a) const {
    return seed_dir(k) / ("stage3_" + std::string(to_string(a)));
  }
  std::filesystem::path user_table(int k, int d) const;
  std::filesystem::path item_table(int k, int d) const;

 private:
  std::filesystem::path root_;
};

struct ExperimentManifest {
  std::string version;
  std::map<std::string, std::string> config;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, std::string> checkpoints;  // path relative to the root -> sha256
  std::map<std::string, double> wall_time;         // stage -> seconds

  void save(const std::filesystem::path& path) const;
  static ExperimentManifest load(const std::filesystem::path& path);
};

struct RunData {
  data::InteractionStore store;
  std::vector<std::string> domain_names;
};

/// Split data saved by stage 1 for seed k. Throws PipelineError if missing.
RunData load_run_data(const RunLayout& layout, int k);

/// Stage 1: load or generate the data, split it per seed, and train one BPR
/// model per domain. Also writes the SMF report of every seed.
ExperimentManifest run_stage1(const PipelineConfig& config);

/// Stage 2: train the contrastive autoencoder variants the configured
/// ablations need. Throws PipelineError when stage-1 checkpoints are missing
/// or were modified after stage 1 recorded them.
ExperimentManifest run_stage2(const PipelineConfig& config);

/// Stage 3: train the transfer models of every configured ablation and write
/// reports. The smf ablation only aggregates the stage-1 reports.
ExperimentManifest run_stage3(const PipelineConfig& config);

/// All three stages, then the aggregate reports.
ExperimentManifest run_all(const PipelineConfig& config);

/// Test-split report of one seed recomputed from checkpoints.
eval::MetricReport evaluate_seed(const PipelineConfig& config, Ablation ablation, int k);

struct AblationSummary {
  Ablation ablation = Ablation::smf;
  std::vector<eval::MetricReport> runs;  // per seed
  eval::AggregateReport aggregate;
  std::vector<eval::TransferFlag> flags;  // mean against the smf mean
};

/// Reads the per-seed reports of an ablation (recomputing them when
/// `recompute`), aggregates them, flags negative transfer against smf and
/// writes the report_<ablation> files.
AblationSummary summarize(const PipelineConfig& config, Ablation ablation, bool recompute = false);

/// Mean attention weights, rows = target domains, cols = source domains
/// (NaN on the diagonal), averaged over the test users of each target and
/// over seeds.
nn::Matrix attention_matrix(const PipelineConfig& config, Ablation ablation);
/// Same matrix for the models of seed k alone.
nn::Matrix attention_matrix(const PipelineConfig& config, Ablation ablation, int k);
void write_attention_tsv(const nn::Matrix& weights, const std::vector<std::string>& names,
                         const std::filesystem::path& path);

/// sha256 of every checkpoint and split file under the run, keyed by path
/// relative to the root.
std::map<std::string, std::string> hash_artifacts(const std::filesystem::path& root);

}  // namespace catart::pipeline
