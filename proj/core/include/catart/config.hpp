#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "catart/art.hpp"
#include "catart/bprmf.hpp"
#include "catart/cat.hpp"
#include "catart/synth.hpp"

namespace catart {

/// Model variants of the incremental ablation, starting from single-domain MF.
enum class Ablation {
  smf,           // stage 1 only
  autoencoder,   // + global embedding from a plain autoencoder (alpha1 = 1, alpha2 = 0)
  contrastive,   // + global embedding from the contrastive autoencoder
  full,          // + attention transfer over the other domains
  no_attention,  // full, with attention replaced by the mean of adapted sources
};

/// Accepts smf, autoencoder/+autoencoder, contrastive/+contrastive,
/// full/art/+art, no_attention/no-attention/-attention.
Ablation parse_ablation(std::string_view name);
std::string_view to_string(Ablation a);
std::vector<Ablation> all_ablations();

/// Name of the stage-2 variant an ablation needs ("" for smf).
std::string_view cat_variant(Ablation a);
art::FusionMode fusion_mode(Ablation a);

struct PipelineConfig {
  // data: either files (one per domain) or a synthetic scenario
  std::vector<std::filesystem::path> data_files;
  data::FileFormat format = data::FileFormat::tsv;
  std::string scenario = "correlated-5";
  int synth_users = 0;  // 0 keeps the preset
  int synth_items = 0;

  std::filesystem::path out_dir = "runs/default";
  std::uint64_t master_seed = 2023;
  int n_seeds = 3;
  std::vector<Ablation> ablations{Ablation::full};
  int threads = 1;

  mf::MfConfig mf{};
  cat::CatConfig cat{};
  cat::CatTrainConfig cat_train{};
  art::ArtConfig art{};

  double transfer_epsilon = 0.002;  // tolerance for negative-transfer flags

  /// Checks ranges and cross-field consistency; throws ConfigError.
  void validate() const;

  /// Seed of run k: derive_seed(master_seed, "run", k).
  std::uint64_t run_seed(int k) const;
};

/// `key = value` lines; '#' starts a comment. Throws ParseError with the line.
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Sets one key; throws ConfigError for unknown keys or malformed values.
void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value);

/// Defaults, then the file (if any), then the overrides in order.
PipelineConfig resolve_config(const std::filesystem::path* file,
                              const std::vector<std::pair<std::string, std::string>>& overrides);

/// Every key with its resolved value, sorted by key. Feeding the result back
/// through apply_setting reproduces the config.
std::map<std::string, std::string> to_settings(const PipelineConfig& config);
std::vector<std::string> setting_keys();

}  // namespace catart
