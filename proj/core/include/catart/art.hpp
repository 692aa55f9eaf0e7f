#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "catart/bprmf.hpp"
#include "catart/dataset.hpp"
#include "catart/eval.hpp"
#include "catart/nn.hpp"
#include "catart/optimizer.hpp"
#include "catart/rng.hpp"

// Per-target-domain transfer stage. For user i and target domain d:
//   V_k  = adapt_k(e^k_i)                      for every source k != d
//   w    = softmax_k(e^d_i . V_k / sqrt(m))    (query is the raw e^d_i, K = V)
//   e^a  = sum_k w_k V_k
//   h    = e^d_i + ind(e_i) + e^a              (e_i: global embedding)
// and items are scored with h . I^d_j.

namespace catart::art {

enum class FusionMode {
  full,          // e^d + ind(e) + attention over adapted sources
  no_attention,  // e^d + ind(e) + mean of adapted sources
  global_only,   // e^d + ind(e)
};

FusionMode parse_fusion_mode(std::string_view name);
std::string_view to_string(FusionMode mode);

class ArtModel {
 public:
  /// Adapters and ind are [m, m, m] PReLU MLPs with Glorot first layers and
  /// zeroed output layers, so h == e^d until training moves them. Sources are
  /// every domain but `target`, ascending. Throws ConfigError when n < 2.
  static ArtModel create(int target, int n_domains, int dim, FusionMode mode, Rng& rng);

  int target() const { return target_; }
  int dim() const { return dim_; }
  FusionMode mode() const { return mode_; }
  const std::vector<int>& sources() const { return sources_; }

  /// adapter blocks in source order, then ind.
  nn::ParamBlocks parameter_blocks();
  nn::ConstParamBlocks parameter_blocks() const;

  /// Binary checkpoint: magic "CATARTM\0", u32 version, target, dim, mode,
  /// sources, adapters, ind.
  void save(const std::filesystem::path& path) const;
  static ArtModel load(const std::filesystem::path& path);

  std::vector<nn::Mlp> adapters;  // one per source, same order as sources()
  nn::Mlp ind;

 private:
  int target_ = 0;
  int dim_ = 0;
  FusionMode mode_ = FusionMode::full;
  std::vector<int> sources_;
};

struct Attention {
  nn::Vector output;   // e^a
  nn::Vector weights;  // one per source
};

/// Single-user attention. `sources` holds the raw source embeddings, one row
/// per source in model order. Throws ConfigError when there are no sources
/// and ShapeError on mismatched lengths.
Attention attend(const ArtModel& model, const nn::Vector& query, const nn::Matrix& sources);

struct FusedUserEmbedding {
  nn::Vector h;
  nn::Vector domain;          // e^d
  nn::Vector adapted_global;  // ind(e)
  nn::Vector attended;        // e^a
};

/// h = e^d + ind(e) + e^a. Throws ShapeError unless all three have length m.
FusedUserEmbedding fuse(const ArtModel& model, const nn::Vector& domain_embedding,
                        const nn::Vector& global_embedding, const nn::Vector& attended);

double score_fused(const nn::Vector& h, const nn::Vector& item);

/// Frozen upstream state shared by every target domain.
struct UserInputs {
  std::span<const mf::EmbeddingTable> domain_users;  // stage-1 user tables by domain id
  const mf::EmbeddingTable* global = nullptr;        // CAT global embeddings
};

/// Batched forward pass with everything backward() needs.
struct ArtForward {
  std::vector<int> users;
  nn::Matrix query;                      // B x m, e^d
  nn::Matrix weights;                    // B x S (empty for global_only)
  nn::Matrix h;                          // B x m
  std::vector<nn::Matrix> values;        // S of B x m
  std::vector<nn::MlpTape> adapter_tapes;
  nn::MlpTape ind_tape;
};

ArtForward forward(const ArtModel& model, const UserInputs& inputs, std::span<const int> users);

/// Fused embeddings without tapes, B x m.
nn::Matrix fused_embeddings(const ArtModel& model, const UserInputs& inputs, std::span<const int> users);

struct ArtGrads {
  std::vector<nn::MlpGrads> adapters;
  nn::MlpGrads ind;

  /// Congruent with ArtModel::parameter_blocks().
  nn::ConstParamBlocks blocks() const;
};

/// Gradients of the model parameters given dLoss/dh (B x m).
ArtGrads backward(const ArtModel& model, ArtForward&& fwd, const nn::Matrix& grad_h);

/// Summed BPR loss of the fused scores over `batch`, all triplets in the
/// model's target domain. With `grads`, fills parameter gradients; with
/// `item_grad`, fills dLoss/dItems (table-shaped).
double art_bpr_loss(const ArtModel& model, const UserInputs& inputs, const mf::EmbeddingTable& items,
                    std::span<const data::BprTriplet> batch, ArtGrads* grads = nullptr,
                    nn::Matrix* item_grad = nullptr);

eval::BlockScorer make_scorer(const ArtModel& model, const UserInputs& inputs, const mf::EmbeddingTable& items);

struct ArtConfig {
  int epochs = 30;
  int patience = 5;
  std::size_t batch_size = 256;
  bool unfreeze_items = false;
  nn::OptimizerConfig optimizer{};
};

struct ArtTrainResult {
  ArtModel model;
  mf::EmbeddingTable items;          // equal to the input unless unfreeze_items
  std::vector<double> loss;          // mean per-triplet loss per epoch
  std::vector<double> valid_recall;  // entry 0 = the untrained model
  int best_epoch = 0;
};

/// BPR training of the adapters and ind (and the item table with
/// unfreeze_items) on the target domain. Upstream tables are read only.
/// Early stopping on validation Recall@10; the untrained model competes as
/// epoch 0. Throws TrainingError when the loss becomes non-finite.
ArtTrainResult train_art(ArtModel model, const UserInputs& inputs, const mf::EmbeddingTable& items,
                         const data::InteractionStore& store, const ArtConfig& config, Rng& rng);

/// Mean attention weight per source over `users`, in model source order.
/// The no-attention variant reports its uniform mixing weights. Throws
/// ConfigError for global_only models and when `users` is empty.
std::vector<double> report_attention(const ArtModel& model, const UserInputs& inputs,
                                     std::span<const int> users);

}  // namespace catart::art
