#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "catart/dataset.hpp"
#include "catart/eval.hpp"
#include "catart/nn.hpp"
#include "catart/rng.hpp"

namespace catart::mf {

inline constexpr int kDefaultDim = 64;

/// Dense per-entity vectors for one domain. Holds n_entities + 1 rows; the
/// last row is a spare slot for padding/unknown ids.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int n_entities, int dim);

  /// Entries uniform in [-scale, scale]; the spare row stays zero.
  static EmbeddingTable uniform(int n_entities, int dim, double scale, Rng& rng);
  static EmbeddingTable from_matrix(nn::Matrix rows);  // rows include the spare row

  int n_entities() const { return n_entities_; }
  int dim() const { return static_cast<int>(data_.cols()); }

  auto row(int id) const { return data_.row(id); }
  auto row(int id) { return data_.row(id); }

  /// Rows of the listed ids, one per row of the result.
  nn::Matrix gather(std::span<const int> ids) const;

  const nn::Matrix& matrix() const { return data_; }
  nn::Matrix& matrix() { return data_; }

  /// Binary checkpoint: magic "CATEMBT\0", u32 version (1), u64 n_entities,
  /// u64 dim, then (n_entities + 1) * dim little-endian doubles, row-major.
  void save(const std::filesystem::path& path) const;
  static EmbeddingTable load(const std::filesystem::path& path);
  /// `id<TAB>v0<TAB>v1...` per entity (spare row omitted).
  void export_tsv(const std::filesystem::path& path) const;

  bool operator==(const EmbeddingTable& o) const {
    return n_entities_ == o.n_entities_ && data_.rows() == o.data_.rows() &&
           data_.cols() == o.data_.cols() && data_ == o.data_;
  }

 private:
  int n_entities_ = 0;
  nn::Matrix data_;
};

struct DomainMfModel {
  int domain = 0;
  EmbeddingTable users;
  EmbeddingTable items;
};

/// Uniform(+-init_scale) user and item tables for one domain.
DomainMfModel init_model(int domain, int n_users, int n_items, int dim, double init_scale, Rng& rng);

/// Inner product of user and item embeddings. Throws std::out_of_range for
/// ids outside [0, n_entities).
double score(const DomainMfModel& model, int user, int item);

/// -log sigmoid(pos - neg), evaluated as softplus(neg - pos).
double bpr_loss(double score_pos, double score_neg);

/// Summed BPR loss over a batch of triplets. When the gradient matrices are
/// given they are resized to the table shapes and filled with dLoss/dRow.
double bpr_batch_loss(const DomainMfModel& model, std::span<const data::BprTriplet> batch,
                      nn::Matrix* user_grad = nullptr, nn::Matrix* item_grad = nullptr);

/// Scorer over the all-ranking evaluator.
eval::BlockScorer make_scorer(const DomainMfModel& model);

struct MfConfig {
  int dim = kDefaultDim;
  int epochs = 200;
  int patience = 10;
  std::size_t batch_size = 256;
  double learning_rate = 0.05;
  double weight_decay = 0.03;
  double init_scale = 0.01;
};

struct TrainCurve {
  std::vector<double> loss;          // mean per-triplet loss of each epoch
  std::vector<double> valid_recall;  // Recall@10 on validation; entry 0 is the initial model
  int best_epoch = 0;                // 0 = initial model kept
};

struct MfTrainResult {
  DomainMfModel model;
  TrainCurve curve;
};

/// Sampled-minibatch SGD on the BPR loss. An epoch draws as many triplets as
/// the domain has train pairs, in batches of batch_size; each batch applies
/// p <- p - lr * (sum of per-triplet gradients + weight_decay * p) to the rows
/// it touched. Validation Recall@10 after every epoch; the best parameters are
/// kept and training stops after `patience` epochs without improvement.
/// Throws TrainingError if the loss becomes non-finite.
MfTrainResult train_domain(DomainMfModel model, const data::InteractionStore& store,
                           const MfConfig& config, Rng& rng);

}  // namespace catart::mf
