#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "catart/bprmf.hpp"
#include "catart/nn.hpp"
#include "catart/optimizer.hpp"
#include "catart/rng.hpp"

// Contrastive autoencoder over concatenated domain-specific user embeddings.
//
// For a user with per-domain embeddings e^1..e^n (each of size m):
//   x  = e^1 ++ ... ++ e^n                  (n*m, fixed domain order)
//   e  = enc(x),  x_hat  = dec(e)
//   x* = x with k random domain slots replaced by the mask vector
//   e* = enc(x*), x*_hat = dec(e*)
// and the training loss is
//   a1 * rec(x, x_hat) + a2 * rec(x, x*_hat) + (1 - a1 - a2) * sum_i l_i
// where rec is the batch mean of the per-domain residual norms summed over
// domains and l_i is the two-sided in-batch cosine contrastive loss.

namespace catart::cat {

struct CatConfig {
  int dim = mf::kDefaultDim;
  double tau = 0.1;
  double alpha1 = 0.4;
  double alpha2 = 0.4;
  int masked_domains = 1;
  bool per_domain_mask = false;   // one trainable mask vector per domain slot
  bool squared_error = false;     // ||r||^2 instead of ||r|| in the reconstruction terms
  bool exclude_positive = false;  // drop k == i from the contrastive denominators

  /// Throws ConfigError on tau <= 0, negative alphas, alpha1 + alpha2 > 1,
  /// or masked_domains outside [1, n_domains).
  void validate(int n_domains) const;
};

class CatModel {
 public:
  /// Encoder sizes [n*m, 5m, 3m, m], decoder [m, 3m, 5m, n*m], Glorot
  /// weights, PReLU 0.25 between layers, mask vector(s) zero.
  static CatModel create(std::vector<int> domain_order, const CatConfig& config, Rng& rng);

  int n_domains() const { return static_cast<int>(domain_order.size()); }
  int dim() const { return config.dim; }
  int input_size() const { return n_domains() * dim(); }

  /// Mask row used for slot `slot` (position in domain_order).
  auto mask_row(int slot) const { return mask.row(config.per_domain_mask ? slot : 0); }

  /// encoder blocks, decoder blocks, then the mask matrix.
  nn::ParamBlocks parameter_blocks();
  nn::ConstParamBlocks parameter_blocks() const;

  /// Binary checkpoint: magic "CATCATM\0", u32 version, config, domain order,
  /// encoder, decoder, mask.
  void save(const std::filesystem::path& path) const;
  static CatModel load(const std::filesystem::path& path);

  nn::Mlp encoder;
  nn::Mlp decoder;
  nn::Matrix mask;  // 1 x m, or n x m with per_domain_mask
  std::vector<int> domain_order;
  CatConfig config;
};

/// Frozen per-domain user tables, indexed by domain id.
using DomainTables = std::span<const mf::EmbeddingTable>;

/// One user's concatenated input; `masked` lists masked domain ids.
struct ConcatUserInput {
  int user = 0;
  nn::Vector values;
  std::vector<int> masked;
};

ConcatUserInput concat_user(const CatModel& model, DomainTables tables, int user);

/// Concatenated inputs of `users`, one per row.
nn::Matrix concat_batch(const CatModel& model, DomainTables tables, std::span<const int> users);

/// Global embedding of one input. Throws ShapeError on a wrong input length.
nn::Vector encode(const CatModel& model, const ConcatUserInput& input);

/// Reconstruction of all n slots from a global embedding.
nn::Vector decode(const CatModel& model, const nn::Vector& embedding);

/// Replaces `k` distinct, uniformly chosen domain slots with the mask vector.
/// Throws ConfigError unless 1 <= k < n.
ConcatUserInput mask(const CatModel& model, ConcatUserInput input, int k, Rng& rng);

struct MaskedBatch {
  nn::Matrix values;
  std::vector<std::vector<int>> masked_slots;  // per row, slot positions
};

/// Masks k slots of every row independently. k == 0 returns the batch as is.
MaskedBatch mask_batch(const CatModel& model, const nn::Matrix& inputs, int k, Rng& rng);

/// Batch mean over rows of sum over domain slots of ||orig - recon|| (or its
/// square). With `grad`, fills dLoss/dRecon (zero where a residual is zero).
double reconstruction_loss(const nn::Matrix& original, const nn::Matrix& reconstructed, int n_domains,
                           bool squared = false, nn::Matrix* grad = nullptr);

/// decode(encode(masked)) against the unmasked original.
double masked_reconstruction_loss(const CatModel& model, const MaskedBatch& masked,
                                  const nn::Matrix& original);

/// sum_i l_i with
///   l_i = -log softmax_k(cos(e_i, e*_k)/tau)[i] - log softmax_k(cos(e*_i, e_k)/tau)[i]
/// over k = 1..N (k != i dropped with exclude_positive). Rows are users.
/// Throws NumericError naming the user (from `users`, else the row) on a
/// zero-norm row, ConfigError when N < 2.
double contrastive_loss(const nn::Matrix& e, const nn::Matrix& e_star, double tau,
                        bool exclude_positive = false, nn::Matrix* grad_e = nullptr,
                        nn::Matrix* grad_e_star = nullptr, std::span<const int> users = {});

/// Fraction of rows i whose most cosine-similar row of e_star is row i.
double retrieval_accuracy(const nn::Matrix& e, const nn::Matrix& e_star);

struct CatGrads {
  nn::MlpGrads encoder;
  nn::MlpGrads decoder;
  nn::Matrix mask;

  /// Congruent with CatModel::parameter_blocks().
  nn::ConstParamBlocks blocks() const;
};

struct CatLoss {
  double total = 0.0;
  double reconstruction = 0.0;
  double masked_reconstruction = 0.0;
  double contrastive = 0.0;
  double retrieval_accuracy = 0.0;
};

/// Full objective on one batch. `inputs` are the unmasked rows; `masked` the
/// masked copies. With `grads`, computes exact gradients for the encoder,
/// decoder and mask vector. Inputs receive no gradient.
CatLoss cat_loss(const CatModel& model, const nn::Matrix& inputs, const MaskedBatch& masked,
                 CatGrads* grads = nullptr, std::span<const int> users = {});

struct CatTrainConfig {
  int epochs = 50;
  std::size_t batch_size = 4096;
  nn::OptimizerConfig optimizer{};
};

struct CatEpochLog {
  double total = 0.0;
  double reconstruction = 0.0;
  double masked_reconstruction = 0.0;
  double contrastive = 0.0;
  double retrieval_accuracy = 0.0;
};

struct CatTrainResult {
  CatModel model;
  std::vector<CatEpochLog> curve;
};

/// Minibatch training over all users of the tables. Each epoch shuffles the
/// users, cuts batches of batch_size (a trailing batch of one user joins the
/// previous one), masks each row, and takes one optimizer step per batch.
/// Throws TrainingError if the loss becomes non-finite.
CatTrainResult train_cat(CatModel model, DomainTables tables, const CatTrainConfig& config, Rng& rng);

/// Global embeddings of every user from the unmasked input, as a table with
/// the same layout as the per-domain tables (spare row zero).
mf::EmbeddingTable global_embeddings(const CatModel& model, DomainTables tables);

}  // namespace catart::cat
