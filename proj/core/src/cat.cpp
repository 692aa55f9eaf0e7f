#include "catart/cat.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numeric>

#include "catart/binary_io.hpp"
#include "catart/errors.hpp"

namespace catart::cat {

namespace {

constexpr std::uint32_t kCatVersion = 1;

/// Row-normalizes `m`, returning the norms. Throws on a zero row.
nn::Matrix normalize_rows(const nn::Matrix& m, nn::Vector& norms, std::span<const int> users) {
  norms = m.rowwise().norm();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (!(norms[r] > 0.0)) {
      const long who = users.empty() ? static_cast<long>(r) : static_cast<long>(users[static_cast<std::size_t>(r)]);
      throw NumericError("zero-norm embedding in contrastive loss", who);
    }
  }
  return norms.cwiseInverse().asDiagonal() * m;
}

/// dLoss/de from dLoss/da where a = e / |e|, row by row.
nn::Matrix back_through_normalize(const nn::Matrix& grad_a, const nn::Matrix& a, const nn::Vector& norms) {
  nn::Matrix out = grad_a;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double along = grad_a.row(r).dot(a.row(r));
    out.row(r) = (grad_a.row(r) - along * a.row(r)) / norms[r];
  }
  return out;
}

std::vector<int> choose_slots(int n, int k, Rng& rng) {
  std::vector<int> slots(static_cast<std::size_t>(n));
  std::iota(slots.begin(), slots.end(), 0);
  // partial Fisher-Yates: the first k entries become a uniform k-subset
  for (int i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(i) + rng.uniform_index(static_cast<std::size_t>(n - i));
    std::swap(slots[static_cast<std::size_t>(i)], slots[j]);
  }
  slots.resize(static_cast<std::size_t>(k));
  return slots;
}

void write_config(io::BinaryWriter& w, const CatConfig& c) {
  w.i64(c.dim);
  w.f64(c.tau);
  w.f64(c.alpha1);
  w.f64(c.alpha2);
  w.i64(c.masked_domains);
  w.u32((c.per_domain_mask ? 1u : 0u) | (c.squared_error ? 2u : 0u) | (c.exclude_positive ? 4u : 0u));
}

CatConfig read_config(io::BinaryReader& r) {
  CatConfig c;
  c.dim = static_cast<int>(r.i64());
  c.tau = r.f64();
  c.alpha1 = r.f64();
  c.alpha2 = r.f64();
  c.masked_domains = static_cast<int>(r.i64());
  const auto flags = r.u32();
  c.per_domain_mask = flags & 1u;
  c.squared_error = flags & 2u;
  c.exclude_positive = flags & 4u;
  return c;
}

}  // namespace

void CatConfig::validate(int n_domains) const {
  if (dim <= 0) throw ConfigError("embedding size must be positive");
  if (!(tau > 0)) throw ConfigError("temperature must be positive");
  if (alpha1 < 0 || alpha2 < 0 || alpha1 + alpha2 > 1.0 + 1e-12) {
    throw ConfigError("loss weights need alpha1, alpha2 >= 0 and alpha1 + alpha2 <= 1");
  }
  if (masked_domains < 1 || masked_domains >= n_domains) {
    throw ConfigError("masked domain count must be in [1, n_domains)");
  }
}

CatModel CatModel::create(std::vector<int> domain_order, const CatConfig& config, Rng& rng) {
  const int n = static_cast<int>(domain_order.size());
  config.validate(n);
  const int m = config.dim;
  CatModel model;
  model.domain_order = std::move(domain_order);
  model.config = config;
  model.encoder = nn::Mlp::glorot({n * m, 5 * m, 3 * m, m}, rng);
  model.decoder = nn::Mlp::glorot({m, 3 * m, 5 * m, n * m}, rng);
  model.mask = nn::Matrix::Zero(config.per_domain_mask ? n : 1, m);
  return model;
}

nn::ParamBlocks CatModel::parameter_blocks() {
  nn::ParamBlocks out = encoder.parameter_blocks();
  for (auto b : decoder.parameter_blocks()) out.push_back(b);
  out.emplace_back(mask.data(), static_cast<std::size_t>(mask.size()));
  return out;
}

nn::ConstParamBlocks CatModel::parameter_blocks() const {
  nn::ConstParamBlocks out = encoder.parameter_blocks();
  for (auto b : decoder.parameter_blocks()) out.push_back(b);
  out.emplace_back(mask.data(), static_cast<std::size_t>(mask.size()));
  return out;
}

void CatModel::save(const std::filesystem::path& path) const {
  io::BinaryWriter w(path);
  w.magic(io::kCatMagic);
  w.u32(kCatVersion);
  write_config(w, config);
  w.u64(domain_order.size());
  for (const int d : domain_order) w.i64(d);
  w.mlp(encoder);
  w.mlp(decoder);
  w.matrix(mask);
  w.close();
}

CatModel CatModel::load(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic(io::kCatMagic);
  if (const auto v = r.u32(); v != kCatVersion) {
    throw ParseError("unsupported CAT checkpoint version " + std::to_string(v));
  }
  CatModel model;
  model.config = read_config(r);
  const auto n = r.u64();
  if (n == 0 || n > 4096) throw ParseError("implausible domain count in CAT checkpoint");
  for (std::uint64_t i = 0; i < n; ++i) model.domain_order.push_back(static_cast<int>(r.i64()));
  model.encoder = r.mlp();
  model.decoder = r.mlp();
  model.mask = r.matrix();
  r.expect_end();
  const int in = model.input_size();
  if (model.encoder.input_size() != in || model.encoder.output_size() != model.dim() ||
      model.decoder.input_size() != model.dim() || model.decoder.output_size() != in ||
      model.mask.cols() != model.dim()) {
    throw ParseError("CAT checkpoint shapes are inconsistent");
  }
  return model;
}

ConcatUserInput concat_user(const CatModel& model, DomainTables tables, int user) {
  const int users[] = {user};
  ConcatUserInput in;
  in.user = user;
  in.values = concat_batch(model, tables, users).row(0).transpose();
  return in;
}

nn::Matrix concat_batch(const CatModel& model, DomainTables tables, std::span<const int> users) {
  const int m = model.dim();
  nn::Matrix out(static_cast<Eigen::Index>(users.size()), model.input_size());
  for (int s = 0; s < model.n_domains(); ++s) {
    const auto d = static_cast<std::size_t>(model.domain_order[static_cast<std::size_t>(s)]);
    if (d >= tables.size()) throw ShapeError("no user table for domain " + std::to_string(d));
    const auto& table = tables[d];
    if (table.dim() != m) throw ShapeError("user table dimension differs from the CAT embedding size");
    for (std::size_t r = 0; r < users.size(); ++r) {
      out.block(static_cast<Eigen::Index>(r), s * m, 1, m) = table.row(users[r]);
    }
  }
  return out;
}

nn::Vector encode(const CatModel& model, const ConcatUserInput& input) {
  if (input.values.size() != model.input_size()) {
    throw ShapeError("CAT input has length " + std::to_string(input.values.size()) + ", expected " +
                     std::to_string(model.input_size()));
  }
  return model.encoder.infer(input.values.transpose()).row(0).transpose();
}

nn::Vector decode(const CatModel& model, const nn::Vector& embedding) {
  if (embedding.size() != model.dim()) throw ShapeError("global embedding has the wrong length");
  return model.decoder.infer(embedding.transpose()).row(0).transpose();
}

ConcatUserInput mask(const CatModel& model, ConcatUserInput input, int k, Rng& rng) {
  const int n = model.n_domains();
  if (k < 1 || k >= n) throw ConfigError("masked domain count must be in [1, n_domains)");
  if (input.values.size() != model.input_size()) throw ShapeError("CAT input has the wrong length");
  const int m = model.dim();
  for (const int slot : choose_slots(n, k, rng)) {
    input.values.segment(slot * m, m) = model.mask_row(slot).transpose();
    input.masked.push_back(model.domain_order[static_cast<std::size_t>(slot)]);
  }
  return input;
}

MaskedBatch mask_batch(const CatModel& model, const nn::Matrix& inputs, int k, Rng& rng) {
  const int n = model.n_domains();
  if (k < 0 || k >= n) throw ConfigError("masked domain count must be in [0, n_domains)");
  nn::require_shape(inputs, inputs.rows(), model.input_size(), "CAT batch");
  MaskedBatch out;
  out.values = inputs;
  out.masked_slots.resize(static_cast<std::size_t>(inputs.rows()));
  if (k == 0) return out;
  const int m = model.dim();
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    auto slots = choose_slots(n, k, rng);
    for (const int slot : slots) out.values.block(r, slot * m, 1, m) = model.mask_row(slot);
    out.masked_slots[static_cast<std::size_t>(r)] = std::move(slots);
  }
  return out;
}

double reconstruction_loss(const nn::Matrix& original, const nn::Matrix& reconstructed, int n_domains,
                           bool squared, nn::Matrix* grad) {
  nn::require_shape(reconstructed, original.rows(), original.cols(), "reconstruction");
  if (n_domains <= 0 || original.cols() % n_domains != 0) {
    throw ShapeError("input width is not a multiple of the domain count");
  }
  const Eigen::Index m = original.cols() / n_domains;
  const auto rows = original.rows();
  if (grad) *grad = nn::Matrix::Zero(rows, original.cols());
  if (rows == 0) return 0.0;
  const double inv_rows = 1.0 / static_cast<double>(rows);
  double total = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int s = 0; s < n_domains; ++s) {
      const auto residual = (reconstructed.block(r, s * m, 1, m) - original.block(r, s * m, 1, m)).eval();
      const double sq = residual.squaredNorm();
      if (squared) {
        total += sq;
        if (grad) grad->block(r, s * m, 1, m) = 2.0 * inv_rows * residual;
      } else {
        const double norm = std::sqrt(sq);
        total += norm;
        if (grad && norm > 0.0) grad->block(r, s * m, 1, m) = (inv_rows / norm) * residual;
      }
    }
  }
  return total * inv_rows;
}

double masked_reconstruction_loss(const CatModel& model, const MaskedBatch& masked,
                                  const nn::Matrix& original) {
  const nn::Matrix recon = model.decoder.infer(model.encoder.infer(masked.values));
  return reconstruction_loss(original, recon, model.n_domains(), model.config.squared_error);
}

double contrastive_loss(const nn::Matrix& e, const nn::Matrix& e_star, double tau, bool exclude_positive,
                        nn::Matrix* grad_e, nn::Matrix* grad_e_star, std::span<const int> users) {
  nn::require_shape(e_star, e.rows(), e.cols(), "contrastive pair");
  const Eigen::Index n = e.rows();
  if (n < 2) throw ConfigError("contrastive loss needs a batch of at least 2");
  if (!(tau > 0)) throw ConfigError("temperature must be positive");
  nn::Vector norm_a;
  nn::Vector norm_b;
  const nn::Matrix a = normalize_rows(e, norm_a, users);
  const nn::Matrix b = normalize_rows(e_star, norm_b, users);
  const nn::Matrix s = (a * b.transpose()) / tau;  // s(i,k) = cos(e_i, e*_k) / tau

  // Row-wise and column-wise softmax of s; with exclude_positive the
  // diagonal is dropped from both denominators.
  const nn::Vector row_max = s.rowwise().maxCoeff();
  const Eigen::RowVectorXd col_max = s.colwise().maxCoeff();
  nn::Matrix row_exp = (s.colwise() - row_max).array().exp().matrix();
  nn::Matrix col_exp = (s.rowwise() - col_max).array().exp().matrix();
  if (exclude_positive) {
    row_exp.diagonal().setZero();
    col_exp.diagonal().setZero();
  }
  const nn::Vector row_sum = row_exp.rowwise().sum();
  const Eigen::RowVectorXd col_sum = col_exp.colwise().sum();
  const double total = -2.0 * s.trace() + (row_sum.array().log() + row_max.array()).sum() +
                       (col_sum.array().log() + col_max.array()).sum();

  if (grad_e || grad_e_star) {
    // dL/ds = -2 I + rowwise softmax + columnwise softmax
    nn::Matrix g = row_sum.cwiseInverse().asDiagonal() * row_exp;
    g += col_exp * col_sum.cwiseInverse().asDiagonal();
    g.diagonal().array() -= 2.0;
    if (grad_e) *grad_e = back_through_normalize((g * b) / tau, a, norm_a);
    if (grad_e_star) *grad_e_star = back_through_normalize((g.transpose() * a) / tau, b, norm_b);
  }
  return total;
}

double retrieval_accuracy(const nn::Matrix& e, const nn::Matrix& e_star) {
  nn::require_shape(e_star, e.rows(), e.cols(), "retrieval pair");
  if (e.rows() == 0) return 0.0;
  const nn::Matrix a = e.rowwise().normalized();
  const nn::Matrix b = e_star.rowwise().normalized();
  const nn::Matrix s = a * b.transpose();
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    Eigen::Index best = 0;
    s.row(i).maxCoeff(&best);
    if (best == i) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(e.rows());
}

nn::ConstParamBlocks CatGrads::blocks() const {
  nn::ConstParamBlocks out = encoder.blocks();
  for (auto b : decoder.blocks()) out.push_back(b);
  out.emplace_back(mask.data(), static_cast<std::size_t>(mask.size()));
  return out;
}

CatLoss cat_loss(const CatModel& model, const nn::Matrix& inputs, const MaskedBatch& masked,
                 CatGrads* grads, std::span<const int> users) {
  const int n = model.n_domains();
  const int m = model.dim();
  const auto& cfg = model.config;
  nn::require_shape(inputs, inputs.rows(), model.input_size(), "CAT batch");
  nn::require_shape(masked.values, inputs.rows(), model.input_size(), "masked CAT batch");

  auto enc_tape = model.encoder.forward(inputs);
  auto enc_star_tape = model.encoder.forward(masked.values);
  const nn::Matrix& e = enc_tape.output();
  const nn::Matrix& e_star = enc_star_tape.output();
  auto dec_tape = model.decoder.forward(e);
  auto dec_star_tape = model.decoder.forward(e_star);

  const double w_rec = cfg.alpha1;
  const double w_masked = cfg.alpha2;
  const double w_con = 1.0 - cfg.alpha1 - cfg.alpha2;

  CatLoss loss;
  nn::Matrix g_recon;
  nn::Matrix g_recon_star;
  nn::Matrix g_e;
  nn::Matrix g_e_star;
  const bool want = grads != nullptr;
  loss.reconstruction =
      reconstruction_loss(inputs, dec_tape.output(), n, cfg.squared_error, want ? &g_recon : nullptr);
  loss.masked_reconstruction = reconstruction_loss(inputs, dec_star_tape.output(), n, cfg.squared_error,
                                                   want ? &g_recon_star : nullptr);
  loss.contrastive = contrastive_loss(e, e_star, cfg.tau, cfg.exclude_positive, want ? &g_e : nullptr,
                                      want ? &g_e_star : nullptr, users);
  loss.retrieval_accuracy = retrieval_accuracy(e, e_star);
  loss.total = w_rec * loss.reconstruction + w_masked * loss.masked_reconstruction + w_con * loss.contrastive;

  if (!want) return loss;

  auto dec_grads = model.decoder.backward(std::move(dec_tape), w_rec * g_recon);
  auto dec_star_grads = model.decoder.backward(std::move(dec_star_tape), w_masked * g_recon_star);
  nn::Matrix up_e = dec_grads.input + w_con * g_e;
  nn::Matrix up_e_star = dec_star_grads.input + w_con * g_e_star;
  auto enc_grads = model.encoder.backward(std::move(enc_tape), up_e);
  auto enc_star_grads = model.encoder.backward(std::move(enc_star_tape), up_e_star);

  dec_grads += dec_star_grads;
  enc_grads += enc_star_grads;

  grads->mask = nn::Matrix::Zero(model.mask.rows(), m);
  for (std::size_t r = 0; r < masked.masked_slots.size(); ++r) {
    for (const int slot : masked.masked_slots[r]) {
      grads->mask.row(cfg.per_domain_mask ? slot : 0) +=
          enc_star_grads.input.block(static_cast<Eigen::Index>(r), slot * m, 1, m);
    }
  }
  enc_grads.input.resize(0, 0);
  dec_grads.input.resize(0, 0);
  grads->encoder = std::move(enc_grads);
  grads->decoder = std::move(dec_grads);
  return loss;
}

CatTrainResult train_cat(CatModel model, DomainTables tables, const CatTrainConfig& config, Rng& rng) {
  model.config.validate(model.n_domains());
  if (config.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (config.batch_size < 2) throw ConfigError("CAT batch size must be >= 2");
  const int n_users = tables.empty() ? 0 : tables[model.domain_order.front()].n_entities();
  for (const int d : model.domain_order) {
    if (tables[static_cast<std::size_t>(d)].n_entities() != n_users) {
      throw ShapeError("user tables disagree on the number of users");
    }
  }
  if (n_users < 2) throw ConfigError("CAT training needs at least 2 users");

  CatTrainResult result;
  nn::Optimizer opt(config.optimizer, nn::block_sizes(std::as_const(model).parameter_blocks()));
  std::vector<int> order(static_cast<std::size_t>(n_users));
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle(order, rng);
    CatEpochLog log;
    std::size_t batches = 0;
    double weighted_accuracy = 0.0;
    for (std::size_t start = 0; start < order.size();) {
      std::size_t len = std::min(config.batch_size, order.size() - start);
      if (order.size() - start - len == 1) ++len;  // never leave a batch of one
      const std::span<const int> users(order.data() + start, len);
      start += len;

      const nn::Matrix x = concat_batch(model, tables, users);
      const MaskedBatch masked = mask_batch(model, x, model.config.masked_domains, rng);
      CatGrads grads;
      const CatLoss loss = cat_loss(model, x, masked, &grads, users);
      if (!std::isfinite(loss.total)) {
        throw TrainingError("CAT loss diverged at epoch " + std::to_string(epoch));
      }
      opt.step(model.parameter_blocks(), grads.blocks());
      ++batches;
      log.total += loss.total;
      log.reconstruction += loss.reconstruction;
      log.masked_reconstruction += loss.masked_reconstruction;
      log.contrastive += loss.contrastive;
      weighted_accuracy += loss.retrieval_accuracy * static_cast<double>(len);
    }
    const double nb = static_cast<double>(batches);
    log.total /= nb;
    log.reconstruction /= nb;
    log.masked_reconstruction /= nb;
    log.contrastive /= nb;
    log.retrieval_accuracy = weighted_accuracy / static_cast<double>(n_users);
    spdlog::debug("cat epoch {} loss {:.5f} rec {:.5f} masked {:.5f} con {:.4f} acc {:.3f}", epoch, log.total,
                  log.reconstruction, log.masked_reconstruction, log.contrastive, log.retrieval_accuracy);
    result.curve.push_back(log);
  }
  result.model = std::move(model);
  return result;
}

mf::EmbeddingTable global_embeddings(const CatModel& model, DomainTables tables) {
  const int n_users = tables[static_cast<std::size_t>(model.domain_order.front())].n_entities();
  mf::EmbeddingTable out(n_users, model.dim());
  constexpr int kBlock = 1024;
  std::vector<int> users;
  for (int start = 0; start < n_users; start += kBlock) {
    const int len = std::min(kBlock, n_users - start);
    users.resize(static_cast<std::size_t>(len));
    std::iota(users.begin(), users.end(), start);
    out.matrix().middleRows(start, len) = model.encoder.infer(concat_batch(model, tables, users));
  }
  return out;
}

}  // namespace catart::cat
