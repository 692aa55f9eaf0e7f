#include "catart/art.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "catart/binary_io.hpp"
#include "catart/errors.hpp"

namespace catart::art {

namespace {

constexpr std::uint32_t kArtVersion = 1;

void check_inputs(const ArtModel& model, const UserInputs& inputs) {
  if (inputs.global == nullptr) throw ConfigError("stage 3 needs the global embedding table");
  if (static_cast<std::size_t>(model.target()) >= inputs.domain_users.size()) {
    throw ShapeError("no user table for the target domain");
  }
  for (const int s : model.sources()) {
    if (static_cast<std::size_t>(s) >= inputs.domain_users.size()) {
      throw ShapeError("no user table for source domain " + std::to_string(s));
    }
  }
  if (inputs.global->dim() != model.dim()) throw ShapeError("global embedding size differs from the model");
}

// Row-wise softmax over the source logits.
nn::Matrix attention_weights(const nn::Matrix& query, const std::vector<nn::Matrix>& values, int dim) {
  const auto rows = query.rows();
  const auto n_src = static_cast<Eigen::Index>(values.size());
  nn::Matrix w(rows, n_src);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  for (Eigen::Index s = 0; s < n_src; ++s) {
    w.col(s) = (query.cwiseProduct(values[static_cast<std::size_t>(s)]).rowwise().sum()) * scale;
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    w.row(r) = nn::softmax(w.row(r).transpose()).transpose();
  }
  return w;
}

double validation_recall(const ArtModel& model, const UserInputs& inputs, const mf::EmbeddingTable& items,
                         const data::InteractionStore& store) {
  eval::EvalOptions opts;
  opts.ks = {10};
  opts.target = data::Split::valid;
  const int domains[] = {model.target()};
  return eval::evaluate(make_scorer(model, inputs, items), store, domains, opts).cell(model.target(), 10).recall;
}

}  // namespace

FusionMode parse_fusion_mode(std::string_view name) {
  if (name == "full") return FusionMode::full;
  if (name == "no_attention" || name == "no-attention") return FusionMode::no_attention;
  if (name == "global_only" || name == "global-only") return FusionMode::global_only;
  throw ConfigError("unknown fusion mode '" + std::string(name) + "'");
}

std::string_view to_string(FusionMode mode) {
  switch (mode) {
    case FusionMode::full: return "full";
    case FusionMode::no_attention: return "no_attention";
    case FusionMode::global_only: return "global_only";
  }
  return "?";
}

ArtModel ArtModel::create(int target, int n_domains, int dim, FusionMode mode, Rng& rng) {
  if (n_domains < 2) throw ConfigError("attention transfer needs at least one source domain");
  if (target < 0 || target >= n_domains) throw ConfigError("target domain out of range");
  if (dim <= 0) throw ConfigError("embedding size must be positive");
  ArtModel model;
  model.target_ = target;
  model.dim_ = dim;
  model.mode_ = mode;
  for (int d = 0; d < n_domains; ++d) {
    if (d == target) continue;
    model.sources_.push_back(d);
    auto mlp = nn::Mlp::glorot({dim, dim, dim}, rng);
    mlp.zero_output_layer();
    model.adapters.push_back(std::move(mlp));
  }
  model.ind = nn::Mlp::glorot({dim, dim, dim}, rng);
  model.ind.zero_output_layer();
  return model;
}

nn::ParamBlocks ArtModel::parameter_blocks() {
  nn::ParamBlocks out;
  for (auto& a : adapters) {
    for (auto b : a.parameter_blocks()) out.push_back(b);
  }
  for (auto b : ind.parameter_blocks()) out.push_back(b);
  return out;
}

nn::ConstParamBlocks ArtModel::parameter_blocks() const {
  nn::ConstParamBlocks out;
  for (const auto& a : adapters) {
    for (auto b : a.parameter_blocks()) out.push_back(b);
  }
  for (auto b : ind.parameter_blocks()) out.push_back(b);
  return out;
}

void ArtModel::save(const std::filesystem::path& path) const {
  io::BinaryWriter w(path);
  w.magic(io::kArtMagic);
  w.u32(kArtVersion);
  w.i64(target_);
  w.i64(dim_);
  w.u32(static_cast<std::uint32_t>(mode_));
  w.u64(sources_.size());
  for (const int s : sources_) w.i64(s);
  for (const auto& a : adapters) w.mlp(a);
  w.mlp(ind);
  w.close();
}

ArtModel ArtModel::load(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic(io::kArtMagic);
  if (const auto v = r.u32(); v != kArtVersion) {
    throw ParseError("unsupported ART checkpoint version " + std::to_string(v));
  }
  ArtModel model;
  model.target_ = static_cast<int>(r.i64());
  model.dim_ = static_cast<int>(r.i64());
  const auto mode = r.u32();
  if (mode > static_cast<std::uint32_t>(FusionMode::global_only)) throw ParseError("bad fusion mode in ART checkpoint");
  model.mode_ = static_cast<FusionMode>(mode);
  const auto n = r.u64();
  if (n == 0 || n > 4096) throw ParseError("implausible source count in ART checkpoint");
  for (std::uint64_t i = 0; i < n; ++i) model.sources_.push_back(static_cast<int>(r.i64()));
  for (std::uint64_t i = 0; i < n; ++i) model.adapters.push_back(r.mlp());
  model.ind = r.mlp();
  r.expect_end();
  auto fits = [&](const nn::Mlp& m) { return m.input_size() == model.dim_ && m.output_size() == model.dim_; };
  if (!fits(model.ind) || !std::all_of(model.adapters.begin(), model.adapters.end(), fits)) {
    throw ParseError("ART checkpoint shapes are inconsistent");
  }
  return model;
}

Attention attend(const ArtModel& model, const nn::Vector& query, const nn::Matrix& sources) {
  const auto n_src = static_cast<Eigen::Index>(model.sources().size());
  if (n_src == 0 || sources.rows() == 0) throw ConfigError("attention needs at least one source embedding");
  if (query.size() != model.dim()) throw ShapeError("attention query has the wrong length");
  nn::require_shape(sources, n_src, model.dim(), "attention sources");
  std::vector<nn::Matrix> values;
  for (Eigen::Index s = 0; s < n_src; ++s) {
    values.push_back(model.adapters[static_cast<std::size_t>(s)].infer(sources.row(s)));
  }
  const nn::Matrix q = query.transpose();
  Attention out;
  out.weights = attention_weights(q, values, model.dim()).row(0).transpose();
  out.output = nn::Vector::Zero(model.dim());
  for (Eigen::Index s = 0; s < n_src; ++s) {
    out.output += out.weights[s] * values[static_cast<std::size_t>(s)].row(0).transpose();
  }
  return out;
}

FusedUserEmbedding fuse(const ArtModel& model, const nn::Vector& domain_embedding,
                        const nn::Vector& global_embedding, const nn::Vector& attended) {
  const int m = model.dim();
  if (domain_embedding.size() != m || global_embedding.size() != m || attended.size() != m) {
    throw ShapeError("fused components must all have length " + std::to_string(m));
  }
  FusedUserEmbedding f;
  f.domain = domain_embedding;
  f.adapted_global = model.ind.infer(global_embedding.transpose()).row(0).transpose();
  f.attended = attended;
  f.h = f.domain + f.adapted_global + f.attended;
  return f;
}

double score_fused(const nn::Vector& h, const nn::Vector& item) {
  if (h.size() != item.size()) throw ShapeError("user and item embeddings differ in length");
  return h.dot(item);
}

ArtForward forward(const ArtModel& model, const UserInputs& inputs, std::span<const int> users) {
  check_inputs(model, inputs);
  ArtForward f;
  f.users.assign(users.begin(), users.end());
  f.query = inputs.domain_users[static_cast<std::size_t>(model.target())].gather(users);
  f.ind_tape = model.ind.forward(inputs.global->gather(users));
  f.h = f.query + f.ind_tape.output();
  if (model.mode() == FusionMode::global_only) return f;

  const std::size_t n_src = model.sources().size();
  for (std::size_t s = 0; s < n_src; ++s) {
    const auto& table = inputs.domain_users[static_cast<std::size_t>(model.sources()[s])];
    auto tape = model.adapters[s].forward(table.gather(users));
    f.values.push_back(tape.output());
    f.adapter_tapes.push_back(std::move(tape));
  }
  if (model.mode() == FusionMode::full) {
    f.weights = attention_weights(f.query, f.values, model.dim());
  } else {
    f.weights = nn::Matrix::Constant(f.query.rows(), static_cast<Eigen::Index>(n_src), 1.0 / static_cast<double>(n_src));
  }
  for (std::size_t s = 0; s < n_src; ++s) {
    f.h += f.weights.col(static_cast<Eigen::Index>(s)).asDiagonal() * f.values[s];
  }
  return f;
}

nn::Matrix fused_embeddings(const ArtModel& model, const UserInputs& inputs, std::span<const int> users) {
  return forward(model, inputs, users).h;
}

ArtGrads backward(const ArtModel& model, ArtForward&& fwd, const nn::Matrix& grad_h) {
  nn::require_shape(grad_h, fwd.h.rows(), fwd.h.cols(), "fused gradient");
  ArtGrads g;
  g.ind = model.ind.backward(std::move(fwd.ind_tape), grad_h);
  g.ind.input.resize(0, 0);
  const std::size_t n_src = model.sources().size();
  if (model.mode() == FusionMode::global_only) {
    for (const auto& a : model.adapters) g.adapters.push_back(a.zero_grads());
    return g;
  }
  std::vector<nn::Matrix> grad_values(n_src);
  if (model.mode() == FusionMode::full) {
    // e^a = sum_s w_s V_s with w = softmax(l), l_s = q . V_s / sqrt(m)
    const double scale = 1.0 / std::sqrt(static_cast<double>(model.dim()));
    const auto rows = grad_h.rows();
    nn::Matrix dots(rows, static_cast<Eigen::Index>(n_src));
    for (std::size_t s = 0; s < n_src; ++s) {
      dots.col(static_cast<Eigen::Index>(s)) = grad_h.cwiseProduct(fwd.values[s]).rowwise().sum();
    }
    const nn::Vector mean_dot = fwd.weights.cwiseProduct(dots).rowwise().sum();
    for (std::size_t s = 0; s < n_src; ++s) {
      const auto c = static_cast<Eigen::Index>(s);
      const nn::Vector w = fwd.weights.col(c);
      const nn::Vector d_logit = w.cwiseProduct(dots.col(c) - mean_dot);
      grad_values[s] = w.asDiagonal() * grad_h + (scale * d_logit).asDiagonal() * fwd.query;
    }
  } else {
    for (std::size_t s = 0; s < n_src; ++s) grad_values[s] = grad_h / static_cast<double>(n_src);
  }
  for (std::size_t s = 0; s < n_src; ++s) {
    auto ag = model.adapters[s].backward(std::move(fwd.adapter_tapes[s]), grad_values[s]);
    ag.input.resize(0, 0);
    g.adapters.push_back(std::move(ag));
  }
  return g;
}

nn::ConstParamBlocks ArtGrads::blocks() const {
  nn::ConstParamBlocks out;
  for (const auto& a : adapters) {
    for (auto b : a.blocks()) out.push_back(b);
  }
  for (auto b : ind.blocks()) out.push_back(b);
  return out;
}

double art_bpr_loss(const ArtModel& model, const UserInputs& inputs, const mf::EmbeddingTable& items,
                    std::span<const data::BprTriplet> batch, ArtGrads* grads, nn::Matrix* item_grad) {
  if (items.dim() != model.dim()) throw ShapeError("item table size differs from the model");
  std::vector<int> users;
  std::unordered_map<int, Eigen::Index> row_of;
  for (const auto& t : batch) {
    if (t.domain != model.target()) throw ConfigError("triplet from a domain other than the target");
    if (row_of.emplace(t.user, static_cast<Eigen::Index>(users.size())).second) users.push_back(t.user);
  }
  if (item_grad) *item_grad = nn::Matrix::Zero(items.matrix().rows(), items.dim());
  if (users.empty()) {
    if (grads) {
      grads->adapters.clear();
      for (const auto& a : model.adapters) grads->adapters.push_back(a.zero_grads());
      grads->ind = model.ind.zero_grads();
    }
    return 0.0;
  }
  ArtForward fwd = forward(model, inputs, users);
  nn::Matrix grad_h = nn::Matrix::Zero(fwd.h.rows(), fwd.h.cols());
  double total = 0.0;
  for (const auto& t : batch) {
    const Eigen::Index r = row_of.at(t.user);
    const auto h = fwd.h.row(r);
    const auto p = items.row(t.pos_item);
    const auto n = items.row(t.neg_item);
    const double x = h.dot(p) - h.dot(n);
    total += nn::softplus(-x);
    const double g = -nn::sigmoid(-x);
    grad_h.row(r) += g * (p - n);
    if (item_grad) {
      item_grad->row(t.pos_item) += g * h;
      item_grad->row(t.neg_item) -= g * h;
    }
  }
  if (grads) *grads = backward(model, std::move(fwd), grad_h);
  return total;
}

eval::BlockScorer make_scorer(const ArtModel& model, const UserInputs& inputs, const mf::EmbeddingTable& items) {
  return [&model, inputs, &items](int, std::span<const int> users) -> nn::Matrix {
    return fused_embeddings(model, inputs, users) * items.matrix().topRows(items.n_entities()).transpose();
  };
}

ArtTrainResult train_art(ArtModel model, const UserInputs& inputs, const mf::EmbeddingTable& items,
                         const data::InteractionStore& store, const ArtConfig& config, Rng& rng) {
  check_inputs(model, inputs);
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");
  if (config.epochs < 0 || config.patience < 1) throw ConfigError("epochs >= 0 and patience >= 1 required");
  const int d = model.target();
  const std::size_t per_epoch = store.count(d, data::Split::train);
  if (per_epoch == 0) throw ConfigError("domain " + std::to_string(d) + " has no train data");

  ArtTrainResult result;
  result.items = items;
  auto block_sizes = nn::block_sizes(std::as_const(model).parameter_blocks());
  if (config.unfreeze_items) block_sizes.push_back(static_cast<std::size_t>(items.matrix().size()));
  nn::Optimizer opt(config.optimizer, block_sizes);

  double best_recall = validation_recall(model, inputs, result.items, store);
  result.valid_recall.push_back(best_recall);
  ArtModel best = model;
  mf::EmbeddingTable best_items = result.items;
  int since_best = 0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t drawn = 0; drawn < per_epoch;) {
      const std::size_t b = std::min(config.batch_size, per_epoch - drawn);
      const auto batch = data::sample_batch(store, d, b, rng);
      drawn += b;
      ArtGrads grads;
      nn::Matrix item_grad;
      epoch_loss += art_bpr_loss(model, inputs, result.items, batch, &grads,
                                 config.unfreeze_items ? &item_grad : nullptr);
      if (!std::isfinite(epoch_loss)) {
        throw TrainingError("stage-3 loss diverged in domain " + std::to_string(d) + " at epoch " +
                            std::to_string(epoch));
      }
      auto params = model.parameter_blocks();
      auto grad_blocks = grads.blocks();
      if (config.unfreeze_items) {
        params.emplace_back(result.items.matrix().data(), static_cast<std::size_t>(result.items.matrix().size()));
        grad_blocks.emplace_back(item_grad.data(), static_cast<std::size_t>(item_grad.size()));
      }
      opt.step(params, grad_blocks);
    }
    result.loss.push_back(epoch_loss / static_cast<double>(per_epoch));
    const double recall = validation_recall(model, inputs, result.items, store);
    result.valid_recall.push_back(recall);
    spdlog::debug("art domain {} epoch {} loss {:.6f} valid R@10 {:.4f}", d, epoch, result.loss.back(), recall);
    if (recall > best_recall) {
      best_recall = recall;
      best = model;
      best_items = result.items;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  result.model = std::move(best);
  result.items = std::move(best_items);
  return result;
}

std::vector<double> report_attention(const ArtModel& model, const UserInputs& inputs, std::span<const int> users) {
  if (model.mode() == FusionMode::global_only) throw ConfigError("this model variant has no source attention");
  if (users.empty()) throw ConfigError("attention report needs at least one user");
  constexpr std::size_t kBlock = 1024;
  nn::Vector sum = nn::Vector::Zero(static_cast<Eigen::Index>(model.sources().size()));
  for (std::size_t start = 0; start < users.size(); start += kBlock) {
    const auto part = users.subspan(start, std::min(kBlock, users.size() - start));
    sum += forward(model, inputs, part).weights.colwise().sum().transpose();
  }
  sum /= static_cast<double>(users.size());
  return {sum.data(), sum.data() + sum.size()};
}

}  // namespace catart::art
