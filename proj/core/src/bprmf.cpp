#include "catart/bprmf.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <unordered_set>

#include "catart/binary_io.hpp"
#include "catart/errors.hpp"

namespace catart::mf {

namespace {
constexpr std::uint32_t kTableVersion = 1;

void check_id(int id, int n, const char* what) {
  if (id < 0 || id >= n) {
    throw std::out_of_range(std::string(what) + " id " + std::to_string(id) + " out of range [0, " +
                            std::to_string(n) + ")");
  }
}

double validation_recall(const DomainMfModel& model, const data::InteractionStore& store) {
  eval::EvalOptions opts;
  opts.ks = {10};
  opts.target = data::Split::valid;
  const int domains[] = {model.domain};
  const auto report = eval::evaluate(make_scorer(model), store, domains, opts);
  return report.cell(model.domain, 10).recall;
}
}  // namespace

EmbeddingTable::EmbeddingTable(int n_entities, int dim)
    : n_entities_(n_entities), data_(nn::Matrix::Zero(n_entities + 1, dim)) {
  if (n_entities < 0 || dim <= 0) throw ShapeError("embedding table needs n >= 0 and dim > 0");
}

EmbeddingTable EmbeddingTable::uniform(int n_entities, int dim, double scale, Rng& rng) {
  EmbeddingTable t(n_entities, dim);
  for (int r = 0; r < n_entities; ++r) {
    for (int c = 0; c < dim; ++c) t.data_(r, c) = rng.uniform(-scale, scale);
  }
  return t;
}

EmbeddingTable EmbeddingTable::from_matrix(nn::Matrix rows) {
  if (rows.rows() < 1 || rows.cols() < 1) throw ShapeError("embedding matrix must have a spare row");
  EmbeddingTable t;
  t.n_entities_ = static_cast<int>(rows.rows()) - 1;
  t.data_ = std::move(rows);
  return t;
}

nn::Matrix EmbeddingTable::gather(std::span<const int> ids) const {
  nn::Matrix out(static_cast<Eigen::Index>(ids.size()), data_.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    check_id(ids[r], static_cast<int>(data_.rows()), "embedding");
    out.row(static_cast<Eigen::Index>(r)) = data_.row(ids[r]);
  }
  return out;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
  io::BinaryWriter w(path);
  w.magic(io::kEmbeddingMagic);
  w.u32(kTableVersion);
  w.u64(static_cast<std::uint64_t>(n_entities_));
  w.u64(static_cast<std::uint64_t>(dim()));
  w.f64s(data_.data(), static_cast<std::size_t>(data_.size()));
  w.close();
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  io::BinaryReader r(path);
  r.expect_magic(io::kEmbeddingMagic);
  if (const auto v = r.u32(); v != kTableVersion) {
    throw ParseError("unsupported embedding checkpoint version " + std::to_string(v));
  }
  const auto n = r.u64();
  const auto dim = r.u64();
  if (n > (1ULL << 31) || dim == 0 || dim > (1ULL << 20)) throw ParseError("implausible table shape");
  EmbeddingTable t(static_cast<int>(n), static_cast<int>(dim));
  r.f64s(t.data_.data(), static_cast<std::size_t>(t.data_.size()));
  r.expect_end();
  return t;
}

void EmbeddingTable::export_tsv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << std::setprecision(17);
  for (int r = 0; r < n_entities_; ++r) {
    out << r;
    for (Eigen::Index c = 0; c < data_.cols(); ++c) out << '\t' << data_(r, c);
    out << '\n';
  }
}

DomainMfModel init_model(int domain, int n_users, int n_items, int dim, double init_scale, Rng& rng) {
  DomainMfModel m;
  m.domain = domain;
  m.users = EmbeddingTable::uniform(n_users, dim, init_scale, rng);
  m.items = EmbeddingTable::uniform(n_items, dim, init_scale, rng);
  return m;
}

double score(const DomainMfModel& model, int user, int item) {
  check_id(user, model.users.n_entities(), "user");
  check_id(item, model.items.n_entities(), "item");
  return model.users.row(user).dot(model.items.row(item));
}

double bpr_loss(double score_pos, double score_neg) { return nn::softplus(score_neg - score_pos); }

double bpr_batch_loss(const DomainMfModel& model, std::span<const data::BprTriplet> batch,
                      nn::Matrix* user_grad, nn::Matrix* item_grad) {
  if (user_grad) *user_grad = nn::Matrix::Zero(model.users.matrix().rows(), model.users.dim());
  if (item_grad) *item_grad = nn::Matrix::Zero(model.items.matrix().rows(), model.items.dim());
  double total = 0.0;
  for (const auto& t : batch) {
    const auto u = model.users.row(t.user);
    const auto p = model.items.row(t.pos_item);
    const auto n = model.items.row(t.neg_item);
    const double x = u.dot(p) - u.dot(n);
    total += nn::softplus(-x);
    // d softplus(-x) / dx = -sigmoid(-x)
    const double g = -nn::sigmoid(-x);
    if (user_grad) user_grad->row(t.user) += g * (p - n);
    if (item_grad) {
      item_grad->row(t.pos_item) += g * u;
      item_grad->row(t.neg_item) -= g * u;
    }
  }
  return total;
}

eval::BlockScorer make_scorer(const DomainMfModel& model) {
  return [&model](int, std::span<const int> users) -> nn::Matrix {
    return model.users.gather(users) * model.items.matrix().topRows(model.items.n_entities()).transpose();
  };
}

MfTrainResult train_domain(DomainMfModel model, const data::InteractionStore& store,
                           const MfConfig& config, Rng& rng) {
  if (config.batch_size == 0) throw ConfigError("batch size must be positive");
  if (config.epochs < 0 || config.patience < 1) throw ConfigError("epochs >= 0 and patience >= 1 required");
  const int d = model.domain;
  const std::size_t per_epoch = store.count(d, data::Split::train);
  if (per_epoch == 0) throw ConfigError("domain " + std::to_string(d) + " has no train data");

  MfTrainResult result;
  result.curve.valid_recall.push_back(validation_recall(model, store));
  DomainMfModel best = model;
  double best_recall = result.curve.valid_recall.front();
  int since_best = 0;

  const int dim = model.users.dim();
  std::vector<int> touched_users;
  std::vector<int> touched_items;
  nn::Matrix user_grad = nn::Matrix::Zero(model.users.matrix().rows(), dim);
  nn::Matrix item_grad = nn::Matrix::Zero(model.items.matrix().rows(), dim);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::size_t drawn = 0;
    while (drawn < per_epoch) {
      const std::size_t b = std::min(config.batch_size, per_epoch - drawn);
      const auto batch = data::sample_batch(store, d, b, rng);
      drawn += b;
      touched_users.clear();
      touched_items.clear();
      for (const auto& t : batch) {
        const auto u = model.users.row(t.user);
        const auto p = model.items.row(t.pos_item);
        const auto n = model.items.row(t.neg_item);
        const double x = u.dot(p) - u.dot(n);
        epoch_loss += nn::softplus(-x);
        const double g = -nn::sigmoid(-x);
        user_grad.row(t.user) += g * (p - n);
        item_grad.row(t.pos_item) += g * u;
        item_grad.row(t.neg_item) -= g * u;
        touched_users.push_back(t.user);
        touched_items.push_back(t.pos_item);
        touched_items.push_back(t.neg_item);
      }
      if (!std::isfinite(epoch_loss)) {
        throw TrainingError("bpr loss diverged in domain " + std::to_string(d) + " at epoch " +
                            std::to_string(epoch));
      }
      // Rows may repeat in the touched lists; apply each once, then clear it.
      auto apply = [&](nn::Matrix& table, nn::Matrix& grad, const std::vector<int>& rows) {
        for (const int r : rows) {
          if (grad.row(r).isZero(0.0) && config.weight_decay == 0.0) continue;
          table.row(r) -= config.learning_rate * (grad.row(r) + config.weight_decay * table.row(r));
          grad.row(r).setZero();
        }
      };
      std::sort(touched_users.begin(), touched_users.end());
      touched_users.erase(std::unique(touched_users.begin(), touched_users.end()), touched_users.end());
      std::sort(touched_items.begin(), touched_items.end());
      touched_items.erase(std::unique(touched_items.begin(), touched_items.end()), touched_items.end());
      apply(model.users.matrix(), user_grad, touched_users);
      apply(model.items.matrix(), item_grad, touched_items);
    }
    result.curve.loss.push_back(epoch_loss / static_cast<double>(per_epoch));
    const double recall = validation_recall(model, store);
    result.curve.valid_recall.push_back(recall);
    spdlog::debug("mf domain {} epoch {} loss {:.6f} valid R@10 {:.4f}", d, epoch,
                  result.curve.loss.back(), recall);
    if (recall > best_recall) {
      best_recall = recall;
      best = model;
      result.curve.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  result.model = std::move(best);
  return result;
}

}  // namespace catart::mf
