#include <doctest.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "catart/bprmf.hpp"
#include "catart/errors.hpp"
#include "catart/grad_check.hpp"
#include "catart/synth.hpp"
#include "support.hpp"

using namespace catart;

namespace {

data::InteractionStore toy_store() {
  data::RawStore raw;
  raw.n_users = 3;
  raw.domains.push_back({"d", 4, {{0, 0}, {0, 1}, {1, 2}, {2, 3}, {2, 0}}});
  return data::split(raw, {}, 0);
}

}  // namespace

TEST_CASE("bpr loss matches its scalar definition") {
  for (const auto& [pos, neg] : std::vector<std::pair<double, double>>{{0.0, 0.0}, {2.0, -1.0}, {-3.0, 0.5}}) {
    CHECK(mf::bpr_loss(pos, neg) == doctest::Approx(-std::log(1.0 / (1.0 + std::exp(-(pos - neg))))).epsilon(1e-12));
  }
  CHECK(mf::bpr_loss(0.0, 0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::isfinite(mf::bpr_loss(-1000.0, 1000.0)));
  CHECK(mf::bpr_loss(-1000.0, 1000.0) == doctest::Approx(2000.0));
}

TEST_CASE("batch loss and gradients against a scalar oracle and central differences") {
  Rng rng(4);
  auto model = mf::init_model(0, 3, 4, 4, 0.5, rng);
  const std::vector<data::BprTriplet> batch{{0, 0, 2, 0}, {1, 2, 0, 0}, {2, 3, 1, 0}, {0, 1, 3, 0}};

  double oracle = 0.0;
  for (const auto& t : batch) {
    double pos = 0.0, neg = 0.0;
    for (int k = 0; k < 4; ++k) {
      pos += model.users.row(t.user)(k) * model.items.row(t.pos_item)(k);
      neg += model.users.row(t.user)(k) * model.items.row(t.neg_item)(k);
    }
    oracle += std::log1p(std::exp(neg - pos));
  }
  nn::Matrix ug, ig;
  const double loss = mf::bpr_batch_loss(model, batch, &ug, &ig);
  CHECK(std::abs(loss - oracle) < 1e-10);

  auto& users = model.users.matrix();
  auto& items = model.items.matrix();
  const nn::ParamBlocks params{std::span<double>(users.data(), static_cast<std::size_t>(users.size())),
                               std::span<double>(items.data(), static_cast<std::size_t>(items.size()))};
  const nn::ConstParamBlocks analytic{std::span<const double>(ug.data(), static_cast<std::size_t>(ug.size())),
                                      std::span<const double>(ig.data(), static_cast<std::size_t>(ig.size()))};
  const auto report = nn::grad_check([&] { return mf::bpr_batch_loss(model, batch); }, params, analytic, 1e-4);
  CHECK(report.passed);
  CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("score checks ids") {
  Rng rng(1);
  const auto model = mf::init_model(0, 2, 3, 4, 0.1, rng);
  CHECK(mf::score(model, 1, 2) == doctest::Approx(model.users.row(1).dot(model.items.row(2))));
  CHECK_THROWS_AS(mf::score(model, 2, 0), std::out_of_range);
  CHECK_THROWS_AS(mf::score(model, 0, -1), std::out_of_range);
}

TEST_CASE("embedding checkpoints round-trip bitwise and reject foreign files") {
  const auto dir = test::scratch_dir("bprmf_ckpt");
  Rng rng(2);
  const auto table = mf::EmbeddingTable::uniform(7, 5, 0.3, rng);
  CHECK(table.matrix().rows() == 8);
  CHECK(table.matrix().row(7).isZero(0.0));
  table.save(dir / "t.ckpt");
  CHECK(mf::EmbeddingTable::load(dir / "t.ckpt") == table);

  std::ofstream(dir / "junk.ckpt") << "not a checkpoint at all";
  CHECK_THROWS_AS(mf::EmbeddingTable::load(dir / "junk.ckpt"), ParseError);
  table.export_tsv(dir / "t.tsv");
  std::ifstream in(dir / "t.tsv");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 7);
}

TEST_CASE("zero epochs keep the initial model") {
  const auto store = toy_store();
  Rng init_rng(3);
  const auto init = mf::init_model(0, 3, 4, 4, 0.1, init_rng);
  mf::MfConfig cfg;
  cfg.dim = 4;
  cfg.epochs = 0;
  Rng rng(1);
  const auto result = mf::train_domain(init, store, cfg, rng);
  CHECK(result.model.users == init.users);
  CHECK(result.model.items == init.items);
  CHECK(result.curve.best_epoch == 0);
  CHECK(result.curve.valid_recall.size() == 1);
}

TEST_CASE("training improves validation recall on a structured world") {
  auto spec = synth::make_scenario("correlated-5", 1);
  spec.n_users = 400;
  spec.domains.resize(3);
  for (auto& d : spec.domains) {
    d.n_items = 100;
    d.density = 0.08;
  }
  const auto world = synth::generate(spec);
  const auto store = data::split(world.raw, {}, 1);
  mf::MfConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 40;
  Rng init_rng(5);
  Rng rng(6);
  const auto result =
      mf::train_domain(mf::init_model(0, store.n_users(), store.n_items(0), 16, cfg.init_scale, init_rng), store, cfg, rng);
  CHECK(result.curve.best_epoch > 0);
  CHECK(result.curve.valid_recall[static_cast<std::size_t>(result.curve.best_epoch)] >
        result.curve.valid_recall.front() + 0.1);
  CHECK(result.curve.loss.back() < result.curve.loss.front());
}
