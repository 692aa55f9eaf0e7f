#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "catart/art.hpp"
#include "catart/errors.hpp"
#include "catart/grad_check.hpp"
#include "support.hpp"

using namespace catart;
using catart::test::random_matrix;
using catart::test::random_vector;

namespace {

// Hidden PReLU slope 1 and identity weights: the adapter returns its input.
nn::Mlp identity_adapter(int m) {
  auto mlp = nn::Mlp::zeros({m, m, m}, 1.0);
  mlp.layer(0).weight = nn::Matrix::Identity(m, m);
  mlp.layer(1).weight = nn::Matrix::Identity(m, m);
  return mlp;
}

mf::EmbeddingTable table_from(const nn::Matrix& rows) {
  nn::Matrix padded = nn::Matrix::Zero(rows.rows() + 1, rows.cols());
  padded.topRows(rows.rows()) = rows;
  return mf::EmbeddingTable::from_matrix(padded);
}

// Gives every adapter and ind nonzero output layers so gradients are generic.
void randomize(art::ArtModel& model, Rng& rng) {
  auto shake = [&](nn::Mlp& mlp) {
    for (std::size_t k = 0; k < mlp.depth(); ++k) {
      auto& layer = mlp.layer(k);
      layer.weight = random_matrix(layer.weight.rows(), layer.weight.cols(), rng, 0.5);
      layer.bias = random_vector(layer.bias.size(), rng, 0.1);
    }
  };
  for (auto& a : model.adapters) shake(a);
  shake(model.ind);
}

}  // namespace

TEST_CASE("model layout and zero-initialised outputs") {
  Rng rng(1);
  const auto model = art::ArtModel::create(2, 5, 8, art::FusionMode::full, rng);
  CHECK(model.sources() == std::vector<int>{0, 1, 3, 4});
  CHECK(model.adapters.size() == 4);
  for (const auto& a : model.adapters) {
    CHECK(a.sizes() == std::vector<int>{8, 8, 8});
    CHECK(a.layers()[1].weight.isZero(0.0));
    CHECK(a.layers()[0].weight.norm() > 0.0);
  }
  CHECK(model.ind.sizes() == std::vector<int>{8, 8, 8});
  CHECK_THROWS_AS(art::ArtModel::create(0, 1, 8, art::FusionMode::full, rng), ConfigError);
  CHECK(art::parse_fusion_mode("no_attention") == art::FusionMode::no_attention);
  CHECK_THROWS_AS(art::parse_fusion_mode("sum"), ConfigError);
}

TEST_CASE("attention hand cases") {
  Rng rng(2);
  const int m = 4;

  auto single = art::ArtModel::create(0, 2, m, art::FusionMode::full, rng);
  single.adapters[0] = identity_adapter(m);
  const nn::Vector q = random_vector(m, rng);
  const nn::Matrix one_source = random_matrix(1, m, rng);
  const auto a1 = art::attend(single, q, one_source);
  CHECK(a1.weights.size() == 1);
  CHECK(a1.weights(0) == doctest::Approx(1.0));
  CHECK((a1.output - one_source.row(0).transpose()).norm() < 1e-14);

  auto model = art::ArtModel::create(0, 3, m, art::FusionMode::full, rng);
  model.adapters[0] = identity_adapter(m);
  model.adapters[1] = identity_adapter(m);
  nn::Matrix same(2, m);
  same.row(0) = one_source.row(0);
  same.row(1) = one_source.row(0);
  const auto sym = art::attend(model, q, same);
  CHECK(sym.weights(0) == doctest::Approx(0.5));
  CHECK(sym.weights(1) == doctest::Approx(0.5));

  // Query aligned with source A, orthogonal to source B.
  nn::Vector query(m);
  query << 1.0, 2.0, 0.0, 0.0;
  nn::Matrix ab(2, m);
  ab << 1.0, 2.0, 0.0, 0.0,  //
      0.0, 0.0, 3.0, -1.0;
  const auto hand = art::attend(model, query, ab);
  const double logit = query.squaredNorm() / 2.0;  // sqrt(m) = 2
  CHECK(hand.weights(0) == doctest::Approx(std::exp(logit) / (std::exp(logit) + 1.0)).epsilon(1e-14));
  CHECK(hand.weights.sum() == doctest::Approx(1.0));

  CHECK_THROWS_AS(art::attend(model, nn::Vector::Zero(3), ab), ShapeError);
  CHECK_THROWS_AS(art::attend(model, query, nn::Matrix::Zero(3, m)), ShapeError);
}

TEST_CASE("attention weights are a distribution and follow source permutations") {
  Rng rng(3);
  const int m = 6;
  auto model = art::ArtModel::create(0, 5, m, art::FusionMode::full, rng);
  randomize(model, rng);
  const nn::Vector q = random_vector(m, rng);
  const nn::Matrix src = random_matrix(4, m, rng);
  const auto base = art::attend(model, q, src);
  CHECK((base.weights.array() >= 0.0).all());
  CHECK(base.weights.sum() == doctest::Approx(1.0).epsilon(1e-14));

  const std::vector<int> perm{2, 0, 3, 1};
  auto permuted = model;
  nn::Matrix psrc(4, m);
  for (int s = 0; s < 4; ++s) {
    permuted.adapters[static_cast<std::size_t>(s)] = model.adapters[static_cast<std::size_t>(perm[s])];
    psrc.row(s) = src.row(perm[s]);
  }
  const auto moved = art::attend(permuted, q, psrc);
  for (int s = 0; s < 4; ++s) CHECK(moved.weights(s) == doctest::Approx(base.weights(perm[s])).epsilon(1e-14));
  CHECK((moved.output - base.output).norm() < 1e-12);
}

TEST_CASE("fuse: identity, definition, and element-wise oracle") {
  Rng rng(4);
  const int m = 4;
  auto model = art::ArtModel::create(1, 3, m, art::FusionMode::full, rng);
  const nn::Vector ed = random_vector(m, rng);
  const nn::Vector g = random_vector(m, rng);
  const auto f0 = art::fuse(model, ed, g, nn::Vector::Zero(m));
  CHECK(f0.h == ed);

  randomize(model, rng);
  const nn::Vector v = random_vector(m, rng);
  const auto fv = art::fuse(model, v, v, v);
  const nn::Vector ind_v = model.ind.infer(v.transpose()).row(0).transpose();
  CHECK((fv.h - (v + ind_v + v)).norm() < 1e-14);

  const nn::Vector ea = random_vector(m, rng);
  const auto f = art::fuse(model, ed, g, ea);
  const auto ind = test::scalar_forward(model.ind, std::vector<double>(g.data(), g.data() + m));
  for (int c = 0; c < m; ++c) {
    CHECK(f.h(c) == doctest::Approx(ed(c) + ind[static_cast<std::size_t>(c)] + ea(c)).epsilon(1e-13));
    CHECK(f.h(c) == f.domain(c) + f.adapted_global(c) + f.attended(c));
  }
  CHECK_THROWS_AS(art::fuse(model, nn::Vector::Zero(3), g, ea), ShapeError);

  const nn::Vector item = random_vector(m, rng);
  CHECK(art::score_fused(f.h, item) == doctest::Approx(f.h.dot(item)));
  CHECK(art::score_fused(nn::Vector::Zero(m), item) == 0.0);
}

TEST_CASE("untrained models score exactly like stage 1") {
  Rng rng(5);
  const int m = 5, n_users = 6, n_items = 7;
  std::vector<mf::EmbeddingTable> users;
  for (int d = 0; d < 3; ++d) users.push_back(table_from(random_matrix(n_users, m, rng)));
  const auto global = table_from(random_matrix(n_users, m, rng));
  const auto items = table_from(random_matrix(n_items, m, rng));
  const art::UserInputs inputs{users, &global};
  std::vector<int> ids(n_users);
  std::iota(ids.begin(), ids.end(), 0);
  for (auto mode : {art::FusionMode::full, art::FusionMode::no_attention, art::FusionMode::global_only}) {
    const auto model = art::ArtModel::create(1, 3, m, mode, rng);
    const auto h = art::fused_embeddings(model, inputs, ids);
    CHECK(h == users[1].gather(ids));
    const mf::DomainMfModel smf{1, users[1], items};
    CHECK(art::make_scorer(model, inputs, items)(1, ids) == mf::make_scorer(smf)(1, ids));
  }
}

TEST_CASE("batched forward agrees with the single-user operations") {
  Rng rng(6);
  const int m = 4, n_users = 5;
  std::vector<mf::EmbeddingTable> users;
  for (int d = 0; d < 4; ++d) users.push_back(table_from(random_matrix(n_users, m, rng)));
  const auto global = table_from(random_matrix(n_users, m, rng));
  const art::UserInputs inputs{users, &global};
  auto model = art::ArtModel::create(2, 4, m, art::FusionMode::full, rng);
  randomize(model, rng);
  const std::vector<int> ids{3, 0, 4};
  const auto h = art::fused_embeddings(model, inputs, ids);
  for (std::size_t r = 0; r < ids.size(); ++r) {
    nn::Matrix src(3, m);
    int s = 0;
    for (int d : model.sources()) src.row(s++) = users[static_cast<std::size_t>(d)].row(ids[r]);
    const auto att = art::attend(model, users[2].row(ids[r]).transpose(), src);
    const auto f = art::fuse(model, users[2].row(ids[r]).transpose(), global.row(ids[r]).transpose(), att.output);
    CHECK((h.row(static_cast<Eigen::Index>(r)).transpose() - f.h).norm() < 1e-12);
  }

  const auto fwd = art::forward(model, inputs, ids);
  CHECK(fwd.weights.rows() == 3);
  CHECK(fwd.weights.cols() == 3);
}

TEST_CASE("fused BPR gradients match central differences (3 domains, m = 4)") {
  for (auto mode : {art::FusionMode::full, art::FusionMode::no_attention, art::FusionMode::global_only}) {
    Rng rng(7);
    const int m = 4, n_users = 4, n_items = 5;
    std::vector<mf::EmbeddingTable> users;
    for (int d = 0; d < 3; ++d) users.push_back(table_from(random_matrix(n_users, m, rng)));
    const auto global = table_from(random_matrix(n_users, m, rng));
    auto items = table_from(random_matrix(n_items, m, rng));
    const art::UserInputs inputs{users, &global};
    auto model = art::ArtModel::create(0, 3, m, mode, rng);
    randomize(model, rng);
    const std::vector<data::BprTriplet> batch{{0, 1, 2, 0}, {1, 0, 4, 0}, {2, 3, 1, 0}, {3, 4, 0, 0}};

    art::ArtGrads grads;
    nn::Matrix item_grad;
    art::art_bpr_loss(model, inputs, items, batch, &grads, &item_grad);
    auto loss = [&] { return art::art_bpr_loss(model, inputs, items, batch); };
    const auto report = nn::grad_check(loss, model.parameter_blocks(), grads.blocks(), 1e-4);
    CHECK(report.max_rel_error < 1e-4);

    auto& im = items.matrix();
    const nn::ParamBlocks item_params{std::span<double>(im.data(), static_cast<std::size_t>(im.size()))};
    const nn::ConstParamBlocks item_analytic{
        std::span<const double>(item_grad.data(), static_cast<std::size_t>(item_grad.size()))};
    CHECK(nn::grad_check(loss, item_params, item_analytic, 1e-4).max_rel_error < 1e-4);
  }
}

TEST_CASE("report_attention edge cases") {
  Rng rng(8);
  const int m = 4, n_users = 6;
  std::vector<mf::EmbeddingTable> users;
  for (int d = 0; d < 3; ++d) users.push_back(table_from(random_matrix(n_users, m, rng)));
  const auto global = table_from(random_matrix(n_users, m, rng));
  const art::UserInputs inputs{users, &global};
  const std::vector<int> ids{0, 1, 2, 3, 4, 5};

  auto single = art::ArtModel::create(1, 2, m, art::FusionMode::full, rng);
  const auto w1 = art::report_attention(single, inputs, ids);
  REQUIRE(w1.size() == 1);
  CHECK(w1[0] == doctest::Approx(1.0));

  // Untrained adapters output zero for every source: uniform weights.
  const auto fresh = art::ArtModel::create(0, 3, m, art::FusionMode::full, rng);
  const auto w = art::report_attention(fresh, inputs, ids);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.5));

  const auto mean_model = art::ArtModel::create(0, 3, m, art::FusionMode::no_attention, rng);
  CHECK(art::report_attention(mean_model, inputs, ids)[0] == doctest::Approx(0.5));
  const auto global_model = art::ArtModel::create(0, 3, m, art::FusionMode::global_only, rng);
  CHECK_THROWS_AS(art::report_attention(global_model, inputs, ids), ConfigError);
  CHECK_THROWS_AS(art::report_attention(fresh, inputs, {}), ConfigError);
}

TEST_CASE("training favours a copy domain over a noise domain and leaves upstream state alone") {
  // Target domain 0 is driven by latent user factors; domain 1 holds a copy of
  // those factors, domain 2 pure noise. The target's own table is a weak
  // (noisy, shrunken) estimate, so borrowing from domain 1 pays off.
  Rng rng(9);
  const int m = 8, n_users = 400, n_items = 60;
  const nn::Matrix truth = random_matrix(n_users, m, rng);
  const nn::Matrix item_rows = random_matrix(n_items, m, rng);
  std::vector<mf::EmbeddingTable> users{table_from(0.2 * truth + 0.5 * random_matrix(n_users, m, rng)),
                                        table_from(truth), table_from(random_matrix(n_users, m, rng))};
  const auto global = table_from(random_matrix(n_users, m, rng, 0.1));
  const auto items = table_from(item_rows);

  data::RawStore raw;
  raw.n_users = n_users;
  raw.domains.push_back({"target", n_items, {}});
  const nn::Matrix scores = truth * item_rows.transpose();
  for (int u = 0; u < n_users; ++u) {
    std::vector<int> order(n_items);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + 10, order.end(),
                      [&](int a, int b) { return scores(u, a) > scores(u, b); });
    for (int k = 0; k < 10; ++k) raw.domains[0].pairs.emplace_back(u, order[static_cast<std::size_t>(k)]);
  }
  // Domains 1 and 2 carry no interactions in this store; only their user tables matter.
  raw.domains.push_back({"copy", 1, {}});
  raw.domains.push_back({"noise", 1, {}});
  const auto store = data::split(raw, {}, 3);

  const auto users_before = users;
  const auto items_before = items;
  const art::UserInputs inputs{users, &global};
  Rng init(10);
  const auto model = art::ArtModel::create(0, 3, m, art::FusionMode::full, init);
  art::ArtConfig cfg;
  cfg.epochs = 15;
  cfg.optimizer.learning_rate = 3e-3;
  Rng train_rng(11);
  const auto result = art::train_art(model, inputs, items, store, cfg, train_rng);
  CHECK(result.best_epoch > 0);
  CHECK(result.valid_recall[static_cast<std::size_t>(result.best_epoch)] > result.valid_recall.front());

  const auto test_users = store.users_with(0, data::Split::test);
  const auto w = art::report_attention(result.model, inputs, test_users);
  CHECK(w[0] > w[1]);
  CHECK(w[0] + w[1] == doctest::Approx(1.0));

  for (std::size_t d = 0; d < users.size(); ++d) CHECK(users[d] == users_before[d]);
  CHECK(items == items_before);
  CHECK(result.items == items_before);

  cfg.epochs = 0;
  Rng zero_rng(12);
  const auto untouched = art::train_art(model, inputs, items, store, cfg, zero_rng);
  CHECK(untouched.best_epoch == 0);
  CHECK(untouched.model.adapters[0].layers()[0].weight == model.adapters[0].layers()[0].weight);
}

TEST_CASE("checkpoints round-trip") {
  const auto dir = test::scratch_dir("art_ckpt");
  Rng rng(13);
  auto model = art::ArtModel::create(1, 4, 5, art::FusionMode::no_attention, rng);
  randomize(model, rng);
  model.save(dir / "art.ckpt");
  const auto back = art::ArtModel::load(dir / "art.ckpt");
  CHECK(back.target() == 1);
  CHECK(back.mode() == art::FusionMode::no_attention);
  CHECK(back.sources() == model.sources());
  for (std::size_t s = 0; s < model.adapters.size(); ++s) {
    CHECK(back.adapters[s].layers()[1].weight == model.adapters[s].layers()[1].weight);
  }
  CHECK(back.ind.layers()[0].bias == model.ind.layers()[0].bias);
}
