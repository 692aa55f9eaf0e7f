#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "catart/art.hpp"
#include "catart/cat.hpp"
#include "catart/eval.hpp"
#include "catart/nn.hpp"
#include "catart/rng.hpp"
#include "catart/synth.hpp"

using namespace catart;

namespace {

nn::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

std::vector<mf::EmbeddingTable> random_tables(int n_domains, int n_users, int dim, Rng& rng) {
  std::vector<mf::EmbeddingTable> out;
  for (int d = 0; d < n_domains; ++d) out.push_back(mf::EmbeddingTable::uniform(n_users, dim, 0.5, rng));
  return out;
}

}  // namespace

static void BM_MlpForwardBackward(benchmark::State& state) {
  Rng rng(1);
  const int m = 64;
  const auto mlp = nn::Mlp::glorot({5 * m, 5 * m, 3 * m, m}, rng);
  const nn::Matrix x = random_matrix(state.range(0), 5 * m, rng);
  const nn::Matrix up = random_matrix(state.range(0), m, rng);
  for (auto _ : state) {
    auto tape = mlp.forward(x);
    auto g = mlp.backward(std::move(tape), up);
    benchmark::DoNotOptimize(g.input.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MlpForwardBackward)->Arg(256)->Arg(2000);

static void BM_ContrastiveLoss(benchmark::State& state) {
  Rng rng(2);
  const nn::Matrix e = random_matrix(state.range(0), 64, rng);
  const nn::Matrix es = random_matrix(state.range(0), 64, rng);
  nn::Matrix ge;
  nn::Matrix ges;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cat::contrastive_loss(e, es, 0.1, false, &ge, &ges));
  }
}
BENCHMARK(BM_ContrastiveLoss)->Arg(256)->Arg(2000);

static void BM_CatEpoch(benchmark::State& state) {
  Rng rng(3);
  const int n_users = static_cast<int>(state.range(0));
  const auto tables = random_tables(5, n_users, 64, rng);
  cat::CatTrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = static_cast<std::size_t>(state.range(1));
  auto model = cat::CatModel::create({0, 1, 2, 3, 4}, cat::CatConfig{}, rng);
  for (auto _ : state) {
    auto r = cat::train_cat(model, tables, cfg, rng);
    benchmark::DoNotOptimize(r.curve.data());
  }
}
BENCHMARK(BM_CatEpoch)->Args({2000, 4096})->Args({2000, 256})->Unit(benchmark::kMillisecond);

static void BM_ArtBprBatch(benchmark::State& state) {
  Rng rng(4);
  const int n_users = 2000;
  const auto users = random_tables(5, n_users, 64, rng);
  const auto global = mf::EmbeddingTable::uniform(n_users, 64, 0.5, rng);
  const auto items = mf::EmbeddingTable::uniform(500, 64, 0.5, rng);
  const auto model = art::ArtModel::create(0, 5, 64, art::FusionMode::full, rng);
  std::vector<data::BprTriplet> batch;
  for (int i = 0; i < 256; ++i) {
    batch.push_back({static_cast<int>(rng.uniform_index(n_users)), static_cast<int>(rng.uniform_index(500)),
                     static_cast<int>(rng.uniform_index(500)), 0});
  }
  const art::UserInputs inputs{users, &global};
  for (auto _ : state) {
    art::ArtGrads g;
    benchmark::DoNotOptimize(art::art_bpr_loss(model, inputs, items, batch, &g));
  }
}
BENCHMARK(BM_ArtBprBatch);

static void BM_EvaluateDomain(benchmark::State& state) {
  auto spec = synth::make_scenario("correlated-5", 5);
  const auto world = synth::generate(spec);
  const auto store = data::split(world.raw, {}, 5);
  Rng rng(5);
  const auto user_table = mf::EmbeddingTable::uniform(store.n_users(), 64, 0.5, rng);
  const auto item_table = mf::EmbeddingTable::uniform(store.n_items(0), 64, 0.5, rng);
  const eval::BlockScorer scorer = [&](int, std::span<const int> users) -> nn::Matrix {
    return user_table.gather(users) * item_table.matrix().topRows(item_table.n_entities()).transpose();
  };
  const int domains[] = {0};
  for (auto _ : state) {
    auto report = eval::evaluate(scorer, store, domains);
    benchmark::DoNotOptimize(report.domains.data());
  }
}
BENCHMARK(BM_EvaluateDomain)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
