#include "catart/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "catart/art.hpp"
#include "catart/binary_io.hpp"
#include "catart/bprmf.hpp"
#include "catart/cat.hpp"
#include "catart/errors.hpp"
#include "catart/synth.hpp"

#ifndef CATART_VERSION
#define CATART_VERSION "unknown"
#endif

namespace catart::pipeline {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Runs f(0..n-1) on up to `threads` workers. Every task owns its random
// stream, so results do not depend on the thread count.
template <typename F>
void parallel_for(int n, int threads, F&& f) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  {
    std::vector<std::jthread> pool;
    for (int t = 0; t < std::min(threads, n); ++t) {
      pool.emplace_back([&] {
        for (int i; (i = next++) < n;) {
          try {
            f(i);
          } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string relative(const RunLayout& layout, const fs::path& p) {
  return fs::relative(p, layout.root()).generic_string();
}

void require_file(const fs::path& p, std::string_view stage) {
  if (!fs::exists(p)) {
    throw PipelineError("missing " + std::string(stage) + " output '" + p.string() + "'; run " +
                        std::string(stage) + " first");
  }
}

ExperimentManifest open_manifest(const PipelineConfig& config, const RunLayout& layout) {
  ExperimentManifest m;
  if (fs::exists(layout.manifest())) m = ExperimentManifest::load(layout.manifest());
  m.version = CATART_VERSION;
  m.config = to_settings(config);
  m.seeds.clear();
  for (int k = 0; k < config.n_seeds; ++k) m.seeds.push_back(config.run_seed(k));
  return m;
}

// Hashes `files` and checks them against what the manifest recorded.
std::map<std::string, std::string> verify_recorded(const RunLayout& layout, const ExperimentManifest& manifest,
                                                   const std::vector<fs::path>& files) {
  std::map<std::string, std::string> now;
  for (const auto& f : files) {
    const auto rel = relative(layout, f);
    const auto sha = io::sha256_file(f);
    if (const auto it = manifest.checkpoints.find(rel); it != manifest.checkpoints.end() && it->second != sha) {
      throw PipelineError("'" + rel + "' changed after it was recorded in the manifest");
    }
    now[rel] = sha;
  }
  return now;
}

void verify_untouched(const RunLayout& layout, const std::map<std::string, std::string>& before) {
  for (const auto& [rel, sha] : before) {
    if (io::sha256_file(layout.root() / rel) != sha) {
      throw PipelineError("'" + rel + "' was modified by a downstream stage");
    }
  }
}

void record(const RunLayout& layout, ExperimentManifest& manifest, const std::vector<fs::path>& files) {
  for (const auto& f : files) manifest.checkpoints[relative(layout, f)] = io::sha256_file(f);
}

data::RawStore load_raw(const PipelineConfig& config, const RunLayout& layout) {
  if (!config.data_files.empty()) {
    data::RawStore raw;
    data::Vocabulary users;
    for (const auto& path : config.data_files) {
      data::Vocabulary items;
      auto dom = data::load_domain(path, config.format, users, items);
      dom.name = path.stem().string();
      raw.domains.push_back(std::move(dom));
    }
    raw.n_users = users.size();
    return raw;
  }
  auto spec = synth::make_scenario(config.scenario, derive_seed(config.master_seed, "world"));
  if (config.synth_users > 0) spec.n_users = config.synth_users;
  if (config.synth_items > 0) {
    for (auto& d : spec.domains) d.n_items = config.synth_items;
  }
  auto world = synth::generate(spec);
  synth::write_world(world, layout.root() / "world");
  return std::move(world.raw);
}

void save_run_data(const data::InteractionStore& store, const data::RawStore& raw, const fs::path& dir) {
  fs::create_directories(dir);
  std::ofstream meta(dir / "domains.tsv");
  if (!meta) throw PipelineError("cannot write '" + (dir / "domains.tsv").string() + "'");
  meta << "users\t" << raw.n_users << '\n';
  for (int d = 0; d < store.n_domains(); ++d) {
    meta << raw.domains[static_cast<std::size_t>(d)].name << '\t' << store.n_items(d) << '\n';
    data::save_split(store, d, dir / ("split_" + std::to_string(d) + ".tsv"));
  }
}

std::vector<fs::path> split_files(const RunLayout& layout, int k, int n_domains) {
  std::vector<fs::path> out;
  for (int d = 0; d < n_domains; ++d) out.push_back(layout.data_dir(k) / ("split_" + std::to_string(d) + ".tsv"));
  return out;
}

struct Stage1State {
  std::vector<mf::EmbeddingTable> users;
  std::vector<mf::EmbeddingTable> items;
};

Stage1State load_stage1(const RunLayout& layout, int k, int n_domains) {
  Stage1State s;
  for (int d = 0; d < n_domains; ++d) {
    require_file(layout.user_table(k, d), "stage1");
    require_file(layout.item_table(k, d), "stage1");
    s.users.push_back(mf::EmbeddingTable::load(layout.user_table(k, d)));
    s.items.push_back(mf::EmbeddingTable::load(layout.item_table(k, d)));
  }
  return s;
}

std::vector<fs::path> stage1_files(const RunLayout& layout, int k, int n_domains) {
  auto out = split_files(layout, k, n_domains);
  for (int d = 0; d < n_domains; ++d) {
    out.push_back(layout.user_table(k, d));
    out.push_back(layout.item_table(k, d));
  }
  return out;
}

std::vector<fs::path> stage2_files(const RunLayout& layout, int k, std::string_view variant) {
  return {layout.stage2_dir(k, variant) / "cat.ckpt", layout.stage2_dir(k, variant) / "global.ckpt"};
}

std::vector<fs::path> stage3_files(const RunLayout& layout, int k, Ablation a, int n_domains, bool items) {
  std::vector<fs::path> out;
  for (int d = 0; d < n_domains; ++d) {
    out.push_back(layout.stage3_dir(k, a) / ("art_" + std::to_string(d) + ".ckpt"));
    if (items) out.push_back(layout.stage3_dir(k, a) / ("items_" + std::to_string(d) + ".ckpt"));
  }
  return out;
}

std::vector<int> all_domains(int n) {
  std::vector<int> d(static_cast<std::size_t>(n));
  std::iota(d.begin(), d.end(), 0);
  return d;
}

cat::CatConfig variant_config(const PipelineConfig& config, std::string_view variant) {
  cat::CatConfig c = config.cat;
  if (variant == "autoencoder") {
    c.alpha1 = 1.0;
    c.alpha2 = 0.0;
  }
  return c;
}

std::vector<std::string> needed_variants(const PipelineConfig& config) {
  std::set<std::string> v;
  for (const auto a : config.ablations) {
    if (a != Ablation::smf) v.emplace(cat_variant(a));
  }
  return {v.begin(), v.end()};
}

void write_curve(const fs::path& path, const std::vector<double>& loss, const std::vector<double>& recall) {
  std::ofstream out(path);
  out << "epoch\tloss\tvalid_recall@10\n" << std::setprecision(10);
  for (std::size_t e = 0; e < recall.size(); ++e) {
    out << e << '\t';
    if (e == 0) out << "-";
    else out << loss[e - 1];
    out << '\t' << recall[e] << '\n';
  }
}

// Everything stage 3 needs for one seed, loaded from disk.
struct TransferState {
  RunData data;
  Stage1State stage1;
  mf::EmbeddingTable global;
  std::vector<art::ArtModel> models;
  std::vector<mf::EmbeddingTable> items;  // stage-3 item tables (stage-1 unless unfrozen)

  art::UserInputs inputs() const { return {stage1.users, &global}; }
};

TransferState load_transfer(const PipelineConfig& config, const RunLayout& layout, Ablation a, int k) {
  TransferState s;
  s.data = load_run_data(layout, k);
  const int n = s.data.store.n_domains();
  s.stage1 = load_stage1(layout, k, n);
  const auto global_path = layout.stage2_dir(k, cat_variant(a)) / "global.ckpt";
  require_file(global_path, "stage2");
  s.global = mf::EmbeddingTable::load(global_path);
  for (int d = 0; d < n; ++d) {
    const auto dir = layout.stage3_dir(k, a);
    const auto model_path = dir / ("art_" + std::to_string(d) + ".ckpt");
    require_file(model_path, "stage3");
    s.models.push_back(art::ArtModel::load(model_path));
    const auto item_path = dir / ("items_" + std::to_string(d) + ".ckpt");
    s.items.push_back(config.art.unfreeze_items && fs::exists(item_path) ? mf::EmbeddingTable::load(item_path)
                                                                         : s.stage1.items[static_cast<std::size_t>(d)]);
  }
  return s;
}

eval::BlockScorer transfer_scorer(const TransferState& s) {
  return [&s](int d, std::span<const int> users) -> nn::Matrix {
    const auto& items = s.items[static_cast<std::size_t>(d)];
    return art::fused_embeddings(s.models[static_cast<std::size_t>(d)], s.inputs(), users) *
           items.matrix().topRows(items.n_entities()).transpose();
  };
}

eval::BlockScorer mf_scorer(const Stage1State& s) {
  return [&s](int d, std::span<const int> users) -> nn::Matrix {
    const auto& items = s.items[static_cast<std::size_t>(d)];
    return s.users[static_cast<std::size_t>(d)].gather(users) * items.matrix().topRows(items.n_entities()).transpose();
  };
}

nn::Matrix seed_attention(const TransferState& s) {
  const int n = s.data.store.n_domains();
  nn::Matrix w = nn::Matrix::Constant(n, n, std::nan(""));
  for (int d = 0; d < n; ++d) {
    const auto& model = s.models[static_cast<std::size_t>(d)];
    auto users = s.data.store.users_with(d, data::Split::test);
    if (users.empty()) users = s.data.store.users_with(d, data::Split::train);
    const auto weights = art::report_attention(model, s.inputs(), users);
    for (std::size_t j = 0; j < weights.size(); ++j) w(d, model.sources()[j]) = weights[j];
  }
  return w;
}

fs::path report_path(const RunLayout& layout, Ablation a, int k) {
  return a == Ablation::smf ? layout.stage1_dir(k) / "report.tsv" : layout.stage3_dir(k, a) / "report.tsv";
}

}  // namespace

fs::path RunLayout::user_table(int k, int d) const {
  return stage1_dir(k) / ("domain_" + std::to_string(d) + ".users.ckpt");
}

fs::path RunLayout::item_table(int k, int d) const {
  return stage1_dir(k) / ("domain_" + std::to_string(d) + ".items.ckpt");
}

void ExperimentManifest::save(const fs::path& path) const {
  nlohmann::json j;
  j["version"] = version;
  j["config"] = config;
  j["seeds"] = seeds;
  j["checkpoints"] = checkpoints;
  j["wall_time_s"] = wall_time;
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw PipelineError("cannot write manifest '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

ExperimentManifest ExperimentManifest::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cannot open manifest '" + path.string() + "'");
  try {
    const auto j = nlohmann::json::parse(in);
    ExperimentManifest m;
    m.version = j.value("version", "");
    m.config = j.value("config", std::map<std::string, std::string>{});
    m.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    m.checkpoints = j.value("checkpoints", std::map<std::string, std::string>{});
    m.wall_time = j.value("wall_time_s", std::map<std::string, double>{});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed manifest: " + std::string(e.what()));
  }
}

RunData load_run_data(const RunLayout& layout, int k) {
  const auto meta_path = layout.data_dir(k) / "domains.tsv";
  std::ifstream meta(meta_path);
  if (!meta) throw PipelineError("missing run data '" + meta_path.string() + "'; run stage1 first");
  std::string key;
  int n_users = 0;
  if (!(meta >> key >> n_users) || key != "users") throw ParseError("bad domains.tsv header", 1);
  RunData out;
  std::vector<int> n_items;
  std::string name;
  int items = 0;
  while (meta >> name >> items) {
    out.domain_names.push_back(name);
    n_items.push_back(items);
  }
  out.store = data::load_splits(n_users, n_items, split_files(layout, k, static_cast<int>(n_items.size())));
  return out;
}

ExperimentManifest run_stage1(const PipelineConfig& config) {
  config.validate();
  const RunLayout layout(config.out_dir);
  fs::create_directories(layout.root());
  auto manifest = open_manifest(config, layout);
  const auto start = Clock::now();
  const auto raw = load_raw(config, layout);
  const int n = static_cast<int>(raw.domains.size());
  if (n < 3) throw ConfigError("multi-target transfer needs at least 3 domains");

  for (int k = 0; k < config.n_seeds; ++k) {
    const auto seed = config.run_seed(k);
    const auto store = data::split(raw, {}, seed);
    save_run_data(store, raw, layout.data_dir(k));
    fs::create_directories(layout.stage1_dir(k));

    Stage1State state;
    state.users.resize(static_cast<std::size_t>(n));
    state.items.resize(static_cast<std::size_t>(n));
    parallel_for(n, config.threads, [&](int d) {
      Rng rng(derive_seed(seed, "stage1", static_cast<std::uint64_t>(d)));
      auto init = mf::init_model(d, store.n_users(), store.n_items(d), config.mf.dim, config.mf.init_scale, rng);
      auto trained = mf::train_domain(std::move(init), store, config.mf, rng);
      spdlog::info("seed {} stage 1 domain {}: best epoch {}, valid R@10 {:.4f}", k, d, trained.curve.best_epoch,
                   trained.curve.valid_recall[static_cast<std::size_t>(trained.curve.best_epoch)]);
      trained.model.users.save(layout.user_table(k, d));
      trained.model.items.save(layout.item_table(k, d));
      write_curve(layout.stage1_dir(k) / ("domain_" + std::to_string(d) + ".curve.tsv"), trained.curve.loss,
                  trained.curve.valid_recall);
      state.users[static_cast<std::size_t>(d)] = std::move(trained.model.users);
      state.items[static_cast<std::size_t>(d)] = std::move(trained.model.items);
    });
    auto report = eval::evaluate(mf_scorer(state), store, all_domains(n));
    report.metadata["ablation"] = "smf";
    eval::write_tsv(report, layout.stage1_dir(k) / "report.tsv");
    record(layout, manifest, stage1_files(layout, k, n));
  }
  manifest.wall_time["stage1"] = seconds_since(start);
  manifest.save(layout.manifest());
  return manifest;
}

ExperimentManifest run_stage2(const PipelineConfig& config) {
  config.validate();
  const RunLayout layout(config.out_dir);
  if (!fs::exists(layout.manifest())) throw PipelineError("no manifest under '" + layout.root().string() + "'; run stage1 first");
  auto manifest = open_manifest(config, layout);
  const auto variants = needed_variants(config);
  if (variants.empty()) {
    spdlog::info("stage 2 skipped: no configured ablation uses a global embedding");
    return manifest;
  }
  const auto start = Clock::now();
  for (int k = 0; k < config.n_seeds; ++k) {
    const auto seed = config.run_seed(k);
    const RunData data = load_run_data(layout, k);
    const int n = data.store.n_domains();
    const auto upstream = stage1_files(layout, k, n);
    for (const auto& f : upstream) require_file(f, "stage1");
    const auto before = verify_recorded(layout, manifest, upstream);
    const Stage1State stage1 = load_stage1(layout, k, n);

    for (const auto& variant : variants) {
      const auto dir = layout.stage2_dir(k, variant);
      fs::create_directories(dir);
      Rng rng(derive_seed(seed, "stage2." + variant));
      auto model = cat::CatModel::create(all_domains(n), variant_config(config, variant), rng);
      auto trained = cat::train_cat(std::move(model), stage1.users, config.cat_train, rng);
      if (!trained.curve.empty()) {
        spdlog::info("seed {} stage 2 {}: final loss {:.4f}, retrieval acc {:.3f}", k, variant,
                     trained.curve.back().total, trained.curve.back().retrieval_accuracy);
      }
      trained.model.save(dir / "cat.ckpt");
      cat::global_embeddings(trained.model, stage1.users).save(dir / "global.ckpt");
      std::ofstream curve(dir / "curve.tsv");
      curve << "epoch\ttotal\treconstruction\tmasked_reconstruction\tcontrastive\tretrieval_accuracy\n"
            << std::setprecision(10);
      for (std::size_t e = 0; e < trained.curve.size(); ++e) {
        const auto& c = trained.curve[e];
        curve << e + 1 << '\t' << c.total << '\t' << c.reconstruction << '\t' << c.masked_reconstruction << '\t'
              << c.contrastive << '\t' << c.retrieval_accuracy << '\n';
      }
      record(layout, manifest, stage2_files(layout, k, variant));
    }
    verify_untouched(layout, before);
  }
  manifest.wall_time["stage2"] = seconds_since(start);
  manifest.save(layout.manifest());
  return manifest;
}

ExperimentManifest run_stage3(const PipelineConfig& config) {
  config.validate();
  const RunLayout layout(config.out_dir);
  if (!fs::exists(layout.manifest())) throw PipelineError("no manifest under '" + layout.root().string() + "'; run stage1 first");
  auto manifest = open_manifest(config, layout);
  const auto start = Clock::now();
  for (const auto a : config.ablations) {
    if (a == Ablation::smf) continue;
    for (int k = 0; k < config.n_seeds; ++k) {
      const auto seed = config.run_seed(k);
      const RunData data = load_run_data(layout, k);
      const int n = data.store.n_domains();
      auto upstream = stage1_files(layout, k, n);
      for (const auto& f : stage2_files(layout, k, cat_variant(a))) upstream.push_back(f);
      for (const auto& f : upstream) require_file(f, f.parent_path().filename().string().starts_with("stage2") ? "stage2" : "stage1");
      const auto before = verify_recorded(layout, manifest, upstream);

      const Stage1State stage1 = load_stage1(layout, k, n);
      const auto global = mf::EmbeddingTable::load(layout.stage2_dir(k, cat_variant(a)) / "global.ckpt");
      const art::UserInputs inputs{stage1.users, &global};
      const auto dir = layout.stage3_dir(k, a);
      fs::create_directories(dir);

      std::vector<art::ArtTrainResult> results(static_cast<std::size_t>(n));
      const std::string stream = "stage3." + std::string(to_string(a));
      parallel_for(n, config.threads, [&](int d) {
        Rng rng(derive_seed(seed, stream, static_cast<std::uint64_t>(d)));
        auto model = art::ArtModel::create(d, n, config.mf.dim, fusion_mode(a), rng);
        auto r = art::train_art(std::move(model), inputs, stage1.items[static_cast<std::size_t>(d)], data.store,
                                config.art, rng);
        spdlog::info("seed {} stage 3 {} domain {}: best epoch {}, valid R@10 {:.4f} (start {:.4f})", k,
                     to_string(a), d, r.best_epoch, r.valid_recall[static_cast<std::size_t>(r.best_epoch)],
                     r.valid_recall.front());
        r.model.save(dir / ("art_" + std::to_string(d) + ".ckpt"));
        if (config.art.unfreeze_items) r.items.save(dir / ("items_" + std::to_string(d) + ".ckpt"));
        write_curve(dir / ("curve_" + std::to_string(d) + ".tsv"), r.loss, r.valid_recall);
        results[static_cast<std::size_t>(d)] = std::move(r);
      });

      TransferState state;
      state.data = load_run_data(layout, k);
      state.stage1 = stage1;
      state.global = global;
      for (auto& r : results) {
        state.models.push_back(std::move(r.model));
        state.items.push_back(std::move(r.items));
      }
      auto report = eval::evaluate(transfer_scorer(state), state.data.store, all_domains(n));
      report.metadata["ablation"] = std::string(to_string(a));
      eval::write_tsv(report, dir / "report.tsv");
      if (fusion_mode(a) != art::FusionMode::global_only) {
        write_attention_tsv(seed_attention(state), state.data.domain_names, dir / "attention.tsv");
      }
      verify_untouched(layout, before);
      record(layout, manifest, stage3_files(layout, k, a, n, config.art.unfreeze_items));
    }
  }
  manifest.wall_time["stage3"] = seconds_since(start);
  manifest.save(layout.manifest());
  for (const auto a : config.ablations) summarize(config, a);
  return manifest;
}

ExperimentManifest run_all(const PipelineConfig& config) {
  const auto start = Clock::now();
  run_stage1(config);
  run_stage2(config);
  auto manifest = run_stage3(config);
  manifest.wall_time["total"] = seconds_since(start);
  manifest.save(RunLayout(config.out_dir).manifest());
  return manifest;
}

eval::MetricReport evaluate_seed(const PipelineConfig& config, Ablation ablation, int k) {
  const RunLayout layout(config.out_dir);
  eval::MetricReport report;
  if (ablation == Ablation::smf) {
    const RunData data = load_run_data(layout, k);
    const Stage1State stage1 = load_stage1(layout, k, data.store.n_domains());
    report = eval::evaluate(mf_scorer(stage1), data.store, all_domains(data.store.n_domains()));
  } else {
    const TransferState state = load_transfer(config, layout, ablation, k);
    report = eval::evaluate(transfer_scorer(state), state.data.store, all_domains(state.data.store.n_domains()));
  }
  report.metadata["ablation"] = std::string(to_string(ablation));
  return report;
}

AblationSummary summarize(const PipelineConfig& config, Ablation ablation, bool recompute) {
  const RunLayout layout(config.out_dir);
  auto load = [&](Ablation a) {
    std::vector<eval::MetricReport> runs;
    for (int k = 0; k < config.n_seeds; ++k) {
      if (recompute) {
        runs.push_back(evaluate_seed(config, a, k));
        eval::write_tsv(runs.back(), report_path(layout, a, k));
      } else {
        const auto p = report_path(layout, a, k);
        require_file(p, a == Ablation::smf ? "stage1" : "stage3");
        runs.push_back(eval::read_tsv(p));
      }
    }
    return runs;
  };
  AblationSummary s;
  s.ablation = ablation;
  s.runs = load(ablation);
  s.aggregate = eval::aggregate(s.runs);
  const auto baseline_runs = ablation == Ablation::smf ? s.runs : load(Ablation::smf);
  const auto baseline = eval::aggregate(baseline_runs);
  s.flags = eval::negative_transfer_report(s.aggregate.mean, baseline.mean, config.transfer_epsilon);

  const auto stem = "report_" + std::string(to_string(ablation));
  eval::write_tsv(s.aggregate.mean, layout.root() / (stem + ".tsv"));
  eval::write_tsv(s.aggregate.stddev, layout.root() / (stem + ".std.tsv"));
  std::vector<std::string> names;
  if (fs::exists(layout.data_dir(0) / "domains.tsv")) names = load_run_data(layout, 0).domain_names;
  std::ofstream table(layout.root() / (stem + ".txt"));
  table << "ablation: " << to_string(ablation) << '\n';
  eval::write_table(s.aggregate, table, names, s.flags);
  return s;
}

nn::Matrix attention_matrix(const PipelineConfig& config, Ablation ablation, int k) {
  if (fusion_mode(ablation) == art::FusionMode::global_only) {
    throw ConfigError("ablation '" + std::string(to_string(ablation)) + "' has no attention");
  }
  return seed_attention(load_transfer(config, RunLayout(config.out_dir), ablation, k));
}

nn::Matrix attention_matrix(const PipelineConfig& config, Ablation ablation) {
  nn::Matrix sum;
  for (int k = 0; k < config.n_seeds; ++k) {
    const nn::Matrix w = attention_matrix(config, ablation, k);
    sum = k == 0 ? w : (sum + w).eval();
  }
  return sum / static_cast<double>(config.n_seeds);
}

void write_attention_tsv(const nn::Matrix& weights, const std::vector<std::string>& names, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw PipelineError("cannot write '" + path.string() + "'");
  auto name = [&](Eigen::Index d) {
    return static_cast<std::size_t>(d) < names.size() ? names[static_cast<std::size_t>(d)] : "domain_" + std::to_string(d);
  };
  out << "target";
  for (Eigen::Index c = 0; c < weights.cols(); ++c) out << '\t' << name(c);
  out << '\n' << std::fixed << std::setprecision(6);
  for (Eigen::Index r = 0; r < weights.rows(); ++r) {
    out << name(r);
    for (Eigen::Index c = 0; c < weights.cols(); ++c) {
      out << '\t';
      if (std::isnan(weights(r, c))) out << '-';
      else out << weights(r, c);
    }
    out << '\n';
  }
}

std::map<std::string, std::string> hash_artifacts(const fs::path& root) {
  std::map<std::string, std::string> out;
  if (!fs::exists(root)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension();
    const bool split = entry.path().filename().string().starts_with("split_");
    if (ext == ".ckpt" || split) out[fs::relative(entry.path(), root).generic_string()] = io::sha256_file(entry.path());
  }
  return out;
}

}  // namespace catart::pipeline
