#include <doctest.h>

#include <fstream>

#include "catart/config.hpp"
#include "catart/errors.hpp"
#include "support.hpp"

using namespace catart;

TEST_CASE("ablation selectors") {
  CHECK(parse_ablation("smf") == Ablation::smf);
  CHECK(parse_ablation("+autoencoder") == Ablation::autoencoder);
  CHECK(parse_ablation("+contrastive") == Ablation::contrastive);
  CHECK(parse_ablation("+art") == Ablation::full);
  CHECK(parse_ablation("full") == Ablation::full);
  CHECK(parse_ablation("-attention") == Ablation::no_attention);
  CHECK_THROWS_AS(parse_ablation("everything"), ConfigError);
  CHECK(all_ablations().size() == 5);
  for (auto a : all_ablations()) CHECK(parse_ablation(to_string(a)) == a);

  CHECK(cat_variant(Ablation::smf).empty());
  CHECK(cat_variant(Ablation::autoencoder) == "autoencoder");
  CHECK(cat_variant(Ablation::contrastive) == "contrastive");
  CHECK(cat_variant(Ablation::full) == "contrastive");
  CHECK(cat_variant(Ablation::no_attention) == "contrastive");
  CHECK(fusion_mode(Ablation::autoencoder) == art::FusionMode::global_only);
  CHECK(fusion_mode(Ablation::contrastive) == art::FusionMode::global_only);
  CHECK(fusion_mode(Ablation::full) == art::FusionMode::full);
  CHECK(fusion_mode(Ablation::no_attention) == art::FusionMode::no_attention);
}

TEST_CASE("defaults carry the documented hyperparameters") {
  const PipelineConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.n_seeds == 3);
  CHECK(c.cat.tau == 0.1);
  CHECK(c.cat.alpha1 == 0.4);
  CHECK(c.cat.alpha2 == 0.4);
  CHECK(c.cat.masked_domains == 1);
  CHECK(c.cat_train.batch_size == 4096);
  CHECK(c.mf.dim == 64);
  CHECK(c.cat.dim == 64);
  CHECK_FALSE(c.art.unfreeze_items);
  CHECK(c.run_seed(0) == derive_seed(c.master_seed, "run", 0));
  CHECK(c.run_seed(1) != c.run_seed(0));
}

TEST_CASE("precedence: overrides beat the file, the file beats defaults") {
  const auto dir = test::scratch_dir("config_precedence");
  std::ofstream(dir / "run.cfg") << "# experiment\nseed = 11\ncat.tau = 0.2   # warmer\n\nart.lr=0.01\n";
  const auto path = dir / "run.cfg";
  const auto c = resolve_config(&path, {{"cat.tau", "0.05"}, {"seeds", "1"}});
  CHECK(c.master_seed == 11);    // file
  CHECK(c.cat.tau == 0.05);      // override
  CHECK(c.n_seeds == 1);         // override
  CHECK(c.art.optimizer.learning_rate == 0.01);
  CHECK(c.cat.alpha1 == 0.4);    // default

  const auto later = resolve_config(nullptr, {{"seed", "1"}, {"seed", "2"}});
  CHECK(later.master_seed == 2);
}

TEST_CASE("dim sets every stage and ablation lists parse") {
  PipelineConfig c;
  apply_setting(c, "dim", "16");
  CHECK(c.mf.dim == 16);
  CHECK(c.cat.dim == 16);
  apply_setting(c, "ablation", "smf,+art,-attention");
  CHECK(c.ablations == std::vector<Ablation>{Ablation::smf, Ablation::full, Ablation::no_attention});
  apply_setting(c, "data", "a.tsv,b.tsv,c.tsv");
  CHECK(c.data_files.size() == 3);
  apply_setting(c, "cat.optimizer", "sgd");
  CHECK(c.cat_train.optimizer.kind == nn::OptimizerKind::sgd);
  apply_setting(c, "art.unfreeze_items", "true");
  CHECK(c.art.unfreeze_items);
}

TEST_CASE("bad settings are config errors, malformed files parse errors") {
  PipelineConfig c;
  CHECK_THROWS_AS(apply_setting(c, "cat.temperature", "0.1"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "seeds", "three"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "cat.masked", "1.5"), ConfigError);
  CHECK_THROWS_AS(apply_setting(c, "art.unfreeze_items", "maybe"), ConfigError);

  c = PipelineConfig{};
  c.cat.alpha1 = 0.9;
  c.cat.alpha2 = 0.9;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PipelineConfig{};
  c.n_seeds = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = PipelineConfig{};
  c.data_files = {"only.tsv", "two.tsv"};
  CHECK_THROWS_AS(c.validate(), ConfigError);

  const auto dir = test::scratch_dir("config_bad");
  std::ofstream(dir / "bad.cfg") << "seed = 1\nthis line has no equals sign\n";
  try {
    read_config_file(dir / "bad.cfg");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("settings round-trip through apply_setting") {
  PipelineConfig c;
  apply_setting(c, "cat.tau", "0.3");
  apply_setting(c, "mf.epochs", "17");
  apply_setting(c, "ablation", "smf,full");
  apply_setting(c, "scenario", "one-noise-domain");
  const auto settings = to_settings(c);
  CHECK(settings.size() == setting_keys().size());
  PipelineConfig back;
  for (const auto& [k, v] : settings) apply_setting(back, k, v);
  CHECK(to_settings(back) == settings);
  CHECK(back.cat.tau == 0.3);
  CHECK(back.mf.epochs == 17);
}
