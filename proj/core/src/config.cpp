#include "catart/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "catart/errors.hpp"
#include "catart/rng.hpp"

namespace catart {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in{std::string(s)};
  while (std::getline(in, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  T out{};
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end) {
    throw ConfigError("bad value '" + v + "' for " + std::string(key));
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  const std::string v = trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("bad boolean '" + v + "' for " + std::string(key));
}

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

struct Setting {
  std::function<void(PipelineConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

template <typename T>
Setting number(T PipelineConfig::*field) {
  return {[field](PipelineConfig& c, std::string_view k, std::string_view v) { c.*field = parse_number<T>(k, v); },
          [field](const PipelineConfig& c) {
            if constexpr (std::is_floating_point_v<T>) return fmt_double(c.*field);
            else return std::to_string(c.*field);
          }};
}

// Member of a nested struct, e.g. &PipelineConfig::mf then &MfConfig::epochs.
template <typename S, typename T>
Setting nested(S PipelineConfig::*outer, T S::*inner) {
  return {[outer, inner](PipelineConfig& c, std::string_view k, std::string_view v) {
            if constexpr (std::is_same_v<T, bool>) (c.*outer).*inner = parse_bool(k, v);
            else (c.*outer).*inner = parse_number<T>(k, v);
          },
          [outer, inner](const PipelineConfig& c) {
            const T& x = (c.*outer).*inner;
            if constexpr (std::is_same_v<T, bool>) return std::string(x ? "true" : "false");
            else if constexpr (std::is_floating_point_v<T>) return fmt_double(x);
            else return std::to_string(x);
          }};
}

template <typename T>
Setting optimizer_lr(T PipelineConfig::*outer) {
  return {[outer](PipelineConfig& c, std::string_view k, std::string_view v) {
            (c.*outer).optimizer.learning_rate = parse_number<double>(k, v);
          },
          [outer](const PipelineConfig& c) { return fmt_double((c.*outer).optimizer.learning_rate); }};
}

template <typename T>
Setting optimizer_kind(T PipelineConfig::*outer) {
  return {[outer](PipelineConfig& c, std::string_view, std::string_view v) {
            (c.*outer).optimizer.kind = nn::parse_optimizer_kind(trim(v));
          },
          [outer](const PipelineConfig& c) { return std::string(nn::to_string((c.*outer).optimizer.kind)); }};
}

const std::map<std::string, Setting, std::less<>>& settings() {
  static const std::map<std::string, Setting, std::less<>> table = [] {
    std::map<std::string, Setting, std::less<>> t;
    t["data"] = {[](PipelineConfig& c, std::string_view, std::string_view v) {
                   c.data_files.clear();
                   for (auto& p : split_list(v)) c.data_files.emplace_back(p);
                 },
                 [](const PipelineConfig& c) {
                   std::string s;
                   for (const auto& p : c.data_files) s += (s.empty() ? "" : ",") + p.string();
                   return s;
                 }};
    t["format"] = {[](PipelineConfig& c, std::string_view, std::string_view v) { c.format = data::parse_format(trim(v)); },
                   [](const PipelineConfig& c) { return std::string(c.format == data::FileFormat::csv ? "csv" : "tsv"); }};
    t["scenario"] = {[](PipelineConfig& c, std::string_view, std::string_view v) { c.scenario = trim(v); },
                     [](const PipelineConfig& c) { return c.scenario; }};
    t["synth.users"] = number(&PipelineConfig::synth_users);
    t["synth.items"] = number(&PipelineConfig::synth_items);
    t["out_dir"] = {[](PipelineConfig& c, std::string_view, std::string_view v) { c.out_dir = trim(v); },
                    [](const PipelineConfig& c) { return c.out_dir.string(); }};
    t["seed"] = number(&PipelineConfig::master_seed);
    t["seeds"] = number(&PipelineConfig::n_seeds);
    t["threads"] = number(&PipelineConfig::threads);
    t["ablation"] = {[](PipelineConfig& c, std::string_view, std::string_view v) {
                       c.ablations.clear();
                       for (const auto& a : split_list(v)) c.ablations.push_back(parse_ablation(a));
                       if (c.ablations.empty()) throw ConfigError("ablation list is empty");
                     },
                     [](const PipelineConfig& c) {
                       std::string s;
                       for (const auto a : c.ablations) s += (s.empty() ? "" : ",") + std::string(to_string(a));
                       return s;
                     }};
    t["dim"] = {[](PipelineConfig& c, std::string_view k, std::string_view v) {
                  const int m = parse_number<int>(k, v);
                  c.mf.dim = m;
                  c.cat.dim = m;
                },
                [](const PipelineConfig& c) { return std::to_string(c.mf.dim); }};
    t["mf.epochs"] = nested(&PipelineConfig::mf, &mf::MfConfig::epochs);
    t["mf.patience"] = nested(&PipelineConfig::mf, &mf::MfConfig::patience);
    t["mf.batch"] = nested(&PipelineConfig::mf, &mf::MfConfig::batch_size);
    t["mf.lr"] = nested(&PipelineConfig::mf, &mf::MfConfig::learning_rate);
    t["mf.weight_decay"] = nested(&PipelineConfig::mf, &mf::MfConfig::weight_decay);
    t["mf.init_scale"] = nested(&PipelineConfig::mf, &mf::MfConfig::init_scale);
    t["cat.epochs"] = nested(&PipelineConfig::cat_train, &cat::CatTrainConfig::epochs);
    t["cat.batch"] = nested(&PipelineConfig::cat_train, &cat::CatTrainConfig::batch_size);
    t["cat.lr"] = optimizer_lr(&PipelineConfig::cat_train);
    t["cat.optimizer"] = optimizer_kind(&PipelineConfig::cat_train);
    t["cat.tau"] = nested(&PipelineConfig::cat, &cat::CatConfig::tau);
    t["cat.alpha1"] = nested(&PipelineConfig::cat, &cat::CatConfig::alpha1);
    t["cat.alpha2"] = nested(&PipelineConfig::cat, &cat::CatConfig::alpha2);
    t["cat.masked"] = nested(&PipelineConfig::cat, &cat::CatConfig::masked_domains);
    t["cat.per_domain_mask"] = nested(&PipelineConfig::cat, &cat::CatConfig::per_domain_mask);
    t["cat.squared_error"] = nested(&PipelineConfig::cat, &cat::CatConfig::squared_error);
    t["cat.exclude_positive"] = nested(&PipelineConfig::cat, &cat::CatConfig::exclude_positive);
    t["art.epochs"] = nested(&PipelineConfig::art, &art::ArtConfig::epochs);
    t["art.patience"] = nested(&PipelineConfig::art, &art::ArtConfig::patience);
    t["art.batch"] = nested(&PipelineConfig::art, &art::ArtConfig::batch_size);
    t["art.lr"] = optimizer_lr(&PipelineConfig::art);
    t["art.optimizer"] = optimizer_kind(&PipelineConfig::art);
    t["art.unfreeze_items"] = nested(&PipelineConfig::art, &art::ArtConfig::unfreeze_items);
    t["eval.epsilon"] = number(&PipelineConfig::transfer_epsilon);
    return t;
  }();
  return table;
}

}  // namespace

Ablation parse_ablation(std::string_view name) {
  if (name == "smf") return Ablation::smf;
  if (name == "autoencoder" || name == "+autoencoder") return Ablation::autoencoder;
  if (name == "contrastive" || name == "+contrastive") return Ablation::contrastive;
  if (name == "full" || name == "art" || name == "+art") return Ablation::full;
  if (name == "no_attention" || name == "no-attention" || name == "-attention") return Ablation::no_attention;
  throw ConfigError("unknown ablation '" + std::string(name) + "'");
}

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::smf: return "smf";
    case Ablation::autoencoder: return "autoencoder";
    case Ablation::contrastive: return "contrastive";
    case Ablation::full: return "full";
    case Ablation::no_attention: return "no_attention";
  }
  return "?";
}

std::vector<Ablation> all_ablations() {
  return {Ablation::smf, Ablation::autoencoder, Ablation::contrastive, Ablation::full, Ablation::no_attention};
}

std::string_view cat_variant(Ablation a) {
  switch (a) {
    case Ablation::smf: return "";
    case Ablation::autoencoder: return "autoencoder";
    default: return "contrastive";
  }
}

art::FusionMode fusion_mode(Ablation a) {
  switch (a) {
    case Ablation::full: return art::FusionMode::full;
    case Ablation::no_attention: return art::FusionMode::no_attention;
    default: return art::FusionMode::global_only;
  }
}

void PipelineConfig::validate() const {
  if (data_files.empty()) {
    const auto names = synth::scenario_names();
    if (std::find(names.begin(), names.end(), scenario) == names.end()) {
      throw ConfigError("unknown scenario '" + scenario + "'");
    }
  } else if (data_files.size() < 3) {
    throw ConfigError("multi-target transfer needs at least 3 domain files");
  }
  if (synth_users < 0 || synth_items < 0) throw ConfigError("synthetic sizes must be >= 0");
  if (n_seeds < 1) throw ConfigError("seeds must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (out_dir.empty()) throw ConfigError("out_dir is required");
  if (mf.dim <= 0 || mf.dim != cat.dim) throw ConfigError("embedding size must be positive");
  if (mf.epochs < 0 || mf.patience < 1 || mf.batch_size == 0 || !(mf.learning_rate > 0)) {
    throw ConfigError("invalid stage-1 settings");
  }
  if (cat_train.epochs < 0 || cat_train.batch_size < 2 || !(cat_train.optimizer.learning_rate > 0)) {
    throw ConfigError("invalid stage-2 settings");
  }
  if (!(cat.tau > 0) || cat.alpha1 < 0 || cat.alpha2 < 0 || cat.alpha1 + cat.alpha2 > 1.0 + 1e-12 ||
      cat.masked_domains < 1) {
    throw ConfigError("invalid contrastive autoencoder settings");
  }
  if (art.epochs < 0 || art.patience < 1 || art.batch_size == 0 || !(art.optimizer.learning_rate > 0)) {
    throw ConfigError("invalid stage-3 settings");
  }
  if (transfer_epsilon < 0) throw ConfigError("eval.epsilon must be >= 0");
  if (ablations.empty()) throw ConfigError("at least one ablation is required");
}

std::uint64_t PipelineConfig::run_seed(int k) const {
  return derive_seed(master_seed, "run", static_cast<std::uint64_t>(k));
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw ParseError("empty key", line_no);
    out[std::move(key)] = trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

void apply_setting(PipelineConfig& config, std::string_view key, std::string_view value) {
  const auto& table = settings();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown setting '" + std::string(key) + "'");
  it->second.set(config, key, value);
}

PipelineConfig resolve_config(const std::filesystem::path* file,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
  PipelineConfig config;
  if (file) {
    for (const auto& [k, v] : read_config_file(*file)) apply_setting(config, k, v);
  }
  for (const auto& [k, v] : overrides) apply_setting(config, k, v);
  config.validate();
  return config;
}

std::map<std::string, std::string> to_settings(const PipelineConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [k, s] : settings()) out[k] = s.get(config);
  return out;
}

std::vector<std::string> setting_keys() {
  std::vector<std::string> out;
  for (const auto& [k, s] : settings()) out.push_back(k);
  return out;
}

}  // namespace catart
