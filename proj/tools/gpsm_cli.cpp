// gpsm command-line front end. Talks to the library only through gpsm.h.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpsm/gpsm.h"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

// Failure with a process exit code (2 config, 3 data, 4 numerical).
struct CliFailure {
  int code;
  std::string message;
};

void check(gpsm_status status) {
  if (status != GPSM_OK) throw CliFailure{static_cast<int>(status), gpsm_last_error()};
}

std::string take(char* s) {
  std::string out(s == nullptr ? "" : s);
  gpsm_string_free(s);
  return out;
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
  T** out() { return &p; }
  T* get() const { return p; }
};

using DatasetH = Handle<gpsm_dataset, gpsm_dataset_free>;
using ModelH = Handle<gpsm_model, gpsm_model_free>;
using ScoresH = Handle<gpsm_scores, gpsm_scores_free>;
using TrimH = Handle<gpsm_trim_result, gpsm_trim_free>;
using EstimatesH = Handle<gpsm_estimates, gpsm_estimates_free>;
using DesignH = Handle<gpsm_design, gpsm_design_free>;
using SummaryH = Handle<gpsm_mc_summary, gpsm_mc_summary_free>;

struct Settings {
  std::string config;
  std::string input;
  std::string treatment = "treatment";
  std::string outcome = "outcome";
  std::vector<std::string> covariates;
  std::string delimiter = ",";
  std::vector<std::string> methods;
  double level = 0.95;
  int bootstrap_reps = 1000;
  bool gpsm_bootstrap = false;
  bool intervals = true;
  bool trim = false;
  bool trim_refit = true;
  int subclasses = 5;
  bool clip = false;
  double clip_floor = 1e-6;
  bool horvitz_thompson = false;
  double ridge = 0.0;
  int max_iter = 100;
  double tol = 1e-8;
  int bins = 20;
  std::string design = "design1";
  int reps = 1000;
  bool expected_size = false;
  std::string truth = "auto";
  std::string export_data;
  std::uint64_t seed = 1;
  int workers = 1;
  std::string out = ".";
  std::vector<std::string> formats{"csv", "json"};
};

// Every option is registered with a config key; after parsing, values absent
// from the command line are taken from the config file.
class Binder {
 public:
  explicit Binder(CLI::App* app) : app_(app) {}

  template <class T>
  void option(const std::string& flag, const std::string& key, T& field,
              const std::string& help) {
    CLI::Option* opt = app_->add_option(flag, field, help);
    add(key, opt, field);
  }

  void flag(const std::string& flags, const std::string& key, bool& field,
            const std::string& help) {
    CLI::Option* opt = app_->add_flag(flags, field, help);
    add(key, opt, field);
  }

  // Fills fields from the config for options not given as flags and returns
  // the resolved configuration.
  json resolve(const json& cfg) const {
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
      if (it.key() == "command") continue;
      bool known = false;
      for (const auto& b : bindings_) known = known || b.key == it.key();
      if (!known) {
        throw CliFailure{2, "config key '" + it.key() + "' is not an option of '" +
                                app_->get_name() + "'"};
      }
    }
    json resolved;
    resolved["command"] = app_->get_name();
    for (const auto& b : bindings_) {
      if (b.opt->count() == 0 && cfg.contains(b.key)) {
        try {
          b.load(cfg[b.key]);
        } catch (const json::exception& e) {
          throw CliFailure{2, "config key '" + b.key + "': " + e.what()};
        }
      }
      if (b.key != "out" && b.key != "config") resolved[b.key] = b.dump();
    }
    return resolved;
  }

 private:
  struct Binding {
    std::string key;
    CLI::Option* opt;
    std::function<void(const json&)> load;
    std::function<json()> dump;
  };

  template <class T>
  void add(const std::string& key, CLI::Option* opt, T& field) {
    bindings_.push_back({key, opt, [&field](const json& v) { field = v.get<T>(); },
                         [&field] { return json(field); }});
  }

  CLI::App* app_;
  std::vector<Binding> bindings_;
};

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliFailure{2, "cannot open config file '" + path + "'"};
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw CliFailure{2, "config file '" + path + "' is not valid JSON: " + e.what()};
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliFailure{2, "cannot open '" + path + "'"};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Output {
 public:
  Output(const Settings& s, json resolved)
      : dir_(s.out), resolved_(std::move(resolved)), seed_(s.seed) {
    hash_ = hex(fnv1a(resolved_.dump()));
    for (const auto& f : s.formats) {
      if (f == "csv") {
        csv_ = true;
      } else if (f == "json") {
        json_ = true;
      } else {
        throw CliFailure{2, "unknown output format '" + f + "' (expected csv or json)"};
      }
    }
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw CliFailure{2, "cannot create output directory '" + dir_.string() + "'"};
  }

  void csv(const std::string& name, const std::string& body, bool always = false) {
    if (!csv_ && !always) return;
    write(name, "# config_hash=" + hash_ + " seed=" + std::to_string(seed_) + "\n" + body);
  }

  void json_doc(const std::string& name, const std::string& payload, bool always = false) {
    if (!json_ && !always) return;
    json doc;
    doc["config_hash"] = hash_;
    doc["seed"] = seed_;
    doc["data"] = json::parse(payload);
    write(name, doc.dump(2) + "\n");
  }

  void run_metadata(json extra) {
    json doc;
    doc["config_hash"] = hash_;
    doc["seed"] = seed_;
    doc["version"] = gpsm_version();
    doc["config"] = resolved_;
    for (auto it = extra.begin(); it != extra.end(); ++it) doc[it.key()] = it.value();
    write("run.json", doc.dump(2) + "\n");
  }

 private:
  void write(const std::string& name, const std::string& text) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw CliFailure{2, "cannot write '" + path.string() + "'"};
  }

  fs::path dir_;
  json resolved_;
  std::uint64_t seed_;
  std::string hash_;
  bool csv_ = false;
  bool json_ = false;
};

gpsm_fit_options fit_options(const Settings& s) {
  gpsm_fit_options f;
  gpsm_fit_options_default(&f);
  f.max_iter = s.max_iter;
  f.tol = s.tol;
  f.ridge = s.ridge;
  return f;
}

void load_dataset(const Settings& s, DatasetH& d) {
  if (s.input.empty()) throw CliFailure{2, "an --input CSV is required"};
  if (s.delimiter.size() != 1) throw CliFailure{2, "--delimiter must be a single character"};
  std::vector<const char*> cols;
  for (const auto& c : s.covariates) cols.push_back(c.c_str());
  check(gpsm_dataset_load_csv(s.input.c_str(), s.treatment.c_str(), s.outcome.c_str(),
                              cols.empty() ? nullptr : cols.data(), cols.size(), s.delimiter[0],
                              d.out()));
}

json dataset_info(const gpsm_dataset* d) {
  std::vector<size_t> counts(static_cast<size_t>(gpsm_dataset_levels(d)));
  check(gpsm_dataset_arm_counts(d, counts.data()));
  json j;
  j["n_units"] = gpsm_dataset_size(d);
  j["levels"] = gpsm_dataset_levels(d);
  j["arm_counts"] = counts;
  json labels = json::array();
  for (int w = 1; w <= gpsm_dataset_levels(d); ++w) {
    char* text = nullptr;
    check(gpsm_dataset_level_label(d, w, &text));
    labels.push_back(take(text));
  }
  j["level_labels"] = labels;
  return j;
}

json model_info(const gpsm_model* m) {
  json j;
  j["converged"] = true;
  j["iterations"] = gpsm_model_iterations(m);
  j["gradient_norm"] = gpsm_model_gradient_norm(m);
  return j;
}

void cmd_estimate(const Settings& s, Output& out) {
  DatasetH data;
  load_dataset(s, data);
  const auto fit = fit_options(s);
  ModelH model;
  check(gpsm_fit(data.get(), &fit, model.out()));
  ScoresH scores;
  check(gpsm_predict(model.get(), data.get(), scores.out()));
  json meta;
  meta["dataset"] = dataset_info(data.get());
  meta["gps_model"] = model_info(model.get());

  const gpsm_dataset* use_data = data.get();
  const gpsm_model* use_model = model.get();
  const gpsm_scores* use_scores = scores.get();
  TrimH trim;
  DatasetH trimmed;
  ScoresH trimmed_scores;
  ModelH trimmed_model;
  if (s.trim) {
    check(gpsm_trim(data.get(), scores.get(), s.trim_refit ? 1 : 0, &fit, trim.out()));
    check(gpsm_trim_dataset(trim.get(), trimmed.out()));
    check(gpsm_trim_scores(trim.get(), trimmed_scores.out()));
    use_data = trimmed.get();
    use_scores = trimmed_scores.get();
    if (s.trim_refit) {
      check(gpsm_trim_model(trim.get(), trimmed_model.out()));
      use_model = trimmed_model.get();
      meta["trimmed_gps_model"] = model_info(use_model);
    }
    char* tj = nullptr;
    check(gpsm_trim_to_json(trim.get(), &tj));
    out.json_doc("trim.json", take(tj), true);
    char* mask = nullptr;
    check(gpsm_trim_mask_csv(trim.get(), &mask));
    out.csv("trim_mask.csv", take(mask), true);
    meta["trimmed_dataset"] = dataset_info(use_data);
  }

  std::vector<const char*> tags;
  for (const auto& m : s.methods) tags.push_back(m.c_str());
  gpsm_estimate_options eo;
  gpsm_estimate_options_default(&eo);
  eo.methods = tags.empty() ? nullptr : tags.data();
  eo.n_methods = tags.size();
  eo.subclasses = s.subclasses;
  eo.clip_weights = s.clip ? 1 : 0;
  eo.clip_floor = s.clip_floor;
  eo.horvitz_thompson = s.horvitz_thompson ? 1 : 0;
  eo.trimmed_sample = s.trim ? 1 : 0;
  eo.intervals = s.intervals ? 1 : 0;
  eo.level = s.level;
  eo.bootstrap_reps = s.bootstrap_reps;
  eo.seed = s.seed;
  eo.gpsm_bootstrap = s.gpsm_bootstrap ? 1 : 0;
  eo.workers = s.workers;
  eo.fit = fit;
  EstimatesH est;
  check(gpsm_estimate(use_data, use_model, use_scores, &eo, est.out()));

  char* text = nullptr;
  check(gpsm_estimates_to_csv(est.get(), &text));
  out.csv("estimates.csv", take(text));
  check(gpsm_estimates_to_json(est.get(), &text));
  out.json_doc("estimates.json", take(text));
  check(gpsm_model_to_json(use_model, &text));
  out.json_doc("model.json", take(text), true);
  meta["n_estimates"] = gpsm_estimates_count(est.get());
  out.run_metadata(meta);
}

void cmd_trim(const Settings& s, Output& out) {
  DatasetH data;
  load_dataset(s, data);
  const auto fit = fit_options(s);
  ModelH model;
  check(gpsm_fit(data.get(), &fit, model.out()));
  ScoresH scores;
  check(gpsm_predict(model.get(), data.get(), scores.out()));
  TrimH trim;
  check(gpsm_trim(data.get(), scores.get(), s.trim_refit ? 1 : 0, &fit, trim.out()));
  char* text = nullptr;
  check(gpsm_trim_to_json(trim.get(), &text));
  out.json_doc("trim.json", take(text), true);
  check(gpsm_trim_mask_csv(trim.get(), &text));
  out.csv("trim_mask.csv", take(text), true);
  json meta;
  meta["dataset"] = dataset_info(data.get());
  meta["gps_model"] = model_info(model.get());
  meta["lambda"] = gpsm_trim_lambda(trim.get());
  meta["n_dropped"] = gpsm_trim_dropped(trim.get());
  out.run_metadata(meta);
}

void write_balance(Output& out, const gpsm_dataset* d, const gpsm_scores* s, int bins,
                   const std::string& stem) {
  char* j = nullptr;
  char* c = nullptr;
  check(gpsm_balance(d, s, bins, &j, &c));
  const std::string js = take(j);
  const std::string cs = take(c);
  out.json_doc(stem + ".json", js);
  out.csv(stem + ".csv", cs);
}

void cmd_balance(const Settings& s, Output& out) {
  DatasetH data;
  load_dataset(s, data);
  const auto fit = fit_options(s);
  ModelH model;
  check(gpsm_fit(data.get(), &fit, model.out()));
  ScoresH scores;
  check(gpsm_predict(model.get(), data.get(), scores.out()));
  write_balance(out, data.get(), scores.get(), s.bins, "balance");
  json meta;
  meta["dataset"] = dataset_info(data.get());
  meta["gps_model"] = model_info(model.get());
  if (s.trim) {
    TrimH trim;
    check(gpsm_trim(data.get(), scores.get(), s.trim_refit ? 1 : 0, &fit, trim.out()));
    DatasetH trimmed;
    ScoresH trimmed_scores;
    check(gpsm_trim_dataset(trim.get(), trimmed.out()));
    check(gpsm_trim_scores(trim.get(), trimmed_scores.out()));
    write_balance(out, trimmed.get(), trimmed_scores.get(), s.bins, "balance_trimmed");
    char* text = nullptr;
    check(gpsm_trim_to_json(trim.get(), &text));
    out.json_doc("trim.json", take(text), true);
    meta["trimmed_dataset"] = dataset_info(trimmed.get());
  }
  out.run_metadata(meta);
}

void cmd_simulate(const Settings& s, Output& out) {
  DesignH design;
  if (s.design == "design1" || s.design == "design2") {
    check(gpsm_design_builtin(s.design.c_str(), design.out()));
  } else {
    check(gpsm_design_from_json(read_text_file(s.design).c_str(), design.out()));
  }
  if (s.expected_size) check(gpsm_design_set_mode(design.get(), 1));
  json meta;
  char* text = nullptr;
  check(gpsm_design_to_json(design.get(), &text));
  meta["design"] = json::parse(take(text));

  if (!s.export_data.empty()) {
    DatasetH data;
    check(gpsm_simulate_dataset(design.get(), s.seed, data.out()));
    check(gpsm_dataset_to_csv(data.get(), &text));
    out.csv(s.export_data, take(text), true);
    meta["exported"] = dataset_info(data.get());
  }
  if (s.reps == 0 && !s.export_data.empty()) {
    out.run_metadata(meta);
    return;
  }

  gpsm_truth truth = GPSM_TRUTH_AUTO;
  if (s.truth == "superpopulation") {
    truth = GPSM_TRUTH_SUPERPOPULATION;
  } else if (s.truth == "sampled-population") {
    truth = GPSM_TRUTH_SAMPLED_POPULATION;
  } else if (s.truth != "auto") {
    throw CliFailure{2, "--truth must be auto, superpopulation or sampled-population"};
  }
  std::vector<const char*> tags;
  for (const auto& m : s.methods) tags.push_back(m.c_str());
  gpsm_mc_options mo;
  gpsm_mc_options_default(&mo);
  mo.methods = tags.empty() ? nullptr : tags.data();
  mo.n_methods = tags.size();
  mo.reps = s.reps;
  mo.seed = s.seed;
  mo.workers = s.workers;
  mo.bootstrap_reps = s.bootstrap_reps;
  mo.level = s.level;
  mo.gpsm_bootstrap = s.gpsm_bootstrap ? 1 : 0;
  mo.truth = truth;
  SummaryH summary;
  check(gpsm_run_monte_carlo(design.get(), &mo, summary.out()));
  check(gpsm_mc_summary_to_csv(summary.get(), &text));
  out.csv("summary.csv", take(text));
  check(gpsm_mc_summary_to_long_csv(summary.get(), &text));
  out.csv("summary_long.csv", take(text));
  check(gpsm_mc_summary_to_json(summary.get(), &text));
  out.json_doc("summary.json", take(text));
  out.run_metadata(meta);
}

void add_common(Binder& b, Settings& s) {
  b.option("--seed", "seed", s.seed, "Root random seed");
  b.option("--workers", "workers", s.workers, "Worker threads");
  b.option("-o,--out", "out", s.out, "Output directory");
  b.option("--formats", "formats", s.formats, "Output formats: csv, json");
}

void add_input(Binder& b, Settings& s) {
  b.option("-i,--input", "input", s.input, "Input CSV with a header row");
  b.option("--treatment", "treatment", s.treatment, "Treatment column");
  b.option("--outcome", "outcome", s.outcome, "Outcome column");
  b.option("--covariates", "covariates", s.covariates,
           "Covariate columns (default: all other columns)");
  b.option("--delimiter", "delimiter", s.delimiter, "Field delimiter");
  b.option("--ridge", "ridge", s.ridge, "Ridge penalty for the GPS fit");
  b.option("--max-iter", "max_iter", s.max_iter, "Newton iteration cap");
  b.option("--tol", "tol", s.tol, "Gradient max-norm tolerance");
}

void add_inference(Binder& b, Settings& s) {
  b.option("-m,--methods", "methods", s.methods,
           "Estimators: DIF PPSM PSSM W COV GPSM GPSS (default: all)");
  b.option("--level", "level", s.level, "Confidence level");
  b.option("--bootstrap-reps", "bootstrap_reps", s.bootstrap_reps, "Bootstrap replicates");
  b.flag("--gpsm-bootstrap", "gpsm_bootstrap", s.gpsm_bootstrap,
         "Bootstrap intervals for GPSM instead of the matching variance");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise treatment effects with the generalized propensity score"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gpsm_version()));

  Settings s;
  std::vector<std::pair<CLI::App*, std::unique_ptr<Binder>>> commands;
  auto make = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    auto binder = std::make_unique<Binder>(sub);
    binder->option("-c,--config", "config", s.config, "JSON config file; flags override it");
    add_common(*binder, s);
    Binder& ref = *binder;
    commands.emplace_back(sub, std::move(binder));
    return std::pair<CLI::App*, Binder*>(sub, &ref);
  };

  auto [est, eb] = make("estimate", "Fit the GPS and estimate all pairwise effects");
  add_input(*eb, s);
  add_inference(*eb, s);
  eb->flag("--intervals,!--no-intervals", "intervals", s.intervals, "Compute intervals");
  eb->flag("--trim,!--no-trim", "trim", s.trim, "Trim for overlap before estimating");
  eb->flag("--trim-refit,!--no-trim-refit", "trim_refit", s.trim_refit,
           "Re-fit the GPS on the trimmed sample");
  eb->option("--subclasses", "subclasses", s.subclasses, "GPSS subclass count");
  eb->flag("--clip", "clip", s.clip, "Clip small scores in weighting");
  eb->option("--clip-floor", "clip_floor", s.clip_floor, "Score floor when clipping");
  eb->flag("--horvitz-thompson", "horvitz_thompson", s.horvitz_thompson,
           "Unnormalized weighting");

  auto [tr, tb] = make("trim", "Trim the sample for overlap");
  add_input(*tb, s);
  tb->flag("--refit,!--no-refit", "trim_refit", s.trim_refit,
           "Re-fit the GPS on the trimmed sample");

  auto [bal, bb] = make("balance", "Covariate and GPS balance report");
  add_input(*bb, s);
  bb->option("--bins", "bins", s.bins, "Histogram bins");
  bb->flag("--trim,!--no-trim", "trim", s.trim, "Also report on the trimmed sample");
  bb->flag("--trim-refit,!--no-trim-refit", "trim_refit", s.trim_refit,
           "Re-fit the GPS on the trimmed sample");

  auto [sim, sb] = make("simulate", "Monte Carlo study of the estimators");
  sb->option("--design", "design", s.design, "design1, design2 or a design JSON file");
  sb->option("--reps", "reps", s.reps, "Replications (0 with --export-data only exports)");
  add_inference(*sb, s);
  sb->flag("--expected-size", "expected_size", s.expected_size,
           "Random arm sizes with the targets as expectations");
  sb->option("--truth", "truth", s.truth, "auto, superpopulation or sampled-population");
  sb->option("--export-data", "export_data", s.export_data,
             "Write one draw (seeded by --seed) to this file in the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    for (auto& [sub, binder] : commands) {
      if (!sub->parsed()) continue;
      json cfg = json::object();
      if (!s.config.empty()) {
        cfg = read_json_file(s.config);
        if (!cfg.is_object()) throw CliFailure{2, "config file must hold a JSON object"};
        if (cfg.contains("command") && cfg["command"] != sub->get_name()) {
          throw CliFailure{2, "config is for command '" + cfg["command"].get<std::string>() +
                                  "', not '" + sub->get_name() + "'"};
        }
      }
      json resolved = binder->resolve(cfg);
      Output out(s, std::move(resolved));
      const std::string name = sub->get_name();
      if (name == "estimate") cmd_estimate(s, out);
      if (name == "trim") cmd_trim(s, out);
      if (name == "balance") cmd_balance(s, out);
      if (name == "simulate") cmd_simulate(s, out);
    }
  } catch (const CliFailure& f) {
    std::cerr << "error: " << f.message << '\n';
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
