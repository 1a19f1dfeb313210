// Copyright (c) 2026 The shubert Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// shubert: simulate | labels | pretrain | probe | gradcheck
//
// Exit codes: 0 success, 1 validation or threshold failure, 2 usage error.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "shubert/config.h"
#include "shubert/dataio.h"
#include "shubert/evalsuite.h"
#include "shubert/labels.h"
#include "shubert/trainer.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shubert;

namespace {

// Bad invocation: missing flag, missing input path, unusable environment.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::string out;
  std::optional<uint64_t> seed;
  std::optional<int> steps;
  std::string checkpoint;
  std::string manifest;
  std::string labels;
  bool one_path = false;
  std::string thresholds;
};

void require_path(const std::string& path, const std::string& flag) {
  if (path.empty()) throw UsageError(flag + " is required");
  if (!fs::exists(path)) throw UsageError(flag + ": no such file or directory: " + path);
}

void require_out(const Flags& f) {
  if (f.out.empty()) throw UsageError("--out is required");
  fs::create_directories(f.out);
}

// defaults < file < flags
RunConfig effective_config(const Flags& f, bool need_seed) {
  RunConfig c;
  if (!f.config.empty()) {
    require_path(f.config, "--config");
    c = load_run_config(f.config);
  }
  if (f.seed) c.seed = f.seed;
  if (f.steps) c.train.steps = *f.steps;
  if (f.one_path) c.train.one_path = true;
  if (need_seed && !c.seed) {
    throw UsageError("a seed is required: pass --seed or set `seed` in the config file");
  }
  c.finalize();
  return c;
}

void write_json(const std::string& path, const json& j) {
  std::ofstream o(path, std::ios::trunc);
  if (!o) throw Error("cannot write " + path);
  o << j.dump(2) << "\n";
}

void echo_config(const Flags& f, const RunConfig& c) {
  write_json((fs::path(f.out) / "config.json").string(), to_json(c));
}

int threads() {
  try {
    return num_threads_from_env();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

// A file inside a directory argument, or the argument itself.
std::string in_dir(const std::string& path, const std::string& file) {
  return fs::is_directory(path) ? (fs::path(path) / file).string() : path;
}

std::string dir_of(const std::string& path) {
  return fs::is_directory(path) ? path : fs::path(path).parent_path().string();
}

// ---- simulate ----

int run_simulate(const Flags& f) {
  const RunConfig c = effective_config(f, true);
  require_out(f);
  const Corpus corpus(c.corpus);
  SampleOptions opts;
  opts.split = c.simulate.split == "eval" ? Split::kEval : Split::kTrain;
  if (!c.simulate.force_type.empty()) {
    opts.force_type_a = mixture_type_from_string(c.simulate.force_type);
  }
  const std::string mpath = (fs::path(f.out) / "manifest.jsonl").string();
  {
    std::ofstream m(mpath, std::ios::trunc);
    if (!m) throw Error("cannot write " + mpath);
    for (int i = 0; i < c.simulate.n_examples; ++i) {
      const MixtureExample ex =
          sample_indexed(corpus, *c.seed, static_cast<uint64_t>(i), opts);
      m << write_example(f.out, ex).dump() << "\n";
    }
  }
  echo_config(f, c);
  const std::string digest = file_digest(mpath);
  std::cout << json{{"examples", c.simulate.n_examples},
                    {"manifest", mpath},
                    {"manifest_digest", digest}}
                   .dump(2)
            << "\n";
  return 0;
}

// ---- labels ----

// How the label features were produced, so probe can rebuild the same model.
json label_model_meta(const RunConfig& c, const std::string& checkpoint) {
  json j{{"layer_index", c.labels.layer_index}};
  if (checkpoint.empty()) {
    j["source"] = "random-init";
    j["model_seed"] = c.labels.model_seed;
  } else {
    j["source"] = "checkpoint";
    j["checkpoint"] = fs::absolute(checkpoint).string();
  }
  return j;
}

LabelModel label_model_from_meta(const json& meta, const RunConfig& c) {
  const int layer = meta.at("layer_index").get<int>();
  if (meta.at("source") == "checkpoint") {
    const std::string path = meta.at("checkpoint").get<std::string>();
    require_path(path, "label model checkpoint");
    LoadedCheckpoint ck = load_checkpoint(path);
    return {ck.config.model, std::move(ck.state.params), layer};
  }
  return {c.model(), init_model(c.model(), meta.at("model_seed").get<uint64_t>()), layer};
}

int run_labels(const Flags& f) {
  RunConfig c = effective_config(f, true);
  require_out(f);
  c.kmeans.seed = *c.seed;
  const json meta = label_model_meta(c, f.checkpoint);
  if (!f.checkpoint.empty()) require_path(f.checkpoint, "--checkpoint");
  const LabelModel lm = label_model_from_meta(meta, c);
  const Corpus corpus(c.corpus);
  LabelBuild build = build_labels(corpus_label_items(corpus, Split::kTrain), lm, c.kmeans);

  int manifest_examples = 0;
  if (!f.manifest.empty()) {
    require_path(f.manifest, "--manifest");
    for (const MixtureExample& ex : read_manifest(dir_of(in_dir(f.manifest, "manifest.jsonl")))) {
      build.labels[ex.id] = label_waveform(lm, build.codebook, ex.clean);
      if (ex.interferer_clean) {
        build.labels[interferer_key(ex.id)] =
            label_waveform(lm, build.codebook, *ex.interferer_clean);
      }
      ++manifest_examples;
    }
  }

  const fs::path out(f.out);
  write_codebook((out / "codebook.bin").string(), build.codebook);
  write_label_store((out / "labels.jsonl").string(), build.labels);
  Index frames = 0;
  for (const auto& [id, seq] : build.labels) frames += static_cast<Index>(seq.size());
  const json report{{"k", build.codebook.k()},
                    {"feature_source", build.codebook.feature_source},
                    {"label_model", meta},
                    {"sequences", build.labels.size()},
                    {"manifest_examples", manifest_examples},
                    {"frames", frames},
                    {"entropy_nats", label_entropy(build.labels, build.codebook.k())},
                    {"max_entropy_nats", std::log(static_cast<double>(build.codebook.k()))},
                    {"kmeans_iterations", build.codebook.objective_history.size() - 1},
                    {"kmeans_objective", build.codebook.objective_history}};
  write_json((out / "labels_report.json").string(), report);
  echo_config(f, c);
  std::cout << json{{"labels", (out / "labels.jsonl").string()},
                    {"labels_digest", file_digest((out / "labels.jsonl").string())},
                    {"entropy_nats", report["entropy_nats"]}}
                   .dump(2)
            << "\n";
  return 0;
}

// ---- pretrain ----

int run_pretrain_cmd(const Flags& f) {
  const int nthreads = threads();
  RunConfig c = effective_config(f, f.checkpoint.empty());
  require_out(f);
  require_path(f.labels, "--labels");
  const LabelStore labels = read_label_store(in_dir(f.labels, "labels.jsonl"));

  TrainState start;
  TrainConfig tc = c.train;
  if (!f.checkpoint.empty()) {
    require_path(f.checkpoint, "--checkpoint");
    LoadedCheckpoint ck = load_checkpoint(f.checkpoint);
    // The checkpoint fixes model, optimizer and seeds; only the step budget
    // may change on resume.
    tc = ck.config;
    if (f.steps) tc.steps = *f.steps;
    if (f.one_path && !tc.one_path) {
      throw Error("--one-path does not match the resumed checkpoint");
    }
    start = std::move(ck.state);
  } else {
    start = init_train_state(tc);
  }
  c.train = tc;
  echo_config(f, c);

  std::unique_ptr<ExampleSource> source;
  Corpus corpus(c.corpus);
  if (!f.manifest.empty()) {
    require_path(f.manifest, "--manifest");
    source = std::make_unique<ManifestSource>(
        read_manifest(dir_of(in_dir(f.manifest, "manifest.jsonl"))), labels);
  } else {
    source = std::make_unique<DynamicSource>(corpus, labels, tc.effective_data_seed());
  }

  RunOptions opts;
  opts.out_dir = f.out;
  opts.threads = nthreads;
  opts.on_step = [&](const StepMetrics& m) {
    if (m.step % 50 == 0 || m.step == tc.steps || m.skipped) {
      std::fprintf(stderr, "step %lld/%d loss %.4f ce_a %.4f ce_b %.4f inv %.4f red %.3f%s\n",
                   static_cast<long long>(m.step), tc.steps, m.total, m.ce_a, m.ce_b,
                   m.cc_inv, m.cc_red, m.skipped ? " (skipped)" : "");
    }
  };
  const RunResult r = run_pretrain(tc, *source, std::move(start), opts);
  std::cout << json{{"final", (fs::path(f.out) / "final.bin").string()},
                    {"step", r.state.step},
                    {"updates", r.state.updates},
                    {"skipped", r.state.skipped}}
                   .dump(2)
            << "\n";
  return 0;
}

// ---- probe ----

// Threshold file: any subset of these keys.
int check_thresholds(const std::string& path, const ProbeReport& r) {
  require_path(path, "--thresholds");
  std::ifstream in(path);
  json t;
  try {
    t = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("--thresholds " + path + ": " + e.what());
  }
  const double tgt = r.target_masked_accuracy;
  const std::optional<double> intf = r.interferer_masked_accuracy;
  int failures = 0;
  auto check = [&](const char* key, std::optional<double> value, bool at_least) {
    if (!t.contains(key)) return;
    const double bound = t.at(key).get<double>();
    const bool ok = value && (at_least ? *value >= bound : *value <= bound);
    std::fprintf(stderr, "threshold %s %s %g: %s (%s)\n", key, at_least ? ">=" : "<=", bound,
                 ok ? "pass" : "FAIL", value ? std::to_string(*value).c_str() : "absent");
    if (!ok) ++failures;
  };
  for (const auto& [key, _] : t.items()) {
    static const std::set<std::string> known{
        "min_target_accuracy", "max_interferer_accuracy", "min_accuracy_gap",
        "min_swap_consistency", "min_view_cosine"};
    if (!known.count(key)) throw Error("--thresholds: unknown key '" + key + "'");
  }
  check("min_target_accuracy", tgt, true);
  check("max_interferer_accuracy", intf, false);
  check("min_accuracy_gap", intf ? std::optional<double>(tgt - *intf) : std::nullopt, true);
  check("min_swap_consistency", r.swap_consistency, true);
  check("min_view_cosine", r.mean_view_cosine, true);
  return failures == 0 ? 0 : 1;
}

int run_probe(const Flags& f) {
  const int nthreads = threads();
  if (f.checkpoint.empty()) {
    throw UsageError("--checkpoint is required (a checkpoint path or random-init)");
  }
  const bool random_init = f.checkpoint == "random-init";
  RunConfig c = effective_config(f, random_init);

  ModelConfig mc = c.model();
  ParameterSet params;
  if (random_init) {
    params = init_model(mc, *c.seed);
  } else {
    require_path(f.checkpoint, "--checkpoint");
    LoadedCheckpoint ck = load_checkpoint(f.checkpoint);
    mc = ck.config.model;
    params = std::move(ck.state.params);
  }

  const Corpus corpus(c.corpus);
  LabelModel lm;
  Codebook cb;
  if (!f.labels.empty()) {
    require_path(f.labels, "--labels");
    const std::string dir = dir_of(in_dir(f.labels, "labels.jsonl"));
    const std::string report = (fs::path(dir) / "labels_report.json").string();
    require_path(report, "labels report");
    std::ifstream in(report);
    lm = label_model_from_meta(json::parse(in).at("label_model"), c);
    cb = read_codebook((fs::path(dir) / "codebook.bin").string());
  } else {
    // Same labels the `labels` subcommand would produce from this config.
    lm = label_model_from_meta(label_model_meta(c, ""), c);
    KMeansConfig km = c.kmeans;
    if (c.seed) km.seed = *c.seed;
    cb = build_labels(corpus_label_items(corpus, Split::kTrain), lm, km).codebook;
  }

  std::vector<ProbeExample> set;
  std::vector<MixtureExample> views;
  if (!f.manifest.empty()) {
    require_path(f.manifest, "--manifest");
    views = read_manifest(dir_of(in_dir(f.manifest, "manifest.jsonl")));
    for (const auto& ex : views) set.push_back(make_probe_example(corpus, lm, cb, ex));
  } else {
    set = build_probe_set(corpus, lm, cb, c.probe.n_examples, c.probe.seed);
    views = build_invariance_set(corpus, c.probe.n_examples, mix_seed(c.probe.seed, 1));
  }
  ProbeReport r = selectivity_probe(mc, params, set, c.probe, nthreads);
  r.mean_view_cosine = invariance_metric(mc, params, views, nthreads);

  const json out = to_json(r);
  std::cout << out.dump(2) << "\n";
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    write_json((fs::path(f.out) / "probe_report.json").string(), out);
    echo_config(f, c);
  }
  return f.thresholds.empty() ? 0 : check_thresholds(f.thresholds, r);
}

// ---- gradcheck ----

int run_gradcheck(const Flags& f) {
  if (!f.seed) throw UsageError("gradcheck requires --seed");
  const GradReport r = gradcheck_tiny(*f.seed);
  std::vector<ParamGradError> worst = r.per_parameter;
  std::sort(worst.begin(), worst.end(), [](const auto& a, const auto& b) {
    return a.max_rel_error > b.max_rel_error;
  });
  json top = json::array();
  for (size_t i = 0; i < worst.size() && i < 5; ++i) {
    top.push_back({{"name", worst[i].name},
                   {"max_rel_error", worst[i].max_rel_error},
                   {"analytic", worst[i].worst_analytic},
                   {"numeric", worst[i].worst_numeric}});
  }
  const json out{{"max_rel_error", r.max_rel_error},
                 {"tolerance", r.tolerance},
                 {"pass", r.pass},
                 {"parameters", r.per_parameter.size()},
                 {"worst", top},
                 {"failure", r.failure}};
  std::cout << out.dump(2) << "\n";
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    write_json((fs::path(f.out) / "gradcheck.json").string(), out);
  }
  return r.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Speaker-conditioned masked-prediction pre-training on synthetic mixtures"};
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", f.config, "TOML config file");
    s->add_option("--out", f.out, "Output directory");
    s->add_option("--seed", f.seed, "Run seed");
  };
  CLI::App* sim = app.add_subcommand("simulate", "Write a manifest of mixture examples");
  common(sim);
  CLI::App* lab = app.add_subcommand("labels", "Fit the codebook and write pseudo-labels");
  common(lab);
  lab->add_option("--checkpoint", f.checkpoint, "Take label features from this checkpoint");
  lab->add_option("--manifest", f.manifest, "Also label the examples of this manifest");
  CLI::App* pre = app.add_subcommand("pretrain", "Train from pseudo-labels");
  common(pre);
  pre->add_option("--steps", f.steps, "Total number of steps");
  pre->add_option("--checkpoint", f.checkpoint, "Resume from this checkpoint");
  pre->add_option("--manifest", f.manifest, "Train on a fixed manifest instead of dynamic mixing");
  pre->add_option("--labels", f.labels, "Label store (labels.jsonl or its directory)");
  pre->add_flag("--one-path", f.one_path, "Disable branch B and the CC loss");
  CLI::App* pro = app.add_subcommand("probe", "Selectivity and invariance report");
  common(pro);
  pro->add_option("--checkpoint", f.checkpoint, "Checkpoint path or random-init");
  pro->add_option("--manifest", f.manifest, "Evaluate this manifest instead of a generated set");
  pro->add_option("--labels", f.labels, "Labels directory with codebook.bin");
  pro->add_option("--thresholds", f.thresholds, "JSON file of pass thresholds");
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check on a tiny model");
  gc->add_option("--seed", f.seed, "Seed");
  gc->add_option("--out", f.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return run_simulate(f);
    if (lab->parsed()) return run_labels(f);
    if (pre->parsed()) return run_pretrain_cmd(f);
    if (pro->parsed()) return run_probe(f);
    return run_gradcheck(f);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "shubert: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "shubert: %s\n", e.what());
    return 1;
  }
}
