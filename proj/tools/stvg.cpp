// stvg: spatio-temporal video grounding toolkit CLI.
#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stvg/chunker.hpp"
#include "stvg/dataset_io.hpp"
#include "stvg/errors.hpp"
#include "stvg/manifest.hpp"
#include "stvg/metrics.hpp"
#include "stvg/model.hpp"
#include "stvg/proposals.hpp"
#include "stvg/synth.hpp"

using nlohmann::json;
using namespace stvg;

namespace {

constexpr uint64_t kDefaultNoiseSeed = 1013;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

uint64_t seed_or_env(uint64_t seed, bool seed_set) {
  if (seed_set) return seed;
  if (const char* env = std::getenv("STVG_SEED")) return std::strtoull(env, nullptr, 10);
  return seed;
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(1, std::string(path) + ": " + e.what());
  }
  return j;
}

std::set<std::string> parse_module_list(const std::string& csv) {
  std::set<std::string> out;
  std::string cur;
  for (char c : csv + ",") {
    if (c == ',') {
      if (!cur.empty()) out.insert(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  return out;
}

std::vector<Tubelet> video_objects(const Dataset& data, const std::string& video_id) {
  std::map<std::string, Tubelet> by_id;
  for (const auto& inst : data.instances) {
    if (inst.video_id != video_id) continue;
    for (const auto& c : inst.candidates) by_id.emplace(c.object_id, c);
  }
  std::vector<Tubelet> out;
  for (auto& [_, t] : by_id) out.push_back(std::move(t));
  return out;
}

std::vector<TemporalInterval> video_events(const Dataset& data, const std::string& video_id) {
  std::set<TemporalInterval> events;
  for (const auto& inst : data.instances)
    if (inst.video_id == video_id) events.insert(inst.interval);
  return {events.begin(), events.end()};
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const synth::GenOptions& opts, const std::string& out_path) {
  Timer timer;
  const Dataset d = synth::build_dataset(opts);
  io::save_dataset(d, out_path);
  std::cout << "wrote " << d.instances.size() << " instances over " << d.videos.size()
            << " videos to " << out_path << "\n";
  std::cout << "split: train " << d.split.train.size() << ", val " << d.split.val.size()
            << ", test " << d.split.test.size() << "; motion-only instances "
            << synth::count_motion_only_instances(d) << "/" << d.instances.size() << "\n";

  RunManifest m;
  m.command = "gen-data";
  m.config = {{"preset", opts.preset}, {"n_videos", opts.n_videos},
              {"n_frames", opts.n_frames}, {"event_length", opts.event_length},
              {"n_events", opts.n_events}};
  m.seed = opts.seed;
  m.outputs = {out_path};
  m.wall_clock_sec = timer.seconds();
  m.write(out_path + ".manifest.json");
  return 0;
}

int cmd_train_grounding(const model::ModelConfig& cfg, const std::string& data_path,
                        const std::string& out_path, double feature_noise,
                        uint64_t noise_seed) {
  Timer timer;
  const Dataset data = io::load_dataset(data_path);
  BoxFeatureProvider provider(model::train_attribute_vocab(data), noise_seed, feature_noise);
  model::GroundingModel m(cfg);
  m.init(data, provider.appearance_dim());
  const auto log = m.train(data, provider);
  m.save(out_path);

  json jlog;
  jlog["epoch_loss"] = log.epoch_loss;
  jlog["val_accuracy"] = log.val_accuracy;
  jlog["best_epoch"] = log.best_epoch;
  jlog["best_val_accuracy"] = log.best_val_accuracy;
  jlog["skipped_instances"] = log.skipped_instances;
  write_json(jlog, out_path + ".trainlog.json");

  for (size_t e = 0; e < log.epoch_loss.size(); ++e)
    std::cout << "epoch " << e << "  loss " << log.epoch_loss[e] << "  val_acc "
              << log.val_accuracy[e] << "\n";
  std::cout << "best epoch " << log.best_epoch << " (val_acc " << log.best_val_accuracy
            << "); params written to " << out_path << "\n";

  RunManifest man;
  man.command = "train";
  man.config = {{"variant", cfg.variant},       {"epochs", cfg.epochs},
                {"lr", cfg.lr},                 {"margin", cfg.margin},
                {"lambda1", cfg.lambda1},       {"lambda2", cfg.lambda2},
                {"lambda_att", cfg.lambda_att}, {"feature_noise", feature_noise},
                {"noise_seed", noise_seed},     {"task", "grounding"}};
  man.seed = cfg.seed;
  man.add_input(data_path);
  man.outputs = {out_path, out_path + ".trainlog.json"};
  man.wall_clock_sec = timer.seconds();
  man.write(out_path + ".manifest.json");
  return 0;
}

int cmd_train_proposal(const proposals::ProposalConfig& cfg, const std::string& data_path,
                       const std::string& out_path, double feature_noise, uint64_t noise_seed) {
  Timer timer;
  const Dataset data = io::load_dataset(data_path);
  BoxFeatureProvider provider(model::train_attribute_vocab(data), noise_seed, feature_noise);

  std::vector<std::vector<std::vector<double>>> windows;
  std::vector<int> labels;
  for (const auto& video : data.videos) {
    if (!data.split.train.count(video.id)) continue;
    const auto objects = video_objects(data, video.id);
    if (objects.empty()) continue;
    const auto events = video_events(data, video.id);
    for (const auto& w : proposals::enumerate_windows(video.n_frames, 16, 8, 3)) {
      std::vector<std::vector<double>> chunks;
      for (const auto& c : proposals::window_chunks(w, cfg.chunk_len))
        chunks.push_back(provider.chunk_descriptor(video, objects, c));
      if (chunks.empty()) continue;
      bool event = false;
      for (const auto& ev : events)
        if (metrics::temporal_iou(w, ev) > 0.5) event = true;
      windows.push_back(std::move(chunks));
      labels.push_back(event ? 1 : 0);
    }
  }
  proposals::WindowClassifier wc(cfg);
  const auto stats = wc.train(windows, labels);
  wc.save(out_path);
  std::cout << "trained window classifier on " << windows.size() << " windows; final loss "
            << (stats.epoch_loss.empty() ? 0.0 : stats.epoch_loss.back()) << "\n";

  RunManifest man;
  man.command = "train";
  man.config = {{"task", "proposal"}, {"epochs", cfg.epochs}, {"lr", cfg.lr},
                {"hidden", cfg.hidden}, {"feature_noise", feature_noise},
                {"noise_seed", noise_seed}};
  man.seed = cfg.seed;
  man.add_input(data_path);
  man.outputs = {out_path};
  man.wall_clock_sec = timer.seconds();
  man.write(out_path + ".manifest.json");
  return 0;
}

struct EvalArgs {
  std::string data_path, params_path, preds_path, out_path;
  std::string split = "test";
  std::string mode = "accuracy";  // accuracy | tubelet | temporal | spatiotemporal
  std::string disable;            // csv module list (ablation)
  double jitter = 0.0;
  double drop = 0.0;
  uint64_t perturb_seed = 31;
  int top_k = 1;
  bool with_ap = false;
  double feature_noise = 0.002;
  uint64_t noise_seed = kDefaultNoiseSeed;
  double threshold = 0.5;
};

json eval_meta(const EvalArgs& a, const std::string& variant) {
  json meta;
  meta["mode"] = a.mode;
  meta["split"] = a.split;
  meta["variant"] = variant;
  meta["disabled"] = parse_module_list(a.disable);
  if (a.jitter > 0 || a.drop > 0) {
    meta["jitter"] = a.jitter;
    meta["drop"] = a.drop;
  }
  return meta;
}

int cmd_eval(const EvalArgs& a, const std::string& command_name) {
  Timer timer;
  const Dataset data = io::load_dataset(a.data_path);
  metrics::EvalReport rep;
  std::string variant = "file";

  if (!a.preds_path.empty()) {
    // file-driven evaluation
    const auto insts_ptr = data.split_instances(a.split);
    std::vector<GroundingInstance> insts;
    for (const auto* p : insts_ptr) insts.push_back(*p);
    std::map<std::string, json> by_id;
    std::ifstream in(a.preds_path);
    if (!in) throw IoError("cannot open: " + a.preds_path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw ParseError(lineno, std::string("bad prediction: ") + e.what());
      }
      if (j.contains("instance_id")) by_id[j["instance_id"].get<std::string>()] = j;
    }
    if (a.mode == "accuracy") {
      std::vector<int> preds;
      for (const auto& inst : insts) {
        auto it = by_id.find(inst.id);
        preds.push_back(it == by_id.end() ? -1 : it->second.value("predicted_index", -1));
      }
      rep = metrics::eval_localization(preds, insts);
    } else if (a.mode == "temporal") {
      std::vector<std::vector<std::pair<TemporalInterval, double>>> preds(insts.size());
      for (size_t i = 0; i < insts.size(); ++i) {
        auto it = by_id.find(insts[i].id);
        if (it == by_id.end()) continue;
        const auto& intervals = it->second.at("intervals");
        const auto scores = it->second.value("scores", std::vector<double>{});
        for (size_t k = 0; k < intervals.size(); ++k)
          preds[i].push_back({{intervals[k][0].get<int>(), intervals[k][1].get<int>()},
                              k < scores.size() ? scores[k] : 1.0 - 0.001 * static_cast<double>(k)});
      }
      rep = metrics::eval_temporal(preds, insts, a.threshold, a.top_k, a.with_ap);
    } else if (a.mode == "spatiotemporal") {
      std::vector<std::pair<TemporalInterval, Tubelet>> preds;
      for (const auto& inst : insts) {
        auto it = by_id.find(inst.id);
        if (it == by_id.end())
          throw ValidationError("predictions", "missing prediction for " + inst.id);
        const auto& j = it->second;
        TemporalInterval iv{j.at("interval")[0].get<int>(), j.at("interval")[1].get<int>()};
        Tubelet t;
        t.object_id = "pred";
        t.class_label = inst.candidates.front().class_label;
        t.frame_start = j.at("frame_start").get<int>();
        t.is_gt = false;
        for (const auto& b : j.at("boxes")) {
          if (b.is_null())
            t.boxes.push_back(std::nullopt);
          else
            t.boxes.push_back(BoundingBox{b[0].get<double>(), b[1].get<double>(),
                                          b[2].get<double>(), b[3].get<double>()});
        }
        preds.push_back({iv, std::move(t)});
      }
      rep = metrics::eval_spatiotemporal(preds, insts, a.threshold);
    } else {
      throw ConfigError("mode '" + a.mode + "' needs --params, not --preds");
    }
  } else {
    if (a.params_path.empty()) throw ConfigError("eval needs --params or --preds");
    auto m = model::GroundingModel::load(a.params_path);
    variant = m.config().variant;
    BoxFeatureProvider provider(m.attribute_vocab(), a.noise_seed, a.feature_noise);
    const auto disabled = parse_module_list(a.disable);
    if (a.mode == "accuracy") {
      rep = m.evaluate(data, a.split, provider, disabled.empty() ? nullptr : &disabled);
    } else if (a.mode == "tubelet") {
      const auto insts_ptr = data.split_instances(a.split);
      std::optional<std::vector<GroundingInstance>> scored;
      if (a.jitter > 0 || a.drop > 0) {
        Rng rng(mix64(a.perturb_seed, fnv1a64("perturb")));
        scored.emplace();
        for (const auto* inst : insts_ptr)
          scored->push_back(proposals::perturb_instance(*inst, *data.video(inst->video_id),
                                                        a.jitter, a.drop, rng));
      }
      rep = m.evaluate_tubelets(data, a.split, provider, scored ? &*scored : nullptr,
                                a.threshold);
    } else {
      throw ConfigError("mode '" + a.mode + "' needs --preds");
    }
  }

  json out = rep.to_json();
  out["meta"] = eval_meta(a, variant);
  if (!a.out_path.empty()) write_json(out, a.out_path);
  std::cout << rep.pretty();

  if (!a.out_path.empty()) {
    RunManifest man;
    man.command = command_name;
    man.config = out["meta"];
    man.seed = a.perturb_seed;
    man.add_input(a.data_path);
    if (!a.params_path.empty()) man.add_input(a.params_path);
    if (!a.preds_path.empty()) man.add_input(a.preds_path);
    man.outputs = {a.out_path};
    man.wall_clock_sec = timer.seconds();
    man.write(a.out_path + ".manifest.json");
  }
  return 0;
}

int cmd_attn_stats(const std::string& params_path, const std::string& data_path,
                   const std::string& split, const std::string& out_path) {
  Timer timer;
  const Dataset data = io::load_dataset(data_path);
  auto m = model::GroundingModel::load(params_path);
  std::vector<lang::LanguageEncoding> encodings;
  std::vector<Expression> exprs;
  for (const auto* inst : data.split_instances(split)) {
    encodings.push_back(m.encode_only(inst->expression));
    exprs.push_back(inst->expression);
  }
  if (encodings.empty()) throw Error("split '" + split + "' has no instances");
  const auto table = lang::aggregate_attention_by_pos(encodings, exprs);

  json j;
  j["modules"] = m.config().active_modules();
  json by_tag;
  for (const auto& [tag, per_module] : table.by_tag) {
    json row;
    for (const auto& [mod, v] : per_module) row[mod] = v;
    row["count"] = table.tag_counts.at(tag);
    by_tag[tag] = row;
  }
  j["by_tag"] = by_tag;
  j["verbs"] = table.verbs;
  if (!out_path.empty()) write_json(j, out_path);
  std::cout << table.pretty(m.config().active_modules());

  if (!out_path.empty()) {
    RunManifest man;
    man.command = "attn-stats";
    man.config = {{"split", split}};
    man.seed = m.config().seed;
    man.add_input(data_path);
    man.add_input(params_path);
    man.outputs = {out_path};
    man.wall_clock_sec = timer.seconds();
    man.write(out_path + ".manifest.json");
  }
  return 0;
}

int cmd_propose(const std::string& params_path, const std::string& data_path,
                const std::string& split, int top_k, const std::string& out_path,
                double feature_noise, uint64_t noise_seed) {
  Timer timer;
  const Dataset data = io::load_dataset(data_path);
  const auto wc = proposals::WindowClassifier::load(params_path);
  BoxFeatureProvider provider(model::train_attribute_vocab(data), noise_seed, feature_noise);

  std::ofstream out;
  if (!out_path.empty()) {
    out.open(out_path);
    if (!out) throw IoError("cannot open for writing: " + out_path);
    out << json{{"type", "meta"}, {"format", "stvg-proposals/1"}}.dump() << "\n";
  }

  int hits = 0, total = 0;
  for (const auto& video : data.videos) {
    if (!data.split.of(split).count(video.id)) continue;
    const auto objects = video_objects(data, video.id);
    if (objects.empty()) continue;
    const auto props =
        proposals::propose_intervals(video, objects, provider, wc, top_k, 16, 8, 3);
    if (out.is_open()) {
      json j{{"type", "proposals"}, {"video_id", video.id}};
      json list = json::array();
      for (const auto& p : props)
        list.push_back({{"interval", {p.interval.start, p.interval.end}}, {"score", p.score}});
      j["top_k"] = list;
      out << j.dump() << "\n";
    }
    for (const auto& ev : video_events(data, video.id)) {
      ++total;
      for (const auto& p : props)
        if (metrics::temporal_iou(p.interval, ev) > 0.5) {
          ++hits;
          break;
        }
    }
  }
  const double recall = total ? static_cast<double>(hits) / total : 0.0;
  std::cout << "recall@" << top_k << " at tIoU 0.5: " << recall << " (" << hits << "/" << total
            << " events)\n";

  if (!out_path.empty()) {
    RunManifest man;
    man.command = "propose";
    man.config = {{"split", split}, {"top_k", top_k}, {"recall", recall}};
    man.seed = noise_seed;
    man.add_input(data_path);
    man.add_input(params_path);
    man.outputs = {out_path};
    man.wall_clock_sec = timer.seconds();
    man.write(out_path + ".manifest.json");
  }
  return 0;
}

int cmd_link(const std::string& dets_path, const std::string& out_path, double link_iou,
             int top_k, const std::string& class_label) {
  Timer timer;
  const auto dets = proposals::load_detections(dets_path);
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot open for writing: " + out_path);
  out << json{{"type", "meta"}, {"format", "stvg-tubelets/1"}}.dump() << "\n";
  int total = 0;
  for (const auto& [vid, fd] : dets) {
    const auto tubes = proposals::link_tubelets(fd, link_iou, top_k, class_label);
    for (const auto& t : tubes) {
      json boxes = json::array();
      for (const auto& b : t.boxes) {
        if (b.has_value())
          boxes.push_back({b->x_min, b->y_min, b->x_max, b->y_max});
        else
          boxes.push_back(nullptr);
      }
      out << json{{"type", "tubelet"},
                  {"video_id", vid},
                  {"object_id", t.object_id},
                  {"class", t.class_label},
                  {"frame_start", t.frame_start},
                  {"boxes", boxes},
                  {"confidence", t.confidence}}
                 .dump()
          << "\n";
      ++total;
    }
  }
  std::cout << "linked " << total << " tubelets from " << dets.size() << " videos\n";

  RunManifest man;
  man.command = "link";
  man.config = {{"link_iou", link_iou}, {"top_k", top_k}};
  man.add_input(dets_path);
  man.outputs = {out_path};
  man.wall_clock_sec = timer.seconds();
  man.write(out_path + ".manifest.json");
  return 0;
}

int cmd_validate(const std::string& in_path) {
  std::ifstream in(in_path);
  if (!in) throw IoError("cannot open: " + in_path);
  std::string line;
  int lineno = 0;
  int invalid = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const Expression e = chunk::tokenize(line);
    if (e.tokens.empty()) continue;
    const auto v = chunk::validate(e);
    std::cout << "line " << lineno << ": " << (v.valid ? "valid" : "invalid");
    if (!v.valid) {
      ++invalid;
      std::cout << " (missing:";
      for (const auto& m : v.missing) std::cout << " " << m;
      std::cout << ")";
    }
    std::cout << "\n";
  }
  return invalid > 0 ? 1 : 0;
}

int cmd_report(const std::vector<std::string>& run_paths, const std::string& out_path) {
  json runs = json::array();
  for (const auto& p : run_paths) runs.push_back(load_json(p));

  std::ostringstream os;
  os << "== localization accuracy by variant ==\n";
  const std::vector<std::string> order{"random", "rgb", "flow", "flow5", "fused1", "fused5"};
  std::map<std::string, double> by_variant;
  double random_expect = -1;
  for (const auto& r : runs) {
    if (!r.contains("meta") || !r.contains("accuracy")) continue;
    if (!r["meta"].value("disabled", json::array()).empty()) continue;
    by_variant[r["meta"].value("variant", "?")] = r["accuracy"].get<double>();
    random_expect = r.value("random_expectation", random_expect);
  }
  if (random_expect >= 0) by_variant["random"] = random_expect;
  char buf[96];
  for (const auto& v : order) {
    if (!by_variant.count(v)) continue;
    std::snprintf(buf, sizeof(buf), "  %-8s %8.4f\n", v.c_str(), by_variant[v]);
    os << buf;
  }
  for (const auto& [v, acc] : by_variant) {
    if (std::find(order.begin(), order.end(), v) != order.end()) continue;
    std::snprintf(buf, sizeof(buf), "  %-8s %8.4f\n", v.c_str(), acc);
    os << buf;
  }

  os << "== ablation ladder (largest disabled set first) ==\n";
  std::vector<std::pair<std::vector<std::string>, double>> ladder;
  for (const auto& r : runs) {
    if (!r.contains("meta") || !r.contains("accuracy")) continue;
    const auto disabled = r["meta"].value("disabled", json::array());
    if (disabled.empty()) continue;
    ladder.push_back({disabled.get<std::vector<std::string>>(), r["accuracy"].get<double>()});
  }
  std::sort(ladder.begin(), ladder.end(),
            [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  for (const auto& [disabled, acc] : ladder) {
    std::string name = "disabled:";
    for (const auto& d : disabled) name += " " + d;
    std::snprintf(buf, sizeof(buf), "  %-48s %8.4f\n", name.c_str(), acc);
    os << buf;
  }

  std::cout << os.str();
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot open for writing: " + out_path);
    out << os.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stvg: two-stream modular attention grounding toolkit"};
  app.require_subcommand(1);
  app.set_config("--config");

  // gen-data ---------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  synth::GenOptions gen_opts;
  std::string gen_out = "data.jsonl";
  auto* gen_seed_opt = gen->add_option("--seed", gen_opts.seed, "rng seed");
  gen->add_option("--preset", gen_opts.preset, "motion | mixed")
      ->check(CLI::IsMember({"motion", "mixed"}));
  gen->add_option("--n", gen_opts.n_videos, "number of videos (>= 15)");
  gen->add_option("--n-frames", gen_opts.n_frames, "frames per video");
  gen->add_option("--event-length", gen_opts.event_length, "event window length in frames");
  gen->add_option("--n-events", gen_opts.n_events, "event windows per video");
  gen->add_option("--out", gen_out, "output dataset path")->required();

  // train ------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train the grounding model or the proposal classifier");
  std::string train_task = "grounding";
  std::string train_data, train_out = "params.stvg";
  model::ModelConfig mcfg;
  proposals::ProposalConfig pcfg;
  double train_noise = 0.002;
  uint64_t train_noise_seed = kDefaultNoiseSeed;
  train->add_option("--task", train_task, "grounding | proposal")
      ->check(CLI::IsMember({"grounding", "proposal"}));
  train->add_option("--data", train_data, "dataset path")->required();
  train->add_option("--out", train_out, "output parameter file")->required();
  train->add_option("--variant", mcfg.variant, "rgb | flow | flow5 | fused1 | fused5")
      ->check(CLI::IsMember({"rgb", "flow", "flow5", "fused1", "fused5"}));
  auto* train_seed_opt = train->add_option("--seed", mcfg.seed, "rng seed");
  train->add_option("--epochs", mcfg.epochs, "training epochs");
  train->add_option("--lr", mcfg.lr, "learning rate");
  train->add_option("--margin", mcfg.margin, "hinge margin");
  train->add_option("--lambda1", mcfg.lambda1, "hard-expression weight");
  train->add_option("--lambda2", mcfg.lambda2, "hard-object weight");
  train->add_option("--lambda-att", mcfg.lambda_att, "attribute loss weight");
  train->add_option("--embed-dim", mcfg.embed_dim, "word embedding dim");
  train->add_option("--hidden-dim", mcfg.hidden_dim, "encoder hidden dim");
  train->add_option("--frame-stride", mcfg.train_frame_stride, "frame subsampling during training");
  train->add_option("--feature-noise", train_noise, "provider noise sigma");
  train->add_option("--noise-seed", train_noise_seed, "provider noise seed");
  train->add_option("--prop-epochs", pcfg.epochs, "proposal classifier epochs");
  train->add_option("--prop-hidden", pcfg.hidden, "proposal classifier hidden dim");

  // eval / ablate ------------------------------------------------------------
  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate predictions or a trained model");
  eval->add_option("--data", eval_args.data_path, "dataset path")->required();
  eval->add_option("--params", eval_args.params_path, "grounding parameter file");
  eval->add_option("--preds", eval_args.preds_path, "predictions file (jsonl)");
  eval->add_option("--split", eval_args.split, "train | val | test");
  eval->add_option("--mode", eval_args.mode, "accuracy | tubelet | temporal | spatiotemporal")
      ->check(CLI::IsMember({"accuracy", "tubelet", "temporal", "spatiotemporal"}));
  eval->add_option("--jitter", eval_args.jitter, "box jitter fraction of box size");
  eval->add_option("--drop", eval_args.drop, "frame drop rate");
  eval->add_option("--perturb-seed", eval_args.perturb_seed, "perturbation seed");
  eval->add_option("--top-k", eval_args.top_k, "top-k for temporal eval");
  eval->add_flag("--ap", eval_args.with_ap, "also compute ranked-list average precision");
  eval->add_option("--threshold", eval_args.threshold, "IoU threshold");
  eval->add_option("--feature-noise", eval_args.feature_noise, "provider noise sigma");
  eval->add_option("--noise-seed", eval_args.noise_seed, "provider noise seed");
  eval->add_option("--out", eval_args.out_path, "report output path");

  EvalArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "evaluate with module weights zeroed");
  ablate->add_option("--data", ablate_args.data_path, "dataset path")->required();
  ablate->add_option("--params", ablate_args.params_path, "grounding parameter file")->required();
  ablate->add_option("--disable", ablate_args.disable, "comma-separated module list")->required();
  ablate->add_option("--split", ablate_args.split, "train | val | test");
  ablate->add_option("--feature-noise", ablate_args.feature_noise, "provider noise sigma");
  ablate->add_option("--noise-seed", ablate_args.noise_seed, "provider noise seed");
  ablate->add_option("--out", ablate_args.out_path, "report output path");

  // attn-stats ---------------------------------------------------------------
  auto* attn = app.add_subcommand("attn-stats", "POS x module word-attention aggregation");
  std::string attn_params, attn_data, attn_split = "test", attn_out;
  attn->add_option("--params", attn_params, "grounding parameter file")->required();
  attn->add_option("--data", attn_data, "dataset path")->required();
  attn->add_option("--split", attn_split, "train | val | test");
  attn->add_option("--out", attn_out, "output path");

  // propose -------------------------------------------------------------------
  auto* propose = app.add_subcommand("propose", "multi-scale temporal interval proposals");
  std::string prop_params, prop_data, prop_split = "test", prop_out;
  int prop_topk = 5;
  double prop_noise = 0.002;
  uint64_t prop_noise_seed = kDefaultNoiseSeed;
  propose->add_option("--params", prop_params, "proposal classifier parameter file")->required();
  propose->add_option("--data", prop_data, "dataset path")->required();
  propose->add_option("--split", prop_split, "train | val | test");
  propose->add_option("--top-k", prop_topk, "proposals per video");
  propose->add_option("--feature-noise", prop_noise, "provider noise sigma");
  propose->add_option("--noise-seed", prop_noise_seed, "provider noise seed");
  propose->add_option("--out", prop_out, "proposals output path");

  // link ------------------------------------------------------------------------
  auto* link = app.add_subcommand("link", "link frame detections into tubelets");
  std::string link_dets, link_out = "tubelets.jsonl", link_class = "object";
  double link_iou = 0.5;
  int link_topk = 8;
  link->add_option("--dets", link_dets, "detections file (jsonl)")->required();
  link->add_option("--out", link_out, "output path");
  link->add_option("--link-iou", link_iou, "min IoU between consecutive boxes");
  link->add_option("--top-k", link_topk, "max tubelets per video");
  link->add_option("--class", link_class, "class label for emitted tubelets");

  // validate -----------------------------------------------------------------
  auto* validate = app.add_subcommand("validate", "grammatical validity of expressions");
  std::string validate_in;
  validate->add_option("--in", validate_in, "text file, one expression per line")->required();

  // report -------------------------------------------------------------------
  auto* report = app.add_subcommand("report", "assemble comparison tables from eval outputs");
  std::vector<std::string> report_runs;
  std::string report_out;
  report->add_option("--runs", report_runs, "eval output json files")->required();
  report->add_option("--out", report_out, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      gen_opts.seed = seed_or_env(gen_opts.seed, gen_seed_opt->count() > 0);
      return cmd_gen_data(gen_opts, gen_out);
    }
    if (train->parsed()) {
      mcfg.seed = seed_or_env(mcfg.seed, train_seed_opt->count() > 0);
      if (train_task == "proposal") {
        pcfg.seed = mcfg.seed;
        return cmd_train_proposal(pcfg, train_data, train_out, train_noise, train_noise_seed);
      }
      return cmd_train_grounding(mcfg, train_data, train_out, train_noise, train_noise_seed);
    }
    if (eval->parsed()) return cmd_eval(eval_args, "eval");
    if (ablate->parsed()) {
      ablate_args.mode = "accuracy";
      return cmd_eval(ablate_args, "ablate");
    }
    if (attn->parsed()) return cmd_attn_stats(attn_params, attn_data, attn_split, attn_out);
    if (propose->parsed())
      return cmd_propose(prop_params, prop_data, prop_split, prop_topk, prop_out, prop_noise,
                         prop_noise_seed);
    if (link->parsed()) return cmd_link(link_dets, link_out, link_iou, link_topk, link_class);
    if (validate->parsed()) return cmd_validate(validate_in);
    if (report->parsed()) return cmd_report(report_runs, report_out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
