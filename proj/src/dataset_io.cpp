#include "stvg/dataset_io.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "stvg/errors.hpp"

namespace stvg::io {

using nlohmann::json;

namespace {

json box_to_json(const std::optional<BoundingBox>& b) {
  if (!b.has_value()) return nullptr;
  return json::array({b->x_min, b->y_min, b->x_max, b->y_max});
}

std::optional<BoundingBox> box_from_json(const json& j, int line) {
  if (j.is_null()) return std::nullopt;
  if (!j.is_array() || j.size() != 4) throw ParseError(line, "box must be [x0,y0,x1,y1] or null");
  BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
  return b;
}

json tubelet_to_json(const Tubelet& t) {
  json j;
  j["object_id"] = t.object_id;
  j["class"] = t.class_label;
  j["frame_start"] = t.frame_start;
  json boxes = json::array();
  for (const auto& b : t.boxes) boxes.push_back(box_to_json(b));
  j["boxes"] = boxes;
  if (!t.confidence.empty()) j["confidence"] = t.confidence;
  if (!t.attributes.empty()) j["attributes"] = t.attributes;
  j["gt"] = t.is_gt;
  return j;
}

Tubelet tubelet_from_json(const json& j, int line) {
  Tubelet t;
  t.object_id = j.at("object_id").get<std::string>();
  t.class_label = j.at("class").get<std::string>();
  t.frame_start = j.at("frame_start").get<int>();
  for (const auto& b : j.at("boxes")) t.boxes.push_back(box_from_json(b, line));
  if (j.contains("confidence") && !j["confidence"].is_null())
    t.confidence = j["confidence"].get<std::vector<double>>();
  if (j.contains("attributes")) t.attributes = j["attributes"].get<std::vector<std::string>>();
  t.is_gt = j.value("gt", false);
  return t;
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);

  out << json{{"type", "meta"}, {"format", "stvg/1"}}.dump() << "\n";
  for (const auto& v : d.videos) {
    json jv{{"type", "video"}, {"id", v.id},       {"width", v.width},
            {"height", v.height}, {"n_frames", v.n_frames}, {"fps", v.fps},
            {"split", v.split}};
    out << jv.dump() << "\n";
    for (const auto& inst : d.instances) {
      if (inst.video_id != v.id) continue;
      json ji;
      ji["type"] = "instance";
      ji["video_id"] = inst.video_id;
      ji["interval"] = json::array({inst.interval.start, inst.interval.end});
      ji["expression"] = {{"raw", inst.expression.raw},
                          {"tokens", inst.expression.tokens},
                          {"pos", inst.expression.pos}};
      json cands = json::array();
      for (const auto& c : inst.candidates) cands.push_back(tubelet_to_json(c));
      ji["candidates"] = cands;
      ji["target_index"] = inst.target_index;
      ji["attributes"] = inst.attributes;
      out << ji.dump() << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);

  Dataset d;
  std::map<std::string, int> per_video_count;
  std::string line;
  int lineno = 0;
  bool saw_meta = false;

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    try {
      const std::string type = j.at("type").get<std::string>();
      if (type == "meta") {
        const std::string fmt = j.at("format").get<std::string>();
        if (fmt != "stvg/1") throw ParseError(lineno, "unsupported format '" + fmt + "'");
        saw_meta = true;
      } else if (type == "video") {
        if (!saw_meta) throw ParseError(lineno, "missing stvg/1 meta line");
        VideoInfo v;
        v.id = j.at("id").get<std::string>();
        v.width = j.at("width").get<int>();
        v.height = j.at("height").get<int>();
        v.n_frames = j.at("n_frames").get<int>();
        v.fps = j.value("fps", 30.0);
        v.split = j.at("split").get<std::string>();
        if (d.video(v.id))
          throw ValidationError("video", "duplicate video record for '" + v.id + "'");
        if (v.split == "train")
          d.split.train.insert(v.id);
        else if (v.split == "val")
          d.split.val.insert(v.id);
        else if (v.split == "test")
          d.split.test.insert(v.id);
        else
          throw ValidationError("split", "unknown split '" + v.split + "'");
        d.videos.push_back(v);
      } else if (type == "instance") {
        if (!saw_meta) throw ParseError(lineno, "missing stvg/1 meta line");
        GroundingInstance inst;
        inst.video_id = j.at("video_id").get<std::string>();
        const auto& iv = j.at("interval");
        if (!iv.is_array() || iv.size() != 2)
          throw ParseError(lineno, "interval must be [start, end)");
        inst.interval = {iv[0].get<int>(), iv[1].get<int>()};
        const auto& je = j.at("expression");
        inst.expression.raw = je.at("raw").get<std::string>();
        inst.expression.tokens = je.at("tokens").get<std::vector<std::string>>();
        inst.expression.pos = je.at("pos").get<std::vector<std::string>>();
        for (const auto& jc : j.at("candidates"))
          inst.candidates.push_back(tubelet_from_json(jc, lineno));
        inst.target_index = j.at("target_index").get<int>();
        if (j.contains("attributes"))
          for (const auto& a : j["attributes"]) inst.attributes.insert(a.get<std::string>());
        const VideoInfo* v = d.video(inst.video_id);
        if (!v)
          throw ValidationError("video_id", "instance references unknown video '" +
                                                inst.video_id + "'");
        inst.id = inst.video_id + "#" + std::to_string(per_video_count[inst.video_id]++);
        validate_instance(inst, v);
        d.instances.push_back(std::move(inst));
      } else {
        throw ParseError(lineno, "unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("bad record: ") + e.what());
    }
  }
  if (!saw_meta) throw ParseError(1, "missing stvg/1 meta line");
  return d;
}

}  // namespace stvg::io
