#include "dishpomdp/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dishpomdp {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed,
                    const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* k) { return it.key() == k; }) == allowed.end()) {
      throw SceneError("unknown field '" + it.key() + "' in " + where);
    }
  }
}

}  // namespace

SceneSpec load_scene(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SceneError(std::string("scene parse error: ") + e.what());
  }
  if (!doc.is_object()) throw SceneError("scene file must be a JSON object");
  reject_unknown(doc, {"objects", "contacts"}, "scene");

  SceneSpec scene;
  try {
    for (const auto& jo : doc.value("objects", json::array())) {
      reject_unknown(jo, {"id", "centroid", "perimeter", "dirty"}, "object");
      SceneObject obj;
      obj.id = jo.at("id").get<int>();
      const auto& c = jo.at("centroid");
      if (!c.is_array() || c.size() != 2) throw SceneError("object centroid must be [x, y]");
      obj.cx = c[0].get<double>();
      obj.cy = c[1].get<double>();
      obj.perimeter = jo.at("perimeter").get<long>();
      obj.true_dirty = jo.at("dirty").get<bool>();
      scene.objects.push_back(obj);
    }
    for (const auto& jc : doc.value("contacts", json::array())) {
      reject_unknown(jc, {"occluder", "occluded", "tou"}, "contact");
      SceneContact c;
      c.occluder = jc.at("occluder").get<int>();
      c.occluded = jc.at("occluded").get<int>();
      c.tou = jc.at("tou").get<long>();
      scene.contacts.push_back(c);
    }
  } catch (const json::exception& e) {
    throw SceneError(std::string("scene field error: ") + e.what());
  }
  validate_scene(scene);
  return scene;
}

SceneSpec load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneError("cannot open scene file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_scene(ss.str());
}

std::string serialize_scene(const SceneSpec& scene) {
  json doc;
  doc["objects"] = json::array();
  for (const auto& o : scene.objects) {
    doc["objects"].push_back(
        {{"id", o.id}, {"centroid", {o.cx, o.cy}}, {"perimeter", o.perimeter}, {"dirty", o.true_dirty}});
  }
  doc["contacts"] = json::array();
  for (const auto& c : scene.contacts) {
    doc["contacts"].push_back({{"occluder", c.occluder}, {"occluded", c.occluded}, {"tou", c.tou}});
  }
  return doc.dump(2) + "\n";
}

void validate_scene(const SceneSpec& scene) {
  std::set<int> ids;
  for (const auto& o : scene.objects) {
    if (!ids.insert(o.id).second) throw SceneError("duplicate object id " + std::to_string(o.id));
    if (o.perimeter <= 0)
      throw SceneError("object " + std::to_string(o.id) + ": perimeter must be positive");
  }
  for (const auto& c : scene.contacts) {
    if (!ids.count(c.occluder))
      throw SceneError("contact references unknown occluder id " + std::to_string(c.occluder));
    if (!ids.count(c.occluded))
      throw SceneError("contact references unknown occluded id " + std::to_string(c.occluded));
    if (c.occluder == c.occluded)
      throw SceneError("contact occluder equals occluded (id " + std::to_string(c.occluder) + ")");
    if (c.tou < 0) throw SceneError("contact tou must be non-negative");
  }
}

double occlusion_ratio_raw(long tot, long tou) {
  if (tou <= 0) return 0.0;
  if (tot - tou < tou) return 1.0;
  const double r = static_cast<double>(tou) / static_cast<double>(tot - tou);
  return std::clamp(r, 0.0, 1.0);
}

namespace {

const SceneObject& find_object(const SceneSpec& scene, int id) {
  for (const auto& o : scene.objects)
    if (o.id == id) return o;
  throw SceneError("object id not found: " + std::to_string(id));
}

SceneSpec merge_pair(const SceneSpec& scene, int id_a, int id_b, long tou_ab) {
  const SceneObject& a = find_object(scene, id_a);
  const SceneObject& b = find_object(scene, id_b);
  SceneObject merged;
  merged.id = std::min(id_a, id_b);
  const double wsum = static_cast<double>(a.perimeter + b.perimeter);
  merged.cx = (a.cx * a.perimeter + b.cx * b.perimeter) / wsum;
  merged.cy = (a.cy * a.perimeter + b.cy * b.perimeter) / wsum;
  merged.perimeter = a.perimeter + b.perimeter - 2 * tou_ab;
  merged.true_dirty = a.true_dirty || b.true_dirty;
  if (merged.perimeter <= 0)
    throw SceneError("merged object " + std::to_string(merged.id) + " has non-positive perimeter");

  SceneSpec out;
  for (const auto& o : scene.objects) {
    if (o.id == id_a || o.id == id_b) continue;
    out.objects.push_back(o);
  }
  out.objects.push_back(merged);
  std::sort(out.objects.begin(), out.objects.end(),
            [](const SceneObject& x, const SceneObject& y) { return x.id < y.id; });

  auto remap = [&](int id) { return (id == id_a || id == id_b) ? merged.id : id; };
  std::map<std::pair<int, int>, long> summed;
  for (const auto& c : scene.contacts) {
    const int occ = remap(c.occluder);
    const int hid = remap(c.occluded);
    if (occ == hid) continue;  // internalized contact
    summed[{occ, hid}] += c.tou;
  }
  for (const auto& [key, tou] : summed) out.contacts.push_back({key.first, key.second, tou});
  return out;
}

}  // namespace

SceneSpec merge_objects(SceneSpec scene, std::vector<std::string>* log) {
  validate_scene(scene);
  for (;;) {
    bool merged = false;
    // deterministic scan order: contacts sorted by (occluder, occluded)
    std::vector<SceneContact> contacts = scene.contacts;
    std::sort(contacts.begin(), contacts.end(), [](const SceneContact& a, const SceneContact& b) {
      return std::tie(a.occluder, a.occluded) < std::tie(b.occluder, b.occluded);
    });
    for (const auto& c : contacts) {
      const SceneObject& occluded = find_object(scene, c.occluded);
      const SceneObject& occluder = find_object(scene, c.occluder);
      const double ratio = occlusion_ratio_raw(occluded.perimeter, c.tou);
      const double dist = std::hypot(occluder.cx - occluded.cx, occluder.cy - occluded.cy);
      if (ratio > 0.5 && dist < 0.08) {
        if (log) {
          char buf[160];
          std::snprintf(buf, sizeof(buf),
                        "merge: objects %d and %d -> %d (pair ratio %.3f, distance %.3f m)",
                        c.occluder, c.occluded, std::min(c.occluder, c.occluded), ratio, dist);
          log->push_back(buf);
        }
        scene = merge_pair(scene, c.occluder, c.occluded, c.tou);
        merged = true;
        break;
      }
    }
    if (!merged) return scene;
  }
}

}  // namespace dishpomdp
