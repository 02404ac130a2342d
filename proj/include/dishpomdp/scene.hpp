#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dishpomdp {

struct SceneObject {
  int id = 0;
  double cx = 0.0, cy = 0.0;   // meters
  long perimeter = 0;          // TOT, contour pixels
  bool true_dirty = false;     // harness-only ground truth

  bool operator==(const SceneObject&) const = default;
};

struct SceneContact {
  int occluder = 0;  // nearer the sensor
  int occluded = 0;
  long tou = 0;  // touching edge pixels

  bool operator==(const SceneContact&) const = default;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  std::vector<SceneContact> contacts;

  bool operator==(const SceneSpec&) const = default;
};

class SceneError : public std::runtime_error {
 public:
  explicit SceneError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Parses and validates a scene file (JSON; unknown fields rejected).
SceneSpec load_scene(const std::string& text);
SceneSpec load_scene_file(const std::string& path);
std::string serialize_scene(const SceneSpec& scene);

void validate_scene(const SceneSpec& scene);

/// Occlusion ratio from a touching-edge total: 0 when tou is 0, 1 when
/// tot - tou < tou, else tou / (tot - tou), clamped to [0,1].
double occlusion_ratio_raw(long tot, long tou);

/// Repeatedly merges occluder-occluded pairs with pairwise occlusion ratio
/// above 0.5 and centroid distance below 8 cm until a fixed point. When `log`
/// is given, one line per merge action is appended to it.
SceneSpec merge_objects(SceneSpec scene, std::vector<std::string>* log = nullptr);

}  // namespace dishpomdp
