#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "eaf/geometry.hpp"

namespace eaf {

/// A named set of cameras. On-disk poses are camera-in-ego with a unit
/// quaternion; parsing converts to the internal ego->camera convention and
/// applies the axes tag. Views are ordered by declared camera name.
struct Rig {
  std::vector<std::string> names;
  std::vector<std::string> axes;  // per camera: "flu" or "rdf"
  std::vector<CameraView> views;
};

/// Schema errors name the offending camera and field.
Rig parse_rig(const nlohmann::json& doc);
Rig load_rig(const std::string& path);
nlohmann::json rig_to_json(const Rig& rig);

struct RigPerturbation {
  double yaw_deg = 0.0;     // per-camera yaw bound, degrees
  double translation = 0.0;  // per-camera offset bound, meters
  std::uint64_t seed = 0;
};

/// Deterministically yaws and translates each camera within the given
/// bounds (uniform draws from seed), about the ego z axis.
Rig perturb_rig(const Rig& rig, const RigPerturbation& p);

/// "yaw=10,trans=0.5,seed=3"; keys optional, unknown keys rejected.
RigPerturbation parse_perturbation_spec(const std::string& spec);

/// "CXxCY@CELL" or "CXxCY@CELL@OX,OY" (origin of cell (0,0) center;
/// default is a grid centered on the ego).
BevGrid parse_grid_spec(const std::string& spec);

}  // namespace eaf
