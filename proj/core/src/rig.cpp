#include "eaf/rig.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace eaf {

namespace {

// Body FLU (forward-left-up, ego-like) axes to optical RDF
// (right-down-forward): optical x = -body y, optical y = -body z,
// optical z = body x.
Eigen::Matrix3d flu_to_rdf() {
  Eigen::Matrix3d p;
  p << 0, -1, 0,
       0, 0, -1,
       1, 0, 0;
  return p;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * (hi - lo);
}

[[noreturn]] void schema_error(const std::string& camera, const std::string& what) {
  throw std::invalid_argument("rig: camera '" + camera + "': " + what);
}

}  // namespace

Rig parse_rig(const nlohmann::json& doc) {
  if (!doc.contains("cameras") || !doc["cameras"].is_array() ||
      doc["cameras"].empty()) {
    throw std::invalid_argument("rig: missing non-empty 'cameras' array");
  }

  struct Entry {
    std::string name, axes;
    CameraView view;
  };
  std::vector<Entry> entries;

  for (std::size_t idx = 0; idx < doc["cameras"].size(); ++idx) {
    const auto& cj = doc["cameras"][idx];
    const std::string name =
        cj.contains("name") ? cj["name"].get<std::string>()
                            : "#" + std::to_string(idx);
    auto require = [&](const char* field) -> const nlohmann::json& {
      if (!cj.contains(field)) schema_error(name, std::string("missing field '") + field + "'");
      return cj[field];
    };

    Entry e;
    e.name = name;
    const auto& in = require("intrinsics");
    const double fx = in.at("fx").get<double>();
    const double fy = in.at("fy").get<double>();
    const double cx = in.at("cx").get<double>();
    const double cy = in.at("cy").get<double>();
    if (fx <= 0.0 || fy <= 0.0) schema_error(name, "non-positive focal length");

    const auto& sz = require("image_size");
    e.view.image_width = sz.at("w").get<int>();
    e.view.image_height = sz.at("h").get<int>();
    if (e.view.image_width <= 0 || e.view.image_height <= 0) {
      schema_error(name, "non-positive image size");
    }

    const auto& qj = require("rotation");
    if (!qj.is_array() || qj.size() != 4) {
      schema_error(name, "rotation must be a quaternion [w,x,y,z]");
    }
    Eigen::Quaterniond q(qj[0].get<double>(), qj[1].get<double>(),
                         qj[2].get<double>(), qj[3].get<double>());
    if (std::abs(q.norm() - 1.0) > 1e-6) {
      schema_error(name, "quaternion norm deviates from 1");
    }
    q.normalize();

    const auto& tj = require("translation");
    if (!tj.is_array() || tj.size() != 3) {
      schema_error(name, "translation must be a 3-vector");
    }
    const Eigen::Vector3d center(tj[0].get<double>(), tj[1].get<double>(),
                                 tj[2].get<double>());

    e.axes = cj.contains("axes") ? cj["axes"].get<std::string>() : "flu";
    Eigen::Matrix3d cam_in_ego = q.toRotationMatrix();  // body -> ego
    Eigen::Matrix3d rotation;                            // ego -> optical
    if (e.axes == "flu") {
      rotation = flu_to_rdf() * cam_in_ego.transpose();
    } else if (e.axes == "rdf") {
      rotation = cam_in_ego.transpose();
    } else {
      schema_error(name, "unknown axes tag '" + e.axes + "'");
    }

    e.view.intrinsics = Eigen::Matrix3d::Identity();
    e.view.intrinsics(0, 0) = fx;
    e.view.intrinsics(1, 1) = fy;
    e.view.intrinsics(0, 2) = cx;
    e.view.intrinsics(1, 2) = cy;
    e.view.rotation = rotation;
    e.view.translation = -rotation * center;
    e.view.validate();
    entries.push_back(std::move(e));
  }

  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.name < b.name; });

  Rig rig;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].view.view_id = static_cast<int>(i) + 1;
    rig.names.push_back(entries[i].name);
    rig.axes.push_back(entries[i].axes);
    rig.views.push_back(entries[i].view);
  }
  return rig;
}

Rig load_rig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("rig: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("rig: invalid JSON in " + path + ": " + e.what());
  }
  return parse_rig(doc);
}

nlohmann::json rig_to_json(const Rig& rig) {
  nlohmann::json doc;
  doc["cameras"] = nlohmann::json::array();
  for (std::size_t i = 0; i < rig.views.size(); ++i) {
    const CameraView& v = rig.views[i];
    const std::string axes = rig.axes[i];
    Eigen::Matrix3d cam_in_ego;
    if (axes == "flu") {
      cam_in_ego = (flu_to_rdf().transpose() * v.rotation).transpose();
    } else {
      cam_in_ego = v.rotation.transpose();
    }
    Eigen::Quaterniond q(cam_in_ego);
    if (q.w() < 0) q.coeffs() = -q.coeffs();
    const Eigen::Vector3d center = v.center();
    doc["cameras"].push_back(
        {{"name", rig.names[i]},
         {"intrinsics",
          {{"fx", v.fx()}, {"fy", v.fy()}, {"cx", v.cx()}, {"cy", v.cy()}}},
         {"image_size", {{"w", v.image_width}, {"h", v.image_height}}},
         {"rotation", {q.w(), q.x(), q.y(), q.z()}},
         {"translation", {center.x(), center.y(), center.z()}},
         {"axes", axes}});
  }
  return doc;
}

Rig perturb_rig(const Rig& rig, const RigPerturbation& p) {
  std::mt19937_64 rng(p.seed);
  Rig out = rig;
  for (CameraView& v : out.views) {
    const double yaw =
        uniform(rng, -p.yaw_deg, p.yaw_deg) * std::numbers::pi / 180.0;
    Eigen::Vector3d shift(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), 0.0);
    if (shift.norm() > 1e-12) shift = shift.normalized() * uniform(rng, 0.0, p.translation);

    const Eigen::Matrix3d yaw_ego =
        Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    const Eigen::Vector3d center = v.center() + shift;
    // rotate the camera body about ego z, keep the optical convention
    const Eigen::Matrix3d rotation = v.rotation * yaw_ego.transpose();
    v.rotation = rotation;
    v.translation = -rotation * center;
  }
  return out;
}

RigPerturbation parse_perturbation_spec(const std::string& spec) {
  RigPerturbation p;
  std::size_t pos = 0;
  while (pos < spec.size()) {
    std::size_t end = spec.find(',', pos);
    if (end == std::string::npos) end = spec.size();
    const std::string item = spec.substr(pos, end - pos);
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("perturb-rig: expected key=value, got '" + item + "'");
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    if (key == "yaw") {
      p.yaw_deg = std::stod(value);
    } else if (key == "trans") {
      p.translation = std::stod(value);
    } else if (key == "seed") {
      p.seed = std::stoull(value);
    } else {
      throw std::invalid_argument("perturb-rig: unknown key '" + key + "'");
    }
    pos = end + 1;
  }
  return p;
}

BevGrid parse_grid_spec(const std::string& spec) {
  const std::size_t x = spec.find('x');
  const std::size_t at = spec.find('@');
  if (x == std::string::npos || at == std::string::npos || x > at) {
    throw std::invalid_argument("grid: expected CXxCY@CELL, got '" + spec + "'");
  }
  const int cx = std::stoi(spec.substr(0, x));
  const int cy = std::stoi(spec.substr(x + 1, at - x - 1));
  const std::size_t at2 = spec.find('@', at + 1);
  const double cell = std::stod(spec.substr(at + 1, at2 == std::string::npos
                                                         ? std::string::npos
                                                         : at2 - at - 1));
  if (cx <= 0 || cy <= 0 || cell <= 0.0) {
    throw std::invalid_argument("grid: counts and cell size must be positive");
  }
  BevGrid g = BevGrid::centered(cx, cy, cell);
  if (at2 != std::string::npos) {
    const std::string rest = spec.substr(at2 + 1);
    const std::size_t comma = rest.find(',');
    if (comma == std::string::npos) {
      throw std::invalid_argument("grid: origin must be OX,OY");
    }
    g.origin = Eigen::Vector2d(std::stod(rest.substr(0, comma)),
                               std::stod(rest.substr(comma + 1)));
  }
  return g;
}

}  // namespace eaf
