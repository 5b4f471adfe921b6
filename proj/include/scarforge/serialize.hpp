#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "scarforge/demons.hpp"
#include "scarforge/errors.hpp"
#include "scarforge/lesion_histogram.hpp"
#include "scarforge/rigid.hpp"
#include "scarforge/schedule.hpp"
#include "scarforge/smile.hpp"

namespace scarforge {

inline const char* ring_name(Ring r) {
  switch (r) {
    case Ring::Basal:
      return "basal";
    case Ring::Mid:
      return "mid";
    case Ring::Apical:
      return "apical";
    case Ring::Apex:
      return "apex";
  }
  fail(ErrorCode::InvalidArgument, "ring_name: bad ring value");
}

inline Ring ring_from_name(const std::string& s) {
  if (s == "basal") return Ring::Basal;
  if (s == "mid") return Ring::Mid;
  if (s == "apical") return Ring::Apical;
  if (s == "apex") return Ring::Apex;
  fail(ErrorCode::InvalidArgument, "unknown ring name: " + s);
}

inline void to_json(nlohmann::json& j, const ScarSpec& s) {
  std::vector<std::string> rings;
  for (Ring r : s.allowed_rings) rings.emplace_back(ring_name(r));
  j = nlohmann::json{{"n_regions", s.n_regions},
                     {"allowed_rings", rings},
                     {"volume_min_ml", s.volume_min_ml},
                     {"volume_max_ml", s.volume_max_ml},
                     {"anisotropy", s.anisotropy},
                     {"porosity_min", s.porosity_min},
                     {"porosity_max", s.porosity_max},
                     {"kernels", s.kernels},
                     {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, ScarSpec& s) {
  ScarSpec d;
  s.n_regions = j.value("n_regions", d.n_regions);
  if (j.contains("allowed_rings")) {
    s.allowed_rings.clear();
    for (const auto& r : j.at("allowed_rings")) s.allowed_rings.push_back(ring_from_name(r));
  }
  s.volume_min_ml = j.value("volume_min_ml", d.volume_min_ml);
  s.volume_max_ml = j.value("volume_max_ml", d.volume_max_ml);
  if (j.contains("anisotropy")) j.at("anisotropy").get_to(s.anisotropy);
  s.porosity_min = j.value("porosity_min", d.porosity_min);
  s.porosity_max = j.value("porosity_max", d.porosity_max);
  if (j.contains("kernels")) j.at("kernels").get_to(s.kernels);
  s.seed = j.value("seed", d.seed);
}

inline void to_json(nlohmann::json& j, const RegionRecord& r) {
  j = nlohmann::json{{"segment", r.segment},     {"requested_ml", r.requested_ml},
                     {"achieved_ml", r.achieved_ml}, {"porosity", r.porosity},
                     {"kernel", r.kernel},       {"capped", r.capped}};
}

inline void from_json(const nlohmann::json& j, RegionRecord& r) {
  j.at("segment").get_to(r.segment);
  j.at("requested_ml").get_to(r.requested_ml);
  j.at("achieved_ml").get_to(r.achieved_ml);
  j.at("porosity").get_to(r.porosity);
  j.at("kernel").get_to(r.kernel);
  r.capped = j.value("capped", false);
}

// Sidecar for a generated scar mask: the seed and per-region records.
inline nlohmann::json scar_sidecar(const GeneratedScar& g) {
  nlohmann::json j;
  j["seed"] = g.seed;
  j["regions"] = g.regions;
  return j;
}

inline void to_json(nlohmann::json& j, const RigidTransform& t) {
  j = nlohmann::json{{"angles", t.angles}, {"translation", t.translation}, {"center", t.center}};
}

inline void from_json(const nlohmann::json& j, RigidTransform& t) {
  j.at("angles").get_to(t.angles);
  j.at("translation").get_to(t.translation);
  j.at("center").get_to(t.center);
}

inline void to_json(nlohmann::json& j, const DemonsParams& p) {
  j = nlohmann::json{{"iterations", p.iterations},
                     {"levels", p.levels},
                     {"sigma_update_voxels", p.sigma_update_voxels},
                     {"sigma_total_voxels", p.sigma_total_voxels},
                     {"max_step_voxels", p.max_step_voxels}};
}

inline void from_json(const nlohmann::json& j, DemonsParams& p) {
  DemonsParams d;
  if (j.contains("iterations")) j.at("iterations").get_to(p.iterations);
  p.levels = j.value("levels", d.levels);
  p.sigma_update_voxels = j.value("sigma_update_voxels", d.sigma_update_voxels);
  p.sigma_total_voxels = j.value("sigma_total_voxels", d.sigma_total_voxels);
  p.max_step_voxels = j.value("max_step_voxels", d.max_step_voxels);
}

inline void to_json(nlohmann::json& j, const NoiseSchedule& s) {
  std::vector<double> beta(s.beta.begin() + 1, s.beta.end());
  j = nlohmann::json{{"T", s.T}, {"beta", beta}};
}

inline void from_json(const nlohmann::json& j, NoiseSchedule& s) {
  int T = 0;
  j.at("T").get_to(T);
  std::vector<double> beta;
  j.at("beta").get_to(beta);
  if (T < 1 || beta.size() != static_cast<std::size_t>(T)) {
    fail(ErrorCode::InvalidArgument, "NoiseSchedule: beta length must equal T");
  }
  s.T = T;
  s.beta.assign(1, 0.0);
  s.beta.insert(s.beta.end(), beta.begin(), beta.end());
  s.alpha_bar.assign(static_cast<std::size_t>(T) + 1, 1.0);
  double prod = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double b = s.beta[static_cast<std::size_t>(t)];
    if (!(b > 0.0 && b < 1.0)) fail(ErrorCode::InvalidArgument, "NoiseSchedule: beta out of (0, 1)");
    prod *= 1.0 - b;
    s.alpha_bar[static_cast<std::size_t>(t)] = prod;
  }
}

inline void to_json(nlohmann::json& j, const LesionHistogram& h) {
  j = nlohmann::json{{"edges", h.edges}, {"masses", h.masses}};
}

inline void from_json(const nlohmann::json& j, LesionHistogram& h) {
  j.at("edges").get_to(h.edges);
  j.at("masses").get_to(h.masses);
  if (h.edges.size() != h.masses.size() + 1) {
    fail(ErrorCode::InvalidArgument, "LesionHistogram: edges must be masses+1");
  }
}

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::FileMissing, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::MalformedHeader, "bad JSON in " + path + ": " + e.what());
  }
  return j;
}

inline void save_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot open " + path);
  out << j.dump(2) << '\n';
  if (!out) fail(ErrorCode::IoFailure, "write failed for " + path);
}

}  // namespace scarforge
