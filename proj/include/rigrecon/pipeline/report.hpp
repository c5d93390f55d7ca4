#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "rigrecon/core/error.hpp"
#include "rigrecon/core/json_io.hpp"
#include "rigrecon/pipeline/config.hpp"
#include "rigrecon/pipeline/stages.hpp"

namespace rigrecon::pipeline {

/// Per-stage documents live in <output>/reports/<stage>.json and carry no
/// timings, so they are byte-stable across runs. The run report
/// (<output>/report.json and report.txt) adds the config echo, wall-clock
/// timings and the failure record, if any.
class RunReport {
 public:
  explicit RunReport(const RunConfig& c) : config_(c), path_(c.out() / "report.json") {
    if (std::filesystem::exists(path_)) {
      try {
        doc_ = read_json_file(path_);
      } catch (const Error&) {
        doc_ = Json::object();
      }
    }
    if (!doc_.is_object()) doc_ = Json::object();
    doc_["config"] = config_to_json(c);
    doc_.erase("failure");
  }

  void stage_done(const std::string& stage, const Json& report, double seconds) {
    write_json_file(config_.out() / "reports" / (stage + ".json"), report);
    doc_["stages"][stage] = report;
    doc_["timings_s"][stage] = seconds;
  }

  void stage_failed(const std::string& stage, ErrorCode code, const std::string& message) {
    doc_["failure"] = Json{{"stage", stage}, {"code", static_cast<int>(code)}, {"error", std::string(to_string(code))},
                           {"message", message}};
  }

  const Json& json() const { return doc_; }

  void write() {
    Json warnings = Json::array();
    if (doc_.contains("stages"))
      for (const auto& [stage, r] : doc_["stages"].items()) {
        const Json* w = nullptr;
        if (r.contains("warnings")) w = &r["warnings"];
        if (w)
          for (const auto& s : *w) warnings.push_back(stage + ": " + s.get<std::string>());
      }
    doc_["warnings"] = warnings;
    write_json_file(path_, doc_);
    std::ofstream(config_.out() / "report.txt") << text();
  }

  std::string text() const;

 private:
  RunConfig config_;
  std::filesystem::path path_;
  Json doc_ = Json::object();
};

namespace detail {

inline std::string fmt(const Json& v, int digits = 4) {
  if (v.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v.get<double>());
    return buf;
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline const Json* find(const Json& doc, std::initializer_list<const char*> path) {
  const Json* cur = &doc;
  for (const char* key : path) {
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
  }
  return cur;
}

}  // namespace detail

inline std::string RunReport::text() const {
  std::ostringstream o;
  const Json& c = doc_["config"];
  o << "rigrecon run report\n";
  o << "output " << config_.out().string() << ", seed " << c["seed"] << ", k " << c["k"] << ", window "
    << c["matching"]["window"] << ", threads " << c["threads"] << "\n";
  std::string ablations;
  for (const auto& [k, v] : c["ablation"].items())
    if (v.get<bool>()) ablations += " " + k;
  o << "ablations:" << (ablations.empty() ? " none" : ablations) << "\n";

  if (doc_.contains("timings_s")) {
    o << "\nstage timings (s)\n";
    for (const auto& s : stage_names())
      if (doc_["timings_s"].contains(s)) o << "  " << s << " " << detail::fmt(doc_["timings_s"][s], 3) << "\n";
  }
  using detail::find;
  using detail::fmt;
  if (const Json* cal = find(doc_, {"stages", "calibrate"})) {
    o << "\ncalibration\n";
    for (const char* cam : {"L", "C", "R"}) {
      if (!cal->contains(cam)) continue;
      const Json& r = (*cal)[cam];
      o << "  " << cam << " fx " << fmt(r["model"]["fx"], 6);
      if (r.contains("rms_px")) o << ", rms " << fmt(r["rms_px"]) << " px";
      if (r.contains("truth")) o << ", fx error " << fmt(r["truth"]["fx_rel_error"], 3);
      o << "\n";
    }
  }
  if (const Json* s = find(doc_, {"stages", "sync"})) {
    o << "\nsync\n  offsets L " << (*s)["offset_left"] << ", R " << (*s)["offset_right"] << ", synced length "
      << (*s)["trimmed_length"] << "\n";
    if (s->contains("truth")) o << "  truth L " << (*s)["truth"]["offset_left"] << ", R " << (*s)["truth"]["offset_right"] << "\n";
  }
  if (const Json* m = find(doc_, {"stages", "match-verify"})) {
    o << "\nmatching\n  pairs scheduled " << (*m)["pairs_scheduled"] << ", kept " << (*m)["pairs_kept"] << ", dropped "
      << (*m)["pairs_dropped"] << ", tracks " << (*m)["tracks"] << "\n";
  }
  if (const Json* st = find(doc_, {"stages", "sfm", "stats"})) {
    o << "\nsparse reconstruction\n";
    o << "  registered images     " << (*st)["registered_images"] << "\n";
    o << "  sparse points         " << (*st)["num_points"] << "\n";
    o << "  mean track length     " << fmt((*st)["mean_track_length"]) << "\n";
    o << "  reprojection error px " << fmt((*st)["mean_reprojection_error_px"]) << "\n";
    if (const Json* t = find(doc_, {"stages", "sfm", "truth"}))
      o << "  center rmse / length  " << fmt((*t)["center_rmse_fraction"]) << "\n";
  }
  if (const Json* h = find(doc_, {"stages", "metrics", "heldout"})) {
    o << "\nnovel views\n  held-out PSNR " << fmt((*h)["mean_psnr"]) << " dB, SSIM " << fmt((*h)["mean_ssim"]) << "\n";
    for (const auto& row : (*h)["views"])
      o << "    " << row["view"].get<std::string>() << "  " << fmt(row["psnr"]) << " dB  " << fmt(row["ssim"]) << "\n";
    if (const Json* t = find(doc_, {"stages", "metrics", "train"}))
      o << "  train PSNR " << fmt((*t)["mean_psnr"]) << " dB, SSIM " << fmt((*t)["mean_ssim"]) << "\n";
  }
  if (!doc_["warnings"].empty()) {
    o << "\nwarnings\n";
    for (const auto& w : doc_["warnings"]) o << "  " << w.get<std::string>() << "\n";
  }
  if (doc_.contains("failure")) {
    const Json& f = doc_["failure"];
    o << "\nFAILED in " << f["stage"].get<std::string>() << ": " << f["error"].get<std::string>() << " ("
      << f["code"] << ") " << f["message"].get<std::string>() << "\n";
  }
  return o.str();
}

/// Runs `stages` in order, recording each in the run report. The first
/// failure is recorded and rethrown.
inline Json run_stages(const RunConfig& c, const std::vector<std::string>& stages) {
  RunReport report(c);
  for (const auto& stage : stages) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const Json r = run_stage(stage, c);
      report.stage_done(stage, r, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    } catch (const Error& e) {
      report.stage_failed(stage, e.code(), e.what());
      report.write();
      throw;
    } catch (const std::exception& e) {
      report.stage_failed(stage, ErrorCode::StageFailed, e.what());
      report.write();
      throw Error(ErrorCode::StageFailed, stage + ": " + e.what());
    }
    report.write();
  }
  return report.json();
}

}  // namespace rigrecon::pipeline
