#pragma once

// Scenario JSON format, version 1. See docs/file_formats.md.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "past/errors.hpp"
#include "past/scene.hpp"

namespace past {

inline constexpr int kScenarioFormatVersion = 1;

namespace detail {

inline nlohmann::json pose_to_json(const Pose2p5D& p) {
    return nlohmann::json::array({p.x, p.y, p.z, p.yaw, p.speed});
}

inline const nlohmann::json& require(const nlohmann::json& j, const char* key,
                                     const std::string& path, int frame = -1) {
    if (!j.is_object()) throw ParseError(path, frame, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) throw ParseError(path + "/" + key, frame, "missing field");
    return *it;
}

inline double number(const nlohmann::json& j, const std::string& path, int frame = -1) {
    if (!j.is_number()) throw ParseError(path, frame, "expected a number");
    return j.get<double>();
}

inline double number_at(const nlohmann::json& j, const char* key, const std::string& path,
                        int frame = -1) {
    return number(require(j, key, path, frame), path + "/" + key, frame);
}

inline const nlohmann::json& array_at(const nlohmann::json& j, const char* key,
                                      const std::string& path, int frame = -1) {
    const auto& a = require(j, key, path, frame);
    if (!a.is_array()) throw ParseError(path + "/" + key, frame, "expected an array");
    return a;
}

inline Pose2p5D pose_from_json(const nlohmann::json& j, const std::string& path, int frame) {
    if (!j.is_array() || j.size() != 5)
        throw ParseError(path, frame, "expected [x, y, z, yaw, speed]");
    return {number(j[0], path + "/0", frame), number(j[1], path + "/1", frame),
            number(j[2], path + "/2", frame), number(j[3], path + "/3", frame),
            number(j[4], path + "/4", frame)};
}

}  // namespace detail

inline nlohmann::json sensor_to_json(const SensorModel& s) {
    return {{"beam_count", s.beam_count},
            {"max_range", s.max_range},
            {"azimuth_resolution", s.azimuth_resolution},
            {"mount_height", s.mount_height},
            {"min_ground_range", s.min_ground_range},
            {"rear_return_ratio", s.rear_return_ratio},
            {"side_share", s.side_share}};
}

inline SensorModel sensor_from_json(const nlohmann::json& j, const std::string& path) {
    using detail::number_at;
    SensorModel s;
    const auto& beams = detail::require(j, "beam_count", path);
    if (!beams.is_number_integer()) throw ParseError(path + "/beam_count", -1, "expected an integer");
    s.beam_count = beams.get<int>();
    s.max_range = number_at(j, "max_range", path);
    s.azimuth_resolution = number_at(j, "azimuth_resolution", path);
    s.mount_height = number_at(j, "mount_height", path);
    s.min_ground_range = number_at(j, "min_ground_range", path);
    s.rear_return_ratio = number_at(j, "rear_return_ratio", path);
    s.side_share = number_at(j, "side_share", path);
    return s;
}

inline nlohmann::json scenario_to_json(const Scenario& s) {
    nlohmann::json j;
    j["format"] = "past-scenario";
    j["version"] = kScenarioFormatVersion;
    j["scenario_id"] = s.scenario_id;
    j["frame_period"] = s.frame_period;
    j["sensor"] = sensor_to_json(s.sensor);
    auto& ego = j["ego_poses"] = nlohmann::json::array();
    for (const auto& p : s.ego_poses) ego.push_back(detail::pose_to_json(p));
    auto& vehicles = j["vehicles"] = nlohmann::json::array();
    for (const auto& v : s.vehicles) {
        nlohmann::json jv;
        jv["vehicle_id"] = v.vehicle_id;
        jv["extent"] = {v.extent.length, v.extent.width, v.extent.height};
        jv["parked"] = v.parked;
        auto& poses = jv["poses"] = nlohmann::json::array();
        for (const auto& p : v.poses) poses.push_back(detail::pose_to_json(p));
        vehicles.push_back(std::move(jv));
    }
    auto& frames = j["frames"] = nlohmann::json::array();
    for (const auto& f : s.frames) {
        nlohmann::json jf;
        jf["frame_index"] = f.frame_index;
        jf["origin"] = {f.origin.x, f.origin.y, f.origin.z};
        std::vector<double> flat;
        flat.reserve(3 * f.size());
        for (const auto& p : f.points) {
            flat.push_back(p.x);
            flat.push_back(p.y);
            flat.push_back(p.z);
        }
        jf["points"] = std::move(flat);
        std::vector<int> flags;
        flags.reserve(f.size());
        for (auto fl : f.flags) flags.push_back(static_cast<int>(fl));
        jf["flags"] = std::move(flags);
        frames.push_back(std::move(jf));
    }
    return j;
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
    using detail::array_at;
    using detail::number_at;
    using detail::require;
    if (!j.is_object()) throw ParseError("", -1, "document is not a JSON object");
    const auto& version = require(j, "version", "");
    if (!version.is_number_integer() || version.get<int>() != kScenarioFormatVersion)
        throw ParseError("/version", -1, "unsupported scenario format version");

    Scenario s;
    const auto& id = require(j, "scenario_id", "");
    if (!id.is_string()) throw ParseError("/scenario_id", -1, "expected a string");
    s.scenario_id = id.get<std::string>();
    s.frame_period = number_at(j, "frame_period", "");
    s.sensor = sensor_from_json(require(j, "sensor", ""), "/sensor");

    const auto& ego = array_at(j, "ego_poses", "");
    for (std::size_t k = 0; k < ego.size(); ++k)
        s.ego_poses.push_back(detail::pose_from_json(ego[k], "/ego_poses/" + std::to_string(k),
                                                     static_cast<int>(k)));

    const auto& vehicles = array_at(j, "vehicles", "");
    for (std::size_t v = 0; v < vehicles.size(); ++v) {
        const std::string path = "/vehicles/" + std::to_string(v);
        const auto& jv = vehicles[v];
        VehicleTruth truth;
        const auto& vid = require(jv, "vehicle_id", path);
        if (!vid.is_string()) throw ParseError(path + "/vehicle_id", -1, "expected a string");
        truth.vehicle_id = vid.get<std::string>();
        const auto& ext = array_at(jv, "extent", path);
        if (ext.size() != 3) throw ParseError(path + "/extent", -1, "expected [l, w, h]");
        truth.extent = {detail::number(ext[0], path + "/extent/0"),
                        detail::number(ext[1], path + "/extent/1"),
                        detail::number(ext[2], path + "/extent/2")};
        const auto& parked = require(jv, "parked", path);
        if (!parked.is_boolean()) throw ParseError(path + "/parked", -1, "expected a boolean");
        truth.parked = parked.get<bool>();
        const auto& poses = array_at(jv, "poses", path);
        for (std::size_t k = 0; k < poses.size(); ++k)
            truth.poses.push_back(detail::pose_from_json(
                poses[k], path + "/poses/" + std::to_string(k), static_cast<int>(k)));
        s.vehicles.push_back(std::move(truth));
    }

    const auto& frames = array_at(j, "frames", "");
    for (std::size_t k = 0; k < frames.size(); ++k) {
        const int fk = static_cast<int>(k);
        const std::string path = "/frames/" + std::to_string(k);
        const auto& jf = frames[k];
        PointCloud f;
        const auto& idx = require(jf, "frame_index", path, fk);
        if (!idx.is_number_integer()) throw ParseError(path + "/frame_index", fk, "expected an integer");
        f.frame_index = idx.get<int>();
        const auto& origin = array_at(jf, "origin", path, fk);
        if (origin.size() != 3) throw ParseError(path + "/origin", fk, "expected [x, y, z]");
        f.origin = {detail::number(origin[0], path + "/origin/0", fk),
                    detail::number(origin[1], path + "/origin/1", fk),
                    detail::number(origin[2], path + "/origin/2", fk)};
        const auto& pts = array_at(jf, "points", path, fk);
        const auto& flags = array_at(jf, "flags", path, fk);
        if (pts.size() % 3 != 0)
            throw ParseError(path + "/points", fk, "flat point array length is not a multiple of 3");
        if (pts.size() / 3 != flags.size())
            throw ParseError(path + "/flags", fk, "points and flags length mismatch");
        f.points.reserve(flags.size());
        for (std::size_t i = 0; i < pts.size(); i += 3) {
            if (!pts[i].is_number() || !pts[i + 1].is_number() || !pts[i + 2].is_number())
                throw ParseError(path + "/points/" + std::to_string(i), fk, "expected a number");
            f.points.push_back({pts[i].get<double>(), pts[i + 1].get<double>(), pts[i + 2].get<double>()});
        }
        for (std::size_t i = 0; i < flags.size(); ++i) {
            if (!flags[i].is_number_integer() || flags[i].get<int>() < 0 || flags[i].get<int>() > 3)
                throw ParseError(path + "/flags/" + std::to_string(i), fk, "flag must be 0..3");
            f.flags.push_back(static_cast<PointFlag>(flags[i].get<int>()));
        }
        s.frames.push_back(std::move(f));
    }

    if (auto bad = check_invariants(s)) throw ParseError("", -1, "invariant violated: " + *bad);
    return s;
}

inline Scenario parse_scenario(const std::string& text) {
    if (text.find_first_not_of(" \t\r\n") == std::string::npos)
        throw ParseError("", -1, "empty document");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("", -1, std::string("malformed JSON: ") + e.what());
    }
    return scenario_from_json(j);
}

inline Scenario read_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("", -1, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

inline void write_scenario(const Scenario& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << scenario_to_json(s).dump();
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace past
