/**
 * @file config.hpp
 * @brief YAML scenario files -> RunConfig. Missing keys keep the reference
 *        scenario defaults; all values are SI. Schema: README.
 */
#pragma once

#include "lislam/harness.hpp"

#include <yaml-cpp/yaml.h>

namespace lislam {

namespace detail {

inline Vec3 read_vec3(const YAML::Node& node, const std::string& key)
{
    if (!node.IsSequence() || node.size() != 3) throw std::invalid_argument("config: '" + key + "' must be a 3-vector");
    return {node[0].as<double>(), node[1].as<double>(), node[2].as<double>()};
}

inline std::vector<Vec3> read_vec3_list(const YAML::Node& node, const std::string& key)
{
    if (!node.IsSequence()) throw std::invalid_argument("config: '" + key + "' must be a list of 3-vectors");
    std::vector<Vec3> out;
    for (const auto& item : node) out.push_back(read_vec3(item, key));
    return out;
}

/// Rejects keys outside `allowed` so that typos do not silently fall back to defaults.
inline void check_keys(const YAML::Node& node, const std::string& section, std::initializer_list<const char*> allowed)
{
    if (!node) return;
    if (!node.IsMap()) throw std::invalid_argument("config: '" + section + "' must be a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw std::invalid_argument("config: unknown key '" + key + "' in " + section);
    }
}

template <typename T>
void read_if(const YAML::Node& node, const char* key, T& out)
{
    if (node && node[key]) out = node[key].as<T>();
}

}  // namespace detail

inline RunConfig parse_config(const YAML::Node& root)
{
    using detail::read_if;
    RunConfig cfg = RunConfig::reference();
    if (!root || root.IsNull()) return cfg;
    detail::check_keys(root, "top level",
                       {"system", "trajectory", "gains", "gnss", "integration", "estimate", "noise", "seed",
                        "allow_infeasible"});
    detail::check_keys(root["system"], "system", {"gravity", "mag_reference", "landmarks"});
    detail::check_keys(root["trajectory"], "trajectory",
                       {"preset", "samples", "initial_attitude_rotvec", "initial_velocity", "initial_position"});
    detail::check_keys(root["gains"], "gains", {"kx", "kp", "kRx", "kRp", "km", "q"});
    detail::check_keys(root["gnss"], "gnss", {"mode", "start", "on_duration", "period", "windows", "T", "tau"});
    detail::check_keys(root["integration"], "integration", {"dt", "horizon", "log_interval"});
    detail::check_keys(root["estimate"], "estimate",
                       {"attitude", "attitude_rotvec", "velocity", "position", "landmarks", "az_source", "p0_seeds"});
    detail::check_keys(root["noise"], "noise", {"landmark_std", "magnetometer_std", "gnss_std"});

    if (const auto sys = root["system"]) {
        read_if(sys, "gravity", cfg.params.gravity);
        if (sys["mag_reference"]) {
            const Vec3 m = detail::read_vec3(sys["mag_reference"], "system.mag_reference");
            if (!(m.norm() > 0.0)) throw std::invalid_argument("config: mag_reference must be non-zero");
            cfg.params.mag_reference = m.normalized();
        }
        if (sys["landmarks"]) cfg.params.landmarks = detail::read_vec3_list(sys["landmarks"], "system.landmarks");
    }

    if (const auto tr = root["trajectory"]) {
        const std::string preset = tr["preset"] ? tr["preset"].as<std::string>() : "circle";
        if (preset == "circle") {
            cfg.trajectory.kind = TrajectorySpec::Kind::circle;
        } else if (preset == "samples") {
            cfg.trajectory.kind = TrajectorySpec::Kind::samples;
            if (!tr["samples"] || !tr["samples"].IsSequence())
                throw std::invalid_argument("config: trajectory.samples is required for preset 'samples'");
            for (const auto& row : tr["samples"]) {
                if (!row.IsSequence() || row.size() != 7)
                    throw std::invalid_argument("config: each trajectory sample is [t, wx, wy, wz, ax, ay, az]");
                std::array<double, 7> s{};
                for (std::size_t i = 0; i < 7; ++i) s[i] = row[i].as<double>();
                cfg.trajectory.samples.push_back(s);
            }
            std::sort(cfg.trajectory.samples.begin(), cfg.trajectory.samples.end());
        } else {
            throw std::invalid_argument("config: unknown trajectory preset '" + preset + "'");
        }
        if (tr["initial_attitude_rotvec"])
            cfg.trajectory.initial_rotvec = detail::read_vec3(tr["initial_attitude_rotvec"], "initial_attitude_rotvec");
        if (tr["initial_velocity"])
            cfg.trajectory.initial_velocity = detail::read_vec3(tr["initial_velocity"], "initial_velocity");
        if (tr["initial_position"])
            cfg.trajectory.initial_position = detail::read_vec3(tr["initial_position"], "initial_position");
    }

    if (const auto g = root["gains"]) {
        read_if(g, "kx", cfg.gains.kx);
        read_if(g, "kp", cfg.gains.kp);
        read_if(g, "kRx", cfg.gains.kRx);
        read_if(g, "kRp", cfg.gains.kRp);
        read_if(g, "km", cfg.gains.km);
        read_if(g, "q", cfg.gains.q);
    }

    if (const auto gn = root["gnss"]) {
        const std::string mode = gn["mode"] ? gn["mode"].as<std::string>() : "periodic";
        if (mode == "periodic") {
            double start = 5.0, on = 5.0, period = 10.0;
            read_if(gn, "start", start);
            read_if(gn, "on_duration", on);
            read_if(gn, "period", period);
            cfg.schedule = GnssSchedule::periodic(start, on, period);
        } else if (mode == "windows") {
            std::vector<TimeWindow> w;
            if (gn["windows"])
                for (const auto& item : gn["windows"]) {
                    if (!item.IsSequence() || item.size() != 2)
                        throw std::invalid_argument("config: gnss.windows entries are [begin, end]");
                    w.push_back({item[0].as<double>(), item[1].as<double>()});
                }
            if (!gn["T"] || !gn["tau"]) throw std::invalid_argument("config: gnss.T and gnss.tau are required for windows mode");
            cfg.schedule = GnssSchedule::windows(std::move(w), gn["T"].as<double>(), gn["tau"].as<double>());
        } else if (mode == "always_on") {
            cfg.schedule = GnssSchedule::always_on();
        } else {
            throw std::invalid_argument("config: unknown gnss mode '" + mode + "'");
        }
        double T = cfg.schedule.T(), tau = cfg.schedule.tau();
        read_if(gn, "T", T);
        read_if(gn, "tau", tau);
        cfg.schedule.set_constants(T, tau);
    }
    cfg.gains.T = cfg.schedule.T();
    cfg.gains.tau = cfg.schedule.tau();

    if (const auto in = root["integration"]) {
        read_if(in, "dt", cfg.dt);
        read_if(in, "horizon", cfg.horizon);
        read_if(in, "log_interval", cfg.log_interval);
    }

    if (const auto est = root["estimate"]) {
        if (est["attitude"]) {
            const auto a = est["attitude"].as<std::string>();
            if (a == "reference_literal") cfg.estimate.attitude = AttitudeInit::reference_literal;
            else if (a == "reference_normalized") cfg.estimate.attitude = AttitudeInit::reference_normalized;
            else if (a == "rotvec") cfg.estimate.attitude = AttitudeInit::rotvec;
            else throw std::invalid_argument("config: unknown estimate.attitude '" + a + "'");
        }
        if (est["attitude_rotvec"]) cfg.estimate.attitude_rotvec = detail::read_vec3(est["attitude_rotvec"], "attitude_rotvec");
        if (est["velocity"]) cfg.estimate.velocity = detail::read_vec3(est["velocity"], "estimate.velocity");
        if (est["position"]) cfg.estimate.position = detail::read_vec3(est["position"], "estimate.position");
        if (est["landmarks"]) cfg.estimate.landmarks = detail::read_vec3_list(est["landmarks"], "estimate.landmarks");
        if (est["az_source"]) {
            const auto s = est["az_source"].as<std::string>();
            if (s == "reference_literal") cfg.estimate.az_source = AzSource::reference_literal;
            else if (s == "factorized") cfg.estimate.az_source = AzSource::factorized;
            else throw std::invalid_argument("config: unknown estimate.az_source '" + s + "'");
        }
        if (const auto seeds = est["p0_seeds"]) {
            if (seeds.IsScalar()) {
                const auto s = seeds.as<std::string>();
                if (s == "reference") cfg.estimate.seeds = SeedPreset::reference;
                else if (s == "midpoint") cfg.estimate.seeds = SeedPreset::midpoint;
                else throw std::invalid_argument("config: unknown estimate.p0_seeds '" + s + "'");
            } else {
                cfg.estimate.seeds = SeedPreset::custom;
                cfg.estimate.custom_seeds = {seeds["s_x"].as<double>(), seeds["s_vx"].as<double>(),
                                             seeds["s_v"].as<double>()};
            }
        }
    }

    if (const auto nz = root["noise"]) {
        read_if(nz, "landmark_std", cfg.noise.landmark_std);
        read_if(nz, "magnetometer_std", cfg.noise.magnetometer_std);
        read_if(nz, "gnss_std", cfg.noise.gnss_std);
    }
    read_if(root, "seed", cfg.seed);
    read_if(root, "allow_infeasible", cfg.allow_infeasible);
    cfg.validate();
    return cfg;
}

/// Throws std::runtime_error when the file is missing or malformed.
inline RunConfig load_config(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw std::runtime_error("config file not found: " + path.string());
    try {
        return parse_config(YAML::LoadFile(path.string()));
    } catch (const YAML::Exception& ex) {
        throw std::runtime_error("config " + path.string() + ": " + ex.what());
    }
}

}  // namespace lislam
