#pragma once

// Scenario configuration. Grammar (one item per line):
//
//   # comment            ignored, also after values
//   [section]            starts a section
//   key = value          assignment inside the current section
//
// Sections and keys (defaults in parentheses):
//   [grid]        half_width (4), nodes (48)
//   [physics]     epsilon (0.5), field = self_consistent | none (self_consistent)
//   [time]        dt (0.005), t_end (1), checkpoint_every (100)
//   [particles]   count (100000), law = maxwellian | power_law | cold (maxwellian),
//                 sigma (1), r (4), v_max (20), velocity_scale (1), m1 (2.5),
//                 spatial = gaussian | uniform_ball (gaussian), center = x,y,z (0,0,0), width (1)
//   [background]  profile = gaussian | uniform_ball | deposit (gaussian),
//                 center = x,y,z (0,0,0), width (1)
//   [run]         seed (1), omega (0.25), snapshots = true | false (false)
//
// Unknown sections or keys are rejected.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "mesh.hpp"
#include "phase_space.hpp"
#include "profile.hpp"
#include "pusher.hpp"

namespace vpme {

struct BackgroundSpec {
    bool from_deposit = false;  // g := normalized CIC deposit of the initial ensemble
    SpatialProfile profile{};
};

struct ScenarioConfig {
    GridSpec grid{};
    double epsilon = 0.5;
    bool self_consistent_field = true;
    TimeSpec time{};
    std::size_t particle_count = 100000;
    InitialDistributionSpec particles{};
    BackgroundSpec background{};
    std::uint64_t seed = 1;
    double omega = 0.25;
    bool snapshots = false;

    void validate() const {
        grid.validate();
        time.validate();
        particles.validate();
        if (!background.from_deposit) background.profile.validate();
        if (!(epsilon > 0.0 && epsilon <= 1.0))
            throw InvalidArgument("epsilon must satisfy 0 < epsilon <= 1, got " + format_double(epsilon));
        if (particle_count < 1) throw InvalidArgument("particle count must be >= 1");
        if (!(omega > 0.0 && omega < 1.0)) throw InvalidArgument("omega must lie in (0, 1)");
        const double outside = particles.spatial.mass_outside_box(grid.half_width);
        if (outside >= 1e-6)
            throw InvalidArgument("box too small: initial spatial profile has mass " + format_double(outside) +
                                  " outside [-L, L]^3 (must be < 1e-6)");
    }
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline Vec3 parse_vec3(const std::string& s) {
    const auto parts = split(s, ',');
    if (parts.size() != 3) throw InvalidArgument("expected x,y,z but got '" + s + "'");
    return {parse_double(parts[0]), parse_double(parts[1]), parse_double(parts[2])};
}

inline std::string vec3_text(const Vec3& v) {
    return format_double(v.x) + "," + format_double(v.y) + "," + format_double(v.z);
}

inline bool parse_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw InvalidArgument("expected a boolean, got '" + s + "'");
}

inline std::uint64_t parse_uint(const std::string& s) {
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw InvalidArgument("expected a non-negative integer, got '" + s + "'");
    return v;
}

inline SpatialProfile::Kind parse_profile_kind(const std::string& s) {
    if (s == "gaussian") return SpatialProfile::Kind::gaussian;
    if (s == "uniform_ball") return SpatialProfile::Kind::uniform_ball;
    throw InvalidArgument("unknown spatial profile '" + s + "'");
}

}  // namespace detail

inline ScenarioConfig parse_config(const std::string& text) {
    ScenarioConfig c;
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    auto fail = [&](const std::string& msg) {
        throw InvalidArgument("config line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail("unterminated section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail("expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        try {
            const std::string k = section + "." + key;
            if (k == "grid.half_width") c.grid.half_width = parse_double(val);
            else if (k == "grid.nodes") c.grid.nodes = static_cast<int>(detail::parse_uint(val));
            else if (k == "physics.epsilon") c.epsilon = parse_double(val);
            else if (k == "physics.field") {
                if (val == "self_consistent") c.self_consistent_field = true;
                else if (val == "none") c.self_consistent_field = false;
                else fail("field must be self_consistent or none");
            } else if (k == "time.dt") c.time.dt = parse_double(val);
            else if (k == "time.t_end") c.time.t_end = parse_double(val);
            else if (k == "time.checkpoint_every") c.time.checkpoint_every = static_cast<int>(detail::parse_uint(val));
            else if (k == "particles.count") c.particle_count = detail::parse_uint(val);
            else if (k == "particles.law") {
                if (val == "maxwellian") c.particles.kind = VelocityLaw::maxwellian;
                else if (val == "power_law") c.particles.kind = VelocityLaw::power_law;
                else if (val == "cold") c.particles.kind = VelocityLaw::cold;
                else fail("unknown velocity law '" + val + "'");
            } else if (k == "particles.sigma") c.particles.sigma = parse_double(val);
            else if (k == "particles.r") c.particles.r = parse_double(val);
            else if (k == "particles.v_max") c.particles.v_max = parse_double(val);
            else if (k == "particles.velocity_scale") c.particles.velocity_scale = parse_double(val);
            else if (k == "particles.m1") c.particles.m1 = parse_double(val);
            else if (k == "particles.spatial") c.particles.spatial.kind = detail::parse_profile_kind(val);
            else if (k == "particles.center") c.particles.spatial.center = detail::parse_vec3(val);
            else if (k == "particles.width") c.particles.spatial.width = parse_double(val);
            else if (k == "background.profile") {
                c.background.from_deposit = val == "deposit";
                if (!c.background.from_deposit) c.background.profile.kind = detail::parse_profile_kind(val);
            } else if (k == "background.center") c.background.profile.center = detail::parse_vec3(val);
            else if (k == "background.width") c.background.profile.width = parse_double(val);
            else if (k == "run.seed") c.seed = detail::parse_uint(val);
            else if (k == "run.omega") c.omega = parse_double(val);
            else if (k == "run.snapshots") c.snapshots = detail::parse_bool(val);
            else fail("unknown key '" + key + "' in section [" + section + "]");
        } catch (const SchemaError& e) {
            fail(e.what());
        }
    }
    return c;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidArgument("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str());
}

/// Canonical text form; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const ScenarioConfig& c) {
    std::ostringstream os;
    os << "[grid]\nhalf_width = " << format_double(c.grid.half_width) << "\nnodes = " << c.grid.nodes << "\n\n";
    os << "[physics]\nepsilon = " << format_double(c.epsilon)
       << "\nfield = " << (c.self_consistent_field ? "self_consistent" : "none") << "\n\n";
    os << "[time]\ndt = " << format_double(c.time.dt) << "\nt_end = " << format_double(c.time.t_end)
       << "\ncheckpoint_every = " << c.time.checkpoint_every << "\n\n";
    const auto& p = c.particles;
    os << "[particles]\ncount = " << c.particle_count << "\nlaw = " << to_string(p.kind)
       << "\nsigma = " << format_double(p.sigma) << "\nr = " << format_double(p.r)
       << "\nv_max = " << format_double(p.v_max) << "\nvelocity_scale = " << format_double(p.velocity_scale)
       << "\nm1 = " << format_double(p.m1) << "\nspatial = " << to_string(p.spatial.kind)
       << "\ncenter = " << detail::vec3_text(p.spatial.center) << "\nwidth = " << format_double(p.spatial.width)
       << "\n\n";
    os << "[background]\nprofile = "
       << (c.background.from_deposit ? "deposit" : to_string(c.background.profile.kind))
       << "\ncenter = " << detail::vec3_text(c.background.profile.center)
       << "\nwidth = " << format_double(c.background.profile.width) << "\n\n";
    os << "[run]\nseed = " << c.seed << "\nomega = " << format_double(c.omega)
       << "\nsnapshots = " << (c.snapshots ? "true" : "false") << "\n";
    return os.str();
}

/// FNV-1a 64 of the canonical text, as 16 hex digits.
inline std::string scenario_hash(const ScenarioConfig& c) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : to_text(c)) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace vpme
