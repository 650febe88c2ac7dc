#pragma once

#include <string>
#include <vector>

namespace satinfer::orbit {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kEarthMuKm3PerS2 = 398600.4418;
inline constexpr double kSiderealDayS = 86164.0905;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const;
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
};

// Circular orbit. Angles in degrees; the orbit's argument of latitude at
// epoch_s equals phase_deg.
struct OrbitSpec {
    double altitude_km = 500.0;
    double inclination_deg = 97.4;
    double raan_deg = 0.0;
    double phase_deg = 0.0;
    double epoch_s = 0.0;

    // Returns human-readable violations, empty when valid.
    std::vector<std::string> violations() const;
    void validate() const;
};

struct GroundStation {
    std::string id = "gs-0";
    double lat_deg = 0.0;
    double lon_deg = 0.0;
    double min_elevation_deg = 10.0;

    std::vector<std::string> violations() const;
    void validate() const;
};

struct ContactWindow {
    std::string sat_id;
    std::string station_id;
    double start_s = 0.0;
    double end_s = 0.0;

    double duration_s() const { return end_s - start_s; }
    bool operator==(const ContactWindow&) const = default;
};

// Keplerian period of a circular orbit at the given altitude. Throws
// std::invalid_argument for non-positive altitude.
double orbital_period(double altitude_km);

// Earth-rotation angle (radians) accumulated since simulation time zero.
double earth_rotation_angle(double t_s);

// Position in the inertial frame, which coincides with the Earth-fixed frame
// at t = 0.
Vec3 propagate_inertial(const OrbitSpec& orbit, double t_s);

// Position in the Earth-fixed frame (km).
Vec3 propagate(const OrbitSpec& orbit, double t_s);

Vec3 station_position(const GroundStation& station);

// Geometric elevation of sat_pos above the station's local horizon.
// Throws std::invalid_argument when sat_pos lies inside the Earth.
double elevation_deg(const GroundStation& station, const Vec3& sat_pos);

// All maximal intervals in [0, horizon_s] with elevation >= the station mask.
// The coarse scan also probes local elevation maxima between samples, so
// short passes that straddle two samples are not missed. Boundaries are
// bisected to 0.05 s and always lie on the visible side.
std::vector<ContactWindow> contact_windows(const OrbitSpec& orbit,
                                           const GroundStation& station,
                                           double horizon_s,
                                           double coarse_step_s = 30.0,
                                           const std::string& sat_id = "sat-0");

// Union of windows from several stations, sorted by start. Overlapping
// windows collapse into one, attributed to the station that opened it.
std::vector<ContactWindow> merge_windows(std::vector<ContactWindow> windows);

}  // namespace satinfer::orbit
