#include "satinfer/orbit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace satinfer::orbit {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kRefineTolS = 0.05;

double normalize_deg(double a) {
    double r = std::fmod(a, 360.0);
    return r < 0.0 ? r + 360.0 : r;
}

std::string join(const std::vector<std::string>& v) {
    std::ostringstream os;
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "; " : "") << v[i];
    return os.str();
}

}  // namespace

double Vec3::norm() const { return std::sqrt(dot(*this)); }

std::vector<std::string> OrbitSpec::violations() const {
    std::vector<std::string> out;
    if (!(altitude_km > 0.0) || !std::isfinite(altitude_km))
        out.emplace_back("orbit.altitude_km: must be > 0");
    if (!(inclination_deg >= 0.0 && inclination_deg <= 180.0))
        out.emplace_back("orbit.inclination_deg: must be in [0, 180]");
    if (!std::isfinite(raan_deg)) out.emplace_back("orbit.raan_deg: must be finite");
    if (!std::isfinite(phase_deg)) out.emplace_back("orbit.phase_deg: must be finite");
    if (!std::isfinite(epoch_s)) out.emplace_back("orbit.epoch_s: must be finite");
    return out;
}

void OrbitSpec::validate() const {
    if (auto v = violations(); !v.empty()) throw std::invalid_argument(join(v));
}

std::vector<std::string> GroundStation::violations() const {
    std::vector<std::string> out;
    const std::string p = "stations[" + id + "].";
    if (id.empty()) out.emplace_back("stations[].id: must be non-empty");
    if (!(lat_deg >= -90.0 && lat_deg <= 90.0)) out.push_back(p + "lat_deg: must be in [-90, 90]");
    if (!(lon_deg >= -180.0 && lon_deg <= 180.0)) out.push_back(p + "lon_deg: must be in [-180, 180]");
    if (!(min_elevation_deg >= 0.0 && min_elevation_deg < 90.0))
        out.push_back(p + "min_elevation_deg: must be in [0, 90)");
    return out;
}

void GroundStation::validate() const {
    if (auto v = violations(); !v.empty()) throw std::invalid_argument(join(v));
}

double orbital_period(double altitude_km) {
    if (!(altitude_km > 0.0)) throw std::invalid_argument("orbital_period: altitude_km must be > 0");
    const double a = kEarthRadiusKm + altitude_km;
    return 2.0 * std::numbers::pi * std::sqrt(a * a * a / kEarthMuKm3PerS2);
}

double earth_rotation_angle(double t_s) { return 2.0 * std::numbers::pi * t_s / kSiderealDayS; }

Vec3 propagate_inertial(const OrbitSpec& orbit, double t_s) {
    const double a = kEarthRadiusKm + orbit.altitude_km;
    const double n = std::sqrt(kEarthMuKm3PerS2 / (a * a * a));
    const double u = normalize_deg(orbit.phase_deg) * kDeg + n * (t_s - orbit.epoch_s);
    const double raan = normalize_deg(orbit.raan_deg) * kDeg;
    const double inc = orbit.inclination_deg * kDeg;
    const double cu = std::cos(u), su = std::sin(u);
    const double co = std::cos(raan), so = std::sin(raan);
    const double ci = std::cos(inc), si = std::sin(inc);
    return {a * (co * cu - so * su * ci), a * (so * cu + co * su * ci), a * (su * si)};
}

Vec3 propagate(const OrbitSpec& orbit, double t_s) {
    const Vec3 r = propagate_inertial(orbit, t_s);
    const double th = earth_rotation_angle(t_s);
    const double c = std::cos(th), s = std::sin(th);
    return {c * r.x + s * r.y, -s * r.x + c * r.y, r.z};
}

Vec3 station_position(const GroundStation& station) {
    const double lat = station.lat_deg * kDeg;
    const double lon = station.lon_deg * kDeg;
    return {kEarthRadiusKm * std::cos(lat) * std::cos(lon), kEarthRadiusKm * std::cos(lat) * std::sin(lon),
            kEarthRadiusKm * std::sin(lat)};
}

double elevation_deg(const GroundStation& station, const Vec3& sat_pos) {
    if (!(sat_pos.norm() > kEarthRadiusKm))
        throw std::invalid_argument("elevation_deg: satellite position lies inside the Earth");
    const Vec3 gs = station_position(station);
    const Vec3 up = gs * (1.0 / gs.norm());
    const Vec3 rho = sat_pos - gs;
    const double s = std::clamp(rho.dot(up) / rho.norm(), -1.0, 1.0);
    return std::asin(s) / kDeg;
}

std::vector<ContactWindow> contact_windows(const OrbitSpec& orbit, const GroundStation& station,
                                           double horizon_s, double coarse_step_s,
                                           const std::string& sat_id) {
    if (!(horizon_s > 0.0)) throw std::invalid_argument("contact_windows: horizon_s must be > 0");
    if (!(coarse_step_s > 0.0)) throw std::invalid_argument("contact_windows: coarse_step_s must be > 0");
    orbit.validate();
    station.validate();

    const double mask = station.min_elevation_deg;
    auto elev = [&](double t) { return elevation_deg(station, propagate(orbit, t)); };
    auto visible = [&](double t) { return elev(t) >= mask; };

    // lo and hi straddle a crossing; returns the endpoint on the visible side.
    auto refine = [&](double lo, double hi, bool lo_visible) {
        while (hi - lo > kRefineTolS) {
            const double mid = 0.5 * (lo + hi);
            if (visible(mid) == lo_visible) lo = mid;
            else hi = mid;
        }
        return lo_visible ? lo : hi;
    };

    std::vector<double> ts;
    for (std::size_t k = 0;; ++k) {
        const double t = static_cast<double>(k) * coarse_step_s;
        if (t >= horizon_s) break;
        ts.push_back(t);
    }
    ts.push_back(horizon_s);
    std::vector<double> es(ts.size());
    for (std::size_t k = 0; k < ts.size(); ++k) es[k] = elev(ts[k]);

    std::vector<ContactWindow> out;
    bool open = es[0] >= mask;
    double start = 0.0;
    for (std::size_t k = 1; k < ts.size(); ++k) {
        const bool v = es[k] >= mask;
        if (v && !open) {
            start = refine(ts[k - 1], ts[k], false);
            open = true;
        } else if (!v && open) {
            const double end = refine(ts[k - 1], ts[k], true);
            if (end > start) out.push_back({sat_id, station.id, start, end});
            open = false;
        }
    }
    if (open && horizon_s > start) out.push_back({sat_id, station.id, start, horizon_s});

    // Passes whose peak falls between two sub-mask samples.
    for (std::size_t k = 0; k < ts.size(); ++k) {
        if (es[k] >= mask) continue;
        const bool left_ok = k == 0 || (es[k] >= es[k - 1] && es[k - 1] < mask);
        const bool right_ok = k + 1 == ts.size() || (es[k] > es[k + 1] && es[k + 1] < mask);
        if (!left_ok || !right_ok) continue;
        double lo = k == 0 ? ts[0] : ts[k - 1];
        double hi = k + 1 == ts.size() ? ts[k] : ts[k + 1];
        const double a0 = lo, b0 = hi;
        constexpr double kInvPhi = 0.6180339887498949;
        while (hi - lo > 0.01) {
            const double m1 = hi - kInvPhi * (hi - lo);
            const double m2 = lo + kInvPhi * (hi - lo);
            if (elev(m1) < elev(m2)) lo = m1;
            else hi = m2;
        }
        const double peak = 0.5 * (lo + hi);
        if (elev(peak) < mask) continue;
        const double s = a0 < peak && !visible(a0) ? refine(a0, peak, false) : a0;
        const double e = b0 > peak && !visible(b0) ? refine(peak, b0, true) : b0;
        if (e > s) out.push_back({sat_id, station.id, s, e});
    }

    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
    return out;
}

std::vector<ContactWindow> merge_windows(std::vector<ContactWindow> windows) {
    std::stable_sort(windows.begin(), windows.end(), [](const auto& a, const auto& b) {
        if (a.start_s != b.start_s) return a.start_s < b.start_s;
        return a.station_id < b.station_id;
    });
    std::vector<ContactWindow> out;
    for (auto& w : windows) {
        if (!out.empty() && w.start_s <= out.back().end_s) {
            out.back().end_s = std::max(out.back().end_s, w.end_s);
        } else {
            out.push_back(std::move(w));
        }
    }
    return out;
}

}  // namespace satinfer::orbit
