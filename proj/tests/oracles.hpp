#pragma once

// Reference implementations used only by tests. They are written from the
// definitions, without calling into the library under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

namespace oracle {

// ---- orbit -----------------------------------------------------------------

struct Pass {
    double start_s;
    double end_s;
};

struct OrbitParams {
    double altitude_km = 500.0;
    double inclination_deg = 97.4;
    double raan_deg = 0.0;
    double phase_deg = 0.0;
};

inline double period_s(double altitude_km) {
    const double a = 6371.0 + altitude_km;
    return 2.0 * std::numbers::pi * std::sqrt(a * a * a / 398600.4418);
}

// Elevation of a circular-orbit satellite above a sea-level station on a
// spherical Earth that turns once per sidereal day, frames aligned at t = 0.
inline double elevation(const OrbitParams& o, double lat_deg, double lon_deg, double t) {
    const double d = std::numbers::pi / 180.0;
    const double a = 6371.0 + o.altitude_km;
    const double u = o.phase_deg * d + 2.0 * std::numbers::pi * t / period_s(o.altitude_km);
    const double W = o.raan_deg * d, i = o.inclination_deg * d;
    // Position in the orbital plane, rotated by inclination then node.
    const double xp = a * std::cos(u), yp = a * std::sin(u);
    const double x1 = xp, y1 = yp * std::cos(i), z1 = yp * std::sin(i);
    const double xi = x1 * std::cos(W) - y1 * std::sin(W);
    const double yi = x1 * std::sin(W) + y1 * std::cos(W);
    // Earth-fixed longitude of the satellite shifts west as the Earth turns.
    const double th = 2.0 * std::numbers::pi * t / 86164.0905;
    const double xe = xi * std::cos(-th) - yi * std::sin(-th);
    const double ye = xi * std::sin(-th) + yi * std::cos(-th);
    const double ze = z1;
    const double la = lat_deg * d, lo = lon_deg * d;
    const double ux = std::cos(la) * std::cos(lo), uy = std::cos(la) * std::sin(lo), uz = std::sin(la);
    const double rx = xe - 6371.0 * ux, ry = ye - 6371.0 * uy, rz = ze - 6371.0 * uz;
    const double rn = std::sqrt(rx * rx + ry * ry + rz * rz);
    return std::asin((rx * ux + ry * uy + rz * uz) / rn) / d;
}

// 1 s sampling; each boundary is placed by linear interpolation of the
// elevation between the two samples that straddle the mask.
inline std::vector<Pass> sampled_passes(const OrbitParams& o, double lat, double lon, double mask, double horizon) {
    std::vector<Pass> out;
    double prev = elevation(o, lat, lon, 0.0);
    bool up = prev >= mask;
    double start = 0.0;
    const int n = static_cast<int>(std::floor(horizon));
    for (int k = 1; k <= n; ++k) {
        const double t = k;
        const double e = elevation(o, lat, lon, t);
        const double cross = (t - 1.0) + (mask - prev) / (e - prev);
        if (!up && e >= mask) {
            start = cross;
            up = true;
        } else if (up && e < mask) {
            out.push_back({start, cross});
            up = false;
        }
        prev = e;
    }
    if (up) out.push_back({start, horizon});
    return out;
}

// ---- mAP -------------------------------------------------------------------

struct Frac {
    std::int64_t num = 0;
    std::int64_t den = 1;

    static Frac make(std::int64_t n, std::int64_t d) {
        const std::int64_t g = std::gcd(n, d);
        return g ? Frac{n / g, d / g} : Frac{0, 1};
    }
    friend Frac operator+(Frac a, Frac b) { return make(a.num * b.den + b.num * a.den, a.den * b.den); }
    friend bool operator<(Frac a, Frac b) { return a.num * b.den < b.num * a.den; }
    long double value() const { return static_cast<long double>(num) / static_cast<long double>(den); }
};

struct Rect {
    double x0, y0, x1, y1;
};

inline double overlap(const Rect& a, const Rect& b) {
    const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    if (w <= 0 || h <= 0) return 0.0;
    const double inter = w * h;
    return inter / ((a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter);
}

struct Truth {
    std::string tile;
    int cls;
    Rect r;
};

struct Guess {
    std::string tile;
    int cls;
    Rect r;
    double score;
};

// Greedy matching and all-point AP computed in exact rationals; mAP is the
// mean over classes with ground truth.
inline double mean_ap(const std::vector<Truth>& gt, std::vector<Guess> preds, double thr) {
    std::map<int, int> npos;
    for (const auto& g : gt) ++npos[g.cls];
    std::sort(preds.begin(), preds.end(), [](const Guess& a, const Guess& b) {
        if (a.score != b.score) return a.score > b.score;
        return std::tie(a.tile, a.r.x0, a.r.y0, a.r.x1, a.r.y1) < std::tie(b.tile, b.r.x0, b.r.y0, b.r.x1, b.r.y1);
    });
    Frac total;
    for (const auto& [cls, n] : npos) {
        std::vector<bool> used(gt.size(), false);
        std::vector<bool> hit;
        for (const auto& p : preds) {
            if (p.cls != cls) continue;
            int best = -1;
            double best_v = -1.0;
            for (std::size_t i = 0; i < gt.size(); ++i) {
                if (used[i] || gt[i].cls != cls || gt[i].tile != p.tile) continue;
                const double v = overlap(p.r, gt[i].r);
                if (v > best_v) {
                    best_v = v;
                    best = static_cast<int>(i);
                }
            }
            const bool tp = best >= 0 && best_v >= thr;
            if (tp) used[best] = true;
            hit.push_back(tp);
        }
        // precision at each rank, then the running max from the right
        std::vector<Frac> prec;
        int tp = 0;
        for (std::size_t k = 0; k < hit.size(); ++k) {
            tp += hit[k];
            prec.push_back(Frac::make(tp, static_cast<std::int64_t>(k + 1)));
        }
        Frac area;
        for (std::size_t k = 0; k < hit.size(); ++k) {
            if (!hit[k]) continue;
            Frac env = prec[k];
            for (std::size_t j = k; j < hit.size(); ++j)
                if (env < prec[j]) env = prec[j];
            area = area + Frac::make(env.num, env.den * n);
        }
        total = total + area;
    }
    return static_cast<double>(Frac::make(total.num, total.den * static_cast<std::int64_t>(npos.size())).value());
}

}  // namespace oracle
