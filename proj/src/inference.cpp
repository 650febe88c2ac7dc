#include "satinfer/inference.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <boost/math/special_functions/beta.hpp>

namespace satinfer::inference {

namespace {

std::array<double, 2> box_muller(double u1, double u2) {
    const double r = std::sqrt(-2.0 * std::log1p(-u1));
    const double th = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(th), r * std::sin(th)};
}

int poisson_from_uniform(double mean, double u) {
    if (mean <= 0.0) return 0;
    int k = 0;
    double p = std::exp(-mean);
    double cdf = p;
    while (u > cdf && k < 10000) {
        ++k;
        p *= mean / k;
        cdf += p;
        if (p == 0.0) break;
    }
    return k;
}

// Keeps at least a 1 px extent inside [0, limit].
void settle(double& lo, double& hi, double limit) {
    lo = std::clamp(lo, 0.0, limit);
    hi = std::clamp(hi, 0.0, limit);
    if (hi - lo >= 1.0) return;
    const double mid = std::clamp(0.5 * (lo + hi), 0.5, limit - 0.5);
    lo = std::max(0.0, mid - 0.5);
    hi = std::min(limit, mid + 0.5);
}

bool pred_order(const PredRecord& a, const PredRecord& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.tile_id, a.box) < std::tie(b.tile_id, b.box);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

template <class Fn>
void for_each_record(std::istream& is, std::size_t min_fields, Fn&& fn) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#' || line.rfind("tile_id", 0) == 0) continue;
        const auto f = split_csv(line);
        if (f.size() < min_fields)
            throw std::runtime_error("line " + std::to_string(lineno) + ": expected at least " +
                                     std::to_string(min_fields) + " fields");
        try {
            fn(f);
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("line " + std::to_string(lineno) + ": malformed number");
        }
    }
}

}  // namespace

double BetaParams::quantile(double u) const {
    if (alpha == 0.0) return 0.0;
    if (beta == 0.0) return 1.0;
    u = std::clamp(u, 0.0, 1.0);
    if (u == 0.0) return 0.0;
    if (u == 1.0) return 1.0;
    return boost::math::ibeta_inv(alpha, beta, u);
}

std::vector<std::string> DetectorProfile::violations(const std::string& prefix) const {
    std::vector<std::string> out;
    const std::string p = prefix + ".";
    if (recall.empty()) out.push_back(p + "recall: must list at least one class");
    for (double r : recall)
        if (!(r >= 0.0 && r <= 1.0)) {
            out.push_back(p + "recall: values must be in [0, 1]");
            break;
        }
    if (!(fp_rate >= 0.0)) out.push_back(p + "fp_rate: must be >= 0");
    if (!(loc_noise_px >= 0.0)) out.push_back(p + "loc_noise_px: must be >= 0");
    for (const auto& [key, b] : {std::pair{"conf_tp", conf_tp}, std::pair{"conf_fp", conf_fp}}) {
        if (!(b.alpha >= 0.0 && b.beta >= 0.0) || (b.alpha == 0.0 && b.beta == 0.0))
            out.push_back(p + key + ": alpha and beta must be >= 0 and not both 0");
    }
    if (!(latency_s_per_tile >= 0.0)) out.push_back(p + "latency_s_per_tile: must be >= 0");
    if (!(energy_j_per_tile >= 0.0)) out.push_back(p + "energy_j_per_tile: must be >= 0");
    if (fp_box_min_px <= 0 || fp_box_max_px < fp_box_min_px)
        out.push_back(p + "fp_box_min_px/fp_box_max_px: need 0 < min <= max");
    return out;
}

std::vector<std::string> RoutingPolicy::violations() const {
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0))
        return {"policy.confidence_threshold: must be in [0, 1]"};
    return {};
}

std::vector<Detection> detect(const DetectorProfile& profile, const imaging::Tile& tile, Engine& rng) {
    const double w = tile.rect.width;
    const double h = tile.rect.height;
    std::vector<Detection> out;
    for (const auto& obj : tile.objects) {
        std::array<double, 6> u{};
        for (auto& x : u) x = uniform01(rng);
        const bool known = obj.class_id >= 0 && obj.class_id < profile.num_classes();
        const double recall = known ? profile.recall[static_cast<std::size_t>(obj.class_id)] : 0.0;
        if (!(u[0] < recall)) continue;
        const auto n01 = box_muller(u[2], u[3]);
        const auto n23 = box_muller(u[4], u[5]);
        const double s = profile.loc_noise_px;
        Box b{obj.box.x_min + s * n01[0], obj.box.y_min + s * n01[1], obj.box.x_max + s * n23[0],
              obj.box.y_max + s * n23[1]};
        if (b.x_min > b.x_max) std::swap(b.x_min, b.x_max);
        if (b.y_min > b.y_max) std::swap(b.y_min, b.y_max);
        settle(b.x_min, b.x_max, w);
        settle(b.y_min, b.y_max, h);
        out.push_back({b, obj.class_id, profile.conf_tp.quantile(u[1])});
    }
    const int fps = poisson_from_uniform(profile.fp_rate, uniform01(rng));
    for (int k = 0; k < fps; ++k) {
        std::array<double, 6> u{};
        for (auto& x : u) x = uniform01(rng);
        const double span = profile.fp_box_max_px - profile.fp_box_min_px + 1;
        const double bw = std::min(w, profile.fp_box_min_px + std::floor(u[0] * span));
        const double bh = std::min(h, profile.fp_box_min_px + std::floor(u[1] * span));
        const double x = std::floor(u[2] * (w - bw + 1.0));
        const double y = std::floor(u[3] * (h - bh + 1.0));
        const int cls = std::min(profile.num_classes() - 1, static_cast<int>(u[4] * profile.num_classes()));
        out.push_back({{x, y, std::min(w, x + bw), std::min(h, y + bh)}, cls, profile.conf_fp.quantile(u[5])});
    }
    return out;
}

double tile_confidence(std::span<const Detection> dets, const RoutingPolicy& policy) {
    if (dets.empty()) return 0.0;
    if (policy.aggregation == Aggregation::Max) {
        double m = 0.0;
        for (const auto& d : dets) m = std::max(m, d.score);
        return m;
    }
    double sum = 0.0;
    for (const auto& d : dets) sum += d.score;
    return sum / static_cast<double>(dets.size());
}

RouteDecision route(const imaging::Tile& tile, std::span<const Detection> dets, const RoutingPolicy& policy,
                    const ResultEncoding& encoding) {
    const std::uint64_t msg = encoding.header_bytes + encoding.bytes_per_detection * dets.size();
    if (tile_confidence(dets, policy) >= policy.confidence_threshold && msg <= encoding.max_message_bytes)
        return {RouteDecision::Kind::SendResults, msg};
    return {RouteDecision::Kind::SendImage, tile.payload_bytes};
}

double iou(const Box& a, const Box& b) {
    const double inter = intersect(a, b).area();
    if (inter <= 0.0) return 0.0;
    const double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

MapResult evaluate_map(std::span<const GtRecord> gt, std::span<const PredRecord> preds, double iou_threshold) {
    if (gt.empty()) throw std::invalid_argument("evaluate_map: no ground truth, mAP undefined");

    // class -> tile -> boxes
    std::map<int, std::unordered_map<std::string, std::vector<Box>>> truth;
    std::map<int, std::size_t> npos;
    for (const auto& g : gt) {
        truth[g.class_id][g.tile_id].push_back(g.box);
        ++npos[g.class_id];
    }
    std::map<int, std::vector<PredRecord>> by_class;
    for (const auto& p : preds)
        if (npos.count(p.class_id)) by_class[p.class_id].push_back(p);

    MapResult result;
    long double map_sum = 0.0L;
    for (const auto& [cls, n] : npos) {
        auto& ps = by_class[cls];
        std::sort(ps.begin(), ps.end(), pred_order);
        std::unordered_map<std::string, std::vector<char>> matched;
        for (const auto& [tile, boxes] : truth[cls]) matched[tile].assign(boxes.size(), 0);

        std::vector<char> is_tp(ps.size(), 0);
        for (std::size_t k = 0; k < ps.size(); ++k) {
            const auto it = truth[cls].find(ps[k].tile_id);
            if (it == truth[cls].end()) continue;
            auto& used = matched[ps[k].tile_id];
            double best = -1.0;
            std::size_t best_i = 0;
            for (std::size_t i = 0; i < it->second.size(); ++i) {
                if (used[i]) continue;
                const double v = iou(ps[k].box, it->second[i]);
                if (v > best) {
                    best = v;
                    best_i = i;
                }
            }
            if (best >= iou_threshold) {
                used[best_i] = 1;
                is_tp[k] = 1;
            }
        }

        std::vector<long double> envelope(ps.size());
        std::size_t tp = 0;
        for (std::size_t k = 0; k < ps.size(); ++k) {
            tp += is_tp[k];
            envelope[k] = static_cast<long double>(tp) / static_cast<long double>(k + 1);
        }
        for (std::size_t k = ps.size(); k-- > 1;) envelope[k - 1] = std::max(envelope[k - 1], envelope[k]);
        long double area = 0.0L;
        for (std::size_t k = 0; k < ps.size(); ++k)
            if (is_tp[k]) area += envelope[k];
        const long double ap = area / static_cast<long double>(n);
        result.ap_per_class[cls] = static_cast<double>(ap);
        map_sum += ap;
    }
    result.map = static_cast<double>(map_sum / static_cast<long double>(npos.size()));
    return result;
}

void write_predictions(std::ostream& os, std::span<const PredRecord> preds) {
    os << "tile_id,class_id,x_min,y_min,x_max,y_max,score\n";
    os.precision(17);
    for (const auto& p : preds)
        os << p.tile_id << ',' << p.class_id << ',' << p.box.x_min << ',' << p.box.y_min << ',' << p.box.x_max
           << ',' << p.box.y_max << ',' << p.score << '\n';
}

void write_ground_truth(std::ostream& os, std::span<const GtRecord> gt) {
    os << "tile_id,class_id,x_min,y_min,x_max,y_max\n";
    os.precision(17);
    for (const auto& g : gt)
        os << g.tile_id << ',' << g.class_id << ',' << g.box.x_min << ',' << g.box.y_min << ',' << g.box.x_max
           << ',' << g.box.y_max << '\n';
}

std::vector<PredRecord> read_predictions(std::istream& is) {
    std::vector<PredRecord> out;
    for_each_record(is, 7, [&](const std::vector<std::string>& f) {
        PredRecord p{f[0], std::stoi(f[1]), {std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5])},
                     std::stod(f[6])};
        if (!p.box.valid()) throw std::runtime_error("degenerate box for tile " + p.tile_id);
        if (!(p.score >= 0.0 && p.score <= 1.0)) throw std::runtime_error("score outside [0, 1] for tile " + p.tile_id);
        out.push_back(std::move(p));
    });
    return out;
}

std::vector<GtRecord> read_ground_truth(std::istream& is) {
    std::vector<GtRecord> out;
    for_each_record(is, 6, [&](const std::vector<std::string>& f) {
        GtRecord g{f[0], std::stoi(f[1]), {std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5])}};
        if (!g.box.valid()) throw std::runtime_error("degenerate box for tile " + g.tile_id);
        out.push_back(std::move(g));
    });
    return out;
}

// --- collaboration and calibration ---------------------------------------

namespace {

struct Prepared {
    std::vector<std::string> ids;
    std::vector<GtRecord> gt;
    std::vector<std::vector<Detection>> ground;
};

Prepared prepare(std::span<const imaging::Tile> tiles, const DetectorProfile& ground, std::uint64_t seed) {
    const RngStreams streams(seed);
    Prepared p;
    p.ids.reserve(tiles.size());
    p.ground.reserve(tiles.size());
    for (const auto& t : tiles) {
        p.ids.push_back(t.id());
        for (const auto& o : t.objects) p.gt.push_back({p.ids.back(), o.class_id, o.box});
        Engine rng = streams.stream(kDetectStream, t.key());
        p.ground.push_back(detect(ground, t, rng));
    }
    return p;
}

void append(std::vector<PredRecord>& out, const std::string& id, const std::vector<Detection>& dets) {
    for (const auto& d : dets) out.push_back({id, d.class_id, d.box, d.score});
}

CollaborationOutcome evaluate_prepared(const Prepared& prep, std::span<const imaging::Tile> tiles,
                                       const DetectorProfile& onboard, const RoutingPolicy& policy,
                                       const ResultEncoding& encoding, std::uint64_t seed, double iou_threshold) {
    const RngStreams streams(seed);
    std::vector<PredRecord> solo, collab;
    CollaborationOutcome out;
    out.tiles = tiles.size();
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        Engine rng = streams.stream(kDetectStream, tiles[i].key());
        const auto dets = detect(onboard, tiles[i], rng);
        append(solo, prep.ids[i], dets);
        if (route(tiles[i], dets, policy, encoding).sends_results()) {
            append(collab, prep.ids[i], dets);
        } else {
            ++out.offloaded;
            append(collab, prep.ids[i], prep.ground[i]);
        }
    }
    out.offload_fraction = tiles.empty() ? 0.0 : static_cast<double>(out.offloaded) / static_cast<double>(tiles.size());
    if (prep.gt.empty()) return out;
    out.onboard_map = evaluate_map(prep.gt, solo, iou_threshold).map;
    out.collaborative_map = evaluate_map(prep.gt, collab, iou_threshold).map;
    if (*out.onboard_map > 0.0) out.relative_gain = (*out.collaborative_map - *out.onboard_map) / *out.onboard_map;
    return out;
}

}  // namespace

CollaborationOutcome evaluate_collaboration(std::span<const imaging::Tile> tiles, const DetectorProfile& onboard,
                                            const DetectorProfile& ground, const RoutingPolicy& policy,
                                            const ResultEncoding& encoding, std::uint64_t seed,
                                            double iou_threshold) {
    const Prepared prep = prepare(tiles, ground, seed);
    return evaluate_prepared(prep, tiles, onboard, policy, encoding, seed, iou_threshold);
}

CalibrationResult calibrate_profiles(double target_onboard_map, double target_gain,
                                     std::span<const imaging::Tile> corpus, const CalibrationOptions& options) {
    const std::array<CalibrationBatch, 1> one{CalibrationBatch{{corpus.begin(), corpus.end()}, options.seed}};
    return calibrate_profiles(target_onboard_map, target_gain, one, options);
}

CalibrationResult calibrate_profiles(double target_onboard_map, double target_gain,
                                     std::span<const CalibrationBatch> batches, const CalibrationOptions& options) {
    if (!(target_onboard_map > 0.0 && target_onboard_map < 1.0))
        throw std::invalid_argument("calibrate_profiles: target_onboard_map must be in (0, 1)");
    if (!(target_gain >= 0.0)) throw std::invalid_argument("calibrate_profiles: target_gain must be >= 0");
    if (auto v = options.ground.violations("ground"); !v.empty()) throw std::invalid_argument(v.front());
    if (batches.empty()) throw std::invalid_argument("calibrate_profiles: no calibration batches");

    std::vector<Prepared> preps;
    preps.reserve(batches.size());
    for (const auto& b : batches) {
        preps.push_back(prepare(b.tiles, options.ground, b.seed));
        if (preps.back().gt.empty()) throw std::invalid_argument("calibrate_profiles: a batch has no ground truth");
    }

    struct Candidate {
        CalibrationResult r;
        double cost = std::numeric_limits<double>::infinity();
    };
    int evaluations = 0;
    auto evaluate = [&](const DetectorProfile& onboard) {
        ++evaluations;
        Candidate c;
        c.r.onboard = onboard;
        c.r.ground = options.ground;
        bool gain_defined = true;
        for (std::size_t i = 0; i < batches.size(); ++i) {
            const auto o = evaluate_prepared(preps[i], batches[i].tiles, onboard, options.policy, options.encoding,
                                             batches[i].seed, 0.5);
            c.r.onboard_map += o.onboard_map.value_or(0.0);
            c.r.collaborative_map += o.collaborative_map.value_or(0.0);
            c.r.offload_fraction += o.offload_fraction;
            if (o.relative_gain) c.r.gain += *o.relative_gain;
            else gain_defined = false;
        }
        const double n = static_cast<double>(batches.size());
        c.r.onboard_map /= n;
        c.r.collaborative_map /= n;
        c.r.offload_fraction /= n;
        c.r.gain /= n;
        if (gain_defined) {
            const double dm = (c.r.onboard_map - target_onboard_map) / options.map_tolerance;
            const double dg = (c.r.gain - target_gain) / options.gain_tolerance;
            c.cost = dm * dm + dg * dg;
        }
        return c;
    };
    auto within = [&](const CalibrationResult& r) {
        return std::abs(r.onboard_map - target_onboard_map) <= options.map_tolerance &&
               std::abs(r.gain - target_gain) <= options.gain_tolerance;
    };

    // Zero-gain fixed point: the ground profile may already be the answer.
    {
        auto c = evaluate(options.ground);
        if (within(c.r)) {
            c.r.evaluations = evaluations;
            return c.r;
        }
    }

    constexpr std::array<double, 3> kLo{0.05, 0.0, 0.5};
    constexpr std::array<double, 3> kStep{0.01, 0.05, 0.1};
    constexpr std::array<int, 3> kCount{95, 81, 116};
    auto to_profile = [&](const std::array<int, 3>& idx) {
        DetectorProfile p = options.onboard_start;
        std::fill(p.recall.begin(), p.recall.end(), kLo[0] + kStep[0] * idx[0]);
        p.fp_rate = kLo[1] + kStep[1] * idx[1];
        p.conf_tp.alpha = kLo[2] + kStep[2] * idx[2];
        return p;
    };
    auto snap = [&](double v, int d) {
        return std::clamp(static_cast<int>(std::lround((v - kLo[d]) / kStep[d])), 0, kCount[d] - 1);
    };
    const double r0 = options.onboard_start.recall.empty() ? 0.5 : options.onboard_start.recall.front();
    std::array<int, 3> at{snap(r0, 0), snap(options.onboard_start.fp_rate, 1), snap(options.onboard_start.conf_tp.alpha, 2)};

    std::map<std::array<int, 3>, Candidate> cache;
    auto eval_idx = [&](const std::array<int, 3>& idx) -> const Candidate& {
        auto it = cache.find(idx);
        if (it == cache.end()) it = cache.emplace(idx, evaluate(to_profile(idx))).first;
        return it->second;
    };

    Candidate best = eval_idx(at);
    constexpr double kGoodEnough = 0.01;
    for (int step : {16, 8, 4, 2, 1}) {
        bool improved = true;
        while (improved && best.cost > kGoodEnough && evaluations < options.max_evaluations) {
            improved = false;
            for (int d = 0; d < 3 && evaluations < options.max_evaluations; ++d) {
                for (int sign : {-1, 1}) {
                    auto cand = at;
                    cand[d] = std::clamp(cand[d] + sign * step, 0, kCount[d] - 1);
                    if (cand == at) continue;
                    const Candidate& c = eval_idx(cand);
                    if (c.cost < best.cost) {
                        best = c;
                        at = cand;
                        improved = true;
                        break;
                    }
                }
            }
        }
    }
    best.r.evaluations = evaluations;
    if (!within(best.r)) {
        std::ostringstream os;
        os << "calibration did not converge: onboard mAP " << best.r.onboard_map << " (target " << target_onboard_map
           << "), gain " << best.r.gain << " (target " << target_gain << ") after " << evaluations << " evaluations";
        throw CalibrationError(os.str(), best.r);
    }
    return best.r;
}

}  // namespace satinfer::inference
