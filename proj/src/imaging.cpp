#include "satinfer/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <json.hpp>

#include "satinfer/rng.hpp"

namespace satinfer::imaging {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

int draw_poisson(Engine& rng, double mean) {
    if (mean <= 0.0) return 0;
    return boost::random::poisson_distribution<int, double>(mean)(rng);
}

double draw_uniform(Engine& rng, double lo, double hi) {
    if (!(hi > lo)) return lo;
    return boost::random::uniform_real_distribution<double>(lo, hi)(rng);
}

int draw_int(Engine& rng, int lo, int hi) {
    if (hi <= lo) return lo;
    return boost::random::uniform_int_distribution<int>(lo, hi)(rng);
}

double cloud_over(const ImageFrame& frame, const PixelRect& rect) {
    if (frame.cloud_cells.empty() || frame.cloud_cell_px <= 0) return frame.cloud_fraction;
    const int c = frame.cloud_cell_px;
    const int cols = frame.cloud_cols();
    double acc = 0.0;
    for (int r = rect.y / c; r <= (rect.y + rect.height - 1) / c; ++r) {
        for (int q = rect.x / c; q <= (rect.x + rect.width - 1) / c; ++q) {
            const int x0 = std::max(rect.x, q * c);
            const int x1 = std::min(rect.x + rect.width, std::min((q + 1) * c, frame.width_px));
            const int y0 = std::max(rect.y, r * c);
            const int y1 = std::min(rect.y + rect.height, std::min((r + 1) * c, frame.height_px));
            if (x1 <= x0 || y1 <= y0) continue;
            acc += static_cast<double>(x1 - x0) * (y1 - y0) * frame.cloud_cells[static_cast<std::size_t>(r * cols + q)];
        }
    }
    return acc / static_cast<double>(rect.area());
}

}  // namespace

std::uint64_t ImageFrame::payload_bytes() const {
    return static_cast<std::uint64_t>(width_px) * static_cast<std::uint64_t>(height_px) *
           static_cast<std::uint64_t>(bytes_per_px);
}

int ImageFrame::cloud_cols() const { return cloud_cell_px > 0 ? ceil_div(width_px, cloud_cell_px) : 0; }
int ImageFrame::cloud_rows() const { return cloud_cell_px > 0 ? ceil_div(height_px, cloud_cell_px) : 0; }

std::vector<std::string> ImageFrame::violations() const {
    std::vector<std::string> out;
    const std::string p = "frame[" + std::to_string(id) + "].";
    if (width_px <= 0 || height_px <= 0) out.push_back(p + "dimensions: must be > 0");
    if (bytes_per_px <= 0) out.push_back(p + "bytes_per_px: must be > 0");
    if (!(cloud_fraction >= 0.0 && cloud_fraction <= 1.0)) out.push_back(p + "cloud_fraction: must be in [0, 1]");
    if (!cloud_cells.empty() &&
        cloud_cells.size() != static_cast<std::size_t>(cloud_cols()) * static_cast<std::size_t>(cloud_rows()))
        out.push_back(p + "cloud_cells: size does not match grid");
    for (double c : cloud_cells)
        if (!(c >= 0.0 && c <= 1.0)) {
            out.push_back(p + "cloud_cells: values must be in [0, 1]");
            break;
        }
    for (const auto& o : objects) {
        if (!o.box.valid() || o.box.x_min < 0 || o.box.y_min < 0 || o.box.x_max > width_px ||
            o.box.y_max > height_px) {
            out.push_back(p + "objects: box outside frame or degenerate");
            break;
        }
    }
    return out;
}

std::string Tile::id() const {
    return "f" + std::to_string(parent_frame_id) + "_r" + std::to_string(row) + "_c" + std::to_string(col);
}

std::uint64_t Tile::key() const {
    return (parent_frame_id << 24) | (static_cast<std::uint64_t>(row) << 12) | static_cast<std::uint64_t>(col);
}

std::vector<std::string> FilterPolicy::violations() const {
    std::vector<std::string> out;
    if (!(cloud_threshold >= 0.0 && cloud_threshold <= 1.0))
        out.emplace_back("filter.cloud_threshold: must be in [0, 1]");
    if (!(min_object_area_px >= 0.0)) out.emplace_back("filter.min_object_area_px: must be >= 0");
    return out;
}

std::vector<std::string> CorpusSpec::violations() const {
    std::vector<std::string> out;
    if (num_frames < 0) out.emplace_back("corpus.num_frames: must be >= 0");
    if (frame_px <= 0) out.emplace_back("corpus.frame_px: must be > 0");
    if (tile_px <= 0) out.emplace_back("corpus.tile_px: must be > 0");
    if (tile_px > frame_px) out.emplace_back("corpus.tile_px: must be <= frame_px");
    if (tile_px >= 4096 * 4096) out.emplace_back("corpus.tile_px: too large");
    if (frame_px > 0 && tile_px > 0 && ceil_div(frame_px, tile_px) > 4096)
        out.emplace_back("corpus.tile_px: more than 4096 tiles per frame side");
    if (bytes_per_px <= 0) out.emplace_back("corpus.bytes_per_px: must be > 0");
    if (!(redundant_fraction >= 0.0 && redundant_fraction <= 1.0))
        out.emplace_back("corpus.redundant_fraction: must be in [0, 1]");
    if (!(objects_per_nonredundant_tile >= 1.0))
        out.emplace_back("corpus.objects_per_nonredundant_tile: must be >= 1");
    if (num_classes <= 0) out.emplace_back("corpus.num_classes: must be > 0");
    if (!(cloudy_share >= 0.0 && cloudy_share <= 1.0)) out.emplace_back("corpus.cloudy_share: must be in [0, 1]");
    if (!(clear_cloud_max >= 0.0 && clear_cloud_max <= 1.0))
        out.emplace_back("corpus.clear_cloud_max: must be in [0, 1]");
    if (!(cloudy_cloud_min >= 0.0 && cloudy_cloud_min <= 1.0))
        out.emplace_back("corpus.cloudy_cloud_min: must be in [0, 1]");
    if (object_min_px <= 0) out.emplace_back("corpus.object_min_px: must be > 0");
    if (object_max_px < object_min_px) out.emplace_back("corpus.object_max_px: must be >= object_min_px");
    return out;
}

CorpusSpec dota_v1_like() {
    CorpusSpec s;
    s.redundant_fraction = 0.9;
    return s;
}

CorpusSpec dota_v2_like() {
    CorpusSpec s;
    s.redundant_fraction = 0.4;
    return s;
}

std::vector<Tile> split_frame(const ImageFrame& frame, int tile_px) {
    if (tile_px <= 0) throw std::invalid_argument("split_frame: tile_px must be > 0");
    const int cols = ceil_div(frame.width_px, tile_px);
    const int rows = ceil_div(frame.height_px, tile_px);
    std::vector<Tile> tiles;
    tiles.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Tile t;
            t.parent_frame_id = frame.id;
            t.row = r;
            t.col = c;
            t.rect = {c * tile_px, r * tile_px, std::min(tile_px, frame.width_px - c * tile_px),
                      std::min(tile_px, frame.height_px - r * tile_px)};
            t.payload_bytes = static_cast<std::uint64_t>(t.rect.area()) * static_cast<std::uint64_t>(frame.bytes_per_px);
            t.cloud_fraction = cloud_over(frame, t.rect);
            const Box bounds = t.rect.as_box();
            for (const auto& o : frame.objects) {
                const Box clipped = intersect(o.box, bounds);
                if (!clipped.valid() || clipped.area() < 1.0) continue;
                t.objects.push_back({{clipped.x_min - bounds.x_min, clipped.y_min - bounds.y_min,
                                      clipped.x_max - bounds.x_min, clipped.y_max - bounds.y_min},
                                     o.class_id});
            }
            tiles.push_back(std::move(t));
        }
    }
    return tiles;
}

bool is_redundant(const Tile& tile, const FilterPolicy& policy) {
    if (tile.cloud_fraction >= policy.cloud_threshold) return true;
    if (!policy.drop_empty) return false;
    return std::none_of(tile.objects.begin(), tile.objects.end(),
                        [&](const GroundTruthObject& o) { return o.box.area() >= policy.min_object_area_px; });
}

FilterResult filter_redundant(std::vector<Tile> tiles, const FilterPolicy& policy) {
    FilterResult r;
    const std::size_t total = tiles.size();
    for (auto& t : tiles) {
        if (is_redundant(t, policy)) r.discarded.push_back(std::move(t));
        else r.kept.push_back(std::move(t));
    }
    r.filter_rate = total == 0 ? 0.0 : static_cast<double>(r.discarded.size()) / static_cast<double>(total);
    return r;
}

std::vector<ImageFrame> generate_corpus(const CorpusSpec& spec, std::uint64_t seed) {
    if (auto v = spec.violations(); !v.empty()) throw std::invalid_argument(v.front());
    const RngStreams streams(seed);
    const int cols = ceil_div(spec.frame_px, spec.tile_px);
    const int rows = cols;
    const std::size_t cells_per_frame = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    const std::size_t total = cells_per_frame * static_cast<std::size_t>(spec.num_frames);
    const auto n_redundant = static_cast<std::size_t>(std::llround(spec.redundant_fraction * static_cast<double>(total)));

    // Partial Fisher-Yates: the first n_redundant slots pick the redundant cells.
    std::vector<std::size_t> order(total);
    for (std::size_t i = 0; i < total; ++i) order[i] = i;
    {
        Engine rng = streams.stream("corpus-redundancy");
        for (std::size_t i = 0; i < n_redundant && i + 1 < total; ++i) {
            const auto j = boost::random::uniform_int_distribution<std::size_t>(i, total - 1)(rng);
            std::swap(order[i], order[j]);
        }
    }
    std::vector<char> redundant(total, 0);
    for (std::size_t i = 0; i < n_redundant; ++i) redundant[order[i]] = 1;

    std::vector<ImageFrame> frames;
    frames.reserve(static_cast<std::size_t>(spec.num_frames));
    for (int f = 0; f < spec.num_frames; ++f) {
        Engine rng = streams.stream("corpus-frame", static_cast<std::uint64_t>(f));
        ImageFrame frame;
        frame.id = static_cast<std::uint64_t>(f);
        frame.width_px = spec.frame_px;
        frame.height_px = spec.frame_px;
        frame.bytes_per_px = spec.bytes_per_px;
        frame.cloud_cell_px = spec.tile_px;
        frame.cloud_cells.resize(cells_per_frame);
        double cloud_area = 0.0;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                const std::size_t local = static_cast<std::size_t>(r * cols + c);
                const bool is_red = redundant[static_cast<std::size_t>(f) * cells_per_frame + local] != 0;
                const int cx = c * spec.tile_px, cy = r * spec.tile_px;
                const int cw = std::min(spec.tile_px, spec.frame_px - cx);
                const int ch = std::min(spec.tile_px, spec.frame_px - cy);
                double cloud = 0.0;
                int count = 0;
                if (is_red) {
                    if (draw_uniform(rng, 0.0, 1.0) < spec.cloudy_share) {
                        cloud = draw_uniform(rng, spec.cloudy_cloud_min, 1.0);
                        count = draw_poisson(rng, spec.objects_per_nonredundant_tile);
                    } else {
                        cloud = draw_uniform(rng, 0.0, spec.clear_cloud_max);
                    }
                } else {
                    cloud = draw_uniform(rng, 0.0, spec.clear_cloud_max);
                    count = 1 + draw_poisson(rng, spec.objects_per_nonredundant_tile - 1.0);
                }
                frame.cloud_cells[local] = cloud;
                cloud_area += cloud * static_cast<double>(cw) * ch;
                for (int k = 0; k < count; ++k) {
                    const int w = draw_int(rng, std::min(spec.object_min_px, cw), std::min(spec.object_max_px, cw));
                    const int h = draw_int(rng, std::min(spec.object_min_px, ch), std::min(spec.object_max_px, ch));
                    const int x = draw_int(rng, cx, cx + cw - w);
                    const int y = draw_int(rng, cy, cy + ch - h);
                    const int cls = draw_int(rng, 0, spec.num_classes - 1);
                    frame.objects.push_back({{static_cast<double>(x), static_cast<double>(y),
                                              static_cast<double>(x + w), static_cast<double>(y + h)},
                                             cls});
                }
            }
        }
        frame.cloud_fraction = cloud_area / (static_cast<double>(spec.frame_px) * spec.frame_px);
        frames.push_back(std::move(frame));
    }
    return frames;
}

void write_corpus(std::ostream& os, const std::vector<ImageFrame>& frames) {
    for (const auto& f : frames) {
        nlohmann::ordered_json j;
        j["id"] = f.id;
        j["width_px"] = f.width_px;
        j["height_px"] = f.height_px;
        j["bytes_per_px"] = f.bytes_per_px;
        j["capture_s"] = f.capture_s;
        j["cloud_fraction"] = f.cloud_fraction;
        j["cloud_cell_px"] = f.cloud_cell_px;
        j["cloud_cells"] = f.cloud_cells;
        auto objs = nlohmann::ordered_json::array();
        for (const auto& o : f.objects)
            objs.push_back({o.box.x_min, o.box.y_min, o.box.x_max, o.box.y_max, o.class_id});
        j["objects"] = std::move(objs);
        os << j.dump() << '\n';
    }
}

std::vector<ImageFrame> read_corpus(std::istream& is) {
    std::vector<ImageFrame> frames;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ImageFrame f;
            f.id = j.at("id").get<std::uint64_t>();
            f.width_px = j.at("width_px").get<int>();
            f.height_px = j.at("height_px").get<int>();
            f.bytes_per_px = j.at("bytes_per_px").get<int>();
            f.capture_s = j.value("capture_s", 0.0);
            f.cloud_fraction = j.at("cloud_fraction").get<double>();
            f.cloud_cell_px = j.value("cloud_cell_px", 0);
            f.cloud_cells = j.value("cloud_cells", std::vector<double>{});
            for (const auto& o : j.at("objects")) {
                if (o.size() != 5) throw std::runtime_error("object record must have 5 fields");
                f.objects.push_back({{o[0].get<double>(), o[1].get<double>(), o[2].get<double>(), o[3].get<double>()},
                                     o[4].get<int>()});
            }
            if (auto v = f.violations(); !v.empty()) throw std::runtime_error(v.front());
            frames.push_back(std::move(f));
        } catch (const std::exception& e) {
            throw std::runtime_error("corpus line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return frames;
}

}  // namespace satinfer::imaging
