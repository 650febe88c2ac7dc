#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "satinfer/box.hpp"

namespace satinfer::imaging {

struct GroundTruthObject {
    Box box;
    int class_id = 0;

    bool operator==(const GroundTruthObject&) const = default;
};

// A captured frame. Cloud cover is stored as a grid of square cells of side
// cloud_cell_px (edge cells truncated), row-major; cloud_fraction is the
// area-weighted mean over the grid.
struct ImageFrame {
    std::uint64_t id = 0;
    int width_px = 0;
    int height_px = 0;
    int bytes_per_px = 3;
    double capture_s = 0.0;
    double cloud_fraction = 0.0;
    int cloud_cell_px = 0;
    std::vector<double> cloud_cells;
    std::vector<GroundTruthObject> objects;

    std::uint64_t payload_bytes() const;
    int cloud_cols() const;
    int cloud_rows() const;
    std::vector<std::string> violations() const;

    bool operator==(const ImageFrame&) const = default;
};

struct Tile {
    std::uint64_t parent_frame_id = 0;
    int row = 0;
    int col = 0;
    PixelRect rect;
    std::uint64_t payload_bytes = 0;
    double cloud_fraction = 0.0;
    std::vector<GroundTruthObject> objects;  // tile-local coordinates

    // "f<frame>_r<row>_c<col>"; unique within a corpus.
    std::string id() const;
    // Stable integer key used to derive per-tile random substreams.
    std::uint64_t key() const;
};

struct FilterPolicy {
    double cloud_threshold = 0.5;
    bool drop_empty = true;
    double min_object_area_px = 64.0;

    std::vector<std::string> violations() const;
};

struct CorpusSpec {
    int num_frames = 96;
    int frame_px = 4096;
    int tile_px = 1024;
    int bytes_per_px = 3;
    double redundant_fraction = 0.9;
    double objects_per_nonredundant_tile = 2.0;
    int num_classes = 3;
    // Cloud model: redundant tiles are cloudy with probability cloudy_share
    // (cloud ~ U[cloudy_cloud_min, 1]) and otherwise clear and empty; clear
    // tiles draw cloud ~ U[0, clear_cloud_max].
    double cloudy_share = 0.8;
    double clear_cloud_max = 0.3;
    double cloudy_cloud_min = 0.7;
    int object_min_px = 24;
    int object_max_px = 96;

    std::vector<std::string> violations() const;
};

// Presets standing in for the two dataset versions; the redundancy fractions
// are calibrated inputs.
CorpusSpec dota_v1_like();
CorpusSpec dota_v2_like();

// Tiles in row-major order. Edge tiles are truncated, boxes are clipped into
// every tile they touch, and fragments below 1 px^2 are dropped.
std::vector<Tile> split_frame(const ImageFrame& frame, int tile_px);

struct FilterResult {
    std::vector<Tile> kept;
    std::vector<Tile> discarded;
    double filter_rate = 0.0;
};

bool is_redundant(const Tile& tile, const FilterPolicy& policy);
FilterResult filter_redundant(std::vector<Tile> tiles, const FilterPolicy& policy);

// Deterministic in (spec, seed). Exactly round(redundant_fraction * cells)
// corpus cells (tile_px grid) are redundant, chosen uniformly at random.
// Non-redundant cells hold 1 + Poisson(mean - 1) objects.
std::vector<ImageFrame> generate_corpus(const CorpusSpec& spec, std::uint64_t seed);

// Line-delimited JSON, one frame per line.
void write_corpus(std::ostream& os, const std::vector<ImageFrame>& frames);
std::vector<ImageFrame> read_corpus(std::istream& is);

}  // namespace satinfer::imaging
