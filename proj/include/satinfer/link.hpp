#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "satinfer/orbit.hpp"

namespace satinfer::link {

enum class Direction { Up, Down };

// Declaration order is the service priority within a queue.
enum class JobKind { ResultMessage, Command, ImageTile };

const char* to_string(Direction d);
const char* to_string(JobKind k);

struct LinkSpec {
    double uplink_mbps = 1.0;
    double downlink_mbps = 40.0;
    double loss_prob = 0.0;
    double per_pass_overhead_s = 10.0;

    std::vector<std::string> violations() const;
    void validate() const;
};

// rate * (1 - loss_prob): lost packets are retransmitted at no protocol cost.
double goodput_mbps(const LinkSpec& link, Direction direction);

// Throws std::invalid_argument for non-positive goodput.
double transfer_time_s(std::uint64_t payload_bytes, double goodput_mbps);

struct TransferJob {
    std::uint64_t id = 0;
    Direction direction = Direction::Down;
    std::uint64_t payload_bytes = 0;
    double created_s = 0.0;
    JobKind kind = JobKind::ImageTile;

    // Throws std::invalid_argument when payload_bytes == 0.
    static TransferJob make(std::uint64_t id, Direction direction, std::uint64_t payload_bytes,
                            double created_s, JobKind kind);
};

struct TransferRecord {
    std::uint64_t job_id = 0;
    JobKind kind = JobKind::ImageTile;
    std::size_t window_index = 0;
    orbit::ContactWindow window;
    double start_s = 0.0;
    double end_s = 0.0;
    std::uint64_t delivered_bytes = 0;
    bool completes_job = false;
};

struct PendingJob {
    TransferJob job;
    std::uint64_t remaining_bytes = 0;
};

// Single-direction transmitter that serves a priority queue inside contact
// windows. Jobs are served whole (no mid-transfer preemption); a job cut off
// by a window end keeps its remaining bytes and re-enters selection at the
// next window.
class Channel {
public:
    explicit Channel(double goodput_mbps);

    double bytes_per_s() const { return bytes_per_s_; }
    bool is_open() const { return open_; }

    void open(const orbit::ContactWindow& window, std::size_t window_index, double overhead_s);
    // Advances to min(t, window end); emits records for jobs that finished.
    void advance_to(double t, std::vector<TransferRecord>& out);
    // Advances to the window end and books partial progress of the job in flight.
    void close(std::vector<TransferRecord>& out);

    void enqueue(const TransferJob& job);
    // Starts the next queued job at the current instant when idle inside the
    // usable part of the window. Call once all arrivals at this instant are in.
    void begin_next();

    // Next instant at which advance_to has work to do, if any.
    std::optional<double> next_event_time() const;

    // Remaining bytes of every queued or in-flight job.
    std::uint64_t queued_bytes() const;
    std::uint64_t queued_bytes(JobKind kind) const;

    struct Dropped {
        TransferJob job;
        std::uint64_t dropped_bytes = 0;
    };
    // Removes the oldest job of the given kind (by created_s, then id). A job
    // in flight is cut at `now`; its partial progress is emitted as a record.
    std::optional<Dropped> drop_oldest(JobKind kind, double now, std::vector<TransferRecord>& out);

    // Everything not yet delivered, in-flight job first.
    std::vector<PendingJob> pending() const;

private:
    struct InFlight {
        PendingJob pj;
        double start_s = 0.0;
    };

    bool start_next();
    TransferRecord make_record(const PendingJob& pj, double start, double end, std::uint64_t bytes,
                               bool completes) const;

    double bytes_per_s_;
    bool open_ = false;
    orbit::ContactWindow window_;
    std::size_t window_index_ = 0;
    double usable_from_ = 0.0;
    double cursor_ = 0.0;
    std::vector<PendingJob> queue_;
    std::optional<InFlight> in_flight_;
};

struct ScheduleResult {
    std::vector<TransferRecord> records;
    std::vector<PendingJob> residual;
};

// Window-gated store-and-forward: up and down jobs are served on independent
// channels. Result messages precede commands precede image tiles; ties go
// FIFO by created_s then id. Records come back sorted by (start_s, job_id).
ScheduleResult schedule(std::vector<TransferJob> queue, const std::vector<orbit::ContactWindow>& windows,
                        const LinkSpec& link);

}  // namespace satinfer::link
