#include "satinfer/link.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace satinfer::link {

namespace {

bool served_before(const TransferJob& a, const TransferJob& b) {
    return std::tuple(static_cast<int>(a.kind), a.created_s, a.id) <
           std::tuple(static_cast<int>(b.kind), b.created_s, b.id);
}

bool older(const TransferJob& a, const TransferJob& b) {
    return std::tuple(a.created_s, a.id) < std::tuple(b.created_s, b.id);
}

}  // namespace

const char* to_string(Direction d) { return d == Direction::Up ? "up" : "down"; }

const char* to_string(JobKind k) {
    switch (k) {
        case JobKind::ResultMessage: return "result-message";
        case JobKind::Command: return "command";
        case JobKind::ImageTile: return "image-tile";
    }
    return "?";
}

std::vector<std::string> LinkSpec::violations() const {
    std::vector<std::string> out;
    if (!(uplink_mbps > 0.0)) out.emplace_back("link.uplink_mbps: must be > 0");
    if (!(downlink_mbps > 0.0)) out.emplace_back("link.downlink_mbps: must be > 0");
    if (!(loss_prob >= 0.0 && loss_prob < 1.0)) out.emplace_back("link.loss_prob: must be in [0, 1)");
    if (!(per_pass_overhead_s >= 0.0)) out.emplace_back("link.per_pass_overhead_s: must be >= 0");
    return out;
}

void LinkSpec::validate() const {
    if (auto v = violations(); !v.empty()) throw std::invalid_argument(v.front());
}

double goodput_mbps(const LinkSpec& link, Direction direction) {
    const double rate = direction == Direction::Up ? link.uplink_mbps : link.downlink_mbps;
    return rate * (1.0 - link.loss_prob);
}

double transfer_time_s(std::uint64_t payload_bytes, double goodput) {
    if (!(goodput > 0.0)) throw std::invalid_argument("transfer_time_s: goodput must be > 0");
    return static_cast<double>(payload_bytes) * 8.0 / (goodput * 1e6);
}

TransferJob TransferJob::make(std::uint64_t id, Direction direction, std::uint64_t payload_bytes,
                              double created_s, JobKind kind) {
    if (payload_bytes == 0) throw std::invalid_argument("TransferJob: payload_bytes must be > 0");
    return {id, direction, payload_bytes, created_s, kind};
}

Channel::Channel(double goodput) : bytes_per_s_(goodput * 1e6 / 8.0) {
    if (!(goodput > 0.0)) throw std::invalid_argument("Channel: goodput must be > 0");
}

void Channel::open(const orbit::ContactWindow& window, std::size_t window_index, double overhead_s) {
    open_ = true;
    window_ = window;
    window_index_ = window_index;
    usable_from_ = window.start_s + overhead_s;
    cursor_ = window.start_s;
}

TransferRecord Channel::make_record(const PendingJob& pj, double start, double end, std::uint64_t bytes,
                                    bool completes) const {
    return {pj.job.id, pj.job.kind, window_index_, window_, start, end, bytes, completes};
}

bool Channel::start_next() {
    if (queue_.empty()) return false;
    auto it = std::min_element(queue_.begin(), queue_.end(),
                               [](const PendingJob& a, const PendingJob& b) { return served_before(a.job, b.job); });
    in_flight_ = InFlight{*it, cursor_};
    queue_.erase(it);
    return true;
}

void Channel::advance_to(double t, std::vector<TransferRecord>& out) {
    if (!open_) return;
    t = std::min(t, window_.end_s);
    if (t <= cursor_) return;
    while (true) {
        if (cursor_ < usable_from_) {
            if (t < usable_from_) {
                cursor_ = t;
                return;
            }
            cursor_ = usable_from_;
        }
        if (!in_flight_ && !start_next()) {
            cursor_ = std::max(cursor_, t);
            return;
        }
        const double finish =
            in_flight_->start_s + static_cast<double>(in_flight_->pj.remaining_bytes) / bytes_per_s_;
        if (finish <= t) {
            out.push_back(make_record(in_flight_->pj, in_flight_->start_s, finish, in_flight_->pj.remaining_bytes, true));
            in_flight_.reset();
            cursor_ = finish;
            continue;
        }
        cursor_ = t;
        return;
    }
}

void Channel::begin_next() {
    if (!open_ || in_flight_ || cursor_ < usable_from_ || cursor_ >= window_.end_s) return;
    start_next();
}

void Channel::close(std::vector<TransferRecord>& out) {
    if (!open_) return;
    advance_to(window_.end_s, out);
    if (in_flight_) {
        auto pj = in_flight_->pj;
        const double span = window_.end_s - in_flight_->start_s;
        const auto sent = std::min<std::uint64_t>(
            pj.remaining_bytes, static_cast<std::uint64_t>(std::floor(span * bytes_per_s_)));
        if (sent > 0) out.push_back(make_record(pj, in_flight_->start_s, window_.end_s, sent, false));
        pj.remaining_bytes -= sent;
        in_flight_.reset();
        queue_.push_back(pj);
    }
    open_ = false;
}

void Channel::enqueue(const TransferJob& job) { queue_.push_back({job, job.payload_bytes}); }

std::optional<double> Channel::next_event_time() const {
    if (!open_) return std::nullopt;
    if (in_flight_) {
        const double finish =
            in_flight_->start_s + static_cast<double>(in_flight_->pj.remaining_bytes) / bytes_per_s_;
        if (finish <= window_.end_s) return finish;
        return std::nullopt;
    }
    if (queue_.empty()) return std::nullopt;
    const double start = std::max(cursor_, usable_from_);
    if (start >= window_.end_s) return std::nullopt;
    return start;
}

std::uint64_t Channel::queued_bytes() const {
    std::uint64_t total = in_flight_ ? in_flight_->pj.remaining_bytes : 0;
    for (const auto& pj : queue_) total += pj.remaining_bytes;
    return total;
}

std::uint64_t Channel::queued_bytes(JobKind kind) const {
    std::uint64_t total = in_flight_ && in_flight_->pj.job.kind == kind ? in_flight_->pj.remaining_bytes : 0;
    for (const auto& pj : queue_)
        if (pj.job.kind == kind) total += pj.remaining_bytes;
    return total;
}

std::optional<Channel::Dropped> Channel::drop_oldest(JobKind kind, double now, std::vector<TransferRecord>& out) {
    auto best = queue_.end();
    for (auto it = queue_.begin(); it != queue_.end(); ++it) {
        if (it->job.kind != kind) continue;
        if (best == queue_.end() || older(it->job, best->job)) best = it;
    }
    const bool take_in_flight = in_flight_ && in_flight_->pj.job.kind == kind &&
                                (best == queue_.end() || older(in_flight_->pj.job, best->job));
    if (take_in_flight) {
        auto pj = in_flight_->pj;
        const double span = std::max(0.0, std::min(now, window_.end_s) - in_flight_->start_s);
        const auto sent = std::min<std::uint64_t>(
            pj.remaining_bytes, static_cast<std::uint64_t>(std::floor(span * bytes_per_s_)));
        if (sent > 0) out.push_back(make_record(pj, in_flight_->start_s, in_flight_->start_s + span, sent, false));
        in_flight_.reset();
        cursor_ = std::max(cursor_, std::min(now, window_.end_s));
        return Dropped{pj.job, pj.remaining_bytes - sent};
    }
    if (best == queue_.end()) return std::nullopt;
    Dropped d{best->job, best->remaining_bytes};
    queue_.erase(best);
    return d;
}

std::vector<PendingJob> Channel::pending() const {
    std::vector<PendingJob> out;
    if (in_flight_) out.push_back(in_flight_->pj);
    out.insert(out.end(), queue_.begin(), queue_.end());
    return out;
}

ScheduleResult schedule(std::vector<TransferJob> queue, const std::vector<orbit::ContactWindow>& windows,
                        const LinkSpec& link) {
    link.validate();
    std::stable_sort(queue.begin(), queue.end(), older);

    ScheduleResult result;
    for (Direction dir : {Direction::Down, Direction::Up}) {
        std::vector<TransferJob> jobs;
        for (const auto& j : queue)
            if (j.direction == dir) jobs.push_back(j);
        Channel ch(goodput_mbps(link, dir));
        std::size_t next = 0;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const auto& w = windows[i];
            ch.open(w, i, link.per_pass_overhead_s);
            while (next < jobs.size() && jobs[next].created_s <= w.end_s) {
                const double now = std::max(jobs[next].created_s, w.start_s);
                ch.advance_to(now, result.records);
                // Everything that exists at `now` competes for the idle channel.
                while (next < jobs.size() && std::max(jobs[next].created_s, w.start_s) <= now) ch.enqueue(jobs[next++]);
                ch.begin_next();
            }
            ch.close(result.records);
        }
        for (auto& pj : ch.pending()) result.residual.push_back(pj);
        for (; next < jobs.size(); ++next) result.residual.push_back({jobs[next], jobs[next].payload_bytes});
    }
    std::stable_sort(result.records.begin(), result.records.end(), [](const auto& a, const auto& b) {
        return std::tuple(a.start_s, a.job_id) < std::tuple(b.start_s, b.job_id);
    });
    return result;
}

}  // namespace satinfer::link
