#include "satinfer/energy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace satinfer::energy {

const char* to_string(SubsystemId id) {
    switch (id) {
        case SubsystemId::Electrical: return "electrical";
        case SubsystemId::Propulsion: return "propulsion";
        case SubsystemId::Guidance: return "guidance";
        case SubsystemId::Avionics: return "avionics";
        case SubsystemId::Comm: return "comm";
        case SubsystemId::Camera: return "camera";
        case SubsystemId::Occultation: return "occultation";
        case SubsystemId::Tribology: return "tribology";
        case SubsystemId::Mems: return "mems";
        case SubsystemId::Adsbs: return "adsbs";
        case SubsystemId::Compute: return "compute";
    }
    return "?";
}

bool is_payload(SubsystemId id) { return index(id) >= index(SubsystemId::Camera); }

double PowerProfile::payload_children_w() const {
    double s = 0.0;
    for (auto id : kPayloadSubsystems) s += watts_of(id);
    return s;
}

std::vector<std::string> PowerProfile::violations() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < kSubsystemCount; ++i)
        if (!(watts[i] >= 0.0))
            out.push_back(std::string("power.") + to_string(static_cast<SubsystemId>(i)) + "_w: must be >= 0");
    if (!(payloads_bus_w >= 0.0)) out.emplace_back("power.payloads_bus_w: must be >= 0");
    if (payloads_bus_w > 0.0 && payloads_bus_w < watts_of(SubsystemId::Compute))
        out.emplace_back("power.payloads_bus_w: must be >= compute_w");
    if (!(compute_idle_w >= 0.0)) out.emplace_back("power.compute_idle_w: must be >= 0");
    if (!(compute_active_w >= 0.0)) out.emplace_back("power.compute_active_w: must be >= 0");
    if (!(comm_idle_w >= 0.0)) out.emplace_back("power.comm_idle_w: must be >= 0");
    if (!(comm_active_w >= 0.0)) out.emplace_back("power.comm_active_w: must be >= 0");
    return out;
}

PowerProfile PowerProfile::baoyun() {
    PowerProfile p;
    auto set = [&](SubsystemId id, double w) { p.watts[index(id)] = w; };
    set(SubsystemId::Electrical, 1.47);
    set(SubsystemId::Propulsion, 7.00);
    set(SubsystemId::Guidance, 5.43);
    set(SubsystemId::Avionics, 4.81);
    set(SubsystemId::Comm, 5.43);
    set(SubsystemId::Camera, 0.09);
    set(SubsystemId::Occultation, 6.26);
    set(SubsystemId::Tribology, 5.68);
    set(SubsystemId::Mems, 0.95);
    set(SubsystemId::Adsbs, 6.12);
    set(SubsystemId::Compute, 8.78);
    p.payloads_bus_w = 26.93;
    return p;
}

void EnergyLedger::accrue(SubsystemId id, double watts, double duration_s) {
    if (!(watts >= 0.0) || !(duration_s >= 0.0))
        throw std::invalid_argument("accrue: watts and duration must be >= 0");
    joules_[index(id)] += watts * duration_s;
}

void EnergyLedger::accrue_payload_bus(double watts, double duration_s) {
    if (!(watts >= 0.0) || !(duration_s >= 0.0))
        throw std::invalid_argument("accrue_payload_bus: watts and duration must be >= 0");
    payload_bus_j_ += watts * duration_s;
    bus_metered_ = true;
}

double EnergyLedger::payload_children_j() const {
    double s = 0.0;
    for (auto id : kPayloadSubsystems) s += joules(id);
    return s;
}

double EnergyLedger::payloads_j() const { return bus_metered_ ? payload_bus_j_ : payload_children_j(); }

double EnergyLedger::total_j() const {
    double s = 0.0;
    for (auto id : kBusSubsystems) s += joules(id);
    return s + payloads_j();
}

EnergyFractions fractions(const EnergyLedger& ledger) {
    const double total = ledger.total_j();
    if (!(total > 0.0)) throw std::domain_error("fractions: ledger total is zero");
    EnergyFractions f;
    for (std::size_t i = 0; i < kSubsystemCount; ++i) f.of_total[i] = ledger.joules(static_cast<SubsystemId>(i)) / total;
    const double payloads = ledger.payloads_j();
    const double compute = ledger.joules(SubsystemId::Compute);
    f.payloads_over_total = payloads / total;
    f.compute_over_payloads = payloads > 0.0 ? compute / payloads : 0.0;
    f.compute_over_total = compute / total;
    return f;
}

EnergyLedger constant_power_ledger(const PowerProfile& power, double duration_s) {
    EnergyLedger l;
    for (std::size_t i = 0; i < kSubsystemCount; ++i) l.accrue(static_cast<SubsystemId>(i), power.watts[i], duration_s);
    if (power.payloads_bus_w > 0.0) l.accrue_payload_bus(power.payloads_bus_w, duration_s);
    l.set_elapsed(duration_s);
    return l;
}

EnergyLedger duty_cycled_ledger(const PowerProfile& power, double duration_s, double compute_active_s,
                                double comm_active_s) {
    compute_active_s = std::clamp(compute_active_s, 0.0, duration_s);
    comm_active_s = std::clamp(comm_active_s, 0.0, duration_s);
    EnergyLedger l;
    for (std::size_t i = 0; i < kSubsystemCount; ++i) {
        const auto id = static_cast<SubsystemId>(i);
        if (id == SubsystemId::Compute) {
            l.accrue(id, power.compute_idle_w, duration_s - compute_active_s);
            l.accrue(id, power.compute_active_w, compute_active_s);
        } else if (id == SubsystemId::Comm) {
            l.accrue(id, power.comm_idle_w, duration_s - comm_active_s);
            l.accrue(id, power.comm_active_w, comm_active_s);
        } else {
            l.accrue(id, power.watts[i], duration_s);
        }
    }
    if (power.payloads_bus_w > 0.0) {
        // Non-compute share of the metered payload bus keeps its average draw.
        l.accrue_payload_bus(power.payloads_bus_w - power.watts_of(SubsystemId::Compute), duration_s);
        l.accrue_payload_bus(power.compute_idle_w, duration_s - compute_active_s);
        l.accrue_payload_bus(power.compute_active_w, compute_active_s);
    }
    l.set_elapsed(duration_s);
    return l;
}

}  // namespace satinfer::energy
