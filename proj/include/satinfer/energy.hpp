#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace satinfer::energy {

enum class SubsystemId {
    Electrical,
    Propulsion,
    Guidance,
    Avionics,
    Comm,
    // payload children
    Camera,
    Occultation,
    Tribology,
    Mems,
    Adsbs,
    Compute,
};

inline constexpr std::size_t kSubsystemCount = 11;

inline constexpr std::array<SubsystemId, 5> kBusSubsystems{SubsystemId::Electrical, SubsystemId::Propulsion,
                                                           SubsystemId::Guidance, SubsystemId::Avionics,
                                                           SubsystemId::Comm};
inline constexpr std::array<SubsystemId, 6> kPayloadSubsystems{SubsystemId::Camera, SubsystemId::Occultation,
                                                               SubsystemId::Tribology, SubsystemId::Mems,
                                                               SubsystemId::Adsbs, SubsystemId::Compute};

const char* to_string(SubsystemId id);
bool is_payload(SubsystemId id);
constexpr std::size_t index(SubsystemId id) { return static_cast<std::size_t>(id); }

// Time-averaged draws per subsystem. payloads_bus_w is the payload reading
// taken at bus level, which need not equal the sum of the payload children;
// zero means "not metered" and the children sum stands in for it.
struct PowerProfile {
    std::array<double, kSubsystemCount> watts{};
    double payloads_bus_w = 0.0;
    double compute_idle_w = 2.0;
    double compute_active_w = 8.78;
    double comm_idle_w = 5.43;
    double comm_active_w = 5.43;

    double watts_of(SubsystemId id) const { return watts[index(id)]; }
    double payload_children_w() const;
    std::vector<std::string> violations() const;

    // Measured Baoyun bus and payload draws.
    static PowerProfile baoyun();
};

class EnergyLedger {
public:
    // Throws std::invalid_argument on negative watts or duration.
    void accrue(SubsystemId id, double watts, double duration_s);
    void accrue_payload_bus(double watts, double duration_s);
    void set_elapsed(double seconds) { elapsed_s_ = seconds; }

    double joules(SubsystemId id) const { return joules_[index(id)]; }
    double payload_children_j() const;
    bool payload_bus_metered() const { return bus_metered_; }
    // Bus-level payload reading when metered, else the children sum.
    double payloads_j() const;
    double payload_discrepancy_j() const { return payloads_j() - payload_children_j(); }
    // Bus subsystems plus the payloads aggregate.
    double total_j() const;
    double total_elapsed_s() const { return elapsed_s_; }

private:
    std::array<double, kSubsystemCount> joules_{};
    double payload_bus_j_ = 0.0;
    bool bus_metered_ = false;
    double elapsed_s_ = 0.0;
};

struct EnergyFractions {
    std::array<double, kSubsystemCount> of_total{};  // children are fractions of total too
    double payloads_over_total = 0.0;
    double compute_over_payloads = 0.0;
    double compute_over_total = 0.0;
};

// Throws std::domain_error when the ledger total is zero.
EnergyFractions fractions(const EnergyLedger& ledger);

// Every subsystem drawing its profile value for duration_s.
EnergyLedger constant_power_ledger(const PowerProfile& power, double duration_s);

// Compute and Comm split into idle and active draw; the metered payload
// reading moves with the compute draw.
EnergyLedger duty_cycled_ledger(const PowerProfile& power, double duration_s, double compute_active_s,
                                double comm_active_s);

}  // namespace satinfer::energy
