#include <gtest/gtest.h>

#include <numeric>

#include "satinfer/energy.hpp"

using namespace satinfer::energy;

TEST(Ledger, ComputeAccrual) {
    EnergyLedger l;
    l.accrue(SubsystemId::Compute, 8.78, 1000.0);
    EXPECT_DOUBLE_EQ(l.joules(SubsystemId::Compute), 8780.0);
}

TEST(Ledger, ZeroPowerLeavesLedgerUnchanged) {
    EnergyLedger l;
    l.accrue(SubsystemId::Comm, 0.0, 12345.0);
    EXPECT_DOUBLE_EQ(l.total_j(), 0.0);
}

TEST(Ledger, Additivity) {
    EnergyLedger a, b;
    a.accrue(SubsystemId::Camera, 5.0, 1.0);
    a.accrue(SubsystemId::Camera, 5.0, 1.0);
    b.accrue(SubsystemId::Camera, 10.0, 1.0);
    EXPECT_DOUBLE_EQ(a.joules(SubsystemId::Camera), b.joules(SubsystemId::Camera));
}

TEST(Ledger, RejectsNegatives) {
    EnergyLedger l;
    EXPECT_THROW(l.accrue(SubsystemId::Camera, -1.0, 1.0), std::invalid_argument);
    EXPECT_THROW(l.accrue(SubsystemId::Camera, 1.0, -1.0), std::invalid_argument);
}

TEST(Ledger, EmptyLedgerFractionsUndefined) {
    EXPECT_THROW(fractions(EnergyLedger{}), std::domain_error);
}

TEST(Ledger, UnmeteredPayloadsEqualChildrenSumExactly) {
    PowerProfile p = PowerProfile::baoyun();
    p.payloads_bus_w = 0.0;
    const auto l = constant_power_ledger(p, 3600.0);
    double children = 0.0;
    for (auto id : kPayloadSubsystems) children += l.joules(id);
    EXPECT_EQ(l.payload_children_j(), children);
    EXPECT_EQ(l.payloads_j(), children);
    EXPECT_EQ(l.payload_discrepancy_j(), 0.0);
}

TEST(Baoyun, MeteredReadingAndChildrenKeptApart) {
    const auto p = PowerProfile::baoyun();
    EXPECT_NEAR(p.payload_children_w(), 27.88, 1e-9);
    EXPECT_DOUBLE_EQ(p.payloads_bus_w, 26.93);
    const auto l = constant_power_ledger(p, 1000.0);
    EXPECT_NEAR(l.payloads_j(), 26930.0, 1e-6);
    EXPECT_NEAR(l.payload_children_j(), 27880.0, 1e-6);
    EXPECT_NEAR(l.payload_discrepancy_j(), -950.0, 1e-6);
    EXPECT_NEAR(l.total_j(), 51070.0, 1e-6);
}

TEST(Baoyun, NamedRatios) {
    const auto f = fractions(constant_power_ledger(PowerProfile::baoyun(), 86400.0));
    EXPECT_NEAR(f.payloads_over_total, 26.93 / 51.07, 1e-12);
    EXPECT_NEAR(f.compute_over_payloads, 8.78 / 26.93, 1e-12);
    EXPECT_NEAR(f.compute_over_total, 8.78 / 51.07, 1e-12);
    EXPECT_NEAR(f.payloads_over_total, 0.53, 0.007);
    EXPECT_NEAR(f.compute_over_payloads, 0.33, 0.007);
    EXPECT_NEAR(f.compute_over_total, 0.17, 0.007);
}

TEST(Fractions, TopLevelSumToOne) {
    for (double T : {1.0, 60.0, 86400.0}) {
        const auto f = fractions(constant_power_ledger(PowerProfile::baoyun(), T));
        double s = f.payloads_over_total;
        for (auto id : kBusSubsystems) s += f.of_total[index(id)];
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Fractions, ScaleInvariant) {
    const auto p = PowerProfile::baoyun();
    const auto a = fractions(duty_cycled_ledger(p, 1000.0, 300.0, 120.0));
    for (double k : {0.5, 3.0, 86.4}) {
        const auto b = fractions(duty_cycled_ledger(p, 1000.0 * k, 300.0 * k, 120.0 * k));
        for (std::size_t i = 0; i < kSubsystemCount; ++i) EXPECT_NEAR(a.of_total[i], b.of_total[i], 1e-12);
        EXPECT_NEAR(a.compute_over_total, b.compute_over_total, 1e-12);
    }
}

TEST(DutyCycle, IdleAndActiveSplit) {
    auto p = PowerProfile::baoyun();
    const auto l = duty_cycled_ledger(p, 1000.0, 100.0, 50.0);
    EXPECT_NEAR(l.joules(SubsystemId::Compute), 100.0 * 8.78 + 900.0 * 2.0, 1e-9);
    EXPECT_NEAR(l.joules(SubsystemId::Comm), 1000.0 * 5.43, 1e-9);
    // The metered reading moves by exactly the compute change.
    EXPECT_NEAR(l.payloads_j(), (26.93 - 8.78) * 1000.0 + l.joules(SubsystemId::Compute), 1e-9);
    // Fully busy reduces to constant power.
    const auto full = duty_cycled_ledger(p, 1000.0, 1000.0, 1000.0);
    const auto cst = constant_power_ledger(p, 1000.0);
    EXPECT_NEAR(full.total_j(), cst.total_j(), 1e-9);
}

TEST(Profile, ViolationsNameFields) {
    PowerProfile p = PowerProfile::baoyun();
    p.watts[index(SubsystemId::Mems)] = -1.0;
    const auto v = p.violations();
    ASSERT_FALSE(v.empty());
    EXPECT_NE(v[0].find("mems"), std::string::npos);
}
