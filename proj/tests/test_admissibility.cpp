#include <dwlab/admissibility.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace dwlab;

TEST(Derive, OneDimensionalQuadratic) {
  const auto a = derive_params(1, 2.0);
  EXPECT_DOUBLE_EQ(a.alpha, 2.0);
  EXPECT_DOUBLE_EQ(a.beta_alpha, 0.0);
  EXPECT_DOUBLE_EQ(a.delta_alpha, 0.0);
  EXPECT_DOUBLE_EQ(a.s, 1.25);
  EXPECT_FALSE(a.eps0.has_value());
  const auto rep = validate(a);
  EXPECT_TRUE(rep.ok());
  const auto* c = rep.find("-p - (n/2)(p-1) < -1");
  ASSERT_NE(c, nullptr);
  EXPECT_DOUBLE_EQ(c->slack, -1.5);
}

TEST(Derive, TwoDimensionalThreeHalves) {
  const auto a = derive_params(2, 1.5);
  EXPECT_DOUBLE_EQ(a.alpha, 1.5);
  EXPECT_NEAR(a.beta_alpha, 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(a.delta_alpha, 1.0 / 3.0, 1e-15);
  EXPECT_TRUE(validate(a).ok());
}

TEST(Derive, RejectsOutOfRange) {
  try {
    derive_params(2, 0.9);
    FAIL() << "expected rejection";
  } catch (const AdmissibilityError& e) {
    EXPECT_NE(std::string(e.what()).find("p <= max{1, n/2}"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("p > max{1, n/2}"), std::string::npos);
  }
  EXPECT_THROW(derive_params(3, 1.2), AdmissibilityError);
  EXPECT_THROW(derive_params(1, 1.0), AdmissibilityError);
  EXPECT_THROW(derive_params(0, 2.0), AdmissibilityError);
}

TEST(Derive, OverridesBreakingInvariantsRejected) {
  ParamOverrides o;
  o.s = 0.5;  // s = n/2
  EXPECT_THROW(derive_params(1, 2.0, o), AdmissibilityError);
  ParamOverrides k;
  k.kappa = 3.0;
  EXPECT_THROW(derive_params(1, 2.0, k), AdmissibilityError);
}

TEST(Validate, SEqualsHalfNFails) {
  const auto a = assemble_params(1, 2.0, 0.5, 0.01, 0.25);
  const auto rep = validate(a);
  EXPECT_FALSE(rep.ok());
  const auto f = rep.failures();
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0], "s in (n/2, p)");
}

TEST(Validate, TamperedKappaRecordFails) {
  const auto a = assemble_params(1, 1.1, 0.75, 0.5, 0.25, 1.1);
  const auto rep = validate(a);
  EXPECT_FALSE(rep.ok());
  EXPECT_FALSE(rep.find("1/r1 = kappa/(p-1) with r1 > 1")->pass);
  EXPECT_FALSE(rep.find("omega1 in [0, 1]")->pass);
  EXPECT_FALSE(rep.find("d = n/2 - 2kappa/(p-1) in (0, n/2)")->pass);
}

TEST(Validate, ReportFormatting) {
  const auto rep = validate(derive_params(1, 2.0));
  const auto text = format_report(rep);
  EXPECT_NE(text.find("overall: PASS"), std::string::npos);
  EXPECT_NE(format_params(derive_params(1, 2.0)).find("alpha"), std::string::npos);
}

class Lattice : public ::testing::TestWithParam<int> {};

TEST_P(Lattice, EveryExponentAdmissible) {
  const int n = GetParam();
  for (int i = 1; i <= 60; ++i) {
    const double p = 1.0 + 0.05 * i;
    AdmissibleParams a;
    ASSERT_NO_THROW(a = derive_params(n, p)) << "p=" << p;
    EXPECT_TRUE(validate(a).ok()) << "p=" << p;
  }
}

TEST_P(Lattice, OmegaZeroAtAlphaHasClosedNumerator) {
  const int n = GetParam();
  for (double p : {1.05, 1.5, 2.0, 3.7}) {
    const auto a = derive_params(n, p);
    const double numer = (1.0 / a.alpha) * (1.0 - 1.0 / p);
    EXPECT_NEAR(a.omega0_sigma_alpha, numer / a.gn_denominator(), 1e-15);
    EXPECT_GE(a.omega0_sigma_alpha, 0.0);
    EXPECT_LE(a.omega0_sigma_alpha, 1.0);
  }
}

TEST_P(Lattice, ShrinkingKappaKeepsRecordsValid) {
  const int n = GetParam();
  for (double p : {1.05, 1.3, 2.0, 3.0, 4.0}) {
    const auto base = derive_params(n, p);
    for (double f : {0.5, 0.1, 0.01, 1e-4}) {
      const auto a = assemble_params(n, p, base.s, base.kappa * f, 1.0 / base.gamma);
      EXPECT_TRUE(validate(a).ok()) << "p=" << p << " kappa=" << a.kappa;
    }
  }
}

TEST_P(Lattice, KappaAboveBoundFails) {
  const int n = GetParam();
  for (double p : {1.2, 2.0, 3.5}) {
    const auto base = derive_params(n, p);
    const double bound = kappa_feasibility_bound(n, p, base.alpha, base.s);
    const auto a = assemble_params(n, p, base.s, 1.01 * bound, 1.0 / base.gamma);
    EXPECT_FALSE(validate(a).ok()) << "p=" << p;
  }
}

INSTANTIATE_TEST_SUITE_P(Dimensions, Lattice, ::testing::Values(1, 2));
