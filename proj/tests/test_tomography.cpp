#include "oracles.hpp"

#include "squeeze_amp/errors.hpp"
#include "squeeze_amp/parallel.hpp"
#include "squeeze_amp/tomography.hpp"

#include <gtest/gtest.h>
#include "json.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace squeeze_amp;
using namespace squeeze_amp::tomography;

namespace {

constexpr double kPi = std::numbers::pi;

PopulationVector pops(std::vector<double> p) {
  PopulationVector v;
  v.probs = std::move(p);
  return v;
}

SidebandCal no_decay() {
  SidebandCal c;
  c.gamma = 0.0;
  return c;
}

BsbTrace noiseless(const std::vector<double>& p, const SidebandCal& cal) {
  return bsb_signal(pops(p), cal, default_time_grid(cal));
}

FitOptions no_bootstrap() {
  FitOptions o;
  o.bootstrap_resamples = 0;
  return o;
}

}  // namespace

TEST(BsbSignal, VacuumWithoutDecayIsFullContrast) {
  const SidebandCal cal = no_decay();
  const auto t = default_time_grid(cal);
  const BsbTrace tr = bsb_signal(pops({1.0}), cal, t);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(tr.p_down[i], 0.5 * (1 + std::cos(cal.omega_sb * t[i])), 1e-14);
}

TEST(BsbSignal, CoherentAtFirstVacuumNull) {
  const SidebandCal cal = no_decay();
  const auto p = oracle::poisson(0.55 * 0.55, 40);
  const double t = kPi / cal.omega_sb;
  double expected = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) expected += p[n] * std::cos(kPi * std::sqrt(n + 1.0));
  expected = 0.5 * (1 + expected);
  const std::vector<double> ts{t};
  EXPECT_NEAR(bsb_signal(pops(p), cal, ts).p_down[0], expected, 1e-14);
}

TEST(BsbSignal, UnityAtZeroTimeAndMatchesLiteralSum) {
  SidebandCal cal;
  cal.decay_exponent = 0.7;
  const auto p = oracle::thermal(0.4, 30);
  const auto t = default_time_grid(cal, 37, 3.0);
  const BsbTrace tr = bsb_signal(pops(p), cal, t);
  EXPECT_NEAR(tr.p_down[0], 1.0, 1e-12);
  for (std::size_t i = 0; i < t.size(); ++i)
    EXPECT_NEAR(tr.p_down[i], oracle::bsb(p, cal.omega_sb, cal.gamma, 0.7, t[i]), 1e-13);
}

TEST(BsbSignal, CalibrationValidation) {
  SidebandCal cal;
  cal.decay_exponent = 0.6;
  EXPECT_THROW(cal.validate(), std::invalid_argument);
  cal = SidebandCal{};
  cal.omega_sb = 0.0;
  EXPECT_THROW(cal.validate(), std::invalid_argument);
  cal = SidebandCal{};
  cal.gamma = -1.0;
  EXPECT_THROW(cal.validate(), std::invalid_argument);
}

TEST(Sampling, ExtremesDeterminismAndConcentration) {
  BsbTrace tr;
  tr.times = {0.0, 1e-6, 2e-6, 3e-6};
  tr.p_down = {1.0, 0.0, 0.3, 0.75};
  tr.shots = {0, 0, 0, 0};
  const BsbTrace a = sample_trace(tr, 300, 42);
  const BsbTrace b = sample_trace(tr, 300, 42);
  EXPECT_EQ(a.p_down, b.p_down);
  EXPECT_EQ(a.p_down[0], 1.0);
  EXPECT_EQ(a.p_down[1], 0.0);
  EXPECT_EQ(a.shots[2], 300);
  ASSERT_TRUE(a.seed.has_value());
  EXPECT_NE(sample_trace(tr, 300, 43).p_down, a.p_down);
  const BsbTrace big = sample_trace(tr, 1000000, 7);
  for (std::size_t i = 0; i < tr.size(); ++i) EXPECT_LE(std::abs(big.p_down[i] - tr.p_down[i]), 5e-3);
  EXPECT_THROW(sample_trace(tr, 0, 1), std::invalid_argument);
}

TEST(Sampling, DeriveSeedIsSplitmix64) {
  // First output of the reference splitmix64 generator seeded with 0.
  EXPECT_EQ(derive_seed(0, 0), 0xE220A8397B1DCDAFULL);
  EXPECT_NE(derive_seed(1, 0), derive_seed(1, 1));
  static_assert(derive_seed(5, 3) == derive_seed(5, 3));
}

TEST(SimplexLeastSquares, RecoversInteriorAndBoundarySolutions) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(3, 3);
  Eigen::VectorXd b(3);
  b << 0.2, 0.3, 0.5;
  EXPECT_LT((simplex_least_squares(a, b) - b).norm(), 1e-12);
  // Projection of (1, 1, -1) onto the simplex is (1/2, 1/2, 0).
  b << 1.0, 1.0, -1.0;
  const Eigen::VectorXd x = simplex_least_squares(a, b);
  EXPECT_NEAR(x(0), 0.5, 1e-12);
  EXPECT_NEAR(x(1), 0.5, 1e-12);
  EXPECT_NEAR(x(2), 0.0, 1e-12);
}

TEST(ModelFree, VacuumRecoversGroundState) {
  const FitResult f = fit_model_free(noiseless({1.0}, SidebandCal{}), SidebandCal{}, 12, no_bootstrap());
  ASSERT_TRUE(f.populations.has_value());
  EXPECT_NEAR(f.populations->probs[0], 1.0, 1e-6);
  EXPECT_EQ(f.model, Model::model_free);
}

TEST(ModelFree, CoherentMatchesPoissonLaw) {
  const auto p = oracle::poisson(0.3025, 40);
  const FitResult f = fit_model_free(noiseless(p, SidebandCal{}), SidebandCal{}, 10, no_bootstrap());
  for (std::size_t n = 0; n <= 10; ++n) EXPECT_NEAR(f.populations->probs[n], p[n], 1e-4) << n;
  EXPECT_EQ(f.params.size(), 11u);
  EXPECT_TRUE(f.params.count("P0"));
}

TEST(ModelFree, NoisySqueezedShowsEvenParity) {
  const SidebandCal cal;
  const auto p = oracle::squeezed(1.38, 400);
  const BsbTrace noisy = sample_trace(noiseless(p, cal), 300, 11);
  FitOptions o;
  o.bootstrap_resamples = 50;
  o.jobs = 4;
  const FitResult f = fit_model_free(noisy, cal, 12, o);
  double odd = 0.0;
  for (std::size_t n = 1; n <= 9; n += 2) odd += f.populations->probs[n];
  EXPECT_LE(odd, 0.05);
  for (const auto& [name, ci] : f.ci68) EXPECT_LE(ci.lo, ci.hi) << name;
}

TEST(ModelFree, LinearityOfMixtures) {
  const SidebandCal cal;
  const auto p = oracle::poisson(0.5, 13);
  const auto q = oracle::thermal(0.3, 13);
  std::vector<double> p_n(13);
  std::vector<double> q_n(13);
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t n = 0; n < 13; ++n) {
    sp += p[n];
    sq += q[n];
  }
  std::vector<double> mix(13);
  for (std::size_t n = 0; n < 13; ++n) {
    p_n[n] = p[n] / sp;
    q_n[n] = q[n] / sq;
    mix[n] = 0.5 * (p_n[n] + q_n[n]);
  }
  const FitResult f = fit_model_free(noiseless(mix, cal), cal, 12, no_bootstrap());
  for (std::size_t n = 0; n < 13; ++n) EXPECT_NEAR(f.populations->probs[n], mix[n], 1e-6) << n;
}

TEST(ModelFree, ExponentChoiceIrrelevantWithoutDecay) {
  SidebandCal a = no_decay();
  SidebandCal b = no_decay();
  b.decay_exponent = 0.7;
  const auto p = oracle::squeezed(0.7, 60);
  const FitResult fa = fit_model_free(noiseless(p, a), a, 12, no_bootstrap());
  const FitResult fb = fit_model_free(noiseless(p, b), b, 12, no_bootstrap());
  EXPECT_EQ(fa.populations->probs, fb.populations->probs);
}

TEST(ModelFree, ExponentRoundTripWithDecay) {
  SidebandCal cal;
  cal.gamma = 3000.0;
  cal.decay_exponent = 0.7;
  const auto p = oracle::thermal(0.2, 40);
  const FitResult f = fit_model_free(noiseless(p, cal), cal, 12, no_bootstrap());
  for (std::size_t n = 0; n <= 6; ++n) EXPECT_NEAR(f.populations->probs[n], p[n], 1e-4) << n;
}

TEST(ModelFree, RejectsTooFewOrAliasedPoints) {
  const SidebandCal cal;
  const BsbTrace few = bsb_signal(pops({1.0}), cal, default_time_grid(cal, 8));
  EXPECT_THROW(fit_model_free(few, cal, 12, no_bootstrap()), std::invalid_argument);
  // Sampling at whole vacuum periods without decay makes the n = 0, 3, 8 columns identical.
  const SidebandCal flat = no_decay();
  std::vector<double> t;
  for (int i = 0; i < 20; ++i) t.push_back(2 * kPi / flat.omega_sb * i);
  EXPECT_THROW(fit_model_free(bsb_signal(pops({1.0}), flat, t), flat, 12, no_bootstrap()), FitError);
}

TEST(ModelFit, NoiselessRoundTrips) {
  const SidebandCal cal;
  const FitResult c = fit_model(noiseless(oracle::poisson(0.3025, 40), cal), Model::coherent, cal, no_bootstrap());
  EXPECT_NEAR(c.params.at("alpha"), 0.55, 1e-3);
  const FitResult s = fit_model(noiseless(oracle::squeezed(1.38, 600), cal), Model::squeezed_vacuum, cal, no_bootstrap());
  EXPECT_NEAR(s.params.at("r"), 1.38, 5e-3);
  const FitResult t = fit_model(noiseless(oracle::thermal(0.06, 40), cal), Model::thermal, cal, no_bootstrap());
  EXPECT_NEAR(t.params.at("nbar"), 0.06, 1e-3);
  const FitResult v = fit_model(noiseless({1.0}, cal), Model::coherent, cal, no_bootstrap());
  EXPECT_NEAR(v.params.at("alpha"), 0.0, 1e-3);
  EXPECT_TRUE(v.at_boundary);
  EXPECT_FALSE(c.at_boundary);
  EXPECT_LT(c.residual_rms, 1e-8);
}

TEST(ModelFit, ModelFreeAgreesWithModelLaw) {
  const SidebandCal cal;
  const auto p = oracle::squeezed(0.5, 200);
  const FitResult f = fit_model_free(noiseless(p, cal), cal, 12, no_bootstrap());
  for (std::size_t n = 0; n <= 12; ++n) EXPECT_NEAR(f.populations->probs[n], p[n], 1e-3) << n;
}

TEST(ModelFit, NoisyCoherentWithinQuotedScale) {
  const SidebandCal cal;
  const BsbTrace noisy = sample_trace(noiseless(oracle::poisson(0.3025, 40), cal), 300, derive_seed(1, 0));
  FitOptions o;
  o.bootstrap_resamples = 40;
  o.jobs = 4;
  const FitResult f = fit_model(noisy, Model::coherent, cal, o);
  EXPECT_NEAR(f.params.at("alpha"), 0.55, 0.02);
  const Interval ci = f.ci68.at("alpha");
  EXPECT_LT(ci.lo, ci.hi);
  EXPECT_LT(ci.hi - ci.lo, 0.1);
}

TEST(ModelFit, RejectsNonScalarModels) {
  const SidebandCal cal;
  EXPECT_THROW(fit_model(noiseless({1.0}, cal), Model::model_free, cal, no_bootstrap()), std::invalid_argument);
  EXPECT_THROW(fit_model(noiseless({1.0}, cal), Model::rabi_sinusoid, cal, no_bootstrap()), std::invalid_argument);
}

TEST(RabiFit, NoiselessFlopFrequency) {
  const double omega = 2 * kPi * 1e3;
  std::vector<double> t;
  std::vector<double> y;
  for (int i = 0; i < 60; ++i) {
    t.push_back(i * 2e-5);
    y.push_back(std::pow(std::cos(omega * t.back()), 2));
  }
  const FitResult f = fit_rabi(t, y);
  EXPECT_NEAR(f.params.at("Omega") / omega, 1.0, 1e-3);
  EXPECT_NEAR(f.params.at("amplitude"), 0.5, 1e-6);
  EXPECT_NEAR(f.params.at("offset"), 0.5, 1e-6);
  EXPECT_EQ(f.model, Model::rabi_sinusoid);
}

TEST(RabiFit, DampedAndNoisyFlop) {
  const double omega = 2 * kPi * 1e3;
  BsbTrace tr;
  for (int i = 0; i < 60; ++i) {
    const double t = i * 2e-5;
    tr.times.push_back(t);
    tr.p_down.push_back(0.5 + 0.5 * std::exp(-t / 2e-3) * std::cos(2 * omega * t));
    tr.shots.push_back(0);
  }
  const FitResult clean = fit_rabi(tr);
  EXPECT_NEAR(clean.params.at("tau"), 2e-3, 1e-8);
  const FitResult noisy = fit_rabi(sample_trace(tr, 300, 99));
  EXPECT_NEAR(noisy.params.at("Omega") / omega, 1.0, 0.02);
  EXPECT_TRUE(noisy.ci68.count("Omega"));
}

TEST(RabiFit, RejectsShortOrFlatTraces) {
  std::vector<double> t(8, 0.0);
  std::vector<double> y(8, 0.5);
  for (int i = 0; i < 8; ++i) t[i] = i * 1e-5;
  EXPECT_THROW(fit_rabi(t, y), std::invalid_argument);
  std::vector<double> t2(40);
  std::vector<double> y2(40, 0.5);
  for (int i = 0; i < 40; ++i) t2[i] = i * 1e-5;
  EXPECT_THROW(fit_rabi(t2, y2), FitError);
}

TEST(TraceIo, CsvRoundTripIsExact) {
  const SidebandCal cal;
  const BsbTrace tr = sample_trace(noiseless(oracle::poisson(0.3025, 40), cal), 300, 5);
  std::stringstream ss;
  write_trace_csv(ss, tr);
  EXPECT_EQ(ss.str().substr(0, 19), "time_s,p_down,shots");
  const BsbTrace back = read_trace_csv(ss);
  EXPECT_EQ(back.times, tr.times);
  EXPECT_EQ(back.p_down, tr.p_down);
  EXPECT_EQ(back.shots, tr.shots);
  std::stringstream bad("time_s,p_down,shots\n0,0.5,10\n1e-6,abc,10\n");
  try {
    read_trace_csv(bad);
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(FitResultJson, SerialisesFields) {
  const SidebandCal cal;
  FitOptions o;
  o.bootstrap_resamples = 10;
  const FitResult f = fit_model(noiseless(oracle::thermal(0.06, 40), cal), Model::thermal, cal, o);
  const auto j = nlohmann::json::parse(f.to_json());
  EXPECT_EQ(j.at("model"), "thermal");
  EXPECT_NEAR(j.at("params").at("nbar").get<double>(), 0.06, 1e-3);
  EXPECT_TRUE(j.at("ci68").contains("nbar"));
  EXPECT_EQ(j.at("populations").size(), 16u);
}
