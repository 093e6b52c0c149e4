#include <stdexcept>

#include "doctest.h"
#include "oracles.hpp"
#include "vbmi/codebook.hpp"
#include "vbmi/config.hpp"

using namespace vbmi;
using namespace vbmi::code;

TEST_SUITE("codebook") {

TEST_CASE("base code is 28 bits at 25 Hz, 1.12 s, 280 samples") {
  const auto seq = base_code();
  CHECK(seq.length() == 28);
  CHECK(seq.bit_rate_hz() == doctest::Approx(25.0));
  CHECK(seq.trial_duration_s() == doctest::Approx(1.12));
  CHECK(seq.trial_samples(250.0) == 280);
  CHECK(seq.to_string() == "1011111111111001110000000000");
}

TEST_CASE("dropping either end symbol yields cyclic rotations with identical autocorrelation") {
  const auto trail = base_code(DropSide::trailing);
  const auto lead = base_code(DropSide::leading);
  CHECK(trail.to_string() == "1011111111111001110000000000");
  CHECK(lead.to_string() == "0111111111110011100000000001");
  for (size_t lag = 0; lag < trail.length(); ++lag) {
    CHECK(periodic_autocorrelation(trail, lag) == periodic_autocorrelation(lead, lag));
  }
}

TEST_CASE("autocorrelation matches the frozen table and the brute-force oracle") {
  const auto seq = base_code();
  // frozen from an independent computation of the +/-1 periodic autocorrelation
  const int expected[28] = {28, 16,  12,  8,   8,   8,   4,   0,   -4, -8, -12, -12, -12, -12,
                            -16, -12, -12, -12, -12, -8, -4, 0, 4, 8, 8, 8, 12, 16};
  for (size_t lag = 0; lag < 28; ++lag) {
    CAPTURE(lag);
    CHECK(periodic_autocorrelation(seq, lag) == expected[lag]);
    CHECK(periodic_autocorrelation(seq, lag) == oracles::autocorr_reference(seq.bits(), lag));
  }
}

TEST_CASE("peak autocorrelation is the code length; lag 7 vanishes") {
  const auto seq = base_code();
  CHECK(periodic_autocorrelation(seq, 0) == 28);
  CHECK(periodic_autocorrelation(seq, 7) == 0);
}

TEST_CASE("off-peak range is [-16, 16]") {
  const auto off = off_peak_autocorrelation(base_code());
  CHECK(off.max_value == 16);
  CHECK(off.min_value == -16);
  CHECK(off.spread() == 32);
}

TEST_CASE("autocorrelation lag out of range throws") {
  const auto seq = base_code();
  CHECK_THROWS_AS((void)periodic_autocorrelation(seq, 28), std::out_of_range);
}

TEST_CASE("construction rejects degenerate codes") {
  CHECK_THROWS_AS(CodeSequence({1}, 25.0), std::invalid_argument);
  CHECK_THROWS_AS(CodeSequence({}, 25.0), std::invalid_argument);
  CHECK_THROWS_AS(CodeSequence({0, 1, 2}, 25.0), std::invalid_argument);
  CHECK_THROWS_AS(CodeSequence({0, 1, 1}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(CodeSequence({0, 1, 1}, -25.0), std::invalid_argument);
}

TEST_CASE("seven-target schedule spaces lags by floor(28/7) = 4 bits") {
  const auto sched = target_codes(base_code(), 7);
  REQUIRE(sched.n_targets == 7);
  REQUIRE(sched.target_lags.size() == 7);
  for (size_t k = 0; k < 7; ++k) CHECK(sched.target_lags[k] == 4 * k);
  CHECK(sched.trial_duration_s == doctest::Approx(1.12));
  REQUIRE(sched.bit_onsets_s.size() == 28);
  CHECK(sched.bit_onsets_s[0] == doctest::Approx(0.0));
  CHECK(sched.bit_onsets_s[1] == doctest::Approx(0.04));
  CHECK(sched.bit_onsets_s[27] == doctest::Approx(1.08));
}

TEST_CASE("four-target schedule spaces lags by 7 bits") {
  const auto sched = target_codes(base_code(), 4);
  REQUIRE(sched.target_lags.size() == 4);
  for (size_t k = 0; k < 4; ++k) CHECK(sched.target_lags[k] == 7 * k);
}

TEST_CASE("schedule rejects more targets than bits") {
  CHECK_THROWS_AS(target_codes(base_code(), 29), std::invalid_argument);
  CHECK_THROWS_AS(target_codes(base_code(), 0), std::invalid_argument);
}

TEST_CASE("waveform holds each bit for fs/bit_rate samples") {
  const auto seq = base_code();
  const auto w = code_waveform(seq, 0, 250.0, 1.12);
  REQUIRE(w.size() == 280);
  // each bit spans 10 samples at 250 Hz / 25 bps
  for (size_t m = 0; m < w.size(); ++m) {
    const size_t bit = (m * 25) / 250;  // floor(m * bit_rate / fs)
    const double expect = seq.bits()[bit % 28] ? 1.0 : -1.0;
    CHECK(w[m] == expect);
  }
}

TEST_CASE("waveform lag rotates the code circularly") {
  const auto seq = base_code();
  const auto base = code_waveform(seq, 0, 250.0, 1.12);
  const auto lag4 = code_waveform(seq, 4, 250.0, 1.12);
  // lag of 4 bits = 40 samples at 10 samples per bit
  for (size_t m = 0; m < base.size(); ++m) {
    CHECK(lag4[m] == base[(m + 40) % base.size()]);
  }
}

TEST_CASE("waveform over several trials repeats periodically") {
  const auto seq = base_code();
  const auto w = code_waveform(seq, 3, 250.0, 3 * 1.12);
  REQUIRE(w.size() == 840);
  for (size_t m = 0; m < 280; ++m) {
    CHECK(w[m] == w[m + 280]);
    CHECK(w[m] == w[m + 560]);
  }
}

TEST_CASE("waveform rejects fractional trial durations") {
  CHECK_THROWS_AS(code_waveform(base_code(), 0, 250.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(code_waveform(base_code(), 0, 250.0, 0.0), std::invalid_argument);
}

TEST_CASE("config override replaces the code") {
  const auto cfg = Config::parse_string(
      "code = \"1010\"\n"
      "bit_rate_hz = 20\n");
  const auto seq = code_from_config(cfg);
  CHECK(seq.to_string() == "1010");
  CHECK(seq.bit_rate_hz() == doctest::Approx(20.0));
  CHECK(seq.trial_duration_s() == doctest::Approx(0.2));
}

TEST_CASE("config without a code falls back to the built-in sequence") {
  const auto seq = code_from_config(Config::parse_string("drop = leading\n"));
  CHECK(seq.to_string() == "0111111111110011100000000001");
  const auto dflt = code_from_config(Config::parse_string(""));
  CHECK(dflt.to_string() == "1011111111111001110000000000");
}

TEST_CASE("config with junk code characters throws") {
  CHECK_THROWS_AS(code_from_config(Config::parse_string("code = \"10x1\"\n")),
                  std::invalid_argument);
}

TEST_CASE("hash changes with bits and with rate") {
  const auto a = CodeSequence({1, 0, 1, 1}, 25.0);
  const auto b = CodeSequence({1, 0, 1, 0}, 25.0);
  const auto c = CodeSequence({1, 0, 1, 1}, 30.0);
  CHECK(a.hash() != b.hash());
  CHECK(a.hash() != c.hash());
  CHECK(a.hash() == CodeSequence({1, 0, 1, 1}, 25.0).hash());
}

}  // TEST_SUITE
