#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace crashsurr;
using ad::Tensor;

namespace {

NormStats fitted_stats(const std::shared_ptr<const MeshGraph>& g, std::mt19937_64& rng) {
  std::vector<Trajectory> set = {testing_support::random_trajectory(g, 4, rng)};
  return fit_norm_stats(set);
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExactForEveryFamily) {
  std::mt19937_64 rng(1);
  const auto g = testing_support::random_graph(4, 3, rng);
  const auto stats = fitted_stats(g, rng);
  for (auto f : nn::kAllFamilies) {
    nn::Surrogate model(testing_support::tiny_config(f));
    // Perturb so the test does not pass merely because init is deterministic.
    for (const auto& p : model.parameters().items()) {
      Tensor t = p.tensor;
      for (auto& v : t.mutable_values()) v += 0.01;
    }
    const nlohmann::json meta = {{"best_epoch", 4}};
    const auto bytes = nn::encode_checkpoint(model, stats, meta);
    const auto ck = nn::decode_checkpoint(bytes);
    EXPECT_EQ(ck.model.config().hash(), model.config().hash());
    EXPECT_EQ(ck.metadata["best_epoch"], 4);
    EXPECT_EQ(ck.stats.accel_mean, stats.accel_mean);
    EXPECT_EQ(ck.stats.accel_std, stats.accel_std);
    EXPECT_EQ(ck.stats.feature_std, stats.feature_std);
    EXPECT_EQ(ck.stats.length_scale, stats.length_scale);
    const auto& a = model.parameters().items();
    const auto& b = ck.model.parameters().items();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      EXPECT_EQ(a[k].name, b[k].name);
      const auto va = a[k].tensor.values(), vb = b[k].tensor.values();
      EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin(), vb.end())) << a[k].name;
    }
    EXPECT_EQ(nn::encode_checkpoint(ck.model, ck.stats, ck.metadata), bytes);
  }
}

TEST(Checkpoint, RestoredModelPredictsIdentically) {
  std::mt19937_64 rng(2);
  const auto g = testing_support::random_graph(4, 3, rng);
  const auto tr = testing_support::random_trajectory(g, 3, rng);
  const auto stats = fitted_stats(g, rng);
  nn::Surrogate model(testing_support::tiny_config(nn::Family::kMeshTransolverContact));
  const auto ck = nn::decode_checkpoint(nn::encode_checkpoint(model, stats));
  const auto a = rollout::rollout(model, tr, stats).predicted;
  const auto b = rollout::rollout(ck.model, tr, ck.stats).predicted;
  for (std::size_t t = 0; t < a.states.size(); ++t) EXPECT_EQ(a.states[t].positions, b.states[t].positions);
}

TEST(Checkpoint, ConfigHashMismatchIsAFormatError) {
  std::mt19937_64 rng(3);
  const auto g = testing_support::random_graph(3, 3, rng);
  const auto stats = fitted_stats(g, rng);
  nn::Surrogate model(testing_support::tiny_config(nn::Family::kMgn));
  auto bytes = nn::encode_checkpoint(model, stats);
  // The config JSON starts after magic (8), version (4) and its length (4).
  const std::uint32_t len = bytes[12] | (bytes[13] << 8) | (bytes[14] << 16) | (static_cast<std::uint32_t>(bytes[15]) << 24);
  const std::string text(bytes.begin() + 16, bytes.begin() + 16 + len);
  const auto pos = text.find_first_of("0123456789");
  ASSERT_NE(pos, std::string::npos);
  auto& byte = bytes[16 + pos];
  byte = byte == '9' ? '8' : static_cast<std::uint8_t>(byte + 1);
  try {
    nn::decode_checkpoint(bytes);
    FAIL() << "expected a format error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    EXPECT_NE(std::string(e.what()).find("hash"), std::string::npos);
  }
}

TEST(Checkpoint, RejectsUnfittedStatsAndTruncation) {
  nn::Surrogate model(testing_support::tiny_config(nn::Family::kMgn));
  EXPECT_THROW(nn::encode_checkpoint(model, NormStats{}), Error);
  std::mt19937_64 rng(4);
  const auto g = testing_support::random_graph(3, 3, rng);
  auto bytes = nn::encode_checkpoint(model, fitted_stats(g, rng));
  bytes.pop_back();
  EXPECT_THROW(nn::decode_checkpoint(bytes), Error);
}
