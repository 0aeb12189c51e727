#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace crashsurr;
using ad::Tensor;

namespace {

struct Scene {
  std::shared_ptr<const MeshGraph> graph;
  Trajectory traj;
  NormStats stats;
};

Scene make_scene(std::uint64_t seed, std::size_t w = 4, std::size_t h = 4) {
  std::mt19937_64 rng(seed);
  Scene s;
  s.graph = testing_support::random_graph(w, h, rng);
  s.traj = testing_support::random_trajectory(s.graph, 4, rng);
  std::vector<Trajectory> set = {s.traj};
  s.stats = fit_norm_stats(set);
  return s;
}

Tensor forward_at(const nn::Surrogate& m, const MeshGraph& g, const NodeState& st, const NormStats& stats,
                  nn::ForwardTrace* trace = nullptr) {
  const auto x = Tensor::from(st.node_count, st.dim, st.positions);
  const auto v = Tensor::from(st.node_count, st.dim, st.velocities);
  contact::ContactSet cs;
  if (m.has_contact()) cs = contact::build_contacts(st.positions, g, m.contact_params(g));
  return m.forward(g, x, v, stats, m.has_contact() ? &cs : nullptr, trace);
}

std::vector<double> values_of(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

class EveryFamily : public ::testing::TestWithParam<nn::Family> {};

INSTANTIATE_TEST_SUITE_P(Models, EveryFamily, ::testing::ValuesIn(nn::kAllFamilies),
                         [](const auto& info) {
                           std::string n(nn::family_name(info.param));
                           std::erase_if(n, [](char c) { return !std::isalnum(static_cast<unsigned char>(c)); });
                           return n;
                         });

TEST_P(EveryFamily, ForwardShapeAndFiniteness) {
  const auto s = make_scene(1);
  nn::Surrogate m(testing_support::tiny_config(GetParam()));
  const auto a = forward_at(m, *s.graph, s.traj.states[2], s.stats);
  EXPECT_EQ(a.rows(), s.graph->node_count());
  EXPECT_EQ(a.cols(), 2u);
  for (double v : a.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST_P(EveryFamily, ParameterGradientsMatchFiniteDifferences) {
  const auto s = make_scene(2, 4, 3);
  auto cfg = testing_support::tiny_config(GetParam());
  cfg.contact_alpha_init = 0.5;  // make the contact path visible to the check
  nn::Surrogate m(cfg);
  const auto& st = s.traj.states[3];
  // Contacts are a discrete structure; freeze them at the evaluation state.
  contact::ContactSet cs;
  if (m.has_contact()) {
    auto p = m.contact_params(*s.graph);
    p.radius = 25.0;
    cs = contact::build_contacts(st.positions, *s.graph, p);
    ASSERT_GT(cs.size(), 0u);
  }
  const auto x = Tensor::from(st.node_count, 2, st.positions);
  const auto v = Tensor::from(st.node_count, 2, st.velocities);
  std::mt19937_64 rng(9);
  const auto target = testing_support::random_tensor(st.node_count, 2, rng, false);
  auto loss = [&] {
    const auto a = m.forward(*s.graph, x, v, s.stats, m.has_contact() ? &cs : nullptr);
    return ad::mean(ad::mul(ad::sub(a, target), ad::sub(a, target)));
  };
  const double err = testing_support::gradient_error(loss, m.parameters().tensors(), 1e-6, 1e-8);
  EXPECT_LT(err, 1e-4);
}

TEST_P(EveryFamily, PermutationEquivarianceIsBitExact) {
  const auto s = make_scene(3);
  nn::Surrogate m(testing_support::tiny_config(GetParam()));
  const auto& st = s.traj.states[2];
  const auto base = forward_at(m, *s.graph, st, s.stats);

  std::mt19937_64 rng(11);
  const std::size_t n = s.graph->node_count();
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto pg = permute_graph(*s.graph, perm);
  std::vector<double> px(2 * n), pv(2 * n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t d = 0; d < 2; ++d) {
      px[2 * perm[k] + d] = st.positions[2 * k + d];
      pv[2 * perm[k] + d] = st.velocities[2 * k + d];
    }
  const NodeState pst(n, 2, px, pv, st.time_index);
  const auto moved = forward_at(m, pg, pst, s.stats);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t d = 0; d < 2; ++d) EXPECT_EQ(moved(perm[k], d), base(k, d)) << "node " << k;
}

TEST_P(EveryFamily, ConstructionIsDeterministicInSeed) {
  nn::Surrogate a(testing_support::tiny_config(GetParam(), 5)), b(testing_support::tiny_config(GetParam(), 5)),
      c(testing_support::tiny_config(GetParam(), 6));
  const auto& pa = a.parameters().items();
  const auto& pb = b.parameters().items();
  const auto& pc = c.parameters().items();
  ASSERT_EQ(pa.size(), pb.size());
  bool any_diff = false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    EXPECT_EQ(values_of(pa[k].tensor), values_of(pb[k].tensor));
    any_diff = any_diff || values_of(pa[k].tensor) != values_of(pc[k].tensor);
  }
  EXPECT_TRUE(any_diff);
}

TEST(Models, HybridWithoutAttentionIsTheMeshBaseline) {
  const auto s = make_scene(4);
  auto mgn_cfg = testing_support::tiny_config(nn::Family::kMgn);
  auto hyb_cfg = testing_support::tiny_config(nn::Family::kMeshTransolver);
  ASSERT_EQ(mgn_cfg.layers_pre, 2u);
  hyb_cfg.layers_pre = 1;
  hyb_cfg.layers_attn = 0;
  hyb_cfg.layers_post = 1;
  hyb_cfg.features = mgn_cfg.features;
  hyb_cfg.contact_enabled = false;
  nn::Surrogate mgn(mgn_cfg), hyb(hyb_cfg);
  ASSERT_EQ(mgn.parameters().items().size(), hyb.parameters().items().size());
  for (std::size_t t : {0u, 2u, 4u})
    EXPECT_EQ(values_of(forward_at(mgn, *s.graph, s.traj.states[t], s.stats)),
              values_of(forward_at(hyb, *s.graph, s.traj.states[t], s.stats)));
}

TEST(Models, ContactWithZeroGateMatchesContactFreeTwin) {
  const auto s = make_scene(5);
  auto with = testing_support::tiny_config(nn::Family::kMeshTransolverContact);
  with.contact_alpha_init = 0.0;
  with.contact_radius = 25.0;
  auto without = with;
  without.family = nn::Family::kMeshTransolver;
  without.contact_enabled = false;
  nn::Surrogate a(with), b(without);
  const auto& st = s.traj.states[3];
  ASSERT_GT(contact::build_contacts(st.positions, *s.graph, a.contact_params(*s.graph)).size(), 0u);
  EXPECT_EQ(values_of(forward_at(a, *s.graph, st, s.stats)), values_of(forward_at(b, *s.graph, st, s.stats)));

  // And with a non-zero gate the contact path changes the output.
  Tensor* alpha = a.contact_alpha();
  ASSERT_NE(alpha, nullptr);
  alpha->mutable_values()[0] = 0.5;
  EXPECT_NE(values_of(forward_at(a, *s.graph, st, s.stats)), values_of(forward_at(b, *s.graph, st, s.stats)));
}

TEST(Models, SliceWeightRowsAreDistributions) {
  const auto s = make_scene(6);
  for (auto f : nn::kAllFamilies) {
    if (f == nn::Family::kMgn) continue;
    auto cfg = testing_support::tiny_config(f);
    nn::Surrogate m(cfg);
    nn::ForwardTrace trace;
    forward_at(m, *s.graph, s.traj.states[1], s.stats, &trace);
    ASSERT_EQ(trace.slice_weights.size(), cfg.layers_attn);
    const std::size_t n = s.graph->node_count();
    for (const auto& w : trace.slice_weights) {
      ASSERT_EQ(w.size() % n, 0u);
      const std::size_t cols = w.size() / n;
      for (std::size_t r = 0; r < n; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          EXPECT_GE(w[r * cols + c], 0.0);
          sum += w[r * cols + c];
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
      }
    }
  }
}

TEST(Models, ContactModelRequiresAContactSet) {
  const auto s = make_scene(7);
  nn::Surrogate m(testing_support::tiny_config(nn::Family::kMeshTransolverContact));
  const auto& st = s.traj.states[0];
  const auto x = Tensor::from(st.node_count, 2, st.positions), v = Tensor::from(st.node_count, 2, st.velocities);
  EXPECT_THROW(m.forward(*s.graph, x, v, s.stats, nullptr), Error);
  nn::Surrogate plain(testing_support::tiny_config(nn::Family::kMgn));
  contact::ContactSet cs;
  EXPECT_THROW(plain.forward(*s.graph, x, v, s.stats, &cs), Error);
}

TEST(Models, ConfigJsonRoundTrip) {
  for (auto f : nn::kAllFamilies) {
    auto c = nn::ModelConfig::desk(f);
    c.mesh_activation = nn::Activation::kGelu;
    const auto back = nn::ModelConfig::from_json(c.to_json());
    EXPECT_EQ(back.hash(), c.hash());
    EXPECT_EQ(nn::parse_family(nn::family_name(f)), f);
  }
  EXPECT_THROW(nn::parse_family("Nope"), Error);
}
