#include <doctest.h>

#include "../support/harness.hpp"

using namespace trm;

namespace {

NetConfig small_cfg() {
  NetConfig c;
  c.hidden = 8;
  c.n_heads = 2;
  c.ffn_multiple = 8;
  c.seq_len = 5;
  c.vocab_size = 4;
  return c;
}

RecursionSchedule sched(Variant v, int n, int T) {
  RecursionSchedule s;
  s.variant = v;
  s.n = n;
  s.T = T;
  return s;
}

CallCounters run_step(Variant v, int n, int T) {
  const auto cfg = small_cfg();
  Model<double> m(cfg, v, 1);
  const auto s = sched(v, n, T);
  const auto b = testing::random_batch(cfg, 2, 1);
  CallCounters c;
  supervision_step(m, m.embed_input(b.tokens, b.ids), initial_state(m, s, 2), s, c);
  return c;
}

}  // namespace

TEST_CASE("latent recursion makes n + 1 calls") {
  const auto cfg = small_cfg();
  Model<double> m(cfg, Variant::trm, 1);
  const auto b = testing::random_batch(cfg, 1, 2);
  const auto x = m.embed_input(b.tokens, b.ids);
  const auto st = initial_state(m, sched(Variant::trm, 1, 1), 1);
  for (int n : {1, 6}) {
    CallCounters c;
    latent_recursion(m, x, Var<double>::constant(st.y), Var<double>::constant(st.z), n, c);
    CHECK(c.net_calls_total == n + 1);
  }
}

TEST_CASE("call accounting per variant") {
  auto c = run_step(Variant::trm, 6, 3);
  CHECK(c.net_calls_total == 21);
  CHECK(c.net_calls_tracked == 7);
  CHECK(c.forward_passes == 1);

  c = run_step(Variant::trm, 6, 1);
  CHECK(c.net_calls_total == c.net_calls_tracked);

  c = run_step(Variant::hrm, 2, 2);
  CHECK(c.net_calls_total == 6);
  CHECK(c.net_calls_tracked == 2);

  c = run_step(Variant::single_z, 6, 3);
  CHECK(c.net_calls_total == 21);
  CHECK(c.net_calls_tracked == 7);
  c = run_step(Variant::single_z, 0, 1);
  CHECK(c.net_calls_total == 1);

  c = run_step(Variant::multi_z, 3, 2);
  CHECK(c.net_calls_total == 8);
  CHECK(c.net_calls_tracked == 4);

  CHECK(tracked_calls_per_step(sched(Variant::hrm, 2, 2)) == 2);
  CHECK(tracked_calls_per_step(sched(Variant::trm, 6, 3)) == 7);
}

TEST_CASE("hrm matches an independent two-frequency loop") {
  const auto cfg = small_cfg();
  Model<double> m(cfg, Variant::hrm, 4);
  testing::randomize(m, 4);
  const auto b = testing::random_batch(cfg, 2, 3);
  const auto s = sched(Variant::hrm, 2, 2);
  const auto st = initial_state(m, s, 2);
  const auto x = m.embed_input(b.tokens, b.ids);
  CallCounters c;
  const auto out = hrm_forward(m, x, st, 2, 2, c);

  // Plain nT-step loop: low net every step, high net every n-th step.
  auto zl = Var<double>::constant(st.z), zh = Var<double>::constant(st.y);
  int high_calls = 0;
  for (int i = 0; i < 4; ++i) {
    zl = m.net({zl, zh, x}, NetRole::low);
    if ((i + 1) % 2 == 0) {
      zh = m.net({zh, zl}, NetRole::high);
      ++high_calls;
    }
  }
  CHECK(high_calls == 2);
  CHECK(out.carry.y == zh.value());
  CHECK(out.carry.z == zl.value());
  CHECK(out.logits.value() == m.output_head(zh).value());
}

TEST_CASE("deep recursion gradients equal the frozen-prefix reference") {
  const auto cfg = small_cfg();
  Model<double> m(cfg, Variant::trm, 5);
  testing::randomize(m, 5);
  const auto b = testing::random_batch(cfg, 2, 5);
  const auto s = sched(Variant::trm, 2, 3);
  const auto st = initial_state(m, s, 2);

  m.params().zero_grad();
  backward(testing::trm_step_loss(m, b, st, s));
  const auto got = testing::param_grads(m);

  const auto prefix = testing::trm_prefix(m, b, st, s);
  m.params().zero_grad();
  backward(testing::trm_step_loss(m, b, st, s, &prefix));
  const auto want = testing::param_grads(m);
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == want[i]);
}

TEST_CASE("carried state receives no gradient") {
  const auto cfg = small_cfg();
  Model<double> m(cfg, Variant::trm, 6);
  testing::randomize(m, 6);
  const auto b = testing::random_batch(cfg, 2, 6);
  const auto s = sched(Variant::trm, 2, 2);

  // The carry comes out of a tracked computation rooted at leaf tensors.
  auto y0 = Var<double>::leaf(m.broadcast_state(m.y_init(), 2));
  auto z0 = Var<double>::leaf(m.broadcast_state(m.z_init(), 2));
  const auto y1 = scale(y0, 1.5), z1 = scale(z0, 0.5);
  LatentState<double> carried{y1.value(), z1.value(), {}};
  auto loss = testing::trm_step_loss(m, b, carried, s);
  backward(loss);
  CHECK_FALSE(y0.has_grad());
  CHECK_FALSE(z0.has_grad());

  // A second supervision step from the first one's carry has the same
  // parameter gradients as a fresh graph started from copies of that carry.
  CallCounters c;
  const auto x = m.embed_input(b.tokens, b.ids);
  auto first = supervision_step(m, x, initial_state(m, s, 2), s, c);
  m.params().zero_grad();
  backward(testing::trm_step_loss(m, b, first.carry, s));
  const auto chained = testing::param_grads(m);
  LatentState<double> copy{Tensor<double>(first.carry.y), Tensor<double>(first.carry.z), {}};
  m.params().zero_grad();
  backward(testing::trm_step_loss(m, b, copy, s));
  const auto fresh = testing::param_grads(m);
  for (std::size_t i = 0; i < chained.size(); ++i) CHECK(chained[i] == fresh[i]);
}

TEST_CASE("variant equivalences") {
  const auto cfg = small_cfg();
  const auto b = testing::random_batch(cfg, 2, 7);

  SUBCASE("multi_z with one slot is latent recursion with n = 1") {
    Model<double> a(cfg, Variant::trm, 9), mz(cfg, Variant::multi_z, 9);
    CHECK(a.params().values_hash() == mz.params().values_hash());
    const auto s1 = sched(Variant::trm, 1, 2), s2 = sched(Variant::multi_z, 1, 2);
    CallCounters c;
    auto o1 = supervision_step(a, a.embed_input(b.tokens, b.ids), initial_state(a, s1, 2), s1, c);
    auto o2 = supervision_step(mz, mz.embed_input(b.tokens, b.ids), initial_state(mz, s2, 2), s2, c);
    CHECK(o1.logits.value() == o2.logits.value());
    CHECK(o1.carry.z == o2.carry.z_slots[0]);
  }
  SUBCASE("multi_z carries n + 1 features") {
    Model<double> mz(cfg, Variant::multi_z, 1);
    const auto s = sched(Variant::multi_z, 6, 1);
    CallCounters c;
    auto out = supervision_step(mz, mz.embed_input(b.tokens, b.ids), initial_state(mz, s, 2), s, c);
    CHECK(out.carry.z_slots.size() == 6);
    CHECK_FALSE(out.carry.y.empty());
    LatentState<double> wrong = initial_state(mz, s, 2);
    wrong.z_slots.pop_back();
    CHECK_THROWS(supervision_step(mz, mz.embed_input(b.tokens, b.ids), wrong, s, c));
  }
  SUBCASE("single_z carries one feature") {
    Model<double> sz(cfg, Variant::single_z, 1);
    const auto s = sched(Variant::single_z, 2, 2);
    CallCounters c;
    auto out = supervision_step(sz, sz.embed_input(b.tokens, b.ids), initial_state(sz, s, 2), s, c);
    CHECK(out.carry.y.empty());
    CHECK(out.carry.z_slots.empty());
    CHECK_FALSE(out.carry.z.empty());
  }
  SUBCASE("deep recursion is deterministic") {
    Model<double> a(cfg, Variant::trm, 3);
    const auto s = sched(Variant::trm, 3, 3);
    CallCounters c;
    const auto st = initial_state(a, s, 2);
    auto o1 = supervision_step(a, a.embed_input(b.tokens, b.ids), st, s, c);
    auto o2 = supervision_step(a, a.embed_input(b.tokens, b.ids), st, s, c);
    CHECK(o1.logits.value() == o2.logits.value());
    CHECK(o1.carry.y == o2.carry.y);
  }
}

TEST_CASE("effective depth") {
  CHECK(effective_depth(3, 6, 2) == 42);
  CHECK(effective_depth(2, 2, 4) == 24);
  CHECK(effective_depth(6, 12, 2) == 156);
  CHECK(16 * effective_depth(2, 2, 4) == 384);
  // T = 1 rows use the formula: 6 for (n=2, 2 layers), 8 for (n=1, 4 layers).
  CHECK(effective_depth(1, 2, 2) == 6);
  CHECK(effective_depth(1, 1, 4) == 8);
  CHECK_THROWS(effective_depth(0, 1, 1));
}

TEST_CASE("memory estimate grows with tracked calls") {
  NetConfig cfg;
  const auto small = estimate_tape_bytes(cfg, sched(Variant::trm, 2, 3), 8, 4);
  const auto big = estimate_tape_bytes(cfg, sched(Variant::trm, 12, 3), 8, 4);
  CHECK(big > small);
  CHECK_FALSE(check_memory(cfg, sched(Variant::trm, 12, 3), 768, 4, 1).fits);

  // Full-size mixer runs on 81-cell grids at batch 768 in f32 against 40 GiB:
  // n = 12 does not fit, the smaller rows do.
  cfg.arch = Arch::mixer;
  const std::int64_t budget = 40LL << 30;
  for (auto [n, T, fits] : {std::tuple{4, 2, true}, {6, 3, true}, {8, 4, true}, {6, 6, true}, {12, 3, false},
                            {12, 6, false}}) {
    CHECK(check_memory(cfg, sched(Variant::trm, n, T), 768, 4, budget).fits == fits);
  }
}
