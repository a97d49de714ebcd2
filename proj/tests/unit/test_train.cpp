#include <doctest.h>

#include <cmath>

#include "../support/harness.hpp"
#include "trm/optim.hpp"
#include "trm/run.hpp"
#include "trm/train.hpp"

using namespace trm;
using doctest::Approx;

namespace {

double scalar_ce(std::vector<double> logits, std::int32_t target) {
  const auto V = static_cast<std::int64_t>(logits.size());
  auto lv = Var<double>::constant(Tensor<double>({1, 1, V}, std::move(logits)));
  const std::vector<std::int32_t> t{target};
  const std::vector<std::uint8_t> m{1};
  return stablemax_cross_entropy(lv, t, m).value()[0];
}

const data::TokenDataset& sudoku_data() {
  static const data::TokenDataset ds = [] {
    GenDataOptions o;
    o.count = 12;
    o.seed = 3;
    return generate_dataset(o).train;
  }();
  return ds;
}

NetConfig sudoku_net() {
  NetConfig c;
  c.hidden = 16;
  c.n_heads = 2;
  c.ffn_multiple = 8;
  c.arch = Arch::mixer;
  c.seq_len = 16;
  c.vocab_size = 6;
  return c;
}

TrainConfig quick_train(int batch) {
  TrainConfig t;
  t.batch_size = batch;
  t.lr = 1e-3;
  t.warmup_steps = 0;
  t.ema_decay = 0.9;
  return t;
}

}  // namespace

TEST_CASE("stablemax cross-entropy") {
  CHECK(scalar_ce({0, 0}, 0) == Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(scalar_ce({1, -1}, 0) == Approx(-std::log(0.8)).epsilon(1e-12));
  CHECK(scalar_ce({1, -1}, 0) == Approx(0.22314).epsilon(1e-4));

  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> l(7);
    for (auto& v : l) v = nd(rng);
    const auto p = stablemax(l);
    double sum = 0;
    for (double v : p) {
      CHECK(v > 0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-9);
    CHECK(scalar_ce(l, trial % 7) >= 0);
  }

  // Masked positions do not affect the loss.
  Tensor<double> a({1, 2, 3}, std::vector<double>{0.1, 0.2, 0.3, 5, -5, 1});
  Tensor<double> b = a;
  b[3] = -40;
  b[5] = 12;
  const std::vector<std::int32_t> t{2, 0};
  const std::vector<std::uint8_t> m{1, 0}, none{0, 0};
  CHECK(stablemax_cross_entropy(Var<double>::constant(a), t, m).value()[0] ==
        stablemax_cross_entropy(Var<double>::constant(b), t, m).value()[0]);
  CHECK_THROWS(stablemax_cross_entropy(Var<double>::constant(a), t, none));
}

TEST_CASE("halting losses and decisions") {
  const std::vector<std::int32_t> pred{1, 2, 3}, truth{1, 2, 3}, wrong{1, 2, 4};
  const std::vector<std::uint8_t> mask(3, 1);
  auto q0 = Var<double>::constant(Tensor<double>({1, 1}, std::vector<double>{0.0}));
  CHECK(trm_halt_loss(q0, std::span<const std::int32_t>(pred), truth, mask).value()[0] ==
        Approx(std::log(2.0)).epsilon(1e-12));
  auto qbig = Var<double>::constant(Tensor<double>({1, 1}, std::vector<double>{40.0}));
  CHECK(trm_halt_loss(qbig, std::span<const std::int32_t>(pred), truth, mask).value()[0] < 1e-12);
  // One wrong cell makes the target 0, so a large halt logit is penalized.
  CHECK(trm_halt_loss(qbig, std::span<const std::int32_t>(pred), wrong, mask).value()[0] > 30);

  CHECK(continue_targets({0.0, 5.0}, {true})[0] == 0.5);
  CHECK(continue_targets({0.0, 5.0}, {false})[0] == Approx(1 / (1 + std::exp(-5.0))));

  const std::vector<double> pos{0.1}, neg{-0.1}, hq{0.2, 0.3};
  CHECK(halting_decision(pos, Variant::trm)[0]);
  CHECK_FALSE(halting_decision(neg, Variant::trm)[0]);
  CHECK_FALSE(halting_decision(hq, Variant::hrm)[0]);
}

TEST_CASE("adamw single step and schedule") {
  ParamStore<double> store;
  store.add("w", Tensor<double>({1}, std::vector<double>{1.0}), ParamGroup::decay);
  store.add("norm", Tensor<double>({1}, std::vector<double>{1.0}), ParamGroup::no_decay);
  store.add("embed.puzzle", Tensor<double>({1}, std::vector<double>{1.0}), ParamGroup::puzzle_embedding);
  AdamWConfig cfg;
  cfg.lr = 0.1;
  cfg.embedding_lr = 0.2;
  cfg.weight_decay = 0.5;
  cfg.warmup_steps = 0;
  AdamW<double> opt(store, cfg);
  for (auto& e : store.entries()) e.var.node()->grad_buffer()[0] = 1.0;
  REQUIRE(opt.step(store, 1));
  // m = 0.1, v = 0.05; bias corrections 0.1 and 0.05 give m_hat = v_hat = 1.
  const double unit = 1.0 / (1.0 + 1e-8);
  CHECK(store.at("w").value()[0] == Approx(1.0 * (1 - 0.1 * 0.5) - 0.1 * unit).epsilon(1e-15));
  CHECK(store.at("norm").value()[0] == Approx(1.0 - 0.1 * unit).epsilon(1e-15));
  CHECK(store.at("embed.puzzle").value()[0] == Approx(1.0 - 0.2 * unit).epsilon(1e-15));
  CHECK(opt.first_moments()[0][0] == Approx(0.1));
  CHECK(opt.second_moments()[0][0] == Approx(0.05));

  store.at("w").node()->grad_buffer()[0] = NAN;
  const double before = store.at("w").value()[0];
  CHECK_FALSE(opt.step(store, 2));
  CHECK(store.at("w").value()[0] == before);
  CHECK(opt.updates() == 1);

  AdamWConfig warm;
  warm.lr = 1e-4;
  warm.warmup_steps = 2000;
  AdamW<double> w2(store, warm);
  CHECK(w2.lr_at(1000, ParamGroup::decay) == Approx(5e-5));
  CHECK(w2.lr_at(5000, ParamGroup::decay) == Approx(1e-4));
  CHECK(w2.weight_decay_for(ParamGroup::no_decay) == 0.0);
  CHECK(w2.weight_decay_for(ParamGroup::puzzle_embedding) == 0.0);
  CHECK(w2.weight_decay_for(ParamGroup::decay) == warm.weight_decay);
}

TEST_CASE("ema") {
  Tensor<double> shadow({1}, std::vector<double>{0.0});
  const Tensor<double> one({1}, std::vector<double>{1.0});
  ema_update(shadow, one, 0.999);
  CHECK(shadow[0] == Approx(0.001).epsilon(1e-12));
  ema_update(shadow, one, 0.0);
  CHECK(shadow[0] == 1.0);

  const double p = 0.7, s0 = -2.0, decay = 0.97;
  Tensor<double> s({1}, std::vector<double>{s0});
  const Tensor<double> pt({1}, std::vector<double>{p});
  for (int k = 1; k <= 500; ++k) {
    ema_update(s, pt, decay);
    CHECK(std::abs(s[0] - (p + (s0 - p) * std::pow(decay, k))) <= 1e-12);
  }
}

TEST_CASE("trainer pool bookkeeping") {
  const auto& ds = sudoku_data();
  SUBCASE("halting disabled spends every supervision step") {
    Model<float> m(sudoku_net(), Variant::trm, 1);
    RecursionSchedule s;
    s.n = 1;
    s.T = 1;
    s.n_sup = 4;
    auto t = quick_train(4);
    t.halting = false;
    Trainer<float> tr(m, s, t, ds);
    StepMetrics last;
    for (int i = 0; i < 12; ++i) last = tr.step();
    CHECK(last.samples_retired == 12);
    CHECK(last.mean_sup_steps == 4.0);
    CHECK(last.net_calls.forward_passes == 1);
    CHECK(last.net_calls.net_calls_tracked == 2);
  }
  SUBCASE("one supervision step refreshes every slot") {
    Model<float> m(sudoku_net(), Variant::trm, 1);
    RecursionSchedule s;
    s.n = 1;
    s.T = 1;
    s.n_sup = 1;
    Trainer<float> tr(m, s, quick_train(3), ds);
    for (int i = 1; i <= 5; ++i) CHECK(tr.step().samples_retired == 3 * i);
  }
  SUBCASE("hrm runs two forward passes per step") {
    Model<float> m(sudoku_net(), Variant::hrm, 1);
    RecursionSchedule s;
    s.variant = Variant::hrm;
    s.n = 2;
    s.T = 2;
    Trainer<float> tr(m, s, quick_train(2), ds);
    const auto st = tr.step();
    CHECK(st.net_calls.forward_passes == 2);
    CHECK(st.net_calls.net_calls_tracked == 2);
    CHECK(st.loss_halt > 0);
  }
  SUBCASE("non-finite loss aborts") {
    Model<float> m(sudoku_net(), Variant::trm, 1);
    m.params().at("head.output").mutable_value()[0] = NAN;
    RecursionSchedule s;
    s.n = 1;
    s.T = 1;
    Trainer<float> tr(m, s, quick_train(2), ds);
    CHECK_THROWS_AS(tr.step(), NonFiniteLoss);
  }
  SUBCASE("config mismatches are rejected before training") {
    NetConfig wrong = sudoku_net();
    wrong.vocab_size = 11;
    Model<float> m(wrong, Variant::trm, 1);
    RecursionSchedule s;
    CHECK_THROWS(Trainer<float>(m, s, quick_train(2), ds));
  }
}

TEST_CASE("eval model carries the ema shadow") {
  const auto& ds = sudoku_data();
  Model<float> m(sudoku_net(), Variant::trm, 1);
  RecursionSchedule s;
  s.n = 1;
  s.T = 1;
  Trainer<float> tr(m, s, quick_train(4), ds);
  for (int i = 0; i < 3; ++i) tr.step();
  const auto em = tr.eval_model();
  CHECK(em.params().values_hash() == tr.ema().shadow_hash(m.params()));
  CHECK(em.params().values_hash() != m.params().values_hash());
}
